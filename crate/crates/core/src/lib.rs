//! Model-agnostic explanations for black-box time series classifiers.
//!
//! Four explainers share one set of input and output types:
//!
//! - [`nuncf`]: native-guide counterfactuals built from the nearest
//!   differently-classified training instance.
//! - [`comte`]: multivariate counterfactuals that swap as few whole channels
//!   as possible from a reference instance of the target class.
//! - [`leftist`]: a local linear surrogate over fixed-length segments,
//!   giving signed importances in `[-1, 1]`.
//! - [`tsr`]: two-stage temporal saliency rescaling, giving importances in
//!   `[0, 1]`.
//!
//! Models are black boxes behind [`models::Model`]; [`viz`] renders any
//! explanation to SVG.

pub mod comte;
pub mod dataset;
pub mod error;
pub mod explanation;
pub mod leftist;
pub mod models;
pub mod nuncf;
pub mod series;
pub mod synthetic;
pub mod tsr;
pub mod viz;

pub use dataset::{load_dataset, save_dataset, DatasetFormat, LabeledDataset};
pub use error::{Error, Result};
pub use explanation::{Attribution, CounterfactualResult, ExplainRequest, RangeKind, SegmentScore};
pub use models::Model;
pub use series::{validate_series, znormalize, ClassId, ProbVector, Series};
