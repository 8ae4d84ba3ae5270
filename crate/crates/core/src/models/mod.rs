//! The black-box model contract and built-in reference classifiers.
//!
//! Explainers only ever see a [`Model`]: a batch scorer returning one
//! probability vector per input series, optionally with an analytic
//! gradient of a class probability.

mod knn;
mod linear;
pub mod stdio;

pub use knn::{knn_fit, KnnModel};
pub use linear::{linear_fit, LinearFitParams, LinearSoftmaxModel};
pub use stdio::{stdio_model, StdioModel, DEFAULT_TIMEOUT};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{ClassId, ProbVector, Series};

/// What a model can do beyond plain scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub has_gradient: bool,
    /// Concurrent `predict_batch` calls are allowed.
    pub parallel_safe: bool,
}

pub trait Model: Send + Sync {
    fn n_classes(&self) -> usize;

    /// One valid probability vector per input, in order.
    fn predict_batch(&self, batch: &[Series]) -> Result<Vec<ProbVector>>;

    fn capabilities(&self) -> Capabilities;

    /// `d p_class / d x` as a row-major `D x T` buffer.
    fn grad(&self, _x: &Series, _class: ClassId) -> Result<Vec<f64>> {
        Err(Error::GradientUnavailable)
    }
}

/// Below this batch size splitting across threads is not worth it.
const PAR_CHUNK: usize = 64;

/// Scores a batch, splitting it across threads when the model allows
/// concurrent calls. Output order and values do not depend on the split.
pub fn score_batch(model: &dyn Model, batch: &[Series]) -> Result<Vec<ProbVector>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let out = if model.capabilities().parallel_safe && batch.len() > PAR_CHUNK {
        let parts = batch
            .par_chunks(PAR_CHUNK)
            .map(|chunk| model.predict_batch(chunk))
            .collect::<Result<Vec<_>>>()?;
        parts.into_iter().flatten().collect::<Vec<_>>()
    } else {
        model.predict_batch(batch)?
    };
    if out.len() != batch.len() {
        return Err(Error::InvalidProbabilities(format!(
            "model returned {} vectors for {} inputs",
            out.len(),
            batch.len()
        )));
    }
    if let Some(p) = out.iter().find(|p| p.n_classes() != model.n_classes()) {
        return Err(Error::InvalidProbabilities(format!(
            "expected {} classes, got {}",
            model.n_classes(),
            p.n_classes()
        )));
    }
    Ok(out)
}

pub fn predict(model: &dyn Model, x: &Series) -> Result<ProbVector> {
    let mut v = score_batch(model, std::slice::from_ref(x))?;
    Ok(v.remove(0))
}

/// Arg-max class of the model's probabilities (ties to the lower index).
pub fn predicted_class(model: &dyn Model, x: &Series) -> Result<ClassId> {
    Ok(predict(model, x)?.argmax())
}

/// Predicted classes for a batch.
pub fn predicted_classes(model: &dyn Model, batch: &[Series]) -> Result<Vec<ClassId>> {
    Ok(score_batch(model, batch)?
        .iter()
        .map(ProbVector::argmax)
        .collect())
}

/// Adapts a closure returning class probabilities into a [`Model`].
pub struct FnModel<F> {
    n_classes: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&Series) -> Vec<f64> + Send + Sync,
{
    pub fn new(n_classes: usize, f: F) -> Self {
        FnModel { n_classes, f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&Series) -> Vec<f64> + Send + Sync,
{
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, batch: &[Series]) -> Result<Vec<ProbVector>> {
        batch.iter().map(|s| ProbVector::new((self.f)(s))).collect()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_gradient: false,
            parallel_safe: true,
        }
    }
}
