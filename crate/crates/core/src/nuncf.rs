//! Native-guide counterfactuals.
//!
//! The native guide is the nearest unlike neighbor (NUN): the dataset
//! instance closest to the query, in Euclidean distance, among those the
//! model classifies differently from the query. Three variants turn it into
//! a counterfactual:
//!
//! - `Plain` returns the NUN itself.
//! - `Barycenter` walks the straight line from query to NUN on the grid
//!   `lambda = 1/max_steps, 2/max_steps, ..., 1` and stops at the first
//!   interpolant whose prediction differs from the query's. This stopping
//!   rule is this crate's definition of the barycentering step.
//! - `SaliencyGuided` copies the NUN's values into the query inside a window
//!   centered on the most salient timestep, widening it one step per side
//!   until the prediction flips.

use std::ops::Range;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::explanation::{Attribution, CounterfactualResult, RangeKind};
use crate::models::{predicted_class, predicted_classes, Model};
use crate::series::{ClassId, Series};
use crate::tsr::{self, BaseMethod, TsrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NunVariant {
    Plain,
    Barycenter,
    SaliencyGuided,
}

impl NunVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            NunVariant::Plain => "plain",
            NunVariant::Barycenter => "barycenter",
            NunVariant::SaliencyGuided => "saliency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NunCfParams {
    pub variant: NunVariant,
    /// Resolution of the barycenter grid.
    pub max_steps: usize,
    /// Base method of the saliency map used by `SaliencyGuided`.
    pub saliency_method: BaseMethod,
}

impl Default for NunCfParams {
    fn default() -> Self {
        NunCfParams {
            variant: NunVariant::Plain,
            max_steps: 100,
            saliency_method: BaseMethod::Occlusion,
        }
    }
}

impl NunCfParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::BadParams("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// The nearest unlike neighbor of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeGuide {
    pub index: usize,
    pub series: Series,
    /// Model prediction for the guide.
    pub label: ClassId,
}

/// Finds the closest instance whose predicted class differs from the
/// query's. Ties go to the lower dataset index.
pub fn find_nun(query: &Series, ds: &LabeledDataset, model: &dyn Model) -> Result<NativeGuide> {
    if query.shape() != ds.shape() {
        return Err(Error::ShapeMismatch(0));
    }
    let query_class = predicted_class(model, query)?;
    let pool: Vec<Series> = ds.iter().map(|(s, _)| s.clone()).collect();
    let preds = predicted_classes(model, &pool)?;
    let mut best: Option<(f64, usize)> = None;
    for (i, (s, pred)) in pool.iter().zip(&preds).enumerate() {
        if *pred == query_class {
            continue;
        }
        let d = s.sq_dist(query);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    let (_, index) = best.ok_or(Error::NoUnlikeNeighbor)?;
    Ok(NativeGuide {
        index,
        series: pool[index].clone(),
        label: preds[index],
    })
}

/// The NUN itself is the counterfactual.
pub fn explain_plain(
    query: &Series,
    ds: &LabeledDataset,
    model: &dyn Model,
    params: &NunCfParams,
) -> Result<CounterfactualResult> {
    params.validate()?;
    let nun = find_nun(query, ds, model)?;
    Ok(CounterfactualResult::from_diff(
        query, nun.series, nun.label,
    ))
}

/// Smallest grid interpolant toward the NUN that changes the prediction.
pub fn explain_barycenter(
    query: &Series,
    ds: &LabeledDataset,
    model: &dyn Model,
    params: &NunCfParams,
) -> Result<CounterfactualResult> {
    params.validate()?;
    let nun = find_nun(query, ds, model)?;
    let query_class = predicted_class(model, query)?;
    let steps = params.max_steps;
    let candidates: Vec<Series> = (1..=steps)
        .map(|i| {
            if i == steps {
                nun.series.clone()
            } else {
                query.lerp(&nun.series, i as f64 / steps as f64)
            }
        })
        .collect();
    let preds = predicted_classes(model, &candidates)?;
    let (cf, label) = candidates
        .into_iter()
        .zip(preds)
        .find(|(_, p)| *p != query_class)
        // the last grid point is the NUN, which flips by construction
        .unwrap_or((nun.series, nun.label));
    Ok(CounterfactualResult::from_diff(query, cf, label))
}

/// Windows `[c - k, c + k]` clamped to `[0, T)`, for `k = 0, 1, ...` until
/// the whole series is covered.
pub fn growing_windows(center: usize, len: usize) -> Vec<Range<usize>> {
    let max_k = center.max(len - 1 - center);
    (0..=max_k)
        .map(|k| center.saturating_sub(k)..(center + k + 1).min(len))
        .collect()
}

/// Copies the NUN into the query over a growing window around the most
/// salient timestep.
pub fn explain_saliency_guided(
    query: &Series,
    ds: &LabeledDataset,
    model: &dyn Model,
    params: &NunCfParams,
    saliency: &Attribution,
) -> Result<CounterfactualResult> {
    params.validate()?;
    if saliency.shape() != query.shape() || saliency.range_kind() != RangeKind::Unit {
        return Err(Error::BadSaliencyShape);
    }
    let nun = find_nun(query, ds, model)?;
    let query_class = predicted_class(model, query)?;

    let (channels, len) = query.shape();
    let per_step: Vec<f64> = (0..len)
        .map(|t| (0..channels).map(|d| saliency.get(d, t)).sum())
        .collect();
    let mut center = 0;
    for (t, s) in per_step.iter().enumerate() {
        if *s > per_step[center] {
            center = t;
        }
    }

    let windows = growing_windows(center, len);
    let candidates: Vec<Series> = windows
        .iter()
        .map(|w| {
            let mut x = query.clone();
            for d in 0..channels {
                x.row_mut(d)[w.clone()].copy_from_slice(&nun.series.row(d)[w.clone()]);
            }
            x
        })
        .collect();
    let preds = predicted_classes(model, &candidates)?;
    let hit = preds.iter().position(|p| *p != query_class);
    let (cf, label, window) = match hit {
        Some(i) => (candidates[i].clone(), preds[i], windows[i].clone()),
        None => (nun.series, nun.label, 0..len),
    };
    Ok(CounterfactualResult::from_diff(query, cf, label).with_window(window))
}

/// Runs the configured variant. `SaliencyGuided` derives its map from
/// temporal saliency rescaling of the query's predicted class.
pub fn explain(
    query: &Series,
    ds: &LabeledDataset,
    model: &dyn Model,
    params: &NunCfParams,
) -> Result<CounterfactualResult> {
    match params.variant {
        NunVariant::Plain => explain_plain(query, ds, model, params),
        NunVariant::Barycenter => explain_barycenter(query, ds, model, params),
        NunVariant::SaliencyGuided => {
            let class = predicted_class(model, query)?;
            let tsr_params = TsrParams {
                base_method: params.saliency_method,
                ..TsrParams::default()
            };
            let saliency = tsr::explain(query, class, model, &tsr_params)?;
            explain_saliency_guided(query, ds, model, params, &saliency)
        }
    }
}
