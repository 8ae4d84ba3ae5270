//! Temporal saliency rescaling.
//!
//! Stage one measures how much the whole base saliency map moves when an
//! entire timestep is masked (`time_relevance`, one value per timestep).
//! Stage two, on timesteps whose relevance clears `alpha * max`, measures
//! the same for single cells (`feature_relevance`). The product of the two
//! is normalized by its global maximum into `[0, 1]`.

use crate::error::{Error, Result};
use crate::explanation::{Attribution, RangeKind};
use crate::models::{score_batch, Model};
use crate::series::{ClassId, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMethod {
    /// `p_c(x) - p_c(x with one cell set to the baseline)`.
    Occlusion,
    /// `d p_c / d x`.
    Gradient,
    /// `d p_c / d x * x`.
    GradientTimesInput,
}

impl BaseMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseMethod::Occlusion => "occlusion",
            BaseMethod::Gradient => "gradient",
            BaseMethod::GradientTimesInput => "grad-input",
        }
    }
}

/// Value written into masked cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Zero,
    /// Mean of the original series' channel.
    ChannelMean,
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Zero => "zero",
            Baseline::ChannelMean => "channel-mean",
        }
    }

    /// Per-channel fill values for `x`.
    pub fn fill(self, x: &Series) -> Vec<f64> {
        match self {
            Baseline::Zero => vec![0.0; x.channels()],
            Baseline::ChannelMean => (0..x.channels())
                .map(|d| x.row(d).iter().sum::<f64>() / x.len() as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsrParams {
    pub base_method: BaseMethod,
    /// Timesteps with relevance below `alpha * max` get no feature pass.
    pub alpha: f64,
    pub baseline: Baseline,
    /// Recorded for reproducibility; the procedure itself is deterministic.
    pub seed: u64,
}

impl Default for TsrParams {
    fn default() -> Self {
        TsrParams {
            base_method: BaseMethod::Occlusion,
            alpha: 0.0,
            baseline: Baseline::Zero,
            seed: 0,
        }
    }
}

fn check_inputs(c: ClassId, model: &dyn Model, method: BaseMethod) -> Result<()> {
    if c >= model.n_classes() {
        return Err(Error::BadParams(format!(
            "class {c} out of range for {} classes",
            model.n_classes()
        )));
    }
    if method != BaseMethod::Occlusion && !model.capabilities().has_gradient {
        return Err(Error::GradientUnavailable);
    }
    Ok(())
}

/// Base saliency maps (row-major `D x T`) of several inputs, masking with
/// the fixed per-channel `fill`.
fn saliency_maps(
    xs: &[Series],
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    fill: &[f64],
) -> Result<Vec<Vec<f64>>> {
    match method {
        BaseMethod::Occlusion => {
            let Some(first) = xs.first() else {
                return Ok(Vec::new());
            };
            let (channels, len) = first.shape();
            let cells = channels * len;
            let mut batch = Vec::with_capacity(xs.len() * (cells + 1));
            for x in xs {
                batch.push(x.clone());
                for d in 0..channels {
                    for t in 0..len {
                        let mut y = x.clone();
                        y.set(d, t, fill[d]);
                        batch.push(y);
                    }
                }
            }
            let probs = score_batch(model, &batch)?;
            Ok(probs
                .chunks(cells + 1)
                .map(|group| {
                    let base = group[0].get(c);
                    group[1..].iter().map(|p| base - p.get(c)).collect()
                })
                .collect())
        }
        BaseMethod::Gradient => xs.iter().map(|x| model.grad(x, c)).collect(),
        BaseMethod::GradientTimesInput => xs
            .iter()
            .map(|x| {
                let g = model.grad(x, c)?;
                Ok(g.iter().zip(x.values()).map(|(g, v)| g * v).collect())
            })
            .collect(),
    }
}

fn l1_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Unnormalized base saliency of class `c` at `x`, row-major `D x T`.
pub fn base_saliency(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    baseline: Baseline,
) -> Result<Vec<f64>> {
    check_inputs(c, model, method)?;
    let fill = baseline.fill(x);
    let mut maps = saliency_maps(std::slice::from_ref(x), c, model, method, &fill)?;
    Ok(maps.remove(0))
}

fn time_relevance_with(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    fill: &[f64],
) -> Result<Vec<f64>> {
    let (channels, len) = x.shape();
    let mut xs = Vec::with_capacity(len + 1);
    xs.push(x.clone());
    for t in 0..len {
        let mut y = x.clone();
        for d in 0..channels {
            y.set(d, t, fill[d]);
        }
        xs.push(y);
    }
    let maps = saliency_maps(&xs, c, model, method, fill)?;
    Ok(maps[1..].iter().map(|m| l1_change(&maps[0], m)).collect())
}

fn feature_relevance_with(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    fill: &[f64],
    t: usize,
    reference: &[f64],
) -> Result<Vec<f64>> {
    let xs: Vec<Series> = (0..x.channels())
        .map(|d| {
            let mut y = x.clone();
            y.set(d, t, fill[d]);
            y
        })
        .collect();
    let maps = saliency_maps(&xs, c, model, method, fill)?;
    Ok(maps.iter().map(|m| l1_change(reference, m)).collect())
}

/// `Delta_t`: L1 change of the base saliency map when every channel at
/// timestep `t` is set to the baseline.
pub fn time_relevance(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    baseline: Baseline,
) -> Result<Vec<f64>> {
    check_inputs(c, model, method)?;
    time_relevance_with(x, c, model, method, &baseline.fill(x))
}

/// `Phi_{d,t}` for every channel `d`: L1 change of the base saliency map
/// when only cell `(d, t)` is set to the baseline.
pub fn feature_relevance(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    method: BaseMethod,
    baseline: Baseline,
    t: usize,
) -> Result<Vec<f64>> {
    check_inputs(c, model, method)?;
    if t >= x.len() {
        return Err(Error::BadParams(format!("timestep {t} out of range")));
    }
    let fill = baseline.fill(x);
    let reference = saliency_maps(std::slice::from_ref(x), c, model, method, &fill)?.remove(0);
    feature_relevance_with(x, c, model, method, &fill, t, &reference)
}

/// Full two-stage attribution of class `c` at `x`, in `[0, 1]`.
pub fn explain(
    x: &Series,
    c: ClassId,
    model: &dyn Model,
    params: &TsrParams,
) -> Result<Attribution> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(Error::BadParams(format!(
            "alpha {} outside [0, 1]",
            params.alpha
        )));
    }
    check_inputs(c, model, params.base_method)?;
    let (channels, len) = x.shape();
    let method = params.base_method;
    let fill = params.baseline.fill(x);

    let delta = time_relevance_with(x, c, model, method, &fill)?;
    let theta = params.alpha * delta.iter().copied().fold(0.0, f64::max);
    let reference = saliency_maps(std::slice::from_ref(x), c, model, method, &fill)?.remove(0);

    let mut raw = vec![0.0; channels * len];
    for (t, &dt) in delta.iter().enumerate() {
        // a zero time relevance zeroes the column regardless of Phi
        if dt < theta || dt == 0.0 {
            continue;
        }
        let phi = feature_relevance_with(x, c, model, method, &fill, t, &reference)?;
        for (d, p) in phi.into_iter().enumerate() {
            raw[d * len + t] = dt * p;
        }
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter_mut().for_each(|v| *v = (*v / max).min(1.0));
    }
    Attribution::new(channels, len, raw, RangeKind::Unit)
}
