//! Local surrogate attribution over fixed-length segments.
//!
//! The series is cut into `n_segments` contiguous, non-overlapping pieces.
//! Random on/off masks over the segments are turned into perturbed series
//! (switched-off segments are replaced by a transform), scored by the
//! model, and a kernel-weighted ridge regression of the class probability on
//! the masks gives one importance per segment. Univariate only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::explanation::{Attribution, RangeKind, SegmentScore};
use crate::models::{score_batch, Model};
use crate::series::{ClassId, Series};

/// Replacement for switched-off segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Constant 0.0.
    Uniform,
    /// The query's own mean over the segment.
    Mean,
    /// A background series' values over the segment.
    Background,
}

impl Transform {
    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Uniform => "uniform",
            Transform::Mean => "mean",
            Transform::Background => "background",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftistParams {
    pub n_segments: usize,
    pub n_samples: usize,
    pub transform: Transform,
    /// Width of the exponential kernel on the fraction of switched-off
    /// segments. `f64::INFINITY` weights every sample equally.
    pub kernel_width: f64,
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl Default for LeftistParams {
    fn default() -> Self {
        LeftistParams {
            n_segments: 10,
            n_samples: 1000,
            transform: Transform::Uniform,
            kernel_width: 0.25,
            ridge_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl LeftistParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments < 2 {
            return Err(Error::BadParams("n_segments must be at least 2".into()));
        }
        if self.n_samples < self.n_segments {
            return Err(Error::BadParams(
                "n_samples must be at least n_segments".into(),
            ));
        }
        if self.kernel_width.is_nan() || self.kernel_width <= 0.0 {
            return Err(Error::BadParams("kernel_width must be positive".into()));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::BadParams(
                "ridge_lambda must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Ordered `[start, end)` intervals tiling `[0, T)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSpec {
    pub intervals: Vec<(usize, usize)>,
}

impl SegmentSpec {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the segment holding timestep `t`.
    pub fn segment_of(&self, t: usize) -> Option<usize> {
        self.intervals.iter().position(|&(s, e)| s <= t && t < e)
    }
}

/// Splits `t` timesteps into `n` segments; the first `t mod n` get one
/// extra timestep.
pub fn segment(t: usize, n: usize) -> Result<SegmentSpec> {
    if n == 0 || n > t {
        return Err(Error::TooManySegments { t, n });
    }
    let base = t / n;
    let extra = t % n;
    let mut start = 0;
    let intervals = (0..n)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let iv = (start, start + len);
            start += len;
            iv
        })
        .collect();
    Ok(SegmentSpec { intervals })
}

/// The all-ones mask followed by `n_samples - 1` uniform masks, never all zeros.
pub fn sample_masks(n_samples: usize, n_segments: usize, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    let mut masks = Vec::with_capacity(n_samples);
    if n_samples == 0 {
        return masks;
    }
    masks.push(vec![true; n_segments]);
    while masks.len() < n_samples {
        let m: Vec<bool> = (0..n_segments).map(|_| rng.gen_bool(0.5)).collect();
        if m.iter().any(|b| *b) {
            masks.push(m);
        }
    }
    masks
}

/// Keeps switched-on segments and replaces the others per `transform`.
pub fn apply_transform(
    query: &Series,
    mask: &[bool],
    spec: &SegmentSpec,
    transform: Transform,
    background: Option<&Series>,
) -> Result<Series> {
    if query.channels() != 1 {
        return Err(Error::MultivariateUnsupported);
    }
    if mask.len() != spec.len() || spec.intervals.last().map(|iv| iv.1) != Some(query.len()) {
        return Err(Error::ShapeMismatch(0));
    }
    let background = match (transform, background) {
        (Transform::Background, None) => return Err(Error::MissingBackground),
        (Transform::Background, Some(b)) if !b.same_shape(query) => {
            return Err(Error::ShapeMismatch(0))
        }
        (_, b) => b,
    };
    let mut out = query.clone();
    let row = out.row_mut(0);
    for (&(s, e), on) in spec.intervals.iter().zip(mask) {
        if *on {
            continue;
        }
        match transform {
            Transform::Uniform => row[s..e].iter_mut().for_each(|v| *v = 0.0),
            Transform::Mean => {
                let mean = query.row(0)[s..e].iter().sum::<f64>() / (e - s) as f64;
                row[s..e].iter_mut().for_each(|v| *v = mean);
            }
            Transform::Background => {
                let b = background.expect("checked above");
                row[s..e].copy_from_slice(&b.row(0)[s..e]);
            }
        }
    }
    Ok(out)
}

/// Fitted local linear model `prob ~ weights . mask + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Kernel weight of each sample.
    pub sample_weights: Vec<f64>,
}

impl Surrogate {
    pub fn predict(&self, mask: &[bool]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|(w, _)| w)
                .sum::<f64>()
    }

    /// Kernel-weighted coefficient of determination on `(masks, probs)`.
    pub fn weighted_r2(&self, masks: &[Vec<bool>], probs: &[f64]) -> f64 {
        let pi = &self.sample_weights;
        let total: f64 = pi.iter().sum();
        let mean = pi.iter().zip(probs).map(|(w, y)| w * y).sum::<f64>() / total;
        let ss_res: f64 = masks
            .iter()
            .zip(probs)
            .zip(pi)
            .map(|((m, y), w)| w * (y - self.predict(m)).powi(2))
            .sum();
        let ss_tot: f64 = probs
            .iter()
            .zip(pi)
            .map(|(y, w)| w * (y - mean).powi(2))
            .sum();
        if ss_tot == 0.0 {
            return if ss_res == 0.0 { 1.0 } else { 0.0 };
        }
        1.0 - ss_res / ss_tot
    }
}

/// Kernel weight of a mask: `exp(-(zeros / n)^2 / width^2)`.
pub fn kernel_weight(mask: &[bool], kernel_width: f64) -> f64 {
    let off = mask.iter().filter(|m| !**m).count() as f64 / mask.len() as f64;
    (-(off * off) / (kernel_width * kernel_width)).exp()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    // pivots are judged against the magnitude of their own column
    let tol: Vec<f64> = (0..n)
        .map(|col| 1e-10 * (0..n).map(|i| a[i][col].abs()).fold(0.0, f64::max))
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        if a[pivot][col].abs() <= tol[col] || a[pivot][col] == 0.0 {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Weighted ridge regression of `probs` on the masks via the normal
/// equations. The intercept is not penalized.
pub fn fit_weights(
    masks: &[Vec<bool>],
    probs: &[f64],
    kernel_width: f64,
    ridge_lambda: f64,
) -> Result<Surrogate> {
    let Some(first) = masks.first() else {
        return Err(Error::BadParams("no samples".into()));
    };
    let k = first.len();
    if masks.len() != probs.len() || masks.len() < k || masks.iter().any(|m| m.len() != k) {
        return Err(Error::BadParams(
            "need one probability per mask and at least one sample per segment".into(),
        ));
    }
    let n = k + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    let sample_weights: Vec<f64> = masks
        .iter()
        .map(|m| kernel_weight(m, kernel_width))
        .collect();
    for ((m, y), pi) in masks.iter().zip(probs).zip(&sample_weights) {
        // features: mask bits then the constant 1
        let x: Vec<f64> = m
            .iter()
            .map(|b| if *b { 1.0 } else { 0.0 })
            .chain(std::iter::once(1.0))
            .collect();
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            b[i] += pi * x[i] * y;
            for j in 0..n {
                a[i][j] += pi * x[i] * x[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(k) {
        row[i] += ridge_lambda;
    }
    let mut coef = solve_dense(a, b)?;
    let intercept = coef.pop().expect("intercept term");
    Ok(Surrogate {
        weights: coef,
        intercept,
        sample_weights,
    })
}

/// Attribution plus the surrogate and perturbation set behind it.
#[derive(Debug, Clone)]
pub struct LeftistExplanation {
    pub attribution: Attribution,
    pub spec: SegmentSpec,
    pub surrogate: Surrogate,
    pub masks: Vec<Vec<bool>>,
    pub probs: Vec<f64>,
}

impl LeftistExplanation {
    /// Kernel-weighted R^2 of the surrogate on its own samples.
    pub fn fidelity(&self) -> f64 {
        self.surrogate.weighted_r2(&self.masks, &self.probs)
    }
}

/// Signed segment importances for `class_of_interest`. `ds` supplies the
/// background (its pointwise mean) for [`Transform::Background`].
pub fn explain(
    query: &Series,
    model: &dyn Model,
    class_of_interest: ClassId,
    params: &LeftistParams,
    ds: Option<&LabeledDataset>,
) -> Result<Attribution> {
    explain_detailed(query, model, class_of_interest, params, ds).map(|e| e.attribution)
}

/// [`explain`] with the fitted surrogate and samples.
pub fn explain_detailed(
    query: &Series,
    model: &dyn Model,
    class_of_interest: ClassId,
    params: &LeftistParams,
    ds: Option<&LabeledDataset>,
) -> Result<LeftistExplanation> {
    if query.channels() != 1 {
        return Err(Error::MultivariateUnsupported);
    }
    params.validate()?;
    if class_of_interest >= model.n_classes() {
        return Err(Error::BadParams(format!(
            "class {class_of_interest} out of range"
        )));
    }
    let background = match params.transform {
        Transform::Background => Some(ds.ok_or(Error::MissingBackground)?.mean_series()),
        _ => None,
    };

    let spec = segment(query.len(), params.n_segments)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let masks = sample_masks(params.n_samples, params.n_segments, &mut rng);
    let batch = masks
        .iter()
        .map(|m| apply_transform(query, m, &spec, params.transform, background.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<f64> = score_batch(model, &batch)?
        .iter()
        .map(|p| p.get(class_of_interest))
        .collect();
    let surrogate = fit_weights(&masks, &probs, params.kernel_width, params.ridge_lambda)?;

    let scale = surrogate
        .weights
        .iter()
        .fold(1.0_f64, |m, w| m.max(w.abs()));
    let segments = spec
        .intervals
        .iter()
        .zip(&surrogate.weights)
        .map(|(&(start, end), w)| SegmentScore {
            start,
            end,
            score: (w / scale).clamp(-1.0, 1.0),
        })
        .collect();
    let attribution = Attribution::from_segments(1, query.len(), segments, RangeKind::Signed)?;
    Ok(LeftistExplanation {
        attribution,
        spec,
        surrogate,
        masks,
        probs,
    })
}
