//! Dense channels-first time series and the small value types around it.

use crate::error::{Error, Result};

/// Tolerance for a probability vector to count as normalized.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// A finite `D x T` matrix, channels first. `D >= 1`, `T >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    channels: usize,
    len: usize,
    values: Vec<f64>,
}

impl Series {
    /// Validates a rectangular matrix of rows (one row per channel).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_series(&rows)
    }

    /// Builds a series from row-major values. Panics if `values.len() != channels * len`.
    pub fn from_flat(channels: usize, len: usize, values: Vec<f64>) -> Result<Self> {
        assert_eq!(values.len(), channels * len, "flat buffer has wrong size");
        if channels == 0 {
            return Err(Error::NoChannels);
        }
        if len < 2 {
            return Err(Error::TooShort(len));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i / len, i % len));
        }
        Ok(Series {
            channels,
            len,
            values,
        })
    }

    pub fn zeros(channels: usize, len: usize) -> Result<Self> {
        Self::from_flat(channels, len, vec![0.0; channels * len])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; a valid series has at least two timesteps.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.len)
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.values[channel * self.len + t]
    }

    /// Sets one cell. Non-finite values are rejected by panicking, since
    /// every caller derives the value from finite inputs.
    pub fn set(&mut self, channel: usize, t: usize, v: f64) {
        assert!(v.is_finite(), "non-finite value written to series");
        self.values[channel * self.len + t] = v;
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.len..(channel + 1) * self.len]
    }

    pub fn row_mut(&mut self, channel: usize) -> &mut [f64] {
        &mut self.values[channel * self.len..(channel + 1) * self.len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|d| self.row(d).to_vec()).collect()
    }

    pub fn same_shape(&self, other: &Series) -> bool {
        self.shape() == other.shape()
    }

    /// Squared Euclidean distance over all cells.
    pub fn sq_dist(&self, other: &Series) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Series) -> f64 {
        self.sq_dist(other).sqrt()
    }

    /// Pointwise `(1 - lambda) * self + lambda * other`.
    pub fn lerp(&self, other: &Series, lambda: f64) -> Series {
        debug_assert!(self.same_shape(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Series {
            channels: self.channels,
            len: self.len,
            values,
        }
    }
}

/// Index of a class, `0 <= id < n_classes`.
pub type ClassId = usize;

/// A probability vector over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts entries in `[0, 1]` summing to one within [`PROB_SUM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if let Some(p) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::InvalidProbabilities(format!(
                "entry {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
        }
        Ok(ProbVector(probs))
    }

    pub fn uniform(n_classes: usize) -> Self {
        ProbVector(vec![1.0 / n_classes as f64; n_classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, c: ClassId) -> f64 {
        self.0[c]
    }

    /// Class with the highest probability; ties go to the lower index.
    pub fn argmax(&self) -> ClassId {
        let mut best = 0;
        for (c, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = c;
            }
        }
        best
    }

    /// Second most probable class (ties to the lower index).
    pub fn runner_up(&self) -> ClassId {
        let top = self.argmax();
        let mut best: Option<ClassId> = None;
        for (c, &p) in self.0.iter().enumerate() {
            if c == top {
                continue;
            }
            match best {
                Some(b) if p <= self.0[b] => {}
                _ => best = Some(c),
            }
        }
        best.unwrap_or(top)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Checks that `raw` is rectangular, finite and at least two timesteps long.
pub fn validate_series(raw: &[Vec<f64>]) -> Result<Series> {
    let channels = raw.len();
    if channels == 0 {
        return Err(Error::NoChannels);
    }
    let len = raw[0].len();
    if raw.iter().any(|r| r.len() != len) {
        return Err(Error::NotRectangular);
    }
    for (d, row) in raw.iter().enumerate() {
        if let Some(t) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(d, t));
        }
    }
    if len < 2 {
        return Err(Error::TooShort(len));
    }
    Ok(Series {
        channels,
        len,
        values: raw.concat(),
    })
}

/// Per-channel z-normalization with the population standard deviation.
/// Channels with std below `1e-12` become all zeros.
pub fn znormalize(s: &Series) -> Series {
    let mut out = s.clone();
    let n = s.len() as f64;
    for d in 0..s.channels() {
        let row = out.row_mut(d);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std < 1e-12 {
            row.iter_mut().for_each(|v| *v = 0.0);
        } else {
            row.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    out
}
