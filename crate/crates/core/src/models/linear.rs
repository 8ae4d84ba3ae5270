use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{Capabilities, Model};
use crate::series::{ClassId, ProbVector, Series};

/// Multinomial logistic regression over the flattened series:
/// `p = softmax(W x + b)` with one `D x T` weight map per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    n_classes: usize,
    channels: usize,
    len: usize,
    /// `C x D x T`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFitParams {
    pub epochs: usize,
    pub lr: f64,
    /// Kept for a uniform call signature; training from zero weights with
    /// full-batch updates draws no random numbers.
    pub seed: u64,
}

impl Default for LinearFitParams {
    fn default() -> Self {
        LinearFitParams {
            epochs: 200,
            lr: 0.05,
            seed: 0,
        }
    }
}

/// Trains by full-batch gradient descent on the mean cross-entropy,
/// starting from all-zero parameters.
pub fn linear_fit(ds: &LabeledDataset, params: LinearFitParams) -> Result<LinearSoftmaxModel> {
    if !(params.lr.is_finite() && params.lr > 0.0) {
        return Err(Error::BadParams(format!("learning rate {}", params.lr)));
    }
    let (d, t) = ds.shape();
    let mut model = LinearSoftmaxModel::zeros(ds.n_classes(), d, t);
    let c = model.n_classes;
    let f = d * t;
    let n = ds.len() as f64;
    let mut gw = vec![0.0; c * f];
    let mut gb = vec![0.0; c];
    for _ in 0..params.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (x, label) in ds.iter() {
            let p = model.probs(x);
            for k in 0..c {
                let err = p[k] - if k == *label { 1.0 } else { 0.0 };
                gb[k] += err;
                for (g, v) in gw[k * f..(k + 1) * f].iter_mut().zip(x.values()) {
                    *g += err * v;
                }
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= params.lr * g / n;
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= params.lr * g / n;
        }
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct LinearFile {
    n_classes: usize,
    channels: usize,
    len: usize,
    weights: Vec<Vec<Vec<f64>>>,
    bias: Vec<f64>,
}

impl LinearSoftmaxModel {
    pub fn zeros(n_classes: usize, channels: usize, len: usize) -> Self {
        LinearSoftmaxModel {
            n_classes,
            channels,
            len,
            weights: vec![0.0; n_classes * channels * len],
            bias: vec![0.0; n_classes],
        }
    }

    /// `weights` is `C x D x T` row-major; all parameters must be finite.
    pub fn from_parts(
        n_classes: usize,
        channels: usize,
        len: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != n_classes * channels * len || bias.len() != n_classes {
            return Err(Error::BadParams(
                "parameter sizes do not match C x D x T".into(),
            ));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::BadParams("non-finite parameter".into()));
        }
        Ok(LinearSoftmaxModel {
            n_classes,
            channels,
            len,
            weights,
            bias,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.len)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// The `D x T` weight map of class `c`.
    pub fn class_weights(&self, c: ClassId) -> &[f64] {
        let f = self.channels * self.len;
        &self.weights[c * f..(c + 1) * f]
    }

    pub fn logits(&self, x: &Series) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                self.bias[c]
                    + self
                        .class_weights(c)
                        .iter()
                        .zip(x.values())
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Numerically stable softmax of the logits.
    pub fn probs(&self, x: &Series) -> Vec<f64> {
        let z = self.logits(x);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let f = self.channels * self.len;
        let weights = (0..self.n_classes)
            .map(|c| {
                self.weights[c * f..(c + 1) * f]
                    .chunks(self.len)
                    .map(<[f64]>::to_vec)
                    .collect()
            })
            .collect();
        let file = LinearFile {
            n_classes: self.n_classes,
            channels: self.channels,
            len: self.len,
            weights,
            bias: self.bias.clone(),
        };
        serde_json::to_string(&file).expect("finite parameters serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LinearFile = serde_json::from_str(text).map_err(|e| Error::ParseError {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let weights: Vec<f64> = file.weights.into_iter().flatten().flatten().collect();
        Self::from_parts(file.n_classes, file.channels, file.len, weights, file.bias)
    }
}

impl Model for LinearSoftmaxModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_batch(&self, batch: &[Series]) -> Result<Vec<ProbVector>> {
        batch
            .iter()
            .enumerate()
            .map(|(i, x)| {
                if x.shape() != self.shape() {
                    return Err(Error::ShapeMismatch(i));
                }
                ProbVector::new(self.probs(x))
            })
            .collect()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_gradient: true,
            parallel_safe: true,
        }
    }

    /// `d p_c / d x = p_c (w_c - sum_k p_k w_k)`.
    fn grad(&self, x: &Series, class: ClassId) -> Result<Vec<f64>> {
        if x.shape() != self.shape() {
            return Err(Error::ShapeMismatch(0));
        }
        if class >= self.n_classes {
            return Err(Error::BadParams(format!("class {class} out of range")));
        }
        let p = self.probs(x);
        let f = self.channels * self.len;
        let mut mix = vec![0.0; f];
        for (k, pk) in p.iter().enumerate() {
            for (m, w) in mix.iter_mut().zip(self.class_weights(k)) {
                *m += pk * w;
            }
        }
        Ok(self
            .class_weights(class)
            .iter()
            .zip(&mix)
            .map(|(w, m)| p[class] * (w - m))
            .collect())
    }
}
