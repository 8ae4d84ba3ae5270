//! The `--model` mini-grammar: `knn:k=K`, `linear:path=FILE`,
//! `linear` (fit on the loaded data) and `stdio:cmd="..."`.

use std::path::PathBuf;
use std::time::Duration;

use tsx_core::models::{
    knn_fit, linear_fit, LinearFitParams, LinearSoftmaxModel, StdioModel, DEFAULT_TIMEOUT,
};
use tsx_core::{LabeledDataset, Model};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Knn { k: usize },
    LinearFile { path: PathBuf },
    LinearFit { epochs: usize, lr: f64 },
    Stdio { cmd: String, classes: Option<usize> },
}

fn bad(spec: &str, why: &str) -> Failure {
    Failure::usage(format!("invalid model spec {spec:?}: {why}"))
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

/// `key=value` pairs separated by commas.
fn pairs<'a>(spec: &str, body: &'a str) -> Result<Vec<(&'a str, &'a str)>, Failure> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), unquote(v)))
                .ok_or_else(|| bad(spec, &format!("expected key=value, got {kv:?}")))
        })
        .collect()
}

fn number<T: std::str::FromStr>(spec: &str, key: &str, v: &str) -> Result<T, Failure> {
    v.parse()
        .map_err(|_| bad(spec, &format!("{key} must be a number, got {v:?}")))
}

impl ModelSpec {
    pub fn parse(spec: &str) -> Result<Self, Failure> {
        let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "knn" => {
                let mut k = None;
                for (key, v) in pairs(spec, body)? {
                    match key {
                        "k" => k = Some(number(spec, key, v)?),
                        _ => return Err(bad(spec, &format!("unknown key {key:?}"))),
                    }
                }
                Ok(ModelSpec::Knn {
                    k: k.ok_or_else(|| bad(spec, "knn needs k=K"))?,
                })
            }
            "linear" => {
                let mut path = None;
                let mut params = LinearFitParams::default();
                for (key, v) in pairs(spec, body)? {
                    match key {
                        "path" => path = Some(PathBuf::from(v)),
                        "epochs" => params.epochs = number(spec, key, v)?,
                        "lr" => params.lr = number(spec, key, v)?,
                        _ => return Err(bad(spec, &format!("unknown key {key:?}"))),
                    }
                }
                Ok(match path {
                    Some(path) => ModelSpec::LinearFile { path },
                    None => ModelSpec::LinearFit {
                        epochs: params.epochs,
                        lr: params.lr,
                    },
                })
            }
            "stdio" => {
                // cmd swallows the rest of the spec, commas included
                let mut classes = None;
                let mut rest = body;
                while !rest.starts_with("cmd=") {
                    let (kv, tail) = rest
                        .split_once(',')
                        .ok_or_else(|| bad(spec, "stdio needs cmd=\"...\""))?;
                    match kv.split_once('=') {
                        Some(("classes", v)) => classes = Some(number(spec, "classes", v)?),
                        _ => return Err(bad(spec, &format!("unknown key in {kv:?}"))),
                    }
                    rest = tail;
                }
                let cmd = unquote(&rest["cmd=".len()..]).to_string();
                if cmd.is_empty() {
                    return Err(bad(spec, "empty command"));
                }
                Ok(ModelSpec::Stdio { cmd, classes })
            }
            _ => Err(bad(spec, "unknown model kind (knn, linear, stdio)")),
        }
    }

    pub fn build(&self, ds: &LabeledDataset) -> Result<Box<dyn Model>, Failure> {
        let model: Box<dyn Model> = match self {
            ModelSpec::Knn { k } => Box::new(knn_fit(ds, *k).map_err(Failure::model)?),
            ModelSpec::LinearFile { path } => {
                let m = LinearSoftmaxModel::load(path).map_err(Failure::model)?;
                if m.shape() != ds.shape() {
                    return Err(Failure::model(tsx_core::Error::BadParams(format!(
                        "model expects shape {:?}, data has {:?}",
                        m.shape(),
                        ds.shape()
                    ))));
                }
                Box::new(m)
            }
            ModelSpec::LinearFit { epochs, lr } => {
                let params = LinearFitParams {
                    epochs: *epochs,
                    lr: *lr,
                    ..Default::default()
                };
                Box::new(linear_fit(ds, params).map_err(Failure::model)?)
            }
            ModelSpec::Stdio { cmd, classes } => {
                let n_classes = classes.unwrap_or(ds.n_classes());
                Box::new(StdioModel::spawn(cmd, n_classes, timeout()?).map_err(Failure::model)?)
            }
        };
        Ok(model)
    }
}

/// `TSX_TIMEOUT` in seconds, else the library default.
fn timeout() -> Result<Duration, Failure> {
    match std::env::var("TSX_TIMEOUT") {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite() && *s > 0.0)
            .map(Duration::from_secs_f64)
            .ok_or_else(|| {
                Failure::usage(format!("TSX_TIMEOUT must be positive seconds, got {v:?}"))
            }),
        Err(_) => Ok(DEFAULT_TIMEOUT),
    }
}
