//! Running one explainer and serializing its result.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use tsx_core::comte::{self, ComteParams};
use tsx_core::leftist::{self, LeftistParams};
use tsx_core::models::predicted_class;
use tsx_core::nuncf::{self, NunCfParams};
use tsx_core::tsr::{self, TsrParams};
use tsx_core::viz::{render_attribution, render_counterfactual, PlotStyle};
use tsx_core::{Attribution, ClassId, CounterfactualResult, LabeledDataset, Model, Series};

use crate::failure::Failure;

#[derive(Debug, Clone)]
pub enum Method {
    NunCf(NunCfParams),
    Comte {
        params: ComteParams,
        target: Option<ClassId>,
    },
    Leftist {
        params: LeftistParams,
        class: Option<ClassId>,
    },
    Tsr {
        params: TsrParams,
        class: Option<ClassId>,
    },
}

pub enum Explained {
    Attribution(Attribution),
    Counterfactual(CounterfactualResult),
}

#[derive(Debug, Serialize)]
pub struct ExplanationJson {
    pub method: String,
    pub kind: String,
    pub range: Option<String>,
    pub scores: Option<Vec<Vec<f64>>>,
    pub cf: Option<Vec<Vec<f64>>>,
    pub label: Option<ClassId>,
    pub changed_channels: Option<Vec<bool>>,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
}

fn real(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(if v > 0.0 { "inf" } else { "-inf" })
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::NunCf(_) => "nun-cf",
            Method::Comte { .. } => "comte",
            Method::Leftist { .. } => "leftist",
            Method::Tsr { .. } => "tsr",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Method::NunCf(_) => 0,
            Method::Comte { params, .. } => params.seed,
            Method::Leftist { params, .. } => params.seed,
            Method::Tsr { params, .. } => params.seed,
        }
    }

    /// Every hyperparameter of the method, defaults included.
    pub fn params(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        match self {
            Method::NunCf(p) => {
                put("variant", json!(p.variant.as_str()));
                put("max_steps", json!(p.max_steps));
                put("saliency_base", json!(p.saliency_method.as_str()));
            }
            Method::Comte { params, target } => {
                put("target", json!(target));
                put("distractors", json!(params.n_distractors));
                put("restarts", json!(params.restarts));
                put("max_iters", json!(params.max_iters));
            }
            Method::Leftist { params, class } => {
                put("class", json!(class));
                put("segments", json!(params.n_segments));
                put("samples", json!(params.n_samples));
                put("transform", json!(params.transform.as_str()));
                put("kernel_width", real(params.kernel_width));
                put("ridge_lambda", real(params.ridge_lambda));
            }
            Method::Tsr { params, class } => {
                put("class", json!(class));
                put("base", json!(params.base_method.as_str()));
                put("alpha", real(params.alpha));
                put("baseline", json!(params.baseline.as_str()));
            }
        }
        m
    }

    pub fn run(
        &self,
        query: &Series,
        ds: &LabeledDataset,
        model: &dyn Model,
    ) -> Result<Explained, Failure> {
        let class = |c: &Option<ClassId>| match c {
            Some(c) => Ok(*c),
            None => predicted_class(model, query).map_err(Failure::model),
        };
        let out = match self {
            Method::NunCf(p) => nuncf::explain(query, ds, model, p).map(Explained::Counterfactual),
            Method::Comte { params, target } => {
                comte::explain(query, model, ds, *target, params).map(Explained::Counterfactual)
            }
            Method::Leftist { params, class: c } => {
                leftist::explain(query, model, class(c)?, params, Some(ds))
                    .map(Explained::Attribution)
            }
            Method::Tsr { params, class: c } => {
                tsr::explain(query, class(c)?, model, params).map(Explained::Attribution)
            }
        };
        out.map_err(Failure::explain)
    }
}

impl Explained {
    pub fn to_json(&self, method: &Method, extra: BTreeMap<String, Value>) -> ExplanationJson {
        let mut params = method.params();
        params.extend(extra);
        let mut j = ExplanationJson {
            method: method.name().to_string(),
            kind: String::new(),
            range: None,
            scores: None,
            cf: None,
            label: None,
            changed_channels: None,
            params,
            seed: method.seed(),
        };
        match self {
            Explained::Attribution(a) => {
                j.kind = "attribution".into();
                j.range = Some(a.range_kind().as_str().into());
                j.scores = Some(a.to_rows());
            }
            Explained::Counterfactual(r) => {
                j.kind = "counterfactual".into();
                j.cf = Some(r.cf.to_rows());
                j.label = Some(r.label);
                j.changed_channels = Some(r.changed_channels.clone());
            }
        }
        j
    }

    pub fn render(&self, query: &Series, model: &dyn Model) -> Result<String, Failure> {
        match self {
            Explained::Attribution(a) => render_attribution(query, a, &PlotStyle::default()),
            Explained::Counterfactual(r) => {
                let style = PlotStyle {
                    original_label: Some(predicted_class(model, query).map_err(Failure::model)?),
                    ..PlotStyle::default()
                };
                render_counterfactual(query, r, &style)
            }
        }
        .map_err(Failure::explain)
    }
}

impl ExplanationJson {
    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("explanation serializes");
        s.push('\n');
        s
    }
}
