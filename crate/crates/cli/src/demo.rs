//! End-to-end walkthrough on synthetic data: one explanation per method,
//! each written as JSON and SVG.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;
use tsx_core::comte::ComteParams;
use tsx_core::leftist::LeftistParams;
use tsx_core::models::{knn_fit, linear_fit, LinearFitParams};
use tsx_core::nuncf::{NunCfParams, NunVariant};
use tsx_core::synthetic::{make_split, SyntheticKind};
use tsx_core::tsr::TsrParams;
use tsx_core::{LabeledDataset, Model};

use crate::failure::Failure;
use crate::report::Method;

const N_TRAIN: usize = 200;
const N_TEST: usize = 20;
const LEN: usize = 50;
const CHANNELS: usize = 3;

fn write_pair(
    outdir: &Path,
    stem: &str,
    method: &Method,
    model_label: &str,
    model: &dyn Model,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<(), Failure> {
    let query = test.series(0);
    let explained = method.run(query, train, model)?;
    let extra = BTreeMap::from([("model".to_string(), json!(model_label))]);
    let report = explained.to_json(method, extra);
    let svg = explained.render(query, model)?;
    fs::write(outdir.join(format!("{stem}.json")), report.to_pretty()).map_err(Failure::io)?;
    fs::write(outdir.join(format!("{stem}.svg")), svg).map_err(Failure::io)?;
    Ok(())
}

pub fn run(outdir: &Path, seed: u64) -> Result<(), Failure> {
    fs::create_dir_all(outdir).map_err(Failure::io)?;

    let (uni, uni_test) =
        make_split(SyntheticKind::BumpUni, N_TRAIN, N_TEST, 1, LEN, seed).map_err(Failure::data)?;
    let (multi, multi_test) = make_split(
        SyntheticKind::ChannelMulti,
        N_TRAIN,
        N_TEST,
        CHANNELS,
        LEN,
        seed,
    )
    .map_err(Failure::data)?;

    let knn_uni = knn_fit(&uni, 1).map_err(Failure::model)?;
    let knn_multi = knn_fit(&multi, 1).map_err(Failure::model)?;
    let linear = linear_fit(&multi, LinearFitParams::default()).map_err(Failure::model)?;

    let nun = Method::NunCf(NunCfParams {
        variant: NunVariant::Barycenter,
        ..NunCfParams::default()
    });
    write_pair(outdir, "nuncf", &nun, "knn:k=1", &knn_uni, &uni, &uni_test)?;

    let left = Method::Leftist {
        params: LeftistParams {
            seed,
            ..LeftistParams::default()
        },
        class: None,
    };
    write_pair(
        outdir, "leftist", &left, "knn:k=1", &knn_uni, &uni, &uni_test,
    )?;

    let comte = Method::Comte {
        params: ComteParams {
            seed,
            ..ComteParams::default()
        },
        target: None,
    };
    write_pair(
        outdir,
        "comte",
        &comte,
        "knn:k=1",
        &knn_multi,
        &multi,
        &multi_test,
    )?;

    let tsr = Method::Tsr {
        params: TsrParams {
            seed,
            ..TsrParams::default()
        },
        class: None,
    };
    write_pair(outdir, "tsr", &tsr, "linear", &linear, &multi, &multi_test)
}
