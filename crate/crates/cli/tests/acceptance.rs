//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsx_core::comte::{self, apply_swap, select_distractors, ComteParams, SwapState};
use tsx_core::leftist::{self, segment, LeftistParams, Transform};
use tsx_core::models::{
    knn_fit, linear_fit, predict, predicted_class, FnModel, LinearFitParams, LinearSoftmaxModel,
    Model, StdioModel,
};
use tsx_core::nuncf::{self, find_nun, NunCfParams, NunVariant};
use tsx_core::synthetic::{held_out_seed, informative_window, make_synthetic, SyntheticKind};
use tsx_core::tsr::{self, TsrParams};
use tsx_core::viz::{render_attribution, PlotStyle};
use tsx_core::{save_dataset, Attribution, DatasetFormat, Error, RangeKind, Series};

use common::{s, tsx, FIXTURE};

type Verdict = (bool, String);
type Check = fn() -> Verdict;

const N_QUERIES: usize = 50;

fn ratio(hits: usize, n: usize) -> f64 {
    hits as f64 / n as f64
}

fn counterfactual_validity() -> Verdict {
    let train = make_synthetic(SyntheticKind::BumpUni, 200, 1, 50, 1).unwrap();
    let queries =
        make_synthetic(SyntheticKind::BumpUni, N_QUERIES, 1, 50, held_out_seed(1)).unwrap();
    let model = knn_fit(&train, 1).unwrap();
    let (mut plain_ok, mut bary_ok, mut closer) = (0, 0, 0);
    for (q, _) in queries.iter() {
        let own = predicted_class(&model, q).unwrap();
        let nun = find_nun(q, &train, &model).unwrap();
        let run = |variant| {
            let params = NunCfParams {
                variant,
                ..NunCfParams::default()
            };
            nuncf::explain(q, &train, &model, &params).unwrap()
        };
        let plain = run(NunVariant::Plain);
        let bary = run(NunVariant::Barycenter);
        plain_ok += usize::from(predicted_class(&model, &plain.cf).unwrap() != own);
        bary_ok += usize::from(predicted_class(&model, &bary.cf).unwrap() != own);
        closer += usize::from(q.dist(&bary.cf) <= q.dist(&nun.series));
    }
    let pass = plain_ok == N_QUERIES && bary_ok == N_QUERIES && closer == N_QUERIES;
    (
        pass,
        format!("plain flips {plain_ok}/{N_QUERIES}, barycenter flips {bary_ok}/{N_QUERIES}, barycenter closer {closer}/{N_QUERIES}"),
    )
}

fn exhaustive_min_swaps(
    query: &Series,
    distractors: &[Series],
    target: usize,
    model: &dyn Model,
) -> Option<usize> {
    let d = query.channels();
    let mut best: Option<usize> = None;
    for dist in distractors {
        for bits in 0u32..(1 << d) {
            let state = SwapState {
                swapped: (0..d).map(|i| bits >> i & 1 == 1).collect(),
            };
            let cf = apply_swap(query, dist, &state).unwrap();
            if predicted_class(model, &cf).unwrap() == target {
                best = Some(best.map_or(state.count(), |b| b.min(state.count())));
            }
        }
    }
    best
}

fn comte_minimality() -> Verdict {
    let train = make_synthetic(SyntheticKind::ChannelMulti, 200, 3, 50, 1).unwrap();
    let queries = make_synthetic(
        SyntheticKind::ChannelMulti,
        N_QUERIES,
        3,
        50,
        held_out_seed(1),
    )
    .unwrap();
    let model = knn_fit(&train, 1).unwrap();
    let (mut minimal, mut first_only) = (0, 0);
    for (i, (q, _)) in queries.iter().enumerate() {
        let params = ComteParams {
            seed: i as u64,
            ..ComteParams::default()
        };
        let target = predict(&model, q).unwrap().runner_up();
        let distractors =
            select_distractors(q, target, &train, &model, params.n_distractors).unwrap();
        let oracle = exhaustive_min_swaps(q, &distractors, target, &model);
        let Ok(r) = comte::explain(q, &model, &train, None, &params) else {
            continue;
        };
        minimal += usize::from(Some(r.n_changed_channels()) == oracle);
        first_only += usize::from(r.changed_channels == [true, false, false]);
    }
    let pass = ratio(minimal, N_QUERIES) >= 0.9 && ratio(first_only, N_QUERIES) >= 0.9;
    (
        pass,
        format!("oracle-minimal {minimal}/{N_QUERIES}, changed_channels=[T,F,F] {first_only}/{N_QUERIES} (need >= 90% each)"),
    )
}

fn segment_means(x: &Series, n: usize) -> Vec<f64> {
    segment(x.len(), n)
        .unwrap()
        .intervals
        .iter()
        .map(|&(a, b)| x.row(0)[a..b].iter().sum::<f64>() / (b - a) as f64)
        .collect()
}

fn leftist_fidelity_recovery() -> Verdict {
    let queries = make_synthetic(SyntheticKind::BumpUni, 20, 1, 50, held_out_seed(1)).unwrap();
    let mut in_range = true;

    // additive in per-segment terms of the segment means
    let additive = FnModel::new(2, |x: &Series| {
        let p1 = segment_means(x, 10)
            .iter()
            .enumerate()
            .map(|(s, m)| (s as f64 + 1.0) / 55.0 / (1.0 + (-m).exp()))
            .sum::<f64>();
        vec![1.0 - p1, p1]
    });
    let mut worst_r2 = f64::INFINITY;
    for (i, (q, _)) in queries.iter().enumerate() {
        let params = LeftistParams {
            seed: i as u64,
            ..LeftistParams::default()
        };
        let e = leftist::explain_detailed(q, &additive, 1, &params, None).unwrap();
        worst_r2 = worst_r2.min(e.fidelity());
        in_range &= e.attribution.scores().iter().all(|v| v.abs() <= 1.0);
    }

    // class-1 probability affine in the segment means
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coef: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.04..0.04)).collect();
    let c = coef.clone();
    let affine = FnModel::new(2, move |x: &Series| {
        let p1 = 0.5
            + segment_means(x, 10)
                .iter()
                .zip(&c)
                .map(|(m, a)| m * a)
                .sum::<f64>();
        vec![1.0 - p1, p1]
    });
    let mut worst_err: f64 = 0.0;
    for (i, (q, _)) in queries.iter().enumerate() {
        let params = LeftistParams {
            kernel_width: f64::INFINITY,
            ridge_lambda: 0.0,
            transform: Transform::Uniform,
            seed: i as u64,
            ..LeftistParams::default()
        };
        let e = leftist::explain_detailed(q, &affine, 1, &params, None).unwrap();
        let means = segment_means(q, 10);
        for (s, w) in e.surrogate.weights.iter().enumerate() {
            worst_err = worst_err.max((w - coef[s] * means[s]).abs());
        }
        worst_err = worst_err.max((e.surrogate.intercept - 0.5).abs());
        in_range &= e.attribution.scores().iter().all(|v| v.abs() <= 1.0);
    }

    // range on a black-box classifier too
    let train = make_synthetic(SyntheticKind::BumpUni, 200, 1, 50, 1).unwrap();
    let knn = knn_fit(&train, 1).unwrap();
    for (i, (q, _)) in queries.iter().enumerate() {
        let params = LeftistParams {
            seed: i as u64,
            ..LeftistParams::default()
        };
        let class = predicted_class(&knn, q).unwrap();
        let a = leftist::explain(q, &knn, class, &params, None).unwrap();
        in_range &=
            a.range_kind() == RangeKind::Signed && a.scores().iter().all(|v| v.abs() <= 1.0);
    }

    let pass = worst_r2 >= 0.8 && worst_err <= 1e-6 && in_range;
    (
        pass,
        format!("min weighted R2 {worst_r2:.4} (>= 0.8), max recovery error {worst_err:.2e} (<= 1e-6), range ok {in_range}"),
    )
}

fn finite_difference(model: &LinearSoftmaxModel, x: &Series, c: usize, h: f64) -> Vec<f64> {
    let (d, t) = x.shape();
    let mut out = Vec::with_capacity(d * t);
    for i in 0..d {
        for j in 0..t {
            let mut up = x.clone();
            up.set(i, j, x.get(i, j) + h);
            let mut dn = x.clone();
            dn.set(i, j, x.get(i, j) - h);
            out.push((model.probs(&up)[c] - model.probs(&dn)[c]) / (2.0 * h));
        }
    }
    out
}

fn active_timesteps(a: &Attribution) -> Vec<usize> {
    let (d, t) = a.shape();
    (0..t)
        .filter(|&j| (0..d).any(|i| a.get(i, j) != 0.0))
        .collect()
}

fn tsr_correctness() -> Verdict {
    let train = make_synthetic(SyntheticKind::ChannelMulti, 200, 3, 50, 1).unwrap();
    let queries = make_synthetic(
        SyntheticKind::ChannelMulti,
        N_QUERIES,
        3,
        50,
        held_out_seed(1),
    )
    .unwrap();
    let model = linear_fit(&train, LinearFitParams::default()).unwrap();

    // gradient vs central differences, relative to the largest entry
    let mut grad_err: f64 = 0.0;
    for (q, _) in queries.iter().take(10) {
        for c in 0..2 {
            let g = model.grad(q, c).unwrap();
            let fd = finite_difference(&model, q, c, 1e-5);
            let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = g
                .iter()
                .zip(&fd)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            grad_err = grad_err.max(err / scale);
        }
    }

    let window = informative_window(50);
    let (mut mass, mut noise) = (0.0, 0.0);
    let mut in_range = true;
    let mut monotone = true;
    for (q, _) in queries.iter() {
        let c = predicted_class(&model, q).unwrap();
        let a = tsr::explain(q, c, &model, &TsrParams::default()).unwrap();
        in_range &= a.range_kind() == RangeKind::Unit && a.min() >= 0.0 && a.max() <= 1.0;
        let total: f64 = a.scores().iter().sum();
        let inside: f64 = (0..3)
            .map(|d| a.row(d)[window.clone()].iter().sum::<f64>())
            .sum();
        mass += if total > 0.0 { inside / total } else { 0.0 };
        noise += (a.row(1).iter().chain(a.row(2)).sum::<f64>()) / 100.0;

        let mut prev: Option<Vec<usize>> = None;
        for alpha in [0.0, 0.25, 0.5, 0.9] {
            let params = TsrParams {
                alpha,
                ..TsrParams::default()
            };
            let b = tsr::explain(q, c, &model, &params).unwrap();
            in_range &= b.min() >= 0.0 && b.max() <= 1.0;
            let act = active_timesteps(&b);
            if let Some(p) = &prev {
                monotone &= act.iter().all(|t| p.contains(t));
            }
            prev = Some(act);
        }
    }
    mass /= N_QUERIES as f64;
    noise /= N_QUERIES as f64;
    let pass = grad_err <= 1e-5 && mass >= 0.7 && noise <= 0.05 && in_range && monotone;
    (
        pass,
        format!("grad rel err {grad_err:.2e} (<= 1e-5), window mass {mass:.3} (>= 0.7), noise-channel mean {noise:.4} (<= 0.05), range ok {in_range}, alpha-monotone {monotone}"),
    )
}

fn run_ok(args: &[&str]) {
    let out = tsx(args);
    assert!(
        out.status.success(),
        "tsx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let uni = make_synthetic(SyntheticKind::BumpUni, 60, 1, 50, 3).unwrap();
    let multi = make_synthetic(SyntheticKind::ChannelMulti, 60, 3, 50, 3).unwrap();
    let (csv, jsonl, weights) = (d.join("uni.csv"), d.join("multi.jsonl"), d.join("w.json"));
    save_dataset(&uni, &csv, DatasetFormat::CsvUni).unwrap();
    save_dataset(&multi, &jsonl, DatasetFormat::JsonlMulti).unwrap();
    run_ok(&["train-linear", "--data", s(&jsonl), "--out", s(&weights)]);
    let linear = format!("linear:path={}", s(&weights));

    let cases: Vec<(&str, Vec<&str>)> = vec![
        (
            "nuncf-plain",
            vec![
                "--method",
                "nun-cf",
                "--variant",
                "plain",
                "--data",
                s(&csv),
                "--model",
                "knn:k=1",
            ],
        ),
        (
            "nuncf-bary",
            vec![
                "--method",
                "nun-cf",
                "--variant",
                "barycenter",
                "--data",
                s(&csv),
                "--model",
                "knn:k=1",
            ],
        ),
        (
            "nuncf-sal",
            vec![
                "--method",
                "nun-cf",
                "--variant",
                "saliency",
                "--data",
                s(&jsonl),
                "--model",
                &linear,
            ],
        ),
        (
            "comte",
            vec![
                "--method",
                "comte",
                "--data",
                s(&jsonl),
                "--model",
                "knn:k=1",
                "--seed",
                "4",
            ],
        ),
        (
            "leftist-uni",
            vec![
                "--method",
                "leftist",
                "--data",
                s(&csv),
                "--model",
                "knn:k=3",
                "--seed",
                "4",
            ],
        ),
        (
            "leftist-bg",
            vec![
                "--method",
                "leftist",
                "--transform",
                "background",
                "--data",
                s(&csv),
                "--model",
                "knn:k=3",
                "--seed",
                "4",
            ],
        ),
        (
            "tsr-occ",
            vec![
                "--method",
                "tsr",
                "--data",
                s(&jsonl),
                "--model",
                &linear,
                "--seed",
                "4",
            ],
        ),
        (
            "tsr-grad",
            vec![
                "--method",
                "tsr",
                "--base",
                "gradient",
                "--alpha",
                "0.25",
                "--data",
                s(&jsonl),
                "--model",
                &linear,
                "--seed",
                "4",
            ],
        ),
        (
            "tsr-gxi",
            vec![
                "--method",
                "tsr",
                "--base",
                "grad-input",
                "--data",
                s(&jsonl),
                "--model",
                &linear,
                "--seed",
                "4",
            ],
        ),
    ];
    let mut identical = 0;
    for (name, args) in &cases {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let json = d.join(format!("{name}-{run}.json"));
            let svg = d.join(format!("{name}-{run}.svg"));
            let mut full = vec![
                "explain",
                "--index",
                "0",
                "--out",
                s(&json),
                "--svg",
                s(&svg),
            ];
            full.extend(args.iter().copied());
            run_ok(&full);
            outputs.push((fs::read(&json).unwrap(), fs::read(&svg).unwrap()));
        }
        identical += usize::from(outputs[0] == outputs[1]);
    }
    (
        identical == cases.len(),
        format!(
            "{identical}/{} explain invocations byte-identical (JSON and SVG)",
            cases.len()
        ),
    )
}

fn lerp(a: (f64, f64, f64), b: (f64, f64, f64), f: f64) -> String {
    let ch = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02X}{:02X}{:02X}",
        ch(a.0, b.0),
        ch(a.1, b.1),
        ch(a.2, b.2)
    )
}

const WHITE: (f64, f64, f64) = (255.0, 255.0, 255.0);
const BLUE: (f64, f64, f64) = (31.0, 119.0, 180.0);
const RED: (f64, f64, f64) = (214.0, 39.0, 40.0);

fn diverging(v: f64) -> String {
    if v < 0.0 {
        lerp(WHITE, BLUE, -v)
    } else {
        lerp(WHITE, RED, v)
    }
}

fn sequential(v: f64) -> String {
    lerp(WHITE, RED, v)
}

fn cell_fills(svg: &str) -> Vec<String> {
    roxmltree::Document::parse(svg)
        .unwrap()
        .descendants()
        .filter(|n| n.attribute("class") == Some("cell"))
        .map(|n| n.attribute("fill").unwrap().to_string())
        .collect()
}

fn row_groups(svg: &str) -> usize {
    roxmltree::Document::parse(svg)
        .unwrap()
        .descendants()
        .filter(|n| n.attribute("class") == Some("channel-row"))
        .count()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn flat_scores(j: &serde_json::Value) -> Vec<f64> {
    j["scores"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .collect()
}

fn visualization_contract() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["demo", "--outdir", s(dir.path()), "--seed", "1"]);
    let mut notes = Vec::new();
    let mut pass = true;

    let mut svgs = BTreeMap::new();
    for stem in ["nuncf", "leftist", "comte", "tsr"] {
        let text = fs::read_to_string(dir.path().join(format!("{stem}.svg"))).unwrap();
        match roxmltree::Document::parse(&text) {
            Ok(doc) => pass &= doc.root_element().has_tag_name("svg"),
            Err(e) => {
                pass = false;
                notes.push(format!("{stem}.svg not well-formed: {e}"));
            }
        }
        svgs.insert(stem, text);
    }

    let left = read_json(&dir.path().join("leftist.json"));
    let want: Vec<String> = flat_scores(&left).into_iter().map(diverging).collect();
    let signed_ok = left["range"] == "signed" && cell_fills(&svgs["leftist"]) == want;
    let tsr = read_json(&dir.path().join("tsr.json"));
    let want: Vec<String> = flat_scores(&tsr).into_iter().map(sequential).collect();
    let unit_ok = tsr["range"] == "unit" && cell_fills(&svgs["tsr"]) == want;

    // exact endpoints through the renderer
    let x = Series::from_rows(vec![vec![0.0, 1.0, 2.0]]).unwrap();
    let signed = Attribution::new(1, 3, vec![-1.0, 0.0, 1.0], RangeKind::Signed).unwrap();
    let unit = Attribution::new(1, 3, vec![0.0, 0.5, 1.0], RangeKind::Unit).unwrap();
    let s_fills = cell_fills(&render_attribution(&x, &signed, &PlotStyle::default()).unwrap());
    let u_fills = cell_fills(&render_attribution(&x, &unit, &PlotStyle::default()).unwrap());
    let endpoints_ok = s_fills == ["#1F77B4", "#FFFFFF", "#D62728"]
        && u_fills[0] == "#FFFFFF"
        && u_fills[2] == "#D62728";

    let comte = read_json(&dir.path().join("comte.json"));
    let changed = comte["changed_channels"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v.as_bool() == Some(true))
        .count();
    let rows = row_groups(&svgs["comte"]);
    let comte_ok = rows == changed;

    pass &= signed_ok && unit_ok && endpoints_ok && comte_ok;
    notes.push(format!(
        "4 SVGs well-formed; signed cells diverging {signed_ok}, unit cells sequential {unit_ok}, endpoints exact {endpoints_ok}, comte rows {rows} = changed {changed}"
    ));
    (pass, notes.join("; "))
}

fn softmax_mean_oracle(x: &Series, classes: usize) -> Vec<f64> {
    let mean = x.row(0).iter().sum::<f64>() / x.len() as f64;
    let e: Vec<f64> = (0..classes).map(|c| (c as f64 * mean).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

fn protocol_conformance() -> Verdict {
    let spawn = |mode: &str, timeout: Duration| {
        let cmd = format!("'{FIXTURE}' --classes 3 --d 2 --t 16 --mode {mode}");
        StdioModel::spawn(&cmd, 3, timeout).unwrap()
    };
    let model = spawn("softmax-mean", Duration::from_secs(10));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut valid = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let batch: Vec<Series> = (0..n)
            .map(|_| {
                let v = (0..32).map(|_| rng.gen_range(-3.0..3.0)).collect();
                Series::from_flat(2, 16, v).unwrap()
            })
            .collect();
        let Ok(probs) = model.predict_batch(&batch) else {
            continue;
        };
        let ok = probs.len() == n
            && batch.iter().zip(&probs).all(|(x, p)| {
                let sum: f64 = p.as_slice().iter().sum();
                (sum - 1.0).abs() <= 1e-6
                    && p.as_slice()
                        .iter()
                        .zip(softmax_mean_oracle(x, 3))
                        .all(|(a, b)| (a - b).abs() < 1e-12)
            });
        valid += usize::from(ok);
    }

    let x = Series::zeros(2, 16).unwrap();
    let malformed = spawn("malformed", Duration::from_secs(10));
    let start = Instant::now();
    let err = malformed
        .predict_batch(std::slice::from_ref(&x))
        .unwrap_err();
    let malformed_ok =
        matches!(err, Error::ProtocolError(_)) && start.elapsed() < Duration::from_secs(2);

    let timeout = Duration::from_secs(2);
    let hang = spawn("hang", timeout);
    let start = Instant::now();
    let err = hang.predict_batch(std::slice::from_ref(&x)).unwrap_err();
    let elapsed = start.elapsed().as_secs_f64();
    let timeout_ok = matches!(err, Error::ModelTimeout(_)) && (elapsed - 2.0).abs() <= 1.0;

    (
        valid == 100 && malformed_ok && timeout_ok,
        format!("{valid}/100 valid round-trips, malformed -> ProtocolError {malformed_ok}, 2 s timeout fired after {elapsed:.2} s"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("counterfactual validity", counterfactual_validity),
        ("CoMTE minimality", comte_minimality),
        ("LEFTIST fidelity and recovery", leftist_fidelity_recovery),
        ("TSR correctness", tsr_correctness),
        ("determinism", cli_determinism),
        ("visualization contract", visualization_contract),
        ("protocol conformance", protocol_conformance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
