//! Reference model server for the stdio protocol, used by tests and examples.
//!
//! Usage: `tsx-fixture-model [--classes C] [--d D] [--t T] [--mode MODE]`
//!
//! Modes:
//! - `uniform`: every instance scores `1/C` per class (default)
//! - `softmax-mean`: softmax over classes of `c * mean(channel 0)`
//! - `malformed`: answers predict requests with a non-JSON line
//! - `short`: returns one probability vector too few
//! - `unnormalized`: returns vectors summing to 2
//! - `hang`: never answers predict requests

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use tsx_core::models::stdio::{decode_predict_request, decode_request, encode_predict_response};
use tsx_core::series::{ProbVector, Series};

struct Config {
    classes: usize,
    d: usize,
    t: usize,
    mode: String,
}

fn parse_args() -> Result<Config, String> {
    let mut cfg = Config {
        classes: 2,
        d: 1,
        t: 2,
        mode: "uniform".into(),
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().ok_or(format!("{flag} needs a value"))?;
        let num = || value.parse::<usize>().map_err(|e| format!("{flag}: {e}"));
        match flag.as_str() {
            "--classes" => cfg.classes = num()?,
            "--d" => cfg.d = num()?,
            "--t" => cfg.t = num()?,
            "--mode" => cfg.mode = value.clone(),
            _ => return Err(format!("unknown flag {flag}")),
        }
    }
    Ok(cfg)
}

fn softmax_mean(s: &Series, classes: usize) -> ProbVector {
    let mean = s.row(0).iter().sum::<f64>() / s.len() as f64;
    let z: Vec<f64> = (0..classes).map(|c| c as f64 * mean).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    ProbVector::new(e.into_iter().map(|v| v / sum).collect()).expect("softmax is normalized")
}

fn main() -> ExitCode {
    let cfg = match parse_args() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("tsx-fixture-model: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let Ok(req) = decode_request(&line) else {
            eprintln!("tsx-fixture-model: bad request");
            return ExitCode::from(1);
        };
        let reply = if req.op == "info" {
            format!(
                "{{\"id\":{},\"n_classes\":{},\"d\":{},\"t\":{}}}",
                req.id, cfg.classes, cfg.d, cfg.t
            )
        } else {
            let Ok((id, batch)) = decode_predict_request(&line) else {
                eprintln!("tsx-fixture-model: bad predict request");
                return ExitCode::from(1);
            };
            match cfg.mode.as_str() {
                "hang" => loop {
                    std::thread::park();
                },
                "malformed" => "this is not json".to_string(),
                "unnormalized" => {
                    let row = vec![2.0 / cfg.classes as f64; cfg.classes];
                    let rows = vec![row; batch.len()];
                    serde_json::json!({ "id": id, "probs": rows }).to_string()
                }
                mode => {
                    let mut probs: Vec<ProbVector> = batch
                        .iter()
                        .map(|s| match mode {
                            "softmax-mean" => softmax_mean(s, cfg.classes),
                            _ => ProbVector::uniform(cfg.classes),
                        })
                        .collect();
                    if mode == "short" {
                        probs.pop();
                    }
                    encode_predict_response(id, &probs)
                }
            }
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
