//! `tsx`: explain time-series classifiers from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad arguments, 3 data error,
//! 4 model error, 5 explanation failure. Failures print a JSON object
//! `{"error": code, "message": text}` on stderr.

mod demo;
mod failure;
mod model_spec;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tsx_core::comte::ComteParams;
use tsx_core::leftist::{LeftistParams, Transform};
use tsx_core::models::{linear_fit, predict, LinearFitParams};
use tsx_core::nuncf::{NunCfParams, NunVariant};
use tsx_core::tsr::{BaseMethod, Baseline, TsrParams};
use tsx_core::{load_dataset, znormalize, DatasetFormat, LabeledDataset, Series};

use failure::Failure;
use model_spec::ModelSpec;
use report::Method;

#[derive(Parser)]
#[command(
    name = "tsx",
    version,
    about = "Explain black-box time-series classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the class probabilities of one instance.
    Predict(PredictArgs),
    /// Explain one instance and write the explanation JSON (and SVG).
    Explain(ExplainArgs),
    /// Run every explainer on synthetic data.
    Demo(DemoArgs),
    /// Fit a linear softmax model and save its weights.
    TrainLinear(TrainArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset: `.csv` (univariate) or `.jsonl` (multivariate).
    #[arg(long)]
    data: PathBuf,
    /// Z-normalize every channel of every instance after loading.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `knn:k=K`, `linear:path=FILE`, `linear` or `stdio:cmd="..."`.
    #[arg(long)]
    model: String,
    #[arg(long)]
    index: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    NunCf,
    Comte,
    Leftist,
    Tsr,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Plain,
    Barycenter,
    Saliency,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Uniform,
    Mean,
    Background,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Occlusion,
    Gradient,
    GradInput,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Zero,
    ChannelMean,
}

impl From<BaseArg> for BaseMethod {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Occlusion => BaseMethod::Occlusion,
            BaseArg::Gradient => BaseMethod::Gradient,
            BaseArg::GradInput => BaseMethod::GradientTimesInput,
        }
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: String,
    #[arg(long)]
    index: usize,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Explanation JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Also render the explanation as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Required for comte and leftist.
    #[arg(long)]
    seed: Option<u64>,

    /// nun-cf: search variant.
    #[arg(long, value_enum, default_value = "plain")]
    variant: VariantArg,
    /// nun-cf: barycenter grid resolution.
    #[arg(long, default_value_t = 100)]
    max_steps: usize,
    /// nun-cf saliency variant: base saliency method.
    #[arg(long, value_enum, default_value = "occlusion")]
    saliency_base: BaseArg,

    /// comte: counterfactual class (default: the runner-up class).
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, default_value_t = 3)]
    distractors: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,

    /// leftist/tsr: class to attribute (default: the predicted class).
    #[arg(long)]
    class: Option<usize>,
    #[arg(long, default_value_t = 10)]
    segments: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    transform: TransformArg,
    /// leftist: kernel width; `inf` weights all samples equally.
    #[arg(long, default_value_t = 0.25)]
    kernel_width: f64,
    #[arg(long, default_value_t = 1e-3)]
    ridge_lambda: f64,

    /// tsr: base saliency method.
    #[arg(long, value_enum, default_value = "occlusion")]
    base: BaseArg,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "zero")]
    baseline: BaselineArg,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Weights JSON output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
}

fn load(args: &DataArgs) -> Result<LabeledDataset, Failure> {
    let format = DatasetFormat::from_path(&args.data).ok_or_else(|| {
        Failure::usage(format!(
            "cannot infer format of {} (use .csv or .jsonl)",
            args.data.display()
        ))
    })?;
    let ds = load_dataset(&args.data, format).map_err(Failure::data)?;
    Ok(if args.normalize {
        ds.map_series(znormalize)
    } else {
        ds
    })
}

fn instance(ds: &LabeledDataset, index: usize) -> Result<&Series, Failure> {
    ds.get(index).map(|(s, _)| s).ok_or_else(|| Failure {
        exit_code: failure::EXIT_DATA,
        code: "IndexOutOfRange".into(),
        message: format!("index {index} out of range for {} instances", ds.len()),
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let spec = ModelSpec::parse(&args.model)?;
    let ds = load(&args.data)?;
    let x = instance(&ds, args.index)?;
    let model = spec.build(&ds)?;
    let probs = predict(model.as_ref(), x).map_err(Failure::model)?;
    println!(
        "{}",
        serde_json::to_string(probs.as_slice()).expect("finite probabilities")
    );
    Ok(())
}

fn require_seed(args: &ExplainArgs, method: &str) -> Result<u64, Failure> {
    args.seed
        .ok_or_else(|| Failure::usage(format!("--seed is required for {method}")))
}

fn method_of(args: &ExplainArgs) -> Result<Method, Failure> {
    Ok(match args.method {
        MethodArg::NunCf => Method::NunCf(NunCfParams {
            variant: match args.variant {
                VariantArg::Plain => NunVariant::Plain,
                VariantArg::Barycenter => NunVariant::Barycenter,
                VariantArg::Saliency => NunVariant::SaliencyGuided,
            },
            max_steps: args.max_steps,
            saliency_method: args.saliency_base.into(),
        }),
        MethodArg::Comte => Method::Comte {
            params: ComteParams {
                n_distractors: args.distractors,
                restarts: args.restarts,
                max_iters: args.max_iters,
                seed: require_seed(args, "comte")?,
            },
            target: args.target,
        },
        MethodArg::Leftist => Method::Leftist {
            params: LeftistParams {
                n_segments: args.segments,
                n_samples: args.samples,
                transform: match args.transform {
                    TransformArg::Uniform => Transform::Uniform,
                    TransformArg::Mean => Transform::Mean,
                    TransformArg::Background => Transform::Background,
                },
                kernel_width: args.kernel_width,
                ridge_lambda: args.ridge_lambda,
                seed: require_seed(args, "leftist")?,
            },
            class: args.class,
        },
        MethodArg::Tsr => Method::Tsr {
            params: TsrParams {
                base_method: args.base.into(),
                alpha: args.alpha,
                baseline: match args.baseline {
                    BaselineArg::Zero => Baseline::Zero,
                    BaselineArg::ChannelMean => Baseline::ChannelMean,
                },
                seed: args.seed.unwrap_or(0),
            },
            class: args.class,
        },
    })
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Failure> {
    let spec = ModelSpec::parse(&args.model)?;
    let method = method_of(&args)?;
    let ds = load(&args.data)?;
    let query = instance(&ds, args.index)?.clone();
    let model = spec.build(&ds)?;

    let explained = method.run(&query, &ds, model.as_ref())?;
    let extra = BTreeMap::from([
        ("model".to_string(), json!(args.model)),
        ("normalize".to_string(), json!(args.data.normalize)),
        ("index".to_string(), json!(args.index)),
    ]);
    let mut report = explained.to_json(&method, extra);
    if let Some(seed) = args.seed {
        report.seed = seed;
    }
    let svg = match &args.svg {
        Some(_) => Some(explained.render(&query, model.as_ref())?),
        None => None,
    };
    write(&args.out, &report.to_pretty())?;
    if let (Some(path), Some(svg)) = (&args.svg, svg) {
        write(path, &svg)?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let ds = load(&args.data)?;
    let params = LinearFitParams {
        epochs: args.epochs,
        lr: args.lr,
        ..Default::default()
    };
    let model = linear_fit(&ds, params).map_err(Failure::model)?;
    write(&args.out, &model.to_json())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Demo(a) => demo::run(&a.outdir, a.seed),
        Command::TrainLinear(a) => cmd_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code as u8)
        }
    }
}
