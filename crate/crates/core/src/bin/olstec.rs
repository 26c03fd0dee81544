use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use olstec::io::{self, MaskSpec, Tensor3};
use olstec::runner::{self, Algorithm, BenchSpec, Evaluate, InputSource, RunSpec};
use olstec::synth::{SynthConfig, SynthStream};
use olstec::{Error, Gamma, SgdConfig, TrackerConfig, UpdateOrdering, Variant};

#[derive(Parser)]
#[command(name = "olstec", version, about = "Online low-rank tensor subspace tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a synthetic or file-backed stream and write per-step metrics.
    Run(RunArgs),
    /// Generate a rotating-subspace stream as TNS3 files.
    Synth(SynthArgs),
    /// Time OLSTEC full vs simplified per iteration across ranks.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Simplified,
    Window,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderingArg {
    GaussSeidel,
    Jacobi,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AlgoArg {
    Olstec,
    Sgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluateArg {
    Post,
    Pre,
}

/// Tracker settings shared by `run` and `bench`.
#[derive(Args)]
struct TrackerArgs {
    /// Forgetting factor; default 0.5 for olstec, 0.001 (b ridge) for sgd.
    #[arg(long)]
    lambda: Option<f64>,
    /// Regularizer; default 0.001 for olstec, 0.1 for sgd.
    #[arg(long)]
    mu: Option<f64>,
    /// Initial RLS scale, a positive real or `auto` (1/mu).
    #[arg(long, default_value = "auto", value_parser = parse_gamma)]
    gamma: Gamma,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    #[arg(long = "window-len", default_value_t = 10)]
    window_len: usize,
    #[arg(long, value_enum, default_value = "gauss-seidel")]
    ordering: OrderingArg,
    #[arg(long, value_enum, default_value = "olstec")]
    algo: AlgoArg,
    /// SGD stepsize.
    #[arg(long, default_value_t = 10.0)]
    stepsize: f64,
}

#[derive(Args)]
struct RunArgs {
    /// TNS3 tensor file, or `synth` for a generated stream.
    #[arg(long)]
    input: String,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[command(flatten)]
    tracker: TrackerArgs,
    /// Observation ratio; default 0.3 for synth, 1 for file input.
    #[arg(long = "mask-ratio")]
    mask_ratio: Option<f64>,
    /// Mask seed for file input (repetition i uses seed + i).
    #[arg(long = "mask-seed", default_value_t = 0)]
    mask_seed: u64,
    /// Explicit MSK3 mask for file input.
    #[arg(long = "mask-file", conflicts_with = "mask_ratio")]
    mask_file: Option<PathBuf>,
    /// Ground-truth TNS3 file for full-entry residuals.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV; `<stem>_rep<i>` per repetition when reps > 1.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score the prediction after (post) or before (pre) the factor update.
    #[arg(long, value_enum, default_value = "post")]
    evaluate: EvaluateArg,
    #[arg(long = "L", default_value_t = 50)]
    l: usize,
    #[arg(long = "W", default_value_t = 50)]
    w: usize,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    /// Rotation angle per step, radians.
    #[arg(long, default_value_t = std::f64::consts::PI / 36.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    noise: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "L", default_value_t = 50)]
    l: usize,
    #[arg(long = "W", default_value_t = 50)]
    w: usize,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = std::f64::consts::PI / 36.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noisy observations, every entry (TNS3).
    #[arg(long)]
    out: PathBuf,
    /// Noise-free slices (TNS3).
    #[arg(long = "truth-out")]
    truth_out: Option<PathBuf>,
    /// Revealed-entry mask (MSK3).
    #[arg(long = "mask-out")]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Ranks to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    ranks: Vec<usize>,
    #[command(flatten)]
    tracker: TrackerArgs,
    #[arg(long = "mask-ratio", default_value_t = 0.3)]
    mask_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "L", default_value_t = 150)]
    l: usize,
    #[arg(long = "W", default_value_t = 150)]
    w: usize,
    /// Timed steps per rank.
    #[arg(long = "T", default_value_t = 40)]
    t: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Timing table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_gamma(s: &str) -> Result<Gamma, String> {
    if s == "auto" {
        return Ok(Gamma::Auto);
    }
    s.parse::<f64>().map(Gamma::Value).map_err(|_| format!("expected a real or `auto`, got {s:?}"))
}

impl TrackerArgs {
    fn algorithm(&self, rank: usize) -> Algorithm {
        match self.algo {
            AlgoArg::Olstec => {
                let variant = match self.variant {
                    VariantArg::Full => Variant::Full,
                    VariantArg::Simplified => Variant::Simplified,
                    VariantArg::Window => Variant::Windowed(self.window_len),
                };
                let ordering = match self.ordering {
                    OrderingArg::GaussSeidel => UpdateOrdering::GaussSeidel,
                    OrderingArg::Jacobi => UpdateOrdering::Jacobi,
                };
                let base = TrackerConfig::new(rank);
                Algorithm::Olstec(TrackerConfig {
                    lambda: self.lambda.unwrap_or(base.lambda),
                    mu: self.mu.unwrap_or(base.mu),
                    gamma: self.gamma,
                    variant,
                    ordering,
                    ..base
                })
            }
            AlgoArg::Sgd => {
                let base = SgdConfig::new(rank);
                Algorithm::Sgd(SgdConfig {
                    lambda: self.lambda.unwrap_or(base.lambda),
                    mu: self.mu.unwrap_or(base.mu),
                    stepsize: self.stepsize,
                    ..base
                })
            }
        }
    }
}

fn run(args: RunArgs) -> olstec::Result<()> {
    let input = if args.input == "synth" {
        InputSource::Synth(SynthConfig {
            l: args.l,
            w: args.w,
            t: args.t,
            rank: args.rank,
            alpha: args.alpha,
            noise: args.noise,
            ratio: args.mask_ratio.unwrap_or(0.3),
            seed: args.seed,
            mask_seed: None,
        })
    } else {
        let mask = match args.mask_file {
            Some(path) => MaskSpec::File(path),
            None => MaskSpec::Ratio { ratio: args.mask_ratio.unwrap_or(1.0), seed: args.mask_seed },
        };
        InputSource::File { tensor: args.input.into(), mask, truth: args.truth }
    };
    let evaluate = match args.evaluate {
        EvaluateArg::Post => Evaluate::PostUpdate,
        EvaluateArg::Pre => Evaluate::PreUpdate,
    };
    let spec = RunSpec {
        reps: args.reps,
        seed: args.seed,
        out: args.out,
        evaluate,
        ..RunSpec::new(input, args.tracker.algorithm(args.rank))
    };
    let report = runner::run(&spec)?;
    for rep in &report.reps {
        match (&rep.error, rep.final_running_average()) {
            (Some(e), _) => println!("rep {}: failed: {e}", rep.rep),
            (None, Some(avg)) => println!("rep {}: final running average {avg:.6e}", rep.rep),
            (None, None) => println!("rep {}: no defined residuals", rep.rep),
        }
    }
    println!("{} {}: mean {:.6e}, std {:.6e}", report.algo, report.variant, report.mean(), report.std());
    Ok(())
}

fn synth(args: SynthArgs) -> olstec::Result<()> {
    let cfg = SynthConfig {
        l: args.l,
        w: args.w,
        t: args.t,
        rank: args.rank,
        alpha: args.alpha,
        noise: args.noise,
        ratio: args.ratio,
        seed: args.seed,
        mask_seed: None,
    };
    let (mut values, mut truth, mut masks) = (Vec::new(), Vec::new(), Vec::new());
    for s in SynthStream::new(&cfg)? {
        values.push(s.observation.values().to_owned());
        masks.push(s.observation.mask().to_owned());
        truth.push(s.truth);
    }
    io::write_tensor(&args.out, &Tensor3::new(cfg.l, cfg.w, values)?)?;
    if let Some(path) = args.truth_out {
        io::write_tensor(path, &Tensor3::new(cfg.l, cfg.w, truth)?)?;
    }
    if let Some(path) = args.mask_out {
        io::write_mask(path, &Tensor3::new(cfg.l, cfg.w, masks)?)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> olstec::Result<bool> {
    let base = TrackerConfig::new(1);
    let sgd = (args.tracker.algo == AlgoArg::Sgd).then(|| SgdConfig { stepsize: args.tracker.stepsize, ..SgdConfig::new(1) });
    let spec = BenchSpec {
        l: args.l,
        w: args.w,
        steps: args.t,
        warmup: args.warmup,
        ratio: args.mask_ratio,
        ranks: args.ranks,
        lambda: args.tracker.lambda.unwrap_or(base.lambda),
        mu: args.tracker.mu.unwrap_or(base.mu),
        sgd,
        seed: args.seed,
    };
    let report = runner::bench(&spec)?;
    println!("{:<20} {:>5} {:>14}", "algo", "rank", "sec/iter");
    for row in &report.rows {
        println!("{:<20} {:>5} {:>14.6e}", row.algo, row.rank, row.mean_iter_secs);
    }
    for (rank, ratio) in &report.ratios {
        println!("R={rank}: simplified/full = {:.1}%", 100.0 * ratio);
    }
    if let Some(path) = &args.out {
        let csv_err = |source| Error::Csv { path: path.clone(), source };
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in &report.rows {
            writer.serialize(row).map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    let decreasing = report.ratio_decreasing();
    if !decreasing {
        eprintln!("warning: simplified/full time ratio does not fall with rank");
    }
    Ok(decreasing)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Synth(args) => synth(args).map(|_| true),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
