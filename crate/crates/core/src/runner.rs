//! Experiment orchestration: stream slices through a tracker, log metrics,
//! repeat over seeds, and time per-iteration cost across ranks.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{self, MaskGenerator, MaskSpec, Tensor3};
use crate::metrics::{normalized_residual, MetricsRecord, ResidualMode, RunningAverage};
use crate::sgd::{SgdConfig, SgdTracker};
use crate::synth::{SynthConfig, SynthStream};
use crate::tensor::{Dims, SliceObservation};
use crate::tracker::{Olstec, OnlineTracker, TrackerConfig, Variant};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Synth(SynthConfig),
    File {
        tensor: PathBuf,
        mask: MaskSpec,
        /// Ground truth; residuals use every entry when present.
        truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Olstec(TrackerConfig),
    Sgd(SgdConfig),
}

impl Algorithm {
    pub fn rank(&self) -> usize {
        match self {
            Algorithm::Olstec(c) => c.rank,
            Algorithm::Sgd(c) => c.rank,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Olstec(c) => c.validate(),
            Algorithm::Sgd(c) => c.validate(),
        }
    }

    /// Builds a tracker whose initial factors come from `seed`.
    pub fn build(&self, dims: Dims, seed: u64) -> Result<Box<dyn OnlineTracker + Send>> {
        Ok(match self {
            Algorithm::Olstec(c) => Box::new(Olstec::new(dims, TrackerConfig { seed, ..c.clone() })?),
            Algorithm::Sgd(c) => Box::new(SgdTracker::new(dims, SgdConfig { seed, ..c.clone() })?),
        })
    }

    pub fn labels(&self) -> (&'static str, String) {
        match self {
            Algorithm::Olstec(c) => ("olstec", c.variant.label()),
            Algorithm::Sgd(_) => ("sgd", "sgd".into()),
        }
    }
}

/// Which reconstruction the residual is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluate {
    /// `A[t]·diag(b[t])·C[t]ᵀ`.
    #[default]
    PostUpdate,
    /// `A[t−1]·diag(b[t])·C[t−1]ᵀ`.
    PreUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub input: InputSource,
    pub algorithm: Algorithm,
    pub reps: usize,
    pub seed: u64,
    /// Per-step CSV destination; see [`rep_output_path`].
    pub out: Option<PathBuf>,
    pub evaluate: Evaluate,
}

impl RunSpec {
    pub fn new(input: InputSource, algorithm: Algorithm) -> Self {
        RunSpec { input, algorithm, reps: 1, seed: 0, out: None, evaluate: Evaluate::PostUpdate }
    }
}

/// The three independent seeds of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RepSeeds {
    pub generator: u64,
    pub mask: u64,
    pub init: u64,
}

impl RepSeeds {
    pub fn derive(base: u64, rep: usize) -> Self {
        let s = base.wrapping_add(rep as u64);
        RepSeeds { generator: mix(s, 1), mask: mix(s, 2), init: mix(s, 3) }
    }
}

/// SplitMix64 finalizer over `seed` and a stream tag.
fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: usize,
    pub seeds: RepSeeds,
    pub records: Vec<MetricsRecord>,
    /// Cause of an aborted repetition.
    pub error: Option<String>,
}

impl RepResult {
    pub fn final_running_average(&self) -> Option<f64> {
        if self.error.is_some() {
            return None;
        }
        self.records.last().map(|r| r.running_average).filter(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub algo: &'static str,
    pub variant: String,
    pub reps: Vec<RepResult>,
}

impl RunReport {
    fn finals(&self) -> Vec<f64> {
        self.reps.iter().filter_map(RepResult::final_running_average).collect()
    }

    /// Mean final running-average error over completed repetitions.
    pub fn mean(&self) -> f64 {
        let v = self.finals();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Sample standard deviation of the final running-average error
    /// (0 for a single repetition).
    pub fn std(&self) -> f64 {
        let v = self.finals();
        if v.len() < 2 {
            return if v.is_empty() { f64::NAN } else { 0.0 };
        }
        let m = self.mean();
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }
}

/// Drives `tracker` over `stream`, one [`MetricsRecord`] per slice.
///
/// Residuals use every entry of the truth when it is supplied, otherwise the
/// observed entries of the slice.
pub fn track<I>(tracker: &mut dyn OnlineTracker, stream: I, evaluate: Evaluate) -> Result<Vec<MetricsRecord>>
where
    I: IntoIterator<Item = (SliceObservation, Option<Array2<f64>>)>,
{
    let mut acc = RunningAverage::new();
    let mut records = Vec::new();
    for (obs, truth) in stream {
        let start = Instant::now();
        let out = tracker.step(&obs)?;
        let elapsed = start.elapsed();
        let x = match evaluate {
            Evaluate::PostUpdate => &out.prediction,
            Evaluate::PreUpdate => &out.prediction_pre,
        };
        let residual = match &truth {
            Some(truth) => normalized_residual(x.view(), truth.view(), ResidualMode::Full, None)?,
            None => normalized_residual(x.view(), obs.values(), ResidualMode::ObservedOnly, Some(obs.mask()))?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("non-finite reconstruction at step {}", obs.t)));
        }
        let running_average = acc.push(residual);
        records.push(MetricsRecord {
            t: obs.t,
            normalized_residual: residual.unwrap_or(f64::NAN),
            running_average,
            elapsed,
        });
    }
    Ok(records)
}

/// Data loaded up front so that file errors surface before any tracking.
enum Prepared {
    Synth(SynthConfig),
    File {
        tensor: Tensor3<f64>,
        masks: PreparedMask,
        truth: Option<Tensor3<f64>>,
    },
}

enum PreparedMask {
    Ratio { ratio: f64, seed: u64 },
    Explicit(Tensor3<bool>),
}

fn prepare(spec: &RunSpec) -> Result<(Prepared, Dims)> {
    if spec.reps == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    spec.algorithm.validate()?;
    let rank = spec.algorithm.rank();
    match &spec.input {
        InputSource::Synth(cfg) => {
            cfg.validate()?;
            let dims = Dims::new(cfg.l, cfg.w, rank)?;
            Ok((Prepared::Synth(cfg.clone()), dims))
        }
        InputSource::File { tensor, mask, truth } => {
            let tensor = io::read_tensor(tensor)?;
            let dims = Dims::new(tensor.l, tensor.w, rank)?;
            let shape_check = |what: &str, l: usize, w: usize, t: usize| {
                if (l, w, t) != (tensor.l, tensor.w, tensor.t()) {
                    return Err(Error::Dimension(format!(
                        "{what} is {l}x{w}x{t} but the tensor is {}x{}x{}",
                        tensor.l,
                        tensor.w,
                        tensor.t()
                    )));
                }
                Ok(())
            };
            let masks = match mask {
                MaskSpec::Ratio { ratio, seed } => {
                    MaskGenerator::new(1, 1, *ratio, *seed)?;
                    PreparedMask::Ratio { ratio: *ratio, seed: *seed }
                }
                MaskSpec::File(path) => {
                    let m = io::read_mask(path)?;
                    shape_check("mask", m.l, m.w, m.t())?;
                    PreparedMask::Explicit(m)
                }
            };
            let truth = truth.as_ref().map(io::read_tensor).transpose()?;
            if let Some(t) = &truth {
                shape_check("truth", t.l, t.w, t.t())?;
            }
            Ok((Prepared::File { tensor, masks, truth }, dims))
        }
    }
}

fn run_rep(prepared: &Prepared, spec: &RunSpec, dims: Dims, rep: usize, seeds: RepSeeds) -> Result<Vec<MetricsRecord>> {
    let mut tracker = spec.algorithm.build(dims, seeds.init)?;
    match prepared {
        Prepared::Synth(cfg) => {
            let cfg = SynthConfig { seed: seeds.generator, mask_seed: Some(seeds.mask), ..cfg.clone() };
            let stream = SynthStream::new(&cfg)?.map(|s| (s.observation, Some(s.truth)));
            track(tracker.as_mut(), stream, spec.evaluate)
        }
        Prepared::File { tensor, masks, truth } => {
            let mut generator = match masks {
                PreparedMask::Ratio { ratio, seed } => {
                    Some(MaskGenerator::new(tensor.l, tensor.w, *ratio, seed.wrapping_add(rep as u64))?)
                }
                PreparedMask::Explicit(_) => None,
            };
            let mut slices = Vec::with_capacity(tensor.t());
            for (k, values) in tensor.slices.iter().enumerate() {
                let mask = match (&mut generator, masks) {
                    (Some(g), _) => g.next_mask(),
                    (None, PreparedMask::Explicit(m)) => m.slices[k].clone(),
                    (None, PreparedMask::Ratio { .. }) => unreachable!(),
                };
                let obs = SliceObservation::new(k + 1, values.clone(), mask)?;
                slices.push((obs, truth.as_ref().map(|t| t.slices[k].clone())));
            }
            track(tracker.as_mut(), slices, spec.evaluate)
        }
    }
}

/// Runs every repetition, writing CSVs and a JSON summary when `spec.out` is set.
///
/// Configuration and file errors abort before any tracking; a numerical
/// failure inside one repetition is logged and recorded in its
/// [`RepResult::error`], and the remaining repetitions still run.
pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let (prepared, dims) = prepare(spec)?;
    let (algo, variant) = spec.algorithm.labels();
    let mut reps = Vec::with_capacity(spec.reps);
    for rep in 0..spec.reps {
        let seeds = RepSeeds::derive(spec.seed, rep);
        let (records, error) = match run_rep(&prepared, spec, dims, rep, seeds) {
            Ok(records) => (records, None),
            Err(e) => {
                log::error!("repetition {rep} aborted: {e}");
                (Vec::new(), Some(e.to_string()))
            }
        };
        if let (Some(out), None) = (&spec.out, &error) {
            io::write_results_csv(rep_output_path(out, rep, spec.reps), &records, algo, &variant)?;
        }
        reps.push(RepResult { rep, seeds, records, error });
    }
    let report = RunReport { algo, variant, reps };
    if let Some(out) = &spec.out {
        write_summary(&summary_path(out), &report)?;
    }
    Ok(report)
}

/// `out` itself for a single repetition, `<stem>_rep<i>.<ext>` otherwise.
pub fn rep_output_path(out: &Path, rep: usize, reps: usize) -> PathBuf {
    if reps == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_rep{rep}.{}", ext.to_string_lossy()),
        None => format!("{stem}_rep{rep}"),
    };
    out.with_file_name(name)
}

/// `<stem>.summary.json` next to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.json"))
}

#[derive(Serialize)]
struct SummaryRep<'a> {
    rep: usize,
    seeds: RepSeeds,
    final_running_avg: Option<f64>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct Summary<'a> {
    algo: &'a str,
    variant: &'a str,
    reps: Vec<SummaryRep<'a>>,
    mean_running_avg: Option<f64>,
    std_running_avg: Option<f64>,
}

fn write_summary(path: &Path, report: &RunReport) -> Result<()> {
    let finite = |v: f64| v.is_finite().then_some(v);
    let summary = Summary {
        algo: report.algo,
        variant: &report.variant,
        reps: report
            .reps
            .iter()
            .map(|r| SummaryRep {
                rep: r.rep,
                seeds: r.seeds,
                final_running_avg: r.final_running_average(),
                error: r.error.as_deref(),
            })
            .collect(),
        mean_running_avg: finite(report.mean()),
        std_running_avg: finite(report.std()),
    };
    let text = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-iteration timing sweep over ranks on a synthetic stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub l: usize,
    pub w: usize,
    /// Timed steps per (algorithm, rank).
    pub steps: usize,
    /// Untimed steps before measuring.
    pub warmup: usize,
    pub ratio: f64,
    pub ranks: Vec<usize>,
    pub lambda: f64,
    pub mu: f64,
    pub sgd: Option<SgdConfig>,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            l: 150,
            w: 150,
            steps: 40,
            warmup: 3,
            ratio: 0.3,
            ranks: vec![10, 20, 40],
            lambda: 0.5,
            mu: 1e-3,
            sgd: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub algo: String,
    pub rank: usize,
    pub mean_iter_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// `(R, simplified / full)` per rank, in sweep order.
    pub ratios: Vec<(usize, f64)>,
}

impl BenchReport {
    /// Whether the simplified/full time ratio strictly falls as `R` grows.
    pub fn ratio_decreasing(&self) -> bool {
        let mut sorted = self.ratios.clone();
        sorted.sort_by_key(|(r, _)| *r);
        sorted.windows(2).all(|p| p[1].1 < p[0].1)
    }

    pub fn mean_time(&self, algo: &str, rank: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.algo == algo && r.rank == rank).map(|r| r.mean_iter_secs)
    }
}

/// Mean per-step seconds of each tracker. Trackers advance in lockstep so
/// that machine load drifts hit all of them alike.
fn time_steps(trackers: &mut [&mut dyn OnlineTracker], slices: &[SliceObservation], warmup: usize) -> Result<Vec<f64>> {
    let (warm, timed) = slices.split_at(warmup.min(slices.len()));
    for obs in warm {
        for tracker in trackers.iter_mut() {
            tracker.step(obs)?;
        }
    }
    let mut totals = vec![Duration::ZERO; trackers.len()];
    for obs in timed {
        for (tracker, total) in trackers.iter_mut().zip(&mut totals) {
            let start = Instant::now();
            tracker.step(obs)?;
            *total += start.elapsed();
        }
    }
    Ok(totals.iter().map(|d| d.as_secs_f64() / timed.len().max(1) as f64).collect())
}

pub fn bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.ranks.is_empty() {
        return Err(Error::InvalidConfig("bench needs at least one rank".into()));
    }
    if spec.steps == 0 {
        return Err(Error::InvalidConfig("bench needs at least one timed step".into()));
    }
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &rank in &spec.ranks {
        let synth = SynthConfig {
            l: spec.l,
            w: spec.w,
            t: spec.steps + spec.warmup,
            rank: rank.max(2),
            ratio: spec.ratio,
            seed: spec.seed,
            ..SynthConfig::default()
        };
        let slices: Vec<SliceObservation> = SynthStream::new(&synth)?.map(|s| s.observation).collect();
        let dims = Dims::new(spec.l, spec.w, rank)?;
        let olstec = |variant| {
            let cfg = TrackerConfig { lambda: spec.lambda, mu: spec.mu, variant, seed: spec.seed, ..TrackerConfig::new(rank) };
            Olstec::new(dims, cfg)
        };
        let mut full = olstec(Variant::Full)?;
        let mut simplified = olstec(Variant::Simplified)?;
        let mut sgd = match &spec.sgd {
            Some(cfg) => Some(SgdTracker::new(dims, SgdConfig { rank, seed: spec.seed, ..cfg.clone() })?),
            None => None,
        };
        let mut trackers: Vec<&mut dyn OnlineTracker> = vec![&mut full, &mut simplified];
        if let Some(t) = sgd.as_mut() {
            trackers.push(t);
        }
        let times = time_steps(&mut trackers, &slices, spec.warmup)?;
        for (algo, secs) in ["olstec-full", "olstec-simplified", "sgd"].iter().zip(&times) {
            rows.push(BenchRow { algo: algo.to_string(), rank, mean_iter_secs: *secs });
        }
        ratios.push((rank, times[1] / times[0]));
    }
    Ok(BenchReport { rows, ratios })
}
