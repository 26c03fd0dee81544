//! OLSTEC against the first-order SGD baseline over 10 seeds, writing one
//! results CSV per repetition into a temporary directory.

use olstec::runner::{run, Algorithm, InputSource, RunSpec};
use olstec::synth::SynthConfig;
use olstec::{SgdConfig, TrackerConfig};

fn main() -> olstec::Result<()> {
    let synth = SynthConfig { ratio: 0.1, ..SynthConfig::default() };
    let dir = std::env::temp_dir().join("olstec-compare");
    std::fs::create_dir_all(&dir).map_err(|e| olstec::Error::Io { path: dir.clone(), source: e })?;

    let algorithms = [
        Algorithm::Olstec(TrackerConfig { lambda: 0.5, mu: 1e-3, ..TrackerConfig::new(5) }),
        Algorithm::Sgd(SgdConfig { lambda: 1e-3, mu: 0.1, stepsize: 10.0, ..SgdConfig::new(5) }),
    ];
    for algorithm in algorithms {
        let out = dir.join(format!("{}.csv", algorithm.labels().0));
        let spec = RunSpec { reps: 10, out: Some(out), ..RunSpec::new(InputSource::Synth(synth.clone()), algorithm) };
        let report = run(&spec)?;
        println!("{:<7} {:.4} ± {:.4}", report.algo, report.mean(), report.std());
    }
    println!("per-step CSVs in {}", dir.display());
    Ok(())
}
