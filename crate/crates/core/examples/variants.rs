//! Full, simplified (diagonal) and truncated-window OLSTEC on one stream.

use olstec::runner::{run, Algorithm, InputSource, RunSpec};
use olstec::synth::SynthConfig;
use olstec::{TrackerConfig, UpdateOrdering, Variant};

fn main() -> olstec::Result<()> {
    let synth = SynthConfig { t: 300, ratio: 0.3, ..SynthConfig::default() };
    let base = TrackerConfig { lambda: 0.5, mu: 1e-3, ..TrackerConfig::new(5) };
    let configs = [
        ("full", base.clone()),
        ("full, jacobi", TrackerConfig { ordering: UpdateOrdering::Jacobi, ..base.clone() }),
        ("simplified", TrackerConfig { variant: Variant::Simplified, ..base.clone() }),
        ("window 5", TrackerConfig { variant: Variant::Windowed(5), ..base.clone() }),
        ("window 20", TrackerConfig { variant: Variant::Windowed(20), ..base }),
    ];
    for (name, cfg) in configs {
        let spec = RunSpec { reps: 3, ..RunSpec::new(InputSource::Synth(synth.clone()), Algorithm::Olstec(cfg)) };
        let report = run(&spec)?;
        println!("{name:<14} final running avg {:.4} ± {:.4}", report.mean(), report.std());
    }
    Ok(())
}
