//! Track a rotating rank-5 subspace from 30% of its entries and print the
//! normalized residual every 50 steps.

use olstec::metrics::{normalized_residual, ResidualMode, RunningAverage};
use olstec::synth::{SynthConfig, SynthStream};
use olstec::{Dims, Olstec, OnlineTracker, TrackerConfig};

fn main() -> olstec::Result<()> {
    let synth = SynthConfig { seed: 1, ..SynthConfig::default() };
    let dims = Dims::new(synth.l, synth.w, synth.rank)?;
    let mut tracker = Olstec::new(dims, TrackerConfig { lambda: 0.5, mu: 1e-3, seed: 2, ..TrackerConfig::new(5) })?;

    let mut avg = RunningAverage::new();
    for slice in SynthStream::new(&synth)? {
        let out = tracker.step(&slice.observation)?;
        let err = normalized_residual(out.prediction.view(), slice.truth.view(), ResidualMode::Full, None)?;
        let running = avg.push(err);
        if out.t % 50 == 0 {
            println!("t={:>3}  residual {:.3e}  running avg {:.3e}", out.t, err.unwrap_or(f64::NAN), running);
        }
    }
    Ok(())
}
