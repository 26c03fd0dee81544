//! Bring a dataset stored as one CSV grid per time step into the TNS3 format
//! and track it with a random 40% mask.
//!
//! The CSV files here are generated on the fly; point `paths` at real slices
//! (traffic matrices, video frames, ...) to use your own data.

use olstec::io::{import_csv_slices, write_csv_slice, write_tensor, MaskSpec};
use olstec::runner::{run, Algorithm, InputSource, RunSpec};
use olstec::synth::{SynthConfig, SynthStream};
use olstec::TrackerConfig;

fn main() -> olstec::Result<()> {
    let dir = std::env::temp_dir().join("olstec-csv");
    std::fs::create_dir_all(&dir).map_err(|e| olstec::Error::Io { path: dir.clone(), source: e })?;

    let synth = SynthConfig { l: 30, w: 20, t: 100, rank: 3, ratio: 1.0, ..SynthConfig::default() };
    let mut paths = Vec::new();
    for slice in SynthStream::new(&synth)? {
        let path = dir.join(format!("slice{:04}.csv", slice.observation.t));
        write_csv_slice(&path, &slice.observation.values().to_owned())?;
        paths.push(path);
    }

    let tensor = import_csv_slices(&paths)?;
    let tns = dir.join("data.tns");
    write_tensor(&tns, &tensor)?;
    println!("imported {} slices of {}x{} into {}", tensor.t(), tensor.l, tensor.w, tns.display());

    let input = InputSource::File { tensor: tns, mask: MaskSpec::Ratio { ratio: 0.4, seed: 7 }, truth: None };
    let report = run(&RunSpec::new(input, Algorithm::Olstec(TrackerConfig::new(3))))?;
    let records = &report.reps[0].records;
    for r in records.iter().step_by(20) {
        println!("t={:>3}  observed-entry residual {:.3e}", r.t, r.normalized_residual);
    }
    Ok(())
}
