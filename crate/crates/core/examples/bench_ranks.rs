//! Per-iteration cost of full vs simplified OLSTEC as the rank grows.
//!
//! Build with `--release`; debug timings are not meaningful.

use olstec::runner::{bench, BenchSpec};
use olstec::SgdConfig;

fn main() -> olstec::Result<()> {
    let spec = BenchSpec { sgd: Some(SgdConfig::new(1)), ..BenchSpec::default() };
    let report = bench(&spec)?;
    for row in &report.rows {
        println!("{:<18} R={:<3} {:.3} ms/iter", row.algo, row.rank, 1e3 * row.mean_iter_secs);
    }
    for (rank, ratio) in &report.ratios {
        println!("R={rank:<3} simplified/full {:.1}%", 100.0 * ratio);
    }
    println!("ratio falls with R: {}", report.ratio_decreasing());
    Ok(())
}
