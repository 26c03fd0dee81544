use olstec::io::read_results_csv;
use olstec::runner::{bench, rep_output_path, run, summary_path, Algorithm, BenchSpec, InputSource, RunSpec};
use olstec::synth::SynthConfig;
use olstec::{SgdConfig, TrackerConfig};

fn small_synth() -> SynthConfig {
    SynthConfig { l: 12, w: 10, t: 40, rank: 3, ..Default::default() }
}

#[test]
fn reps_are_distinct_but_reproducible() {
    let spec = RunSpec {
        reps: 2,
        seed: 5,
        ..RunSpec::new(InputSource::Synth(small_synth()), Algorithm::Olstec(TrackerConfig::new(3)))
    };
    let first = run(&spec).unwrap();
    let again = run(&spec).unwrap();
    let residuals = |rep: &olstec::runner::RepResult| rep.records.iter().map(|r| r.normalized_residual).collect::<Vec<_>>();
    assert_ne!(residuals(&first.reps[0]), residuals(&first.reps[1]));
    for (a, b) in first.reps.iter().zip(&again.reps) {
        assert_eq!(residuals(a), residuals(b));
    }
}

#[test]
fn outputs_are_written_per_rep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res.csv");
    let spec = RunSpec {
        reps: 3,
        out: Some(out.clone()),
        ..RunSpec::new(InputSource::Synth(small_synth()), Algorithm::Sgd(SgdConfig::new(3)))
    };
    let report = run(&spec).unwrap();
    assert!(report.mean().is_finite());
    for rep in 0..3 {
        let rows = read_results_csv(rep_output_path(&out, rep, 3)).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows.iter().all(|r| r.algo == "sgd"));
        let mut sum = 0.0;
        for (k, row) in rows.iter().enumerate() {
            sum += row.residual;
            assert!((row.running_avg - sum / (k + 1) as f64).abs() <= 1e-12);
        }
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary_path(&out)).unwrap()).unwrap();
    assert_eq!(summary["reps"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_tensor_fails_before_tracking() {
    let input = InputSource::File {
        tensor: "/nonexistent/x.tns".into(),
        mask: olstec::io::MaskSpec::Ratio { ratio: 0.5, seed: 0 },
        truth: None,
    };
    let err = run(&RunSpec::new(input, Algorithm::Olstec(TrackerConfig::new(2)))).unwrap_err();
    assert_eq!(err.kind(), "io");
}

#[test]
fn bench_reports_every_rank() {
    let spec = BenchSpec { l: 20, w: 20, steps: 2, warmup: 1, ranks: vec![2, 4], ..Default::default() };
    let report = bench(&spec).unwrap();
    assert_eq!(report.ratios.len(), 2);
    assert!(report.mean_time("olstec-full", 4).unwrap() > 0.0);
}
