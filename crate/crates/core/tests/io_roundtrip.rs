use ndarray::Array2;
use olstec::io::{
    decode_tensor, encode_mask, encode_tensor, generate_mask, import_csv_slices, read_mask, read_results_csv,
    read_tensor, write_csv_slice, write_mask, write_results_csv, write_tensor, Tensor3,
};
use olstec::metrics::{running_averages, MetricsRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Duration;

fn random_tensor(l: usize, w: usize, t: usize, seed: u64) -> Tensor3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slices = (0..t)
        .map(|_| Array2::from_shape_simple_fn((l, w), || rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-20..20))))
        .collect();
    Tensor3::new(l, w, slices).unwrap()
}

#[test]
fn tensor_file_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.tns");
    let tensor = random_tensor(2, 2, 3, 1);
    write_tensor(&path, &tensor).unwrap();
    let back = read_tensor(&path).unwrap();
    assert_eq!(back.t(), 3);
    for (a, b) in tensor.slices.iter().zip(&back.slices) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(std::fs::read(&path).unwrap().len(), 20 + 2 * 2 * 3 * 8);
}

#[test]
fn short_payload_is_rejected() {
    let bytes = encode_tensor(&random_tensor(2, 2, 3, 2)).unwrap();
    let short = &bytes[..bytes.len() - 8];
    let err = decode_tensor(short, Path::new("short.tns")).unwrap_err();
    assert_eq!(err.kind(), "format");
}

#[test]
fn mask_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.msk");
    let mask = generate_mask(7, 5, 4, 0.4, 9).unwrap();
    write_mask(&path, &mask).unwrap();
    assert_eq!(read_mask(&path).unwrap(), mask);
    assert_eq!(&encode_mask(&mask).unwrap()[..4], b"MSK3");
}

#[test]
fn csv_slices_import_then_binary_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let tensor = random_tensor(4, 3, 3, 5);
    let paths: Vec<_> = (0..3).map(|k| dir.path().join(format!("slice{k}.csv"))).collect();
    for (p, s) in paths.iter().zip(&tensor.slices) {
        write_csv_slice(p, s).unwrap();
    }
    let imported = import_csv_slices(&paths).unwrap();
    assert_eq!(imported, tensor);
    let bin = dir.path().join("imported.tns");
    write_tensor(&bin, &imported).unwrap();
    assert_eq!(read_tensor(&bin).unwrap(), tensor);
}

#[test]
fn results_csv_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let residuals: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..2.0)).collect();
    let avgs = running_averages(&residuals);
    let records: Vec<MetricsRecord> = residuals
        .iter()
        .zip(&avgs)
        .enumerate()
        .map(|(i, (&r, &a))| MetricsRecord {
            t: i + 1,
            normalized_residual: r,
            running_average: a,
            elapsed: Duration::from_micros(i as u64),
        })
        .collect();
    write_results_csv(&path, &records, "olstec", "full").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 501);
    assert_eq!(text.lines().next().unwrap(), "t,residual,running_avg,elapsed_ms,algo,variant");

    let rows = read_results_csv(&path).unwrap();
    let mut sum = 0.0;
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.residual, residuals[k]);
        sum += row.residual;
        let mean = sum / (k + 1) as f64;
        assert!((row.running_avg - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn prop_tensor_bytes_roundtrip(l in 1usize..6, w in 1usize..6, t in 0usize..4, seed in any::<u64>()) {
        let tensor = random_tensor(l, w, t, seed);
        let bytes = encode_tensor(&tensor).unwrap();
        let back = decode_tensor(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(encode_tensor(&back).unwrap(), bytes);
    }
}
