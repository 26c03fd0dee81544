//! File formats.
//!
//! Binary tensors (`TNS3`) and masks (`MSK3`) share a 20-byte header:
//!
//! | bytes  | field                        |
//! |--------|------------------------------|
//! | 0..4   | magic, `TNS3` or `MSK3`      |
//! | 4..8   | version, `u32` LE, always 1  |
//! | 8..12  | `L`, `u32` LE                |
//! | 12..16 | `W`, `u32` LE                |
//! | 16..20 | `T`, `u32` LE                |
//!
//! followed by `T` slices in time order, each `L×W` row-major. Tensor
//! entries are `f64` little-endian; mask entries are single bytes `0` or `1`.
//!
//! Run results are CSV with header `t,residual,running_avg,elapsed_ms,algo,variant`
//! and reals printed with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

pub const TENSOR_MAGIC: &[u8; 4] = b"TNS3";
pub const MASK_MAGIC: &[u8; 4] = b"MSK3";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// A stack of equally sized slices, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    pub l: usize,
    pub w: usize,
    pub slices: Vec<Array2<T>>,
}

impl<T> Tensor3<T> {
    pub fn new(l: usize, w: usize, slices: Vec<Array2<T>>) -> Result<Self> {
        if let Some((i, s)) = slices.iter().enumerate().find(|(_, s)| s.dim() != (l, w)) {
            return Err(Error::Dimension(format!("slice {i} is {:?}, expected ({l}, {w})", s.dim())));
        }
        Ok(Tensor3 { l, w, slices })
    }

    pub fn t(&self) -> usize {
        self.slices.len()
    }
}

fn header(magic: &[u8; 4], l: usize, w: usize, t: usize) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, name: &str| {
        u32::try_from(v).map_err(|_| Error::Dimension(format!("{name} = {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(l, "L")?.to_le_bytes());
    out.extend_from_slice(&to_u32(w, "W")?.to_le_bytes());
    out.extend_from_slice(&to_u32(t, "T")?.to_le_bytes());
    Ok(out)
}

/// Validates the header and payload length; returns `(L, W, T)`.
fn parse_header(bytes: &[u8], magic: &[u8; 4], entry_size: usize, path: &Path) -> Result<(usize, usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(
            path,
            format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&bytes[0..4]), String::from_utf8_lossy(magic)),
        ));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let version = field(4);
    if version != FORMAT_VERSION as usize {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let (l, w, t) = (field(8), field(12), field(16));
    let expected = l
        .checked_mul(w)
        .and_then(|v| v.checked_mul(t))
        .and_then(|v| v.checked_mul(entry_size))
        .ok_or_else(|| Error::format(path, "declared size overflows"))?;
    let actual = bytes.len() - HEADER_LEN;
    if actual != expected {
        return Err(Error::format(
            path,
            format!("header declares {l}x{w}x{t} ({expected} payload bytes) but payload has {actual}"),
        ));
    }
    Ok((l, w, t))
}

pub fn encode_tensor(tensor: &Tensor3<f64>) -> Result<Vec<u8>> {
    let mut out = header(TENSOR_MAGIC, tensor.l, tensor.w, tensor.t())?;
    out.reserve(tensor.l * tensor.w * tensor.t() * 8);
    for slice in &tensor.slices {
        for v in slice.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// `path` is only used in error messages.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor3<f64>> {
    let (l, w, t) = parse_header(bytes, TENSOR_MAGIC, 8, path)?;
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut slices = Vec::with_capacity(t);
    for k in 0..t {
        let data: Vec<f64> = values.by_ref().take(l * w).collect();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("non-finite value at slice {k}, entry {pos}")));
        }
        slices.push(Array2::from_shape_vec((l, w), data).expect("length checked"));
    }
    Ok(Tensor3 { l, w, slices })
}

pub fn encode_mask(mask: &Tensor3<bool>) -> Result<Vec<u8>> {
    let mut out = header(MASK_MAGIC, mask.l, mask.w, mask.t())?;
    for slice in &mask.slices {
        out.extend(slice.iter().map(|&m| m as u8));
    }
    Ok(out)
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<Tensor3<bool>> {
    let (l, w, t) = parse_header(bytes, MASK_MAGIC, 1, path)?;
    let payload = &bytes[HEADER_LEN..];
    if let Some(pos) = payload.iter().position(|&b| b > 1) {
        return Err(Error::format(path, format!("mask byte {} at offset {pos} is not 0 or 1", payload[pos])));
    }
    let slices = payload
        .chunks_exact((l * w).max(1))
        .take(t)
        .map(|c| Array2::from_shape_vec((l, w), c.iter().map(|&b| b == 1).collect()).expect("length checked"))
        .collect();
    Ok(Tensor3 { l, w, slices })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3<f64>> {
    let path = path.as_ref();
    decode_tensor(&read_bytes(path)?, path)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor3<f64>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_tensor(tensor)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Tensor3<bool>> {
    let path = path.as_ref();
    decode_mask(&read_bytes(path)?, path)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Tensor3<bool>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask)?)
}

/// Where a stream's observation mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    /// Bernoulli(ratio) per entry per slice.
    Ratio { ratio: f64, seed: u64 },
    /// Explicit `MSK3` file.
    File(PathBuf),
}

/// Seeded i.i.d. Bernoulli(ρ) masks, one slice at a time.
#[derive(Debug, Clone)]
pub struct MaskGenerator {
    l: usize,
    w: usize,
    ratio: f64,
    rng: ChaCha8Rng,
}

impl MaskGenerator {
    pub fn new(l: usize, w: usize, ratio: f64, seed: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("observation ratio must lie in (0, 1], got {ratio}")));
        }
        Ok(MaskGenerator { l, w, ratio, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn next_mask(&mut self) -> Array2<bool> {
        let (ratio, rng) = (self.ratio, &mut self.rng);
        Array2::from_shape_simple_fn((self.l, self.w), || rng.random_bool(ratio))
    }
}

/// `t` masks of size `l×w`, deterministic under `seed`.
pub fn generate_mask(l: usize, w: usize, t: usize, ratio: f64, seed: u64) -> Result<Tensor3<bool>> {
    let mut generator = MaskGenerator::new(l, w, ratio, seed)?;
    let slices = (0..t).map(|_| generator.next_mask()).collect();
    Ok(Tensor3 { l, w, slices })
}

/// Reads one plain numeric grid (comma separated, no header) as a slice.
pub fn read_csv_slice(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::format(path, format!("row {rows} has {} columns, expected {c}", record.len())))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(path, format!("row {rows}: cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("row {rows}: non-finite value {field:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(path, "empty grid"))?;
    Ok(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"))
}

/// Imports one CSV grid per slice, in the given order.
pub fn import_csv_slices<P: AsRef<Path>>(paths: &[P]) -> Result<Tensor3<f64>> {
    let slices = paths.iter().map(read_csv_slice).collect::<Result<Vec<_>>>()?;
    let (l, w) = slices
        .first()
        .map(|s| s.dim())
        .ok_or_else(|| Error::InvalidConfig("no CSV slices given".into()))?;
    Tensor3::new(l, w, slices)
}

/// Writes a slice as a CSV grid with round-trip exact reals.
pub fn write_csv_slice(path: impl AsRef<Path>, slice: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for row in slice.rows() {
        let fields: Vec<String> = row.iter().map(|v| format_real(*v)).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub const RESULTS_HEADER: &str = "t,residual,running_avg,elapsed_ms,algo,variant";

/// Writes one row per record under [`RESULTS_HEADER`].
pub fn write_results_csv(path: impl AsRef<Path>, records: &[MetricsRecord], algo: &str, variant: &str) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{RESULTS_HEADER}")?;
        for r in records {
            writeln!(
                out,
                "{},{},{},{},{algo},{variant}",
                r.t,
                format_real(r.normalized_residual),
                format_real(r.running_average),
                format_real(r.elapsed.as_secs_f64() * 1e3),
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// One parsed line of a results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub t: usize,
    pub residual: f64,
    pub running_avg: f64,
    pub elapsed_ms: f64,
    pub algo: String,
    pub variant: String,
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if headers != RESULTS_HEADER {
        return Err(Error::format(path, format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad = |what: &str| Error::format(path, format!("line {}: bad {what}", i + 2));
        let real = |k: usize, what: &str| record[k].parse::<f64>().map_err(|_| bad(what));
        rows.push(ResultRow {
            t: record[0].parse().map_err(|_| bad("t"))?,
            residual: real(1, "residual")?,
            running_avg: real(2, "running_avg")?,
            elapsed_ms: real(3, "elapsed_ms")?,
            algo: record[4].to_string(),
            variant: record[5].to_string(),
        });
    }
    Ok(rows)
}
