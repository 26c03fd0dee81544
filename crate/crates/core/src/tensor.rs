//! Slice containers and the CP slice model `X = A · diag(b) · Cᵀ`.
//!
//! Everything is dense and row-major. Indices are 0-based throughout the API.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const INIT_STREAM: u64 = 1;

/// Slice geometry: `l` rows, `w` columns, CP rank `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub l: usize,
    pub w: usize,
    pub r: usize,
}

impl Dims {
    pub fn new(l: usize, w: usize, r: usize) -> Result<Self> {
        if l == 0 || w == 0 {
            return Err(Error::Dimension(format!("slice must be non-empty, got {l}x{w}")));
        }
        if r == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if r > l.min(w) {
            log::warn!("rank {r} exceeds min(L, W) = {}; the model is over-parameterized", l.min(w));
        }
        Ok(Dims { l, w, r })
    }
}

/// One time step of the stream: values plus the mask of revealed entries.
///
/// Entries of `values` where `mask` is false are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceObservation {
    /// 1-based step index.
    pub t: usize,
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl SliceObservation {
    pub fn new(t: usize, values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Dimension(format!(
                "values are {:?} but mask is {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        Ok(SliceObservation {
            t,
            values: values.as_standard_layout().into_owned(),
            mask: mask.as_standard_layout().into_owned(),
        })
    }

    /// A slice with every entry observed.
    pub fn fully_observed(t: usize, values: Array2<f64>) -> Self {
        let mask = Array2::from_elem(values.dim(), true);
        SliceObservation { t, values: values.as_standard_layout().into_owned(), mask }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn mask(&self) -> ArrayView2<'_, bool> {
        self.mask.view()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub(crate) fn values_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub(crate) fn mask_slice(&self) -> &[bool] {
        self.mask.as_slice().expect("standard layout")
    }
}

/// Current CP factors: `A` (L×R), `C` (W×R) and the slice weights `b` (R).
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    pub(crate) a: Array2<f64>,
    pub(crate) c: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

impl CpFactors {
    pub fn new(a: Array2<f64>, c: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        let r = b.len();
        if a.ncols() != r || c.ncols() != r {
            return Err(Error::Dimension(format!(
                "A has {} columns, C has {} columns, b has length {r}",
                a.ncols(),
                c.ncols()
            )));
        }
        if r == 0 || a.nrows() == 0 || c.nrows() == 0 {
            return Err(Error::Dimension("factors must be non-empty".into()));
        }
        if !(a.iter().chain(c.iter()).chain(b.iter()).all(|v| v.is_finite())) {
            return Err(Error::InvalidConfig("factor entries must be finite".into()));
        }
        Ok(CpFactors {
            a: a.as_standard_layout().into_owned(),
            c: c.as_standard_layout().into_owned(),
            b,
        })
    }

    /// `A`, `C`, `b` drawn i.i.d. standard normal, in that order.
    ///
    /// Draws come from a ChaCha stream separate from the synthetic generator's,
    /// so a tracker and a stream sharing a seed do not start out identical.
    pub fn random(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let a = Array2::from_shape_simple_fn((dims.l, dims.r), &mut normal);
        let c = Array2::from_shape_simple_fn((dims.w, dims.r), &mut normal);
        let b = Array1::from_shape_simple_fn(dims.r, &mut normal);
        CpFactors { a, c, b }
    }

    pub fn a(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn c(&self) -> ArrayView2<'_, f64> {
        self.c.view()
    }

    pub fn b(&self) -> ArrayView1<'_, f64> {
        self.b.view()
    }

    pub fn rank(&self) -> usize {
        self.b.len()
    }

    pub fn dims(&self) -> Dims {
        Dims { l: self.a.nrows(), w: self.c.nrows(), r: self.b.len() }
    }

    /// `A · diag(b) · Cᵀ` with the stored weights.
    pub fn reconstruct(&self) -> Array2<f64> {
        reconstruct_with(self.a.view(), self.c.view(), self.b.view())
    }
}

/// `X[l, w] = Σ_r A[l, r] · b[r] · C[w, r]`.
pub fn reconstruct_slice(factors: &CpFactors) -> Array2<f64> {
    factors.reconstruct()
}

pub(crate) fn reconstruct_with(
    a: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Array2<f64> {
    let scaled = &a * &b;
    scaled.dot(&c.t())
}

/// Hadamard product of row `l` of `A` and row `w` of `C`.
///
/// This is the regressor of entry `(l, w)` in the least-squares problem for `b`.
pub fn entry_product(factors: &CpFactors, l: usize, w: usize) -> Result<Array1<f64>> {
    let dims = factors.dims();
    if l >= dims.l || w >= dims.w {
        return Err(Error::Index(format!("entry ({l}, {w}) outside {}x{}", dims.l, dims.w)));
    }
    Ok(&factors.a.row(l) * &factors.c.row(w))
}

/// Sum of `(X − Y)²` over entries where `mask` is true.
pub fn masked_frobenius_sq(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, bool>,
) -> Result<f64> {
    if x.dim() != y.dim() || x.dim() != mask.dim() {
        return Err(Error::Dimension(format!(
            "X {:?}, Y {:?}, mask {:?}",
            x.dim(),
            y.dim(),
            mask.dim()
        )));
    }
    let mut acc = 0.0;
    Zip::from(&x).and(&y).and(&mask).for_each(|&xv, &yv, &m| {
        if m {
            let d = xv - yv;
            acc += d * d;
        }
    });
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factors(l: usize, w: usize, r: usize, seed: u64) -> CpFactors {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((l, r), |_| rng.random_range(-1.0..1.0));
        let c = Array2::from_shape_fn((w, r), |_| rng.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(r, |_| rng.random_range(-1.0..1.0));
        CpFactors::new(a, c, b).unwrap()
    }

    #[test]
    fn reconstruct_identity_and_diagonal() {
        let f = CpFactors::new(array![[1.0]], array![[1.0]], array![1.0]).unwrap();
        assert_eq!(reconstruct_slice(&f), array![[1.0]]);

        let eye = array![[1.0, 0.0], [0.0, 1.0]];
        let f = CpFactors::new(eye.clone(), eye, array![2.0, 3.0]).unwrap();
        assert_eq!(reconstruct_slice(&f), array![[2.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn reconstruct_matches_triple_loop() {
        let f = random_factors(4, 3, 2, 7);
        let x = reconstruct_slice(&f);
        for l in 0..4 {
            for w in 0..3 {
                let mut s = 0.0;
                for r in 0..2 {
                    s += f.a[[l, r]] * f.b[r] * f.c[[w, r]];
                }
                assert!((x[[l, w]] - s).abs() <= 1e-14 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn factor_shape_mismatch_is_rejected() {
        let err = CpFactors::new(Array2::zeros((3, 2)), Array2::zeros((3, 3)), Array1::zeros(2));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn entry_product_cases() {
        let f = CpFactors::new(array![[1.0, 2.0]], array![[3.0, 4.0]], array![1.0, 1.0]).unwrap();
        assert_eq!(entry_product(&f, 0, 0).unwrap(), array![3.0, 8.0]);

        let f = CpFactors::new(array![[0.0, 0.0]], array![[3.0, 4.0]], array![1.0, 1.0]).unwrap();
        assert_eq!(entry_product(&f, 0, 0).unwrap(), array![0.0, 0.0]);

        assert!(matches!(entry_product(&f, 1, 0), Err(Error::Index(_))));
        assert!(matches!(entry_product(&f, 0, 1), Err(Error::Index(_))));
    }

    #[test]
    fn entry_product_matches_component_loop() {
        let f = random_factors(3, 4, 5, 11);
        let g = entry_product(&f, 2, 1).unwrap();
        for r in 0..5 {
            assert_eq!(g[r], f.a[[2, r]] * f.c[[1, r]]);
        }
    }

    #[test]
    fn masked_frobenius_cases() {
        let x = array![[1.0, 2.0]];
        let y = array![[0.0, 0.0]];
        let mask = array![[true, false]];
        assert_eq!(masked_frobenius_sq(x.view(), y.view(), mask.view()).unwrap(), 1.0);
        assert_eq!(masked_frobenius_sq(x.view(), x.view(), mask.view()).unwrap(), 0.0);

        let bad = array![[true]];
        assert!(masked_frobenius_sq(x.view(), y.view(), bad.view()).is_err());
    }

    #[test]
    fn masked_frobenius_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Array2<f64> = Array2::from_shape_fn((5, 5), |_| rng.random_range(-2.0..2.0));
        let y: Array2<f64> = Array2::from_shape_fn((5, 5), |_| rng.random_range(-2.0..2.0));
        let mask = Array2::from_shape_fn((5, 5), |_| rng.random_bool(0.4));
        let mut expect = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if mask[[i, j]] {
                    expect += (x[[i, j]] - y[[i, j]]).powi(2);
                }
            }
        }
        let got = masked_frobenius_sq(x.view(), y.view(), mask.view()).unwrap();
        assert!((got - expect).abs() <= 1e-14 * expect);
    }

    #[test]
    fn observation_rejects_mismatched_mask() {
        let r = SliceObservation::new(1, Array2::zeros((2, 3)), Array2::from_elem((3, 2), true));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reconstruct_is_linear_in_b(seed in any::<u64>(), l in 1usize..6, w in 1usize..6, r in 1usize..4) {
                let f = random_factors(l, w, r, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
                let b2 = Array1::from_shape_fn(r, |_| rng.random_range(-1.0..1.0));
                let sum = reconstruct_with(f.a(), f.c(), (&f.b + &b2).view());
                let parts = reconstruct_with(f.a(), f.c(), f.b()) + reconstruct_with(f.a(), f.c(), b2.view());
                for (s, p) in sum.iter().zip(parts.iter()) {
                    prop_assert!((s - p).abs() <= 1e-12 * s.abs().max(p.abs()).max(1e-300) + 1e-15);
                }
            }

            #[test]
            fn reconstruct_entry_is_g_dot_b(seed in any::<u64>(), l in 1usize..6, w in 1usize..6, r in 1usize..4) {
                let f = random_factors(l, w, r, seed);
                let x = reconstruct_slice(&f);
                for i in 0..l {
                    for j in 0..w {
                        let v = entry_product(&f, i, j).unwrap().dot(&f.b);
                        prop_assert!((x[[i, j]] - v).abs() <= 1e-12 * v.abs().max(1.0));
                    }
                }
            }
        }
    }
}
