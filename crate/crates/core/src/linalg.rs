//! Small dense symmetric positive-definite kernels for the per-row solves.
//!
//! Matrices are `n×n`, stored row-major in flat slices. Only the lower
//! triangle is read by the factorization; rank-one accumulation writes the
//! lower triangle and [`mirror_lower`] restores full symmetry afterwards.

use crate::error::{Error, Result};

/// Overwrites the lower triangle of `m` with its Cholesky factor `L`
/// (`m = L·Lᵀ`). The strict upper triangle is left untouched.
///
/// Returns the failing pivot index when `m` is not positive definite.
pub fn cholesky_in_place(m: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    debug_assert_eq!(m.len(), n * n);
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L·Lᵀ·x = rhs` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve_in_place(factor: &[f64], n: usize, x: &mut [f64]) {
    debug_assert_eq!(x.len(), n);
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= factor[i * n + k] * x[k];
        }
        x[i] = s / factor[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= factor[k * n + i] * x[k];
        }
        x[i] = s / factor[i * n + i];
    }
}

/// `m += alpha · v·vᵀ`, lower triangle only.
#[inline]
pub fn syr_lower(m: &mut [f64], n: usize, alpha: f64, v: &[f64]) {
    for i in 0..n {
        let av = alpha * v[i];
        let row = &mut m[i * n..i * n + i + 1];
        for (mij, vj) in row.iter_mut().zip(&v[..=i]) {
            *mij += av * vj;
        }
    }
}

/// Copies the lower triangle onto the upper one.
pub fn mirror_lower(m: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            m[i * n + j] = m[j * n + i];
        }
    }
}

/// `m += delta · I`.
pub fn add_diagonal(m: &mut [f64], n: usize, delta: f64) {
    for i in 0..n {
        m[i * n + i] += delta;
    }
}

/// Reusable workspace for repeated `M·x = rhs` solves with SPD `M`.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    n: usize,
    work: Vec<f64>,
}

impl SpdSolver {
    pub fn new(n: usize) -> Self {
        SpdSolver { n, work: vec![0.0; n * n] }
    }

    /// Solves `m · x = rhs` in place without modifying `m`.
    pub fn solve(&mut self, m: &[f64], rhs: &mut [f64], context: &str) -> Result<()> {
        if self.n == 1 {
            if !(m[0] > 0.0) {
                return Err(Error::NotPositiveDefinite { context: format!("{context}, pivot 0") });
            }
            rhs[0] /= m[0];
            return Ok(());
        }
        self.work.copy_from_slice(m);
        cholesky_in_place(&mut self.work, self.n).map_err(|pivot| Error::NotPositiveDefinite {
            context: format!("{context}, pivot {pivot}"),
        })?;
        cholesky_solve_in_place(&self.work, self.n, rhs);
        Ok(())
    }
}
