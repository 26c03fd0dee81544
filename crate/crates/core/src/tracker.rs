//! The OLSTEC tracker.
//!
//! Each step first solves the slice weights `b[t]` in closed form against
//! the previous factors, then runs one forgetting-factor RLS update per row
//! of `A` (regressors `α_w = diag(b[t])·c^w[t−1]`) followed by one per row
//! of `C` (regressors `β^l = diag(b[t])·a^l`).
//!
//! Every row keeps its own normal-equation matrix `M` (`RA_l` or `RC_w`):
//!
//! ```text
//! M[t] = λ·M[t−1] + Σ_obs v·vᵀ + μ(1−λ)·I
//! x[t] = x[t−1] + M[t]⁻¹ · ( −μ(1−λ)·x[t−1] + Σ_obs (y − vᵀx[t−1])·v )
//! ```
//!
//! which keeps `M[t]·x[t]` equal to the exponentially weighted right-hand
//! side `s[t] = λ·s[t−1] + Σ_obs y·v` without ever storing `s`.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, mirror_lower, syr_lower, SpdSolver};
use crate::tensor::{masked_frobenius_sq, reconstruct_with, CpFactors, Dims, SliceObservation};

/// Initial scale of the per-row RLS matrices: `M[0] = (1/γ)·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `γ = 1/μ`, so the initial matrix equals the steady-state regularizer.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Dense `R×R` matrix per row.
    Full,
    /// Diagonal of the per-row matrix only; `O(R)` per row solve.
    Simplified,
    /// Full recursion restricted to the last `V` slices.
    Windowed(usize),
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Full => "full".into(),
            Variant::Simplified => "simplified".into(),
            Variant::Windowed(v) => format!("window{v}"),
        }
    }
}

/// Which rows of `A` the column regressors `β^l` are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrdering {
    /// The freshly updated `A[t]`.
    #[default]
    GaussSeidel,
    /// The previous `A[t−1]`.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub rank: usize,
    /// Forgetting factor λ in (0, 1].
    pub lambda: f64,
    /// Constant regularizer μ_r > 0.
    pub mu: f64,
    pub gamma: Gamma,
    pub variant: Variant,
    pub ordering: UpdateOrdering,
    /// Seed for the Gaussian initial factors.
    pub seed: u64,
}

impl TrackerConfig {
    /// Defaults: λ = 0.5, μ_r = 1e-3, γ = 1/μ_r, full variant, Gauss–Seidel.
    pub fn new(rank: usize) -> Self {
        TrackerConfig {
            rank,
            lambda: 0.5,
            mu: 1e-3,
            gamma: Gamma::Auto,
            variant: Variant::Full,
            ordering: UpdateOrdering::GaussSeidel,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", self.mu)));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!("gamma must be positive, got {g}")));
            }
        }
        if self.variant == Variant::Windowed(0) {
            return Err(Error::InvalidConfig("window length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn gamma_value(&self) -> f64 {
        match self.gamma {
            Gamma::Auto => 1.0 / self.mu,
            Gamma::Value(g) => g,
        }
    }
}

/// Second-order state of one factor row.
#[derive(Debug, Clone, PartialEq)]
pub enum RowRlsState {
    /// Dense symmetric positive-definite `R×R` matrix.
    Full(Array2<f64>),
    /// Diagonal entries only (simplified variant).
    Diagonal(Array1<f64>),
}

/// Scalars shared by every row update of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsParams {
    pub lambda: f64,
    pub mu: f64,
    /// `λ^V` weight of the slice leaving a truncated window; unused otherwise.
    pub window_weight: f64,
}

impl RlsParams {
    fn decay_mu(&self) -> f64 {
        self.mu * (1.0 - self.lambda)
    }
}

impl RowRlsState {
    pub fn identity_scaled(variant: Variant, rank: usize, scale: f64) -> Self {
        match variant {
            Variant::Simplified => RowRlsState::Diagonal(Array1::from_elem(rank, scale)),
            _ => RowRlsState::Full(Array2::eye(rank) * scale),
        }
    }

    /// Dense view of the state; the diagonal variant is expanded.
    pub fn matrix(&self) -> Array2<f64> {
        match self {
            RowRlsState::Full(m) => m.clone(),
            RowRlsState::Diagonal(d) => Array2::from_diag(d),
        }
    }

    /// One RLS step for a single factor row `x`.
    ///
    /// `current` holds `(y, v)` pairs for this step's observed entries of the
    /// row; `dropped` holds the pairs of the slice leaving a truncated window
    /// and must be empty for the untruncated recursion. Regressors are
    /// length-`R` slices.
    pub fn update<'a>(
        &mut self,
        x: &mut [f64],
        current: impl IntoIterator<Item = (f64, &'a [f64])>,
        dropped: impl IntoIterator<Item = (f64, &'a [f64])>,
        params: &RlsParams,
        solver: &mut SpdSolver,
    ) -> Result<()> {
        let n = x.len();
        let decay_mu = params.decay_mu();
        let mut rhs: Vec<f64> = x.iter().map(|xi| -decay_mu * xi).collect();
        match self {
            RowRlsState::Full(m) => {
                let m = m.as_slice_mut().expect("standard layout");
                m.iter_mut().for_each(|e| *e *= params.lambda);
                for (y, v) in current {
                    syr_lower(m, n, 1.0, v);
                    let res = y - dot(v, x);
                    axpy(res, v, &mut rhs);
                }
                for (y, v) in dropped {
                    syr_lower(m, n, -params.window_weight, v);
                    let res = y - dot(v, x);
                    axpy(-params.window_weight * res, v, &mut rhs);
                }
                mirror_lower(m, n);
                add_diagonal(m, n, decay_mu);
                solver.solve(m, &mut rhs, "row RLS update")?;
            }
            RowRlsState::Diagonal(d) => {
                let d = d.as_slice_mut().expect("contiguous");
                d.iter_mut().for_each(|e| *e *= params.lambda);
                for (y, v) in current {
                    for (di, vi) in d.iter_mut().zip(v) {
                        *di += vi * vi;
                    }
                    let res = y - dot(v, x);
                    axpy(res, v, &mut rhs);
                }
                for (y, v) in dropped {
                    for (di, vi) in d.iter_mut().zip(v) {
                        *di -= params.window_weight * vi * vi;
                    }
                    let res = y - dot(v, x);
                    axpy(-params.window_weight * res, v, &mut rhs);
                }
                for (ri, di) in rhs.iter_mut().zip(d.iter_mut()) {
                    *di += decay_mu;
                    *ri /= *di;
                }
            }
        }
        for (xi, zi) in x.iter_mut().zip(&rhs) {
            *xi += zi;
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Ridge solution for the slice weights against fixed factors:
///
/// `b = (μ·I + Σ_Ω g·gᵀ)⁻¹ · Σ_Ω y·g`, with `g_{l,w} = a^l ⊛ c^w`.
///
/// Uses a Cholesky solve. With `mu == 0` the observed Gram matrix must be
/// nonsingular, otherwise [`Error::NotPositiveDefinite`] is returned.
pub fn solve_b(factors: &CpFactors, obs: &SliceObservation, mu: f64) -> Result<Array1<f64>> {
    let dims = factors.dims();
    check_dims(dims, obs)?;
    let r = dims.r;
    let a = factors.a.as_slice().expect("standard layout");
    let c = factors.c.as_slice().expect("standard layout");
    let values = obs.values_slice();
    let mask = obs.mask_slice();

    let mut gram = vec![0.0; r * r];
    let mut rhs = vec![0.0; r];
    let mut g = vec![0.0; r];
    for l in 0..dims.l {
        let arow = &a[l * r..(l + 1) * r];
        for w in 0..dims.w {
            let idx = l * dims.w + w;
            if !mask[idx] {
                continue;
            }
            let crow = &c[w * r..(w + 1) * r];
            for k in 0..r {
                g[k] = arow[k] * crow[k];
            }
            syr_lower(&mut gram, r, 1.0, &g);
            axpy(values[idx], &g, &mut rhs);
        }
    }
    add_diagonal(&mut gram, r, mu);
    SpdSolver::new(r).solve(&gram, &mut rhs, "slice weight solve")?;
    Ok(Array1::from(rhs))
}

fn check_dims(dims: Dims, obs: &SliceObservation) -> Result<()> {
    if obs.dim() != (dims.l, dims.w) {
        return Err(Error::Dimension(format!(
            "slice is {:?}, tracker expects ({}, {})",
            obs.dim(),
            dims.l,
            dims.w
        )));
    }
    Ok(())
}

/// Result of one tracking step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub t: usize,
    /// `A[t]·diag(b[t])·C[t]ᵀ`, after the factor updates.
    pub prediction: Array2<f64>,
    /// `A[t−1]·diag(b[t])·C[t−1]ᵀ`, before the factor updates.
    pub prediction_pre: Array2<f64>,
    pub b: Array1<f64>,
    /// `‖Ω ⊛ (prediction − Y)‖²_F` over the observed entries.
    pub observed_residual_sq: f64,
}

/// Common driving interface for OLSTEC and the SGD baseline.
pub trait OnlineTracker {
    fn step(&mut self, obs: &SliceObservation) -> Result<StepOutput>;
    fn factors(&self) -> &CpFactors;
    /// Algorithm name used in result files.
    fn algo(&self) -> &'static str;
    /// Variant label used in result files.
    fn variant_label(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
struct HistoryEntry {
    values: Array2<f64>,
    mask: Array2<bool>,
    alpha: Array2<f64>,
    beta: Array2<f64>,
}

/// Full tracker state: factors, per-row RLS matrices and, for the windowed
/// variant, the last `V` steps needed to retire old contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Olstec {
    dims: Dims,
    config: TrackerConfig,
    factors: CpFactors,
    row_a: Vec<RowRlsState>,
    row_c: Vec<RowRlsState>,
    t: usize,
    history: VecDeque<HistoryEntry>,
}

impl Olstec {
    /// Draws `A[0]`, `C[0]`, `b[0]` i.i.d. standard normal from `config.seed`.
    pub fn new(dims: Dims, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if dims.r != config.rank {
            return Err(Error::Dimension(format!(
                "dims rank {} differs from config rank {}",
                dims.r, config.rank
            )));
        }
        Self::from_factors(CpFactors::random(dims, config.seed), config)
    }

    /// Starts from caller-supplied factors instead of random ones.
    pub fn from_factors(factors: CpFactors, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let dims = factors.dims();
        if dims.r != config.rank {
            return Err(Error::Dimension(format!(
                "factors have rank {} but config rank is {}",
                dims.r, config.rank
            )));
        }
        let scale = 1.0 / config.gamma_value();
        let init = RowRlsState::identity_scaled(config.variant, dims.r, scale);
        Ok(Olstec {
            dims,
            row_a: vec![init.clone(); dims.l],
            row_c: vec![init; dims.w],
            config,
            factors,
            t: 0,
            history: VecDeque::new(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Number of steps processed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn row_a(&self, l: usize) -> &RowRlsState {
        &self.row_a[l]
    }

    pub fn row_c(&self, w: usize) -> &RowRlsState {
        &self.row_c[w]
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn solve_b(&self, obs: &SliceObservation) -> Result<Array1<f64>> {
        solve_b(&self.factors, obs, self.config.mu)
    }

    fn params(&self) -> RlsParams {
        let window_weight = match self.config.variant {
            Variant::Windowed(v) => self.config.lambda.powi(v as i32),
            _ => 0.0,
        };
        RlsParams { lambda: self.config.lambda, mu: self.config.mu, window_weight }
    }
}

/// The slice leaving a full truncated window at this step.
fn leaving(variant: Variant, history: &VecDeque<HistoryEntry>) -> Option<&HistoryEntry> {
    match variant {
        Variant::Windowed(v) if history.len() == v => history.front(),
        _ => None,
    }
}

/// Flat row-major view of one slice's values and mask.
#[derive(Clone, Copy)]
struct SliceView<'a> {
    values: &'a [f64],
    mask: &'a [bool],
    rows: usize,
    cols: usize,
}

impl<'a> SliceView<'a> {
    fn of(values: &'a Array2<f64>, mask: &'a Array2<bool>) -> Self {
        let (rows, cols) = values.dim();
        SliceView {
            values: values.as_slice().expect("standard layout"),
            mask: mask.as_slice().expect("standard layout"),
            rows,
            cols,
        }
    }

    /// `(Y[l, w], α_w)` for every observed `w` in row `l`.
    fn row_pairs(self, l: usize, alpha: &'a [f64], r: usize) -> impl Iterator<Item = (f64, &'a [f64])> {
        (0..self.cols).filter_map(move |w| {
            let idx = l * self.cols + w;
            self.mask[idx].then(|| (self.values[idx], &alpha[w * r..(w + 1) * r]))
        })
    }

    /// `(Y[l, w], β^l)` for every observed `l` in column `w`.
    fn col_pairs(self, w: usize, beta: &'a [f64], r: usize) -> impl Iterator<Item = (f64, &'a [f64])> {
        (0..self.rows).filter_map(move |l| {
            let idx = l * self.cols + w;
            self.mask[idx].then(|| (self.values[idx], &beta[l * r..(l + 1) * r]))
        })
    }
}

impl OnlineTracker for Olstec {
    fn step(&mut self, obs: &SliceObservation) -> Result<StepOutput> {
        let r = self.dims.r;
        check_dims(self.dims, obs)?;
        let b = self.solve_b(obs)?;
        let prediction_pre = reconstruct_with(self.factors.a(), self.factors.c(), b.view());

        let params = self.params();
        let slice = SliceView {
            values: obs.values_slice(),
            mask: obs.mask_slice(),
            rows: self.dims.l,
            cols: self.dims.w,
        };
        let old = leaving(self.config.variant, &self.history)
            .map(|h| (SliceView::of(&h.values, &h.mask), h));
        let mut solver = SpdSolver::new(r);

        let alpha = &self.factors.c * &b;
        let alpha_s = alpha.as_slice().expect("standard layout");
        let a_prev = (self.config.ordering == UpdateOrdering::Jacobi).then(|| self.factors.a.clone());

        let a = self.factors.a.as_slice_mut().expect("standard layout");
        for (l, state) in self.row_a.iter_mut().enumerate() {
            let row = &mut a[l * r..(l + 1) * r];
            let current = slice.row_pairs(l, alpha_s, r);
            match &old {
                Some((view, h)) => {
                    let dropped = view.row_pairs(l, h.alpha.as_slice().unwrap(), r);
                    state.update(row, current, dropped, &params, &mut solver)?;
                }
                None => state.update(row, current, std::iter::empty(), &params, &mut solver)?,
            }
        }

        let beta = match &a_prev {
            Some(prev) => prev * &b,
            None => &self.factors.a * &b,
        };
        let beta_s = beta.as_slice().expect("standard layout");

        let c = self.factors.c.as_slice_mut().expect("standard layout");
        for (w, state) in self.row_c.iter_mut().enumerate() {
            let row = &mut c[w * r..(w + 1) * r];
            let current = slice.col_pairs(w, beta_s, r);
            match &old {
                Some((view, h)) => {
                    let dropped = view.col_pairs(w, h.beta.as_slice().unwrap(), r);
                    state.update(row, current, dropped, &params, &mut solver)?;
                }
                None => state.update(row, current, std::iter::empty(), &params, &mut solver)?,
            }
        }

        if let Variant::Windowed(v) = self.config.variant {
            self.history.push_back(HistoryEntry {
                values: obs.values().to_owned(),
                mask: obs.mask().to_owned(),
                alpha,
                beta,
            });
            while self.history.len() > v {
                self.history.pop_front();
            }
        }

        self.factors.b = b.clone();
        self.t += 1;
        let prediction = self.factors.reconstruct();
        let observed_residual_sq = masked_frobenius_sq(prediction.view(), obs.values(), obs.mask())?;
        Ok(StepOutput { t: self.t, prediction, prediction_pre, b, observed_residual_sq })
    }

    fn factors(&self) -> &CpFactors {
        &self.factors
    }

    fn algo(&self) -> &'static str {
        "olstec"
    }

    fn variant_label(&self) -> String {
        self.config.variant.label()
    }
}
