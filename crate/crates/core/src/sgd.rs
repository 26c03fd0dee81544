//! First-order online CP baseline.
//!
//! Shares the closed-form weight solve with OLSTEC, then takes one gradient
//! step on `A` and `C` (both from the pre-step factors) against the per-slice
//! masked loss
//!
//! ```text
//! f(A, C) = ½‖Ω ⊛ (Y − A·diag(b)·Cᵀ)‖²_F + (μ/2)(‖A‖²_F + ‖C‖²_F)
//! ```
//!
//! The step is `η / |Ω_t|`, i.e. plain gradient descent on the mean loss per
//! observed entry, so one stepsize works across slice sizes and observation
//! ratios.
//!
//! This is a plain reconstruction of a TeCPSGD-style tracker for comparison
//! runs, not a port of any reference implementation.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::tensor::{masked_frobenius_sq, reconstruct_with, CpFactors, Dims, SliceObservation};
use crate::tracker::{solve_b, OnlineTracker, StepOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub rank: usize,
    /// Ridge weight of the closed-form `b` solve.
    pub lambda: f64,
    /// Factor regularizer μ ≥ 0.
    pub mu: f64,
    /// Stepsize η ≥ 0, divided by the number of observed entries each step.
    pub stepsize: f64,
    pub seed: u64,
}

impl SgdConfig {
    /// λ = 0.001, μ = 0.1, η = 10.
    pub fn new(rank: usize) -> Self {
        SgdConfig { rank, lambda: 1e-3, mu: 0.1, stepsize: 10.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.stepsize >= 0.0 && self.stepsize.is_finite()) {
            return Err(Error::InvalidConfig(format!("stepsize must be non-negative, got {}", self.stepsize)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu must be non-negative, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Masked residual `Ω ⊛ (Y − A·diag(b)·Cᵀ)`.
fn masked_error(factors: &CpFactors, obs: &SliceObservation) -> Array2<f64> {
    let x = factors.reconstruct();
    let mut e = obs.values().to_owned() - &x;
    Zip::from(&mut e).and(&obs.mask()).for_each(|ev, &m| {
        if !m {
            *ev = 0.0;
        }
    });
    e
}

/// Per-slice loss `f(A, C)` at the factors' stored `b`.
pub fn masked_loss(factors: &CpFactors, obs: &SliceObservation, mu: f64) -> f64 {
    let fit = masked_frobenius_sq(factors.reconstruct().view(), obs.values(), obs.mask())
        .expect("dimensions checked by caller");
    let reg = factors.a.iter().chain(factors.c.iter()).map(|v| v * v).sum::<f64>();
    0.5 * fit + 0.5 * mu * reg
}

/// Analytic gradients `(∇_A f, ∇_C f)` at the factors' stored `b`.
pub fn masked_loss_gradients(
    factors: &CpFactors,
    obs: &SliceObservation,
    mu: f64,
) -> (Array2<f64>, Array2<f64>) {
    let e = masked_error(factors, obs);
    let grad_a = -(e.dot(&factors.c) * &factors.b) + &(&factors.a * mu);
    let grad_c = -(e.t().dot(&factors.a) * &factors.b) + &(&factors.c * mu);
    (grad_a, grad_c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdTracker {
    dims: Dims,
    config: SgdConfig,
    factors: CpFactors,
    t: usize,
}

impl SgdTracker {
    pub fn new(dims: Dims, config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Self::from_factors(CpFactors::random(dims, config.seed), config)
    }

    pub fn from_factors(factors: CpFactors, config: SgdConfig) -> Result<Self> {
        config.validate()?;
        let dims = factors.dims();
        if dims.r != config.rank {
            return Err(Error::Dimension(format!(
                "factors have rank {} but config rank is {}",
                dims.r, config.rank
            )));
        }
        Ok(SgdTracker { dims, config, factors, t: 0 })
    }

    pub fn config(&self) -> &SgdConfig {
        &self.config
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

impl OnlineTracker for SgdTracker {
    fn step(&mut self, obs: &SliceObservation) -> Result<StepOutput> {
        if obs.dim() != (self.dims.l, self.dims.w) {
            return Err(Error::Dimension(format!(
                "slice is {:?}, tracker expects ({}, {})",
                obs.dim(),
                self.dims.l,
                self.dims.w
            )));
        }
        let b = solve_b(&self.factors, obs, self.config.lambda)?;
        let prediction_pre = reconstruct_with(self.factors.a(), self.factors.c(), b.view());
        self.factors.b = b.clone();

        let (grad_a, grad_c) = masked_loss_gradients(&self.factors, obs, self.config.mu);
        let eta = self.config.stepsize / obs.observed_count().max(1) as f64;
        self.factors.a.scaled_add(-eta, &grad_a);
        self.factors.c.scaled_add(-eta, &grad_c);

        self.t += 1;
        let prediction = self.factors.reconstruct();
        let observed_residual_sq = masked_frobenius_sq(prediction.view(), obs.values(), obs.mask())?;
        Ok(StepOutput { t: self.t, prediction, prediction_pre, b, observed_residual_sq })
    }

    fn factors(&self) -> &CpFactors {
        &self.factors
    }

    fn algo(&self) -> &'static str {
        "sgd"
    }

    fn variant_label(&self) -> String {
        "sgd".into()
    }
}
