//! Streaming error metrics.
//!
//! The normalized residual at step `t` is `‖X_t − Y_t‖²_F / ‖Y_t‖²_F`; the
//! running averaging error is the mean of those residuals over the steps
//! seen so far.

use std::time::Duration;

use ndarray::{ArrayView2, Zip};

use crate::error::{Error, Result};

/// Which entries enter the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMode {
    /// Every entry (needs a ground-truth reference).
    Full,
    /// Only entries where the mask is set.
    ObservedOnly,
}

/// Normalized residual of `x` against `reference`.
///
/// Returns `Ok(None)` when the reference has zero energy on the evaluated
/// support; the ratio is undefined there.
pub fn normalized_residual(
    x: ArrayView2<'_, f64>,
    reference: ArrayView2<'_, f64>,
    mode: ResidualMode,
    mask: Option<ArrayView2<'_, bool>>,
) -> Result<Option<f64>> {
    if x.dim() != reference.dim() {
        return Err(Error::Dimension(format!("X {:?} vs reference {:?}", x.dim(), reference.dim())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    match mode {
        ResidualMode::Full => {
            Zip::from(&x).and(&reference).for_each(|&xv, &yv| {
                num += (xv - yv) * (xv - yv);
                den += yv * yv;
            });
        }
        ResidualMode::ObservedOnly => {
            let mask = mask.ok_or_else(|| Error::InvalidConfig("observed-only residual needs a mask".into()))?;
            if mask.dim() != x.dim() {
                return Err(Error::Dimension(format!("mask {:?} vs X {:?}", mask.dim(), x.dim())));
            }
            Zip::from(&x).and(&reference).and(&mask).for_each(|&xv, &yv, &m| {
                if m {
                    num += (xv - yv) * (xv - yv);
                    den += yv * yv;
                }
            });
        }
    }
    Ok((den > 0.0).then(|| num / den))
}

/// Exact arithmetic mean of the residuals pushed so far.
///
/// Undefined residuals are not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningAverage {
    sum: f64,
    count: usize,
}

impl RunningAverage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a residual and returns the updated mean (NaN until one is defined).
    pub fn push(&mut self, residual: Option<f64>) -> f64 {
        if let Some(r) = residual {
            self.sum += r;
            self.count += 1;
        }
        self.value()
    }

    pub fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// One row of a run log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t: usize,
    /// NaN when undefined.
    pub normalized_residual: f64,
    pub running_average: f64,
    pub elapsed: Duration,
}

/// Recomputes running averages from a residual sequence.
pub fn running_averages(residuals: &[f64]) -> Vec<f64> {
    let mut acc = RunningAverage::new();
    residuals
        .iter()
        .map(|&r| acc.push((!r.is_nan()).then_some(r)))
        .collect()
}
