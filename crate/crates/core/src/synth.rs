//! Rotating-subspace synthetic streams.
//!
//! `A_1` and `C_1` are i.i.d. standard normal. Slice `t` is
//! `A_t·diag(b_t)·C_tᵀ` with fresh standard-normal weights `b_t`, observed
//! with i.i.d. `N(0, ε²)` noise through a Bernoulli(ρ) mask. Afterwards both
//! factors rotate: `A_{t+1} = A_t·Q(t, α)`, `C_{t+1} = C_t·Q(t, α)`, where
//! `Q` is a Givens rotation in a plane that cycles with `t`.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::io::MaskGenerator;
use crate::tensor::{reconstruct_with, SliceObservation};

/// 1-based index `p` of the rotation plane `(p, p+1)` at step `t`:
/// `p(t) = (t + R − 2) mod (R − 1) + 1`.
pub fn rotation_plane(t: usize, rank: usize) -> Result<usize> {
    if rank < 2 {
        return Err(Error::InvalidConfig(format!("rotation needs rank >= 2, got {rank}")));
    }
    Ok((t + rank - 2) % (rank - 1) + 1)
}

/// `Q(t, α) = I_{p−1} ⊕ [[cos α, −sin α], [sin α, cos α]] ⊕ I_{R−p−1}`.
pub fn rotation_matrix(t: usize, alpha: f64, rank: usize) -> Result<Array2<f64>> {
    let p = rotation_plane(t, rank)? - 1;
    let mut q = Array2::eye(rank);
    let (s, c) = alpha.sin_cos();
    q[[p, p]] = c;
    q[[p, p + 1]] = -s;
    q[[p + 1, p]] = s;
    q[[p + 1, p + 1]] = c;
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub l: usize,
    pub w: usize,
    /// Number of slices.
    pub t: usize,
    pub rank: usize,
    /// Rotation angle per step, radians.
    pub alpha: f64,
    /// Noise standard deviation ε.
    pub noise: f64,
    /// Observation ratio ρ in (0, 1].
    pub ratio: f64,
    /// Seed for factors, weights and noise.
    pub seed: u64,
    /// Seed for the mask; derived from `seed` when absent.
    pub mask_seed: Option<u64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            l: 50,
            w: 50,
            t: 500,
            rank: 5,
            alpha: std::f64::consts::PI / 36.0,
            noise: 1e-3,
            ratio: 0.3,
            seed: 0,
            mask_seed: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.w == 0 {
            return Err(Error::InvalidConfig("L and W must be positive".into()));
        }
        if self.rank == 0 || (self.rank < 2 && self.alpha != 0.0) {
            return Err(Error::InvalidConfig(format!("rotation needs rank >= 2, got {}", self.rank)));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("ratio must lie in (0, 1], got {}", self.ratio)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise must be non-negative, got {}", self.noise)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("alpha must be finite".into()));
        }
        Ok(())
    }

    fn mask_seed(&self) -> u64 {
        self.mask_seed.unwrap_or(self.seed ^ 0x6d61_736b_5f73_6565)
    }
}

/// One generated step.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSlice {
    /// Noisy values with the revealed mask.
    pub observation: SliceObservation,
    /// Noise-free low-rank slice.
    pub truth: Array2<f64>,
}

/// Sequential generator; yields exactly `config.t` slices.
#[derive(Debug, Clone)]
pub struct SynthStream {
    config: SynthConfig,
    rng: ChaCha8Rng,
    masks: MaskGenerator,
    noise: Option<Normal<f64>>,
    a: Array2<f64>,
    c: Array2<f64>,
    t: usize,
}

impl SynthStream {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let a = Array2::from_shape_simple_fn((config.l, config.rank), || StandardNormal.sample(&mut rng));
        let c = Array2::from_shape_simple_fn((config.w, config.rank), || StandardNormal.sample(&mut rng));
        let noise = (config.noise > 0.0)
            .then(|| Normal::new(0.0, config.noise).expect("validated noise level"));
        let masks = MaskGenerator::new(config.l, config.w, config.ratio, config.mask_seed())?;
        Ok(SynthStream { config: config.clone(), rng, masks, noise, a, c, t: 0 })
    }

    /// Factors `(A_t, C_t)` that will generate the next slice.
    pub fn factors(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.a, &self.c)
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }
}

impl Iterator for SynthStream {
    type Item = SynthSlice;

    fn next(&mut self) -> Option<SynthSlice> {
        if self.t >= self.config.t {
            return None;
        }
        self.t += 1;
        let rng = &mut self.rng;
        let b = Array1::from_shape_simple_fn(self.config.rank, || StandardNormal.sample(rng));
        let truth = reconstruct_with(self.a.view(), self.c.view(), b.view());
        let values = match &self.noise {
            Some(dist) => &truth + &Array2::from_shape_simple_fn(truth.dim(), || dist.sample(rng)),
            None => truth.clone(),
        };
        let mask = self.masks.next_mask();
        let observation = SliceObservation::new(self.t, values, mask).expect("matching shapes");

        // A static stream (α = 0) may have rank 1, where no rotation plane exists.
        if self.config.alpha != 0.0 {
            let q = rotation_matrix(self.t, self.config.alpha, self.config.rank).expect("validated rank");
            self.a = self.a.dot(&q);
            self.c = self.c.dot(&q);
        }
        Some(SynthSlice { observation, truth })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.config.t - self.t;
        (n, Some(n))
    }
}

impl ExactSizeIterator for SynthStream {}
