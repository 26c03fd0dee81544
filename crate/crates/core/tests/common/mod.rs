#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use olstec::sgd::{masked_loss, masked_loss_gradients};
use olstec::{CpFactors, Olstec, OnlineTracker, SliceObservation, UpdateOrdering};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn random_obs(l: usize, w: usize, ratio: f64, t: usize, rng: &mut ChaCha8Rng) -> SliceObservation {
    let values = Array2::from_shape_simple_fn((l, w), || rng.random_range(-2.0..2.0));
    let mask = Array2::from_shape_simple_fn((l, w), || rng.random_bool(ratio));
    SliceObservation::new(t, values, mask).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ridge normal equations built entry by entry and solved by LU.
pub fn ridge_oracle(factors: &CpFactors, obs: &SliceObservation, mu: f64) -> DVector<f64> {
    let r = factors.rank();
    let (a, c) = (factors.a(), factors.c());
    let mut gram = DMatrix::<f64>::identity(r, r) * mu;
    let mut rhs = DVector::<f64>::zeros(r);
    let (values, mask) = (obs.values(), obs.mask());
    for l in 0..a.nrows() {
        for w in 0..c.nrows() {
            if !mask[[l, w]] {
                continue;
            }
            let g = DVector::from_fn(r, |k, _| a[[l, k]] * c[[w, k]]);
            gram += &g * g.transpose();
            rhs += &g * values[[l, w]];
        }
    }
    gram.lu().solve(&rhs).expect("nonsingular oracle system")
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// `(values, mask, alpha, beta)` of one step, kept for the windowed recursion.
type PastStep = (Array2<f64>, Array2<bool>, Array2<f64>, Array2<f64>);

/// Independent replay of the right-hand sides `s_l` and `s_w` of the row
/// normal equations. Regressors are rebuilt from the factors seen before and
/// after each step.
pub struct Shadow {
    lambda: f64,
    ordering: UpdateOrdering,
    window: Option<usize>,
    pub s_a: Vec<Array1<f64>>,
    pub s_c: Vec<Array1<f64>>,
    past: Vec<PastStep>,
}

impl Shadow {
    pub fn new(tracker: &Olstec) -> Self {
        let f = tracker.factors();
        let dims = tracker.dims();
        let s_a = (0..dims.l).map(|l| tracker.row_a(l).matrix().dot(&f.a().row(l))).collect();
        let s_c = (0..dims.w).map(|w| tracker.row_c(w).matrix().dot(&f.c().row(w))).collect();
        let window = match tracker.config().variant {
            olstec::Variant::Windowed(v) => Some(v),
            _ => None,
        };
        Shadow { lambda: tracker.config().lambda, ordering: tracker.config().ordering, window, s_a, s_c, past: vec![] }
    }

    /// Steps the tracker and advances the shadow sums alongside.
    pub fn step(&mut self, tracker: &mut Olstec, obs: &SliceObservation) {
        let a_old = tracker.factors().a().to_owned();
        let c_old = tracker.factors().c().to_owned();
        let out = tracker.step(obs).unwrap();
        let b = &out.b;
        let alpha = &c_old * b;
        let beta = match self.ordering {
            UpdateOrdering::GaussSeidel => &tracker.factors().a() * b,
            UpdateOrdering::Jacobi => &a_old * b,
        };
        let (values, mask) = (obs.values().to_owned(), obs.mask().to_owned());
        self.accumulate(&values, &mask, &alpha, &beta, 1.0, self.lambda);
        if let Some(v) = self.window {
            self.past.push((values, mask, alpha, beta));
            if self.past.len() > v {
                let (y, m, al, be) = self.past.remove(0);
                self.accumulate(&y, &m, &al, &be, -self.lambda.powi(v as i32), 1.0);
            }
        }
    }

    fn accumulate(&mut self, y: &Array2<f64>, m: &Array2<bool>, alpha: &Array2<f64>, beta: &Array2<f64>, weight: f64, decay: f64) {
        for (l, s) in self.s_a.iter_mut().enumerate() {
            *s *= decay;
            for w in 0..y.ncols() {
                if m[[l, w]] {
                    s.scaled_add(weight * y[[l, w]], &alpha.row(w));
                }
            }
        }
        for (w, s) in self.s_c.iter_mut().enumerate() {
            *s *= decay;
            for l in 0..y.nrows() {
                if m[[l, w]] {
                    s.scaled_add(weight * y[[l, w]], &beta.row(l));
                }
            }
        }
    }

    /// Largest relative deviation of `RA_l·a^l` from `s_l` (and likewise for
    /// columns).
    pub fn worst(&self, tracker: &Olstec) -> f64 {
        let f = tracker.factors();
        let rows = self.s_a.iter().enumerate().map(|(l, s)| {
            let lhs = tracker.row_a(l).matrix().dot(&f.a().row(l));
            rel_err(lhs.as_slice().unwrap(), s.as_slice().unwrap())
        });
        let cols = self.s_c.iter().enumerate().map(|(w, s)| {
            let lhs = tracker.row_c(w).matrix().dot(&f.c().row(w));
            rel_err(lhs.as_slice().unwrap(), s.as_slice().unwrap())
        });
        rows.chain(cols).fold(0.0, f64::max)
    }
}

/// Smallest eigenvalue and max asymmetry of every row matrix.
pub fn spd_report(tracker: &Olstec) -> (f64, f64) {
    let dims = tracker.dims();
    let mats = (0..dims.l).map(|l| tracker.row_a(l).matrix()).chain((0..dims.w).map(|w| tracker.row_c(w).matrix()));
    let mut min_eig = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for m in mats {
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        asym = asym.max((&m - &m.t()).iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / scale);
        let eig = to_na(&m).symmetric_eigenvalues();
        min_eig = min_eig.min(eig.min());
    }
    (min_eig, asym)
}

/// Central differences of the loss over every entry of `A` (or `C`).
fn fd_gradient(factors: &CpFactors, obs: &SliceObservation, mu: f64, wrt_c: bool) -> Array2<f64> {
    let h = 1e-5;
    let (a, c, b) = (factors.a().to_owned(), factors.c().to_owned(), factors.b().to_owned());
    let target = if wrt_c { &c } else { &a };
    let mut grad = Array2::zeros(target.dim());
    for idx in ndarray::indices(target.dim()) {
        let eval = |delta: f64| {
            let (mut a, mut c) = (a.clone(), c.clone());
            if wrt_c {
                c[idx] += delta;
            } else {
                a[idx] += delta;
            }
            masked_loss(&CpFactors::new(a, c, b.clone()).unwrap(), obs, mu)
        };
        grad[idx] = (eval(h) - eval(-h)) / (2.0 * h);
    }
    grad
}

/// Worst relative gap between analytic and finite-difference gradients on a
/// random instance.
pub fn gradient_check(seed: u64, l: usize, w: usize, r: usize) -> f64 {
    let mut rng = seeded(seed);
    let b = Array1::from_shape_simple_fn(r, || rng.random_range(-1.5..1.5));
    let factors = CpFactors::new(random_matrix(l, r, &mut rng), random_matrix(w, r, &mut rng), b).unwrap();
    let obs = random_obs(l, w, 0.6, 1, &mut rng);
    let (ga, gc) = masked_loss_gradients(&factors, &obs, 0.1);
    let fa = fd_gradient(&factors, &obs, 0.1, false);
    let fc = fd_gradient(&factors, &obs, 0.1, true);
    rel_err(ga.as_slice().unwrap(), fa.as_slice().unwrap()).max(rel_err(gc.as_slice().unwrap(), fc.as_slice().unwrap()))
}
