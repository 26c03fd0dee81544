//! Online low-rank tensor subspace tracking.
//!
//! A third-order stream `Y ∈ R^{L×W×T}` arrives one frontal slice at a time,
//! partially observed through a boolean mask. Each slice is modelled with a
//! rank-`R` CP structure `X_t = A · diag(b_t) · Cᵀ`. The trackers in this
//! crate keep `A` and `C` current as the underlying subspace drifts:
//!
//! * [`Olstec`] solves `b_t` in closed form and then updates every row of
//!   `A` and `C` with a forgetting-factor recursive least squares step. The
//!   [`Variant`] selects the full second-order recursion, a diagonal
//!   approximation, or a truncated sliding window.
//! * [`SgdTracker`] is a first-order baseline sharing the same `b_t` solve.
//!
//! Around them sit a rotating-subspace stream generator ([`synth`]), the
//! streaming error metrics ([`metrics`]), binary and CSV file formats
//! ([`io`]), and an experiment driver ([`runner`]) used by the `olstec`
//! binary.
//!
//! ```
//! use olstec::{Dims, Olstec, OnlineTracker, TrackerConfig};
//! use olstec::synth::{SynthConfig, SynthStream};
//!
//! let synth = SynthConfig { l: 20, w: 20, t: 30, rank: 3, ..SynthConfig::default() };
//! let dims = Dims::new(20, 20, 3).unwrap();
//! let mut tracker = Olstec::new(dims, TrackerConfig::new(3)).unwrap();
//! for slice in SynthStream::new(&synth).unwrap() {
//!     let out = tracker.step(&slice.observation).unwrap();
//!     assert_eq!(out.prediction.dim(), (20, 20));
//! }
//! ```

pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod runner;
pub mod sgd;
pub mod synth;
pub mod tensor;
pub mod tracker;

pub use error::{Error, Result};
pub use sgd::{SgdConfig, SgdTracker};
pub use tensor::{CpFactors, Dims, SliceObservation};
pub use tracker::{
    Gamma, Olstec, OnlineTracker, RowRlsState, StepOutput, TrackerConfig, UpdateOrdering, Variant,
};
