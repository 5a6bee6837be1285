//! Steady states of a coherently driven, damped Kerr oscillator.
//!
//! Two independent engines compute the steady state:
//!
//! * [`analytic`]: the closed-form photon distribution of the pseudo-spin
//!   representation, evaluated in log space.
//! * [`lindblad`]: a brute-force steady-state solve of the master equation in
//!   a truncated Fock space. It also provides off-diagonal coherences and a
//!   time-evolution cross-check.
//!
//! [`sweep`] runs either engine over detuning or drive grids, locates the
//! peaks of `⟨n⟩(Δ)`, and estimates the nonlinearity `α` from their spacing.
//! [`cli`] is the `kerrscope` command-line front end.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod sweep;

pub use analytic::{linear_limit, observables, photon_distribution, PhotonDistribution, ScalarObservables};
pub use error::{Error, Result};
pub use lindblad::{evolve, observables_full, steady_state, DensityMatrix, FidelityPair, FockConfig};
pub use model::{scale, ModelParams, NonlinearSign, ScaledParams};
pub use sweep::{Engine, Grid, PeakEstimate, SweepResult};
