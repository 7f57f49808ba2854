//! Solvers and statistics for randomly forced one-dimensional flows on the
//! unit circle.
//!
//! The crate provides:
//!
//! - [`field`]: zero-mean periodic fields in grid and spectral form, with
//!   transforms, norms and shock observables;
//! - [`forcing`]: band-limited white-in-time forcing with a counter-based
//!   noise source, reproducible and parallel by construction;
//! - [`integrator`]: an integrating-factor pseudospectral stepper for the
//!   viscous equation, plus exact references (heat-kernel substitution for
//!   the unforced equation, Ornstein-Uhlenbeck variances for the linearized
//!   one);
//! - [`inviscid`]: a monotone finite-volume scheme with exact Riemann fluxes
//!   for the zero-viscosity entropy solutions;
//! - [`stats`]: double-bracket averages, structure functions, energy-layer
//!   spectra, power-law fits and mixing diagnostics;
//! - [`checkpoint`]: a versioned binary state format whose resume is
//!   bit-identical to an uninterrupted run.

pub mod checkpoint;
pub mod error;
pub mod field;
pub mod forcing;
pub mod integrator;
pub mod inviscid;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use field::{GridField, OleinikObservables, SpectralField};
pub use forcing::{ForcingSpec, NoiseIncrement};
pub use integrator::{
    cole_hopf_reference, ou_reference_variance, ForcingMode, RunOutcome, Simulation, SolverState,
    StepSchedule, Stepper,
};
pub use inviscid::{riemann_flux, step_inviscid, CellField, InviscidSimulation};
pub use stats::{BracketSpec, FitPoint, MeanAccumulator, PowerLawFit};
pub use stream::{ProbeSet, Sample, ScalarObservable, Snapshot, TrajectoryStream};
