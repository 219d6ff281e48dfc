//! Optimal stopping of a two-regime switching geometric Brownian motion when
//! stopping is only possible at Poisson opportunity times in regime 1.
//!
//! [`vi::ViSolution`] solves for the threshold and piecewise value functions,
//! [`verifier`] checks the boundary conditions, [`simulator`] estimates
//! policy values by Monte Carlo and [`asymptotics`] holds the single-diffusion
//! limits.

pub mod asymptotics;
pub mod model;
pub mod params_file;
pub mod roots;
pub mod simulator;
pub mod verifier;
pub mod vi;

pub use asymptotics::{AsymptoticResult, Limit, SingleDiffusionParams};
pub use model::{Mode, Model, ModelError, ModelParams, Regime, Warning};
pub use roots::{Branch, RootError, RootSet};
pub use simulator::{McEstimate, PathRecord, SimConfig, SimError};
pub use verifier::{BoundaryReport, PastingReport, SweepConfig, SweepResult};
pub use vi::{BoundaryCoefficients, SolveError, ViSolution};
