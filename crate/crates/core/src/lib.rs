//! Noisy stick-slip friction as a piecewise deterministic Markov process.
//!
//! The forcing `eta` is a birth-death chain on a lattice of spacing `delta`
//! approximating an Ornstein-Uhlenbeck process, and the velocity follows
//! Coulomb friction with a static threshold `mu_s` and a dynamic level `mu_d`.
//! Stationary statistics, phase-duration laws and the velocity spectrum are
//! computed two ways:
//!
//! * [`sim`] simulates the process exactly, event by event, and [`mc_stats`]
//!   turns i.i.d. excursions into ratio estimates with confidence intervals;
//! * [`kolmogorov`] discretizes the generator with an upwind scheme in `v`
//!   and solves the resolvent, exit-time and harmonic-measure systems.
//!
//! [`extrapolate`] holds the convergence-order and grid extrapolation tools.

pub mod error;
pub mod extrapolate;
pub mod flow;
pub mod kolmogorov;
pub mod mc_stats;
pub mod model;
pub mod noise_chain;
pub mod sim;

pub use error::{Error, Result};
pub use flow::{FlowSegment, IntegralKind};
pub use mc_stats::{DurationHistogram, EstimateWithCI, Statistic};
pub use model::{LatticeIndexing, Mode, Params, State};
pub use sim::{Excursion, PathRecord, Simulator};
