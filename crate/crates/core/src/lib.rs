//! Nonparametric Bayesian constructions on the real line.
//!
//! * [`randkit`]: seeded streams, log-gamma, incomplete beta, Gamma/Beta/Dirichlet variates
//! * [`dp`]: Dirichlet-process draws (finite symmetric approximation,
//!   stick-breaking with a general Beta stick law, random number of atoms) and the conjugate update
//! * [`means`]: random means `∫ g dP`, their exact central moments and a fixed-point Markov chain
//! * [`quantile`]: prior/posterior laws of `Q(y)`, the Bernstein quantile estimator
//!   and the bandwidth-free density estimator
//! * [`pyramid`]: quantile-pyramid priors and a tree-ordered Metropolis-within-Gibbs sampler
//! * [`frailty`]: compound-Poisson damage processes, survival and hazards
//! * [`localreg`]: kernel-weighted local Bayesian regression
//! * [`envelope`]: predictive residual cdf and control-set factor around parametric models

pub mod base;
pub mod diagnostics;
pub mod dp;
pub mod envelope;
mod error;
pub mod frailty;
pub mod localreg;
pub mod means;
pub mod numeric;
pub mod pyramid;
pub mod quantile;
pub mod randkit;

pub use base::BaseDistribution;
pub use dp::{AtomicMeasure, DpParams, StickLaw};
pub use error::{Error, Result};
pub use randkit::{BetaLaw, RngState};
