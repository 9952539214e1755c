//! Seeded random streams, special functions and the basic variate generators.

mod rng;
mod sample;
mod special;

pub use rng::{splitmix64, sub_seed, RngState};
pub use sample::{
    sample_beta, sample_dirichlet, sample_gamma, sample_log_gamma, sample_poisson,
    sample_symmetric_dirichlet,
};
pub use special::{log_beta, log_gamma, normal_cdf, normal_quantile, reg_inc_beta, BetaLaw};

pub(crate) use sample::{beta_pair_unchecked, std_normal};
pub(crate) use special::{beta_cdf_ext, ln_beta, ln_gamma};
