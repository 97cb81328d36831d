//! Special functions, the Lévy tail of the subordinators, random streams and elementary
//! distribution samplers.

// Series coefficients and frozen reference values are kept as published, digit for digit.
#![allow(clippy::excessive_precision)]

mod levy;
mod rng;
mod sampling;
mod special;

pub use levy::{levy_small_mass, levy_tail, levy_tail_inverse, LevyTail};
pub use rng::{mix_seed, RngStream};
pub use sampling::{sample_beta, sample_beta_pair, sample_exponential, sample_gamma};
pub use special::{
    erfc, exp_integral_e1, log_gamma, reg_inc_beta, reg_inc_gamma_lower, reg_inc_gamma_upper,
    upper_inc_gamma, EULER_GAMMA,
};
