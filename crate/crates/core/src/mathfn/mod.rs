//! Special functions, quadrature and random sampling primitives.

mod quad;
mod random;
mod special;

pub use quad::{integrate, integrate_half_line};
pub use random::{
    sample_categorical, sample_dirichlet, sample_gamma, sample_multinomial, Rng,
};
pub use special::{
    digamma, gamma_log_density, ln_factorial, ln_gamma, log_add_exp, log_sum_exp,
    poisson_gamma_logpmf, xlogy,
};

pub(crate) use random::{categorical_index, multinomial_counts};
pub(crate) use special::{digamma_unchecked, ln_gamma_unchecked};
