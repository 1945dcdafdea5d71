//! Gaussian kernel observed through a Gaussian channel, with the latent data
//! integrated out: `Z | mu, tau2 ~ N(mu, tau2)` where `tau2 = sigma2 + eta2`.

mod base;
mod sweeps;

pub use base::{
    cluster_log_marginal, marginal_kernel_log_density, MarginalParam, ShiftedNigBase, TruncatedNigBase,
    MIN_TRUNCATION_MASS,
};
pub use sweeps::{neal2_sweep, neal3_sweep, MarginalGaussianModel};
