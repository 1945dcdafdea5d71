//! Synthetic data, experiment configuration and the replicate driver.

mod synthetic;

pub use synthetic::{
    generate_beta_mixture, generate_truncated_gaussian_mixture, LabeledSample, Truth, BETA_PARAMS, GAUSSIAN_BOUND,
    GAUSSIAN_MEANS,
};
