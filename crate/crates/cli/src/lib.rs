//! Experiment harness for the private mixture samplers: configuration,
//! chain construction, replicate orchestration and artifact emission.

pub mod build;
pub mod config;
pub mod plot;
pub mod runner;

pub use build::{build_chain, check_compatible, MechanismClass, COMPATIBILITY};
pub use config::{empirical_bayes_nig, ExperimentConfig};
pub use runner::{config_hash, derive_seed, plan, run_experiment, summarize, worker_budget, Manifest, WORKERS_ENV};
