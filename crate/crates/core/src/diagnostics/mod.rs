//! Posterior summaries and MCMC diagnostics.

mod cluster;
mod density;
mod distance;
mod ess;

pub use cluster::{ari, binder_loss, point_estimate_partition, posterior_similarity};
pub use density::{default_grid, density_estimate, uniform_grid, DensityAccumulator, DensityEstimate};
pub use distance::{hellinger, l1_distance, trapezoid};
pub use ess::{autocorrelation, ess, Ess};

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of the finite values, `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}
