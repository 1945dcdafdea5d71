use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use super::Kernel;
use crate::channels::density::normal_log_density;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelParam {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaussianKernel;

impl Kernel for GaussianKernel {
    type Param = GaussianKernelParam;

    #[inline]
    fn log_density(&self, theta: &GaussianKernelParam, y: f64) -> f64 {
        normal_log_density(y, theta.mu, theta.sigma2)
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, theta: &GaussianKernelParam, rng: &mut R) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        theta.mu + theta.sigma2.sqrt() * e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaKernelParam {
    pub a: f64,
    pub b: f64,
}

/// Distance from {0, 1} at which Beta arguments are clamped.
pub const BETA_EDGE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BetaKernel;

impl Kernel for BetaKernel {
    type Param = BetaKernelParam;

    #[inline]
    fn log_density(&self, theta: &BetaKernelParam, y: f64) -> f64 {
        let y = y.clamp(BETA_EDGE, 1.0 - BETA_EDGE);
        (theta.a - 1.0) * y.ln() + (theta.b - 1.0) * (-y).ln_1p() - ln_beta(theta.a, theta.b)
    }

    fn sample<R: Rng + ?Sized>(&self, theta: &BetaKernelParam, rng: &mut R) -> f64 {
        let d = Beta::new(theta.a, theta.b).expect("positive Beta parameters");
        let y: f64 = d.sample(rng);
        y.clamp(BETA_EDGE, 1.0 - BETA_EDGE)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reference_values() {
        let g = GaussianKernel.log_density(&GaussianKernelParam { mu: 0.0, sigma2: 1.0 }, 0.0);
        assert!((g + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        for y in [0.01, 0.3, 0.99] {
            assert!(BetaKernel.log_density(&BetaKernelParam { a: 1.0, b: 1.0 }, y).abs() < 1e-12);
        }
        assert!(BetaKernel.checked_log_density(&BetaKernelParam { a: 2.0, b: 2.0 }, 1.0).is_err());
        assert!(BetaKernel.checked_log_density(&BetaKernelParam { a: 2.0, b: 2.0 }, -0.2).is_err());
    }

    #[test]
    fn beta_sample_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let th = BetaKernelParam { a: 5.0, b: 50.0 };
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| BetaKernel.sample(&th, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = 5.0 * 50.0 / (55.0f64.powi(2) * 56.0);
        assert!((mean - 5.0 / 55.0).abs() < 3.0 * (var / n as f64).sqrt());
    }
}
