use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::channels::density::normal_log_density;
use crate::mixtures::{BetaKernel, BetaKernelParam, Kernel, BETA_EDGE};

/// Confidential values with the generating component of each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
}

/// Known generating densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    /// Equal mixture of N(-5, 1), N(0, 1), N(5, 1) truncated to [-10, 10].
    TruncatedGaussianMixture,
    /// Equal mixture of Beta(5, 50), Beta(50, 50), Beta(50, 5).
    BetaMixture,
}

pub const GAUSSIAN_MEANS: [f64; 3] = [-5.0, 0.0, 5.0];
pub const GAUSSIAN_BOUND: f64 = 10.0;
pub const BETA_PARAMS: [(f64, f64); 3] = [(5.0, 50.0), (50.0, 50.0), (50.0, 5.0)];

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

impl Truth {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LabeledSample {
        match self {
            Truth::TruncatedGaussianMixture => generate_truncated_gaussian_mixture(n, rng),
            Truth::BetaMixture => generate_beta_mixture(n, rng),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Truth::TruncatedGaussianMixture => {
                if x.abs() > GAUSSIAN_BOUND {
                    return 0.0;
                }
                GAUSSIAN_MEANS
                    .iter()
                    .map(|&m| {
                        let mass = normal_cdf(GAUSSIAN_BOUND - m) - normal_cdf(-GAUSSIAN_BOUND - m);
                        normal_log_density(x, m, 1.0).exp() / mass
                    })
                    .sum::<f64>()
                    / 3.0
            }
            Truth::BetaMixture => {
                if !(x > 0.0 && x < 1.0) {
                    return 0.0;
                }
                BETA_PARAMS
                    .iter()
                    .map(|&(a, b)| BetaKernel.log_density(&BetaKernelParam { a, b }, x).exp())
                    .sum::<f64>()
                    / 3.0
            }
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Truth::TruncatedGaussianMixture => (-GAUSSIAN_BOUND, GAUSSIAN_BOUND),
            Truth::BetaMixture => (0.0, 1.0),
        }
    }
}

pub fn generate_truncated_gaussian_mixture<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LabeledSample {
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..3);
        let x = loop {
            let e: f64 = StandardNormal.sample(rng);
            let x = GAUSSIAN_MEANS[c] + e;
            if x.abs() <= GAUSSIAN_BOUND {
                break x;
            }
        };
        values.push(x);
        labels.push(c);
    }
    LabeledSample { values, labels }
}

pub fn generate_beta_mixture<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LabeledSample {
    let dists: Vec<Beta<f64>> = BETA_PARAMS.iter().map(|&(a, b)| Beta::new(a, b).expect("valid Beta")).collect();
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..3);
        values.push(dists[c].sample(rng).clamp(BETA_EDGE, 1.0 - BETA_EDGE));
        labels.push(c);
    }
    LabeledSample { values, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{trapezoid, uniform_grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_mixture_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let s = generate_truncated_gaussian_mixture(n, &mut rng);
        assert!(s.values.iter().all(|v| v.abs() <= 10.0));
        let se_p = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        for c in 0..3 {
            let p = s.labels.iter().filter(|&&l| l == c).count() as f64 / n as f64;
            assert!((p - 1.0 / 3.0).abs() < 3.0 * se_p);
        }
        // Mixture variance: 1 + 50/3.
        let mean = s.values.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * ((1.0 + 50.0 / 3.0) / n as f64).sqrt());
    }

    #[test]
    fn beta_mixture_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let s = generate_beta_mixture(n, &mut rng);
        assert!(s.values.iter().all(|&v| v > 0.0 && v < 1.0));
        for (c, &(a, b)) in BETA_PARAMS.iter().enumerate() {
            let xs: Vec<f64> = s.values.iter().zip(&s.labels).filter(|(_, &l)| l == c).map(|(v, _)| *v).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
            assert!((m - a / (a + b)).abs() < 3.0 * (var / xs.len() as f64).sqrt());
        }
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let total_var = s.values.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * (total_var / n as f64).sqrt());
    }

    #[test]
    fn true_densities_integrate_to_one() {
        for t in [Truth::TruncatedGaussianMixture, Truth::BetaMixture] {
            let (lo, hi) = t.domain();
            let x = uniform_grid(lo, hi, 20_001);
            let f: Vec<f64> = x.iter().map(|&v| t.density(v)).collect();
            assert!((trapezoid(&f, &x) - 1.0).abs() < 1e-6, "{t:?}");
        }
    }
}
