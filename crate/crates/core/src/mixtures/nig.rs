use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{BaseMeasure, GaussianKernel, GaussianKernelParam};
use crate::error::{arg, Result};
use crate::special::ln_gamma;

/// Count, sum and sum of squares of a cluster's data.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SuffStats {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl SuffStats {
    pub fn from_data(data: &[f64]) -> Self {
        let mut s = Self::default();
        for &x in data {
            s.add(x);
        }
        s
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    #[inline]
    pub fn remove(&mut self, x: f64) {
        debug_assert!(self.n > 0);
        self.n -= 1;
        if self.n == 0 {
            *self = Self::default();
        } else {
            self.sum -= x;
            self.sum_sq -= x * x;
        }
    }

    /// Sum of squared deviations from the sample mean.
    pub fn scatter(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.sum_sq - self.sum * self.sum / self.n as f64).max(0.0)
    }
}

/// Normal-inverse-gamma prior: `mu | s2 ~ N(mu0, s2 / lambda)`, `s2 ~ IG(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigBase {
    pub mu0: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

impl NigBase {
    pub fn new(mu0: f64, lambda: f64, a: f64, b: f64) -> Result<Self> {
        if !(mu0.is_finite() && lambda > 0.0 && a > 0.0 && b > 0.0 && lambda.is_finite() && a.is_finite() && b.is_finite()) {
            return arg(format!("invalid NIG hyperparameters mu0={mu0} lambda={lambda} a={a} b={b}"));
        }
        Ok(Self { mu0, lambda, a, b })
    }

    pub fn posterior(&self, stats: &SuffStats) -> NigBase {
        nig_posterior(self, stats)
    }

    /// Log marginal likelihood of the data summarised by `stats`.
    pub fn log_marginal(&self, stats: &SuffStats) -> f64 {
        let p = self.posterior(stats);
        ln_gamma(p.a) - ln_gamma(self.a) + self.a * self.b.ln() - p.a * p.b.ln()
            + 0.5 * (self.lambda / p.lambda).ln()
            - 0.5 * stats.n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Log density of a new observation under this prior (Student-t).
    pub fn predictive_log_density(&self, x: f64) -> f64 {
        let scale2 = self.b * (1.0 + self.lambda) / (self.a * self.lambda);
        student_t_log_density(x, 2.0 * self.a, self.mu0, scale2)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianKernelParam {
        let prec: f64 = Gamma::new(self.a, 1.0 / self.b).expect("valid gamma").sample(rng);
        let sigma2 = 1.0 / prec;
        let e: f64 = StandardNormal.sample(rng);
        GaussianKernelParam { mu: self.mu0 + (sigma2 / self.lambda).sqrt() * e, sigma2 }
    }
}

pub fn nig_posterior(prior: &NigBase, stats: &SuffStats) -> NigBase {
    if stats.n == 0 {
        return *prior;
    }
    let n = stats.n as f64;
    let lambda = prior.lambda + n;
    let mean = stats.sum / n;
    let mu0 = (prior.lambda * prior.mu0 + stats.sum) / lambda;
    let d = mean - prior.mu0;
    let b = prior.b + 0.5 * stats.scatter() + prior.lambda * n * d * d / (2.0 * lambda);
    NigBase { mu0, lambda, a: prior.a + 0.5 * n, b }
}

/// Location-scale Student-t log density; `scale2` is the squared scale.
pub fn student_t_log_density(x: f64, dof: f64, loc: f64, scale2: f64) -> f64 {
    let z2 = (x - loc).powi(2) / scale2;
    ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * std::f64::consts::PI * scale2).ln()
        - 0.5 * (dof + 1.0) * (z2 / dof).ln_1p()
}

impl BaseMeasure for NigBase {
    type Kernel = GaussianKernel;

    fn kernel(&self) -> &GaussianKernel {
        &GaussianKernel
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianKernelParam {
        self.draw(rng)
    }

    fn update<R: Rng + ?Sized>(&self, _current: &GaussianKernelParam, data: &[f64], rng: &mut R) -> GaussianKernelParam {
        self.posterior(&SuffStats::from_data(data)).draw(rng)
    }

    fn prior_predictive(&self, x: f64) -> f64 {
        self.predictive_log_density(x).exp()
    }
}
