use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channels::density::normal_log_density;
use crate::error::{arg, Error, Result};
use crate::mixtures::{BaseMeasure, GaussianKernel, GaussianKernelParam, NigBase, SuffStats};
use crate::num::slice_sample_1d;
use crate::quadrature::gauss_legendre_unit;
use crate::special::{gamma_p_inv_ln, ln_gamma_p};

/// Smallest admissible prior mass of `{tau2 >= eta2}`.
pub const MIN_TRUNCATION_MASS: f64 = 1e-12;

/// Log density of `N(z | mu, sigma2 + eta2)`, the kernel convolved with the channel.
#[inline]
pub fn marginal_kernel_log_density(z: f64, mu: f64, sigma2: f64, eta2: f64) -> f64 {
    normal_log_density(z, mu, sigma2 + eta2)
}

/// Cluster parameters of the marginal model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalParam {
    pub mu: f64,
    pub tau2: f64,
}

/// Normal-inverse-gamma prior on `(mu, tau2)` restricted to `tau2 >= eta2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNigBase {
    pub mu0: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub eta2: f64,
}

impl TruncatedNigBase {
    pub fn new(nig: NigBase, eta2: f64) -> Result<Self> {
        NigBase::new(nig.mu0, nig.lambda, nig.a, nig.b)?;
        if !(eta2 >= 0.0 && eta2.is_finite()) {
            return arg(format!("truncation floor must be finite and nonnegative, got {eta2}"));
        }
        let base = Self { mu0: nig.mu0, lambda: nig.lambda, a: nig.a, b: nig.b, eta2 };
        base.check_mass()?;
        Ok(base)
    }

    pub fn nig(&self) -> NigBase {
        NigBase { mu0: self.mu0, lambda: self.lambda, a: self.a, b: self.b }
    }

    /// `ln P(tau2 >= eta2)` under the untruncated inverse gamma.
    pub fn log_mass(&self) -> f64 {
        if self.eta2 == 0.0 {
            return 0.0;
        }
        ln_gamma_p(self.a, self.b / self.eta2)
    }

    fn check_mass(&self) -> Result<()> {
        let lm = self.log_mass();
        if !(lm >= MIN_TRUNCATION_MASS.ln()) {
            return Err(Error::Config(format!(
                "inverse-gamma({}, {}) puts mass exp({lm:.3}) above tau2 >= {}; hyperparameters incompatible with the channel variance",
                self.a, self.b, self.eta2
            )));
        }
        Ok(())
    }

    pub fn posterior(&self, stats: &SuffStats) -> Self {
        let p = self.nig().posterior(stats);
        Self { mu0: p.mu0, lambda: p.lambda, a: p.a, b: p.b, eta2: self.eta2 }
    }

    /// Quantile of the truncated marginal of `tau2` at `u`, measured from the right tail
    /// of the precision (so `u -> 0` gives large `tau2`).
    pub fn tau2_quantile(&self, u: f64) -> f64 {
        let ln_p = u.ln() + self.log_mass();
        let prec = gamma_p_inv_ln(self.a, ln_p) / self.b;
        (1.0 / prec).max(self.eta2)
    }

    /// Exact draw by inversion; assumes the mass was validated at construction.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MarginalParam {
        let u: f64 = rng.random();
        let tau2 = self.tau2_quantile(u.max(f64::MIN_POSITIVE));
        let e: f64 = StandardNormal.sample(rng);
        MarginalParam { mu: self.mu0 + (tau2 / self.lambda).sqrt() * e, tau2 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MarginalParam> {
        self.check_mass()?;
        Ok(self.draw(rng))
    }
}

/// Log marginal likelihood of a cluster's released values under the truncated prior.
pub fn cluster_log_marginal(stats: &SuffStats, base: &TruncatedNigBase) -> Result<f64> {
    if stats.n == 0 {
        return Ok(0.0);
    }
    let post = base.posterior(stats);
    let v = base.nig().log_marginal(stats) + post.log_mass() - base.log_mass();
    if !v.is_finite() {
        return Err(Error::Config(format!(
            "truncation mass ratio underflows for eta2={} with posterior IG({}, {})",
            base.eta2, post.a, post.b
        )));
    }
    Ok(v)
}

const PREDICTIVE_NODES: usize = 32;

/// Prior on Gaussian kernel parameters `(mu, sigma2)` induced by the truncated prior
/// on `(mu, tau2)` through `sigma2 = tau2 - eta2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedNigBase {
    pub truncated: TruncatedNigBase,
}

impl ShiftedNigBase {
    pub fn new(truncated: TruncatedNigBase) -> Self {
        Self { truncated }
    }

    pub fn eta2(&self) -> f64 {
        self.truncated.eta2
    }

    pub fn to_kernel(&self, p: &MarginalParam) -> GaussianKernelParam {
        GaussianKernelParam { mu: p.mu, sigma2: (p.tau2 - self.eta2()).max(f64::MIN_POSITIVE) }
    }

    /// Log density of `ln sigma2` given data with `mu` integrated out, up to a constant.
    fn collapsed_log_density(&self, s: f64, stats: &SuffStats) -> f64 {
        let t = &self.truncated;
        let sigma2 = s.exp();
        let tau2 = sigma2 + t.eta2;
        let mut l = -(t.a + 1.0) * tau2.ln() - t.b / tau2 + s;
        if stats.n > 0 {
            let n = stats.n as f64;
            let v = tau2 / t.lambda;
            let d = stats.sum / n - t.mu0;
            let c = sigma2 + n * v;
            l += -0.5 * (n - 1.0) * s - 0.5 * c.ln() - stats.scatter() / (2.0 * sigma2) - n * d * d / (2.0 * c);
        }
        l
    }

    fn draw_mu<R: Rng + ?Sized>(&self, sigma2: f64, stats: &SuffStats, rng: &mut R) -> f64 {
        let t = &self.truncated;
        let prior_prec = t.lambda / (sigma2 + t.eta2);
        let n = stats.n as f64;
        let prec = prior_prec + n / sigma2;
        let mean = (prior_prec * t.mu0 + stats.sum / sigma2) / prec;
        let e: f64 = StandardNormal.sample(rng);
        mean + e / prec.sqrt()
    }
}

impl BaseMeasure for ShiftedNigBase {
    type Kernel = GaussianKernel;

    fn kernel(&self) -> &GaussianKernel {
        &GaussianKernel
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianKernelParam {
        self.to_kernel(&self.truncated.draw(rng))
    }

    fn update<R: Rng + ?Sized>(&self, current: &GaussianKernelParam, data: &[f64], rng: &mut R) -> GaussianKernelParam {
        if data.is_empty() {
            return self.sample(rng);
        }
        let stats = SuffStats::from_data(data);
        let s0 = current.sigma2.ln();
        let s = slice_sample_1d(s0, |s| self.collapsed_log_density(s, &stats), 1.0, 64, rng);
        let sigma2 = s.exp();
        GaussianKernelParam { mu: self.draw_mu(sigma2, &stats, rng), sigma2 }
    }

    fn prior_predictive(&self, x: f64) -> f64 {
        let t = &self.truncated;
        let (u, w) = gauss_legendre_unit(PREDICTIVE_NODES);
        u.iter()
            .zip(&w)
            .map(|(&ui, &wi)| {
                let tau2 = t.tau2_quantile(ui);
                wi * normal_log_density(x, t.mu0, tau2 - t.eta2 + tau2 / t.lambda).exp()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma_q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nig() -> NigBase {
        NigBase::new(0.0, 1.0, 3.0, 3.0).unwrap()
    }

    #[test]
    fn convolution_reference_value() {
        let v = marginal_kernel_log_density(1.0, 0.0, 1.0, 3.0);
        assert!((v - (-0.5 * (8.0 * std::f64::consts::PI).ln() - 0.125)).abs() < 1e-14);
    }

    #[test]
    fn untruncated_draws_match_inverse_gamma() {
        let base = TruncatedNigBase::new(nig(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| base.draw(&mut rng).tau2).collect();
        xs.sort_by(f64::total_cmp);
        // IG(a, b) CDF at x is Q(a, b / x).
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = ln_gamma_q(3.0, 3.0 / x).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn far_tail_truncation_is_respected() {
        let eta2 = 10.0 * 3.0 / 2.0;
        let base = TruncatedNigBase::new(nig(), eta2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            assert!(base.sample(&mut rng).unwrap().tau2 >= eta2);
        }
    }

    #[test]
    fn truncation_mass_matches_untruncated_frequency() {
        let eta2 = 1.2;
        let base = TruncatedNigBase::new(nig(), eta2).unwrap();
        let plain = TruncatedNigBase::new(nig(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| plain.nig().draw(&mut rng).sigma2 >= eta2).count();
        let p = base.log_mass().exp();
        let f = hits as f64 / n as f64;
        assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{f} vs {p}");
    }

    #[test]
    fn vanishing_mass_is_a_config_error() {
        let r = TruncatedNigBase::new(NigBase::new(0.0, 1.0, 20.0, 1.0).unwrap(), 50.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn untruncated_marginal_equals_nig() {
        let base = TruncatedNigBase::new(nig(), 0.0).unwrap();
        let data = [0.3, -1.2, 2.2];
        let s = SuffStats::from_data(&data);
        assert_eq!(cluster_log_marginal(&s, &base).unwrap(), nig().log_marginal(&s));
        assert_eq!(cluster_log_marginal(&SuffStats::default(), &base).unwrap(), 0.0);
    }

    #[test]
    fn marginal_is_exchangeable() {
        let base = TruncatedNigBase::new(nig(), 0.7).unwrap();
        let a = cluster_log_marginal(&SuffStats::from_data(&[0.1, 2.0, -0.5, 1.1]), &base).unwrap();
        let b = cluster_log_marginal(&SuffStats::from_data(&[1.1, -0.5, 0.1, 2.0]), &base).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn shifted_update_matches_prior_when_empty_and_is_stationary() {
        // With data, compare the chain's mean of sigma2 to the collapsed target by quadrature.
        let t = TruncatedNigBase::new(nig(), 0.5).unwrap();
        let base = ShiftedNigBase::new(t);
        let data = [0.4, 1.3, -0.2, 0.9];
        let stats = SuffStats::from_data(&data);
        let (u, w) = gauss_legendre_unit(64);
        let (lo, hi) = (-12.0, 6.0);
        let (mut z, mut m) = (0.0, 0.0);
        for (ui, wi) in u.iter().zip(&w) {
            let s = lo + (hi - lo) * ui;
            let d = base.collapsed_log_density(s, &stats).exp() * wi;
            z += d;
            m += d * s.exp();
        }
        let expected = m / z;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = GaussianKernelParam { mu: 0.0, sigma2: 1.0 };
        let iters = 200_000;
        let mut acc = 0.0;
        for _ in 0..iters {
            p = base.update(&p, &data, &mut rng);
            acc += p.sigma2;
        }
        let got = acc / iters as f64;
        assert!((got - expected).abs() < 0.02 * expected, "{got} vs {expected}");
    }

    #[test]
    fn shifted_predictive_reduces_to_student_t() {
        let base = ShiftedNigBase::new(TruncatedNigBase::new(nig(), 0.0).unwrap());
        for x in [-2.0, 0.0, 0.5, 3.0] {
            let q = base.prior_predictive(x);
            let exact = nig().prior_predictive(x);
            assert!((q - exact).abs() < 2e-3 * exact, "{x}: {q} vs {exact}");
        }
    }
}
