use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::density::{laplace_log_density, normal_log_density};
use super::haar::{active_translate, coefficient_count, coefficient_index};
use super::Interval;
use crate::error::{arg, Result};

/// A record-wise privacy mechanism with an evaluable density `q(z | y)`.
///
/// Records are flat `f64` slices of length [`LocalChannel::record_len`].
pub trait LocalChannel: Send + Sync {
    fn record_len(&self) -> usize;

    /// Declared domain of the confidential values.
    fn domain(&self) -> Interval;

    /// `log q(z | y)`. The caller guarantees `z.len() == record_len()`.
    fn log_density(&self, z: &[f64], y: f64) -> f64;

    fn sample_record<R: Rng + ?Sized>(&self, y: f64, out: &mut [f64], rng: &mut R);

    /// `Some(eps)` when the channel is pure `eps`-DP over the whole real line.
    fn pure_epsilon(&self) -> Option<f64>;

    /// Starting value for the latent confidential datum behind record `z`.
    fn initial_latent<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> f64;
}

pub(crate) fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    if rng.random::<bool>() {
        scale * e
    } else {
        -scale * e
    }
}

/// `Z = clip(Y) + L(0, diameter / epsilon)`.
///
/// The density projects `y` onto the domain before adding noise, so the
/// ratio bound `q(z|y) / q(z|y') <= e^eps` holds for every real `y`, not
/// only for values inside the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceChannel {
    pub domain: Interval,
    pub epsilon: f64,
    pub scale: f64,
}

impl LaplaceChannel {
    pub fn new(domain: Interval, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return arg(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self { domain, epsilon, scale: domain.diameter() / epsilon })
    }

    /// Laplace noise calibrated to `rho`-zCDP: scale `diameter / sqrt(2 rho)`.
    pub fn from_zcdp(domain: Interval, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return arg(format!("rho must be positive, got {rho}"));
        }
        Self::new(domain, (2.0 * rho).sqrt())
    }
}

impl LocalChannel for LaplaceChannel {
    fn record_len(&self) -> usize {
        1
    }
    fn domain(&self) -> Interval {
        self.domain
    }
    #[inline]
    fn log_density(&self, z: &[f64], y: f64) -> f64 {
        laplace_log_density(z[0], self.domain.clamp(y), self.scale)
    }
    fn sample_record<R: Rng + ?Sized>(&self, y: f64, out: &mut [f64], rng: &mut R) {
        out[0] = y + sample_laplace(self.scale, rng);
    }
    fn pure_epsilon(&self) -> Option<f64> {
        Some(self.epsilon)
    }
    fn initial_latent<R: Rng + ?Sized>(&self, z: &[f64], _rng: &mut R) -> f64 {
        self.domain.interior(z[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GaussianCalibration {
    EpsDelta { epsilon: f64, delta: f64 },
    Zcdp { rho: f64 },
    Variance,
}

/// `Z = Y + N(0, sigma2)`. Not pure DP; no projection of `y` so that the
/// density convolves in closed form with a Gaussian kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    pub domain: Interval,
    pub sigma2: f64,
    pub calibration: GaussianCalibration,
}

/// `sqrt(2 log(1.25 / delta)) * diameter / epsilon`.
pub fn gaussian_sigma(epsilon: f64, delta: f64, diameter: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(diameter > 0.0) {
        return arg(format!(
            "gaussian_sigma needs epsilon > 0, delta in (0,1), diameter > 0; got ({epsilon}, {delta}, {diameter})"
        ));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() * diameter / epsilon)
}

/// Noise variance `diameter^2 / (2 rho)` of the `rho`-zCDP Gaussian mechanism.
pub fn zcdp_gaussian_variance(rho: f64, diameter: f64) -> Result<f64> {
    if !(rho > 0.0) || !(diameter > 0.0) {
        return arg(format!("zcdp variance needs rho > 0, diameter > 0; got ({rho}, {diameter})"));
    }
    Ok(diameter * diameter / (2.0 * rho))
}

impl GaussianChannel {
    pub fn eps_delta(domain: Interval, epsilon: f64, delta: f64) -> Result<Self> {
        let eta = gaussian_sigma(epsilon, delta, domain.diameter())?;
        Ok(Self { domain, sigma2: eta * eta, calibration: GaussianCalibration::EpsDelta { epsilon, delta } })
    }

    pub fn zcdp(domain: Interval, rho: f64) -> Result<Self> {
        let sigma2 = zcdp_gaussian_variance(rho, domain.diameter())?;
        Ok(Self { domain, sigma2, calibration: GaussianCalibration::Zcdp { rho } })
    }

    pub fn with_variance(domain: Interval, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return arg(format!("noise variance must be positive, got {sigma2}"));
        }
        Ok(Self { domain, sigma2, calibration: GaussianCalibration::Variance })
    }
}

impl LocalChannel for GaussianChannel {
    fn record_len(&self) -> usize {
        1
    }
    fn domain(&self) -> Interval {
        self.domain
    }
    #[inline]
    fn log_density(&self, z: &[f64], y: f64) -> f64 {
        normal_log_density(z[0], y, self.sigma2)
    }
    fn sample_record<R: Rng + ?Sized>(&self, y: f64, out: &mut [f64], rng: &mut R) {
        let e: f64 = StandardNormal.sample(rng);
        out[0] = y + self.sigma2.sqrt() * e;
    }
    fn pure_epsilon(&self) -> Option<f64> {
        None
    }
    fn initial_latent<R: Rng + ?Sized>(&self, z: &[f64], _rng: &mut R) -> f64 {
        self.domain.interior(z[0])
    }
}

/// Haar-wavelet mechanism: `Z_{j,k} = psi_{j,k}(u(Y)) + L(0, s)` for
/// `j = 0..=levels`, with `u` the affine map of the domain onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletChannel {
    pub domain: Interval,
    pub levels: u32,
    pub epsilon: f64,
    pub scale: f64,
}

impl WaveletChannel {
    pub fn new(domain: Interval, levels: u32, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return arg(format!("epsilon must be positive, got {epsilon}"));
        }
        if levels > 20 {
            return arg(format!("wavelet resolution J={levels} is too large"));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let scale = 12.0 / epsilon * sqrt2 / (sqrt2 - 1.0) * (levels as f64 * 0.5).exp2();
        Ok(Self { domain, levels, epsilon, scale })
    }

    pub fn dim(&self) -> usize {
        coefficient_count(self.levels)
    }
}

impl LocalChannel for WaveletChannel {
    fn record_len(&self) -> usize {
        self.dim()
    }
    fn domain(&self) -> Interval {
        self.domain
    }
    fn log_density(&self, z: &[f64], y: f64) -> f64 {
        let u = self.domain.to_unit(y);
        let s = self.scale;
        let mut l1: f64 = z.iter().map(|v| v.abs()).sum();
        for j in 0..=self.levels {
            if let Some(k) = active_translate(j, u) {
                let zc = z[coefficient_index(j, k)];
                let psi = (j as f64 * 0.5).exp2();
                let psi = if u * (j as f64).exp2() - (k as f64) < 0.5 { psi } else { -psi };
                l1 += (zc - psi).abs() - zc.abs();
            }
        }
        -(z.len() as f64) * (2.0 * s).ln() - l1 / s
    }
    fn sample_record<R: Rng + ?Sized>(&self, y: f64, out: &mut [f64], rng: &mut R) {
        let u = self.domain.to_unit(y);
        for v in out.iter_mut() {
            *v = sample_laplace(self.scale, rng);
        }
        for j in 0..=self.levels {
            if let Some(k) = active_translate(j, u) {
                out[coefficient_index(j, k)] +=
                    super::haar::haar_psi_unchecked::<f64>(j, k, u);
            }
        }
    }
    fn pure_epsilon(&self) -> Option<f64> {
        Some(self.epsilon)
    }
    /// Largest finest-level coefficient picks the dyadic cell; its sign
    /// picks the half-cell; draw uniformly inside it.
    fn initial_latent<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> f64 {
        let j = self.levels;
        let start = coefficient_index(j, 0);
        let finest = &z[start..];
        let (k, &v) = finest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty finest level");
        let width = (-(j as f64)).exp2();
        let left = width * k as f64 + if v >= 0.0 { 0.0 } else { 0.5 * width };
        let u = left + 0.5 * width * rng.random::<f64>();
        self.domain.interior(self.domain.from_unit(u))
    }
}

/// Runtime choice among the local mechanisms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum LocalMechanism {
    Laplace(LaplaceChannel),
    Gaussian(GaussianChannel),
    Wavelet(WaveletChannel),
}

macro_rules! dispatch {
    ($self:ident, $c:ident => $e:expr) => {
        match $self {
            LocalMechanism::Laplace($c) => $e,
            LocalMechanism::Gaussian($c) => $e,
            LocalMechanism::Wavelet($c) => $e,
        }
    };
}

impl LocalChannel for LocalMechanism {
    fn record_len(&self) -> usize {
        dispatch!(self, c => c.record_len())
    }
    fn domain(&self) -> Interval {
        dispatch!(self, c => c.domain())
    }
    #[inline]
    fn log_density(&self, z: &[f64], y: f64) -> f64 {
        dispatch!(self, c => c.log_density(z, y))
    }
    fn sample_record<R: Rng + ?Sized>(&self, y: f64, out: &mut [f64], rng: &mut R) {
        dispatch!(self, c => c.sample_record(y, out, rng))
    }
    fn pure_epsilon(&self) -> Option<f64> {
        dispatch!(self, c => c.pure_epsilon())
    }
    fn initial_latent<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> f64 {
        dispatch!(self, c => c.initial_latent(z, rng))
    }
}
