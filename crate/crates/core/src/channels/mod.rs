//! Privacy channels: sanitization, exact log-densities, calibration and
//! empirical verification of the local DP ratio bound.

mod dataset;
pub mod density;
pub mod haar;
pub mod histogram;
mod local;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

pub use dataset::{DatasetKind, SanitizedDataset};
pub use haar::{coefficient_count, coefficient_index, haar_psi};
pub use histogram::{histogram_privacy_loss, rate_parameters, solve_delta, HistogramCache, SmoothedHistogramChannel};
pub use local::{
    gaussian_sigma, zcdp_gaussian_variance, GaussianCalibration, GaussianChannel, LaplaceChannel,
    LocalChannel, LocalMechanism, WaveletChannel,
};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return arg(format!("invalid interval [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Clamps `x` to the domain shrunk by `1e-6` of its diameter on each side.
    #[inline]
    pub fn interior(&self, x: f64) -> f64 {
        let pad = 1e-6 * self.diameter();
        x.clamp(self.lo + pad, self.hi - pad)
    }

    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo)
    }

    #[inline]
    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum GlobalMechanism {
    SmoothedHistogram(SmoothedHistogramChannel),
}

/// Any supported mechanism. Serializes as a JSON object tagged by
/// `"mechanism"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Channel {
    Local(LocalMechanism),
    Global(GlobalMechanism),
}

impl From<LaplaceChannel> for Channel {
    fn from(c: LaplaceChannel) -> Self {
        Channel::Local(LocalMechanism::Laplace(c))
    }
}
impl From<GaussianChannel> for Channel {
    fn from(c: GaussianChannel) -> Self {
        Channel::Local(LocalMechanism::Gaussian(c))
    }
}
impl From<WaveletChannel> for Channel {
    fn from(c: WaveletChannel) -> Self {
        Channel::Local(LocalMechanism::Wavelet(c))
    }
}
impl From<SmoothedHistogramChannel> for Channel {
    fn from(c: SmoothedHistogramChannel) -> Self {
        Channel::Global(GlobalMechanism::SmoothedHistogram(c))
    }
}

impl Channel {
    pub fn domain(&self) -> Interval {
        match self {
            Channel::Local(c) => c.domain(),
            Channel::Global(GlobalMechanism::SmoothedHistogram(c)) => c.domain,
        }
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            Channel::Local(LocalMechanism::Wavelet(_)) => DatasetKind::WaveletCoefficients,
            Channel::Local(_) => DatasetKind::ScalarPerRecord,
            Channel::Global(_) => DatasetKind::GlobalSample,
        }
    }

    /// Sanitizes the confidential vector `y`. Out-of-domain values are
    /// rejected, never clipped.
    pub fn sanitize<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<SanitizedDataset> {
        let domain = self.domain();
        if let Some(&bad) = y.iter().find(|v| !domain.contains(**v)) {
            return Err(Error::Domain { value: bad, lo: domain.lo, hi: domain.hi });
        }
        match self {
            Channel::Local(c) => {
                let dim = c.record_len();
                let mut values = vec![0.0; dim * y.len()];
                for (row, &v) in values.chunks_exact_mut(dim).zip(y) {
                    c.sample_record(v, row, rng);
                }
                SanitizedDataset::new(self.kind(), dim, values, self.clone())
            }
            Channel::Global(GlobalMechanism::SmoothedHistogram(c)) => {
                let w = c.sample_release(y, rng)?;
                SanitizedDataset::new(DatasetKind::GlobalSample, 1, w, self.clone())
            }
        }
    }

    /// `log q(z | y)`. For local channels `z` is one record and `y` a single
    /// value; for the global channel `z` is the released sample and `y` the
    /// full confidential vector.
    pub fn log_density(&self, z: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Channel::Local(c) => {
                if z.len() != c.record_len() || y.len() != 1 {
                    return arg(format!(
                        "local channel expects a record of length {} and one confidential value; got {} and {}",
                        c.record_len(),
                        z.len(),
                        y.len()
                    ));
                }
                Ok(c.log_density(z, y[0]))
            }
            Channel::Global(GlobalMechanism::SmoothedHistogram(c)) => {
                if y.is_empty() {
                    return arg("global channel density needs the full confidential vector");
                }
                Ok(c.log_density(z, y))
            }
        }
    }
}

/// Outcome of [`verify_ldp_ratio`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioCheck {
    pub max_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Largest `q(z | y) / q(z | y')` over all grid triples, compared with `e^eps`.
pub fn verify_ldp_ratio(channel: &Channel, epsilon: f64, y_grid: &[f64], z_grid: &[Vec<f64>]) -> Result<RatioCheck> {
    let Channel::Local(c) = channel else {
        return Err(Error::Unsupported("ratio verification applies to local channels only".into()));
    };
    if y_grid.is_empty() || z_grid.is_empty() {
        return arg("empty verification grid");
    }
    let mut worst = f64::NEG_INFINITY;
    for z in z_grid {
        if z.len() != c.record_len() {
            return arg(format!("grid record has length {}, expected {}", z.len(), c.record_len()));
        }
        let (lo, hi) = y_grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            let l = c.log_density(z, y);
            (lo.min(l), hi.max(l))
        });
        worst = worst.max(hi - lo);
    }
    let max_ratio = worst.exp();
    let bound = epsilon.exp();
    Ok(RatioCheck { max_ratio, bound, holds: worst <= epsilon * (1.0 + 1e-12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(h: f64) -> Interval {
        Interval::new(-h, h).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn laplace_noise_variance() {
        let ch: Channel = LaplaceChannel::new(sym(10.0), 1.0).unwrap().into();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = vec![0.0; 100_000];
        let z = ch.sanitize(&y, &mut rng).unwrap();
        let var = z.values.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var / 800.0 - 1.0).abs() < 0.03, "var {var}");

        let tight: Channel = LaplaceChannel::new(sym(10.0), 1e6).unwrap().into();
        let y: Vec<f64> = (0..100_000).map(|i| -10.0 + 20.0 * i as f64 / 100_000.0).collect();
        let z = tight.sanitize(&y, &mut rng).unwrap();
        let var = z.values.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        assert!(var < 1e-6);
    }

    #[test]
    fn sanitize_rejects_out_of_domain() {
        let ch: Channel = LaplaceChannel::new(sym(10.0), 1.0).unwrap().into();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(ch.sanitize(&[0.0, 10.5], &mut rng), Err(Error::Domain { .. })));
    }

    #[test]
    fn sanitize_is_seed_deterministic() {
        let ch: Channel = WaveletChannel::new(Interval::unit(), 3, 2.0).unwrap().into();
        let y = [0.1, 0.5, 0.9];
        let a = ch.sanitize(&y, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = ch.sanitize(&y, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn wavelet_shape_and_scale() {
        let ch = WaveletChannel::new(Interval::unit(), 4, 2.0).unwrap();
        assert_eq!(ch.dim(), 31);
        let expected = 6.0 * (2f64.sqrt() / (2f64.sqrt() - 1.0)) * 4.0;
        assert!((ch.scale - expected).abs() < 1e-12);
        assert!((ch.scale - 81.9411).abs() < 1e-4);
        let z = Channel::from(ch).sanitize(&[0.3, 0.7], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(z.dim, 31);
        assert_eq!(z.len(), 2);
    }

    #[test]
    fn wavelet_density_is_product_of_laplace_terms() {
        let ch = WaveletChannel::new(Interval::unit(), 2, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = vec![0.0; ch.dim()];
        ch.sample_record(0.3, &mut z, &mut rng);
        for &y in &[0.0, 0.3, 0.62, 0.999, 1.0] {
            let mut direct = 0.0;
            for j in 0..=2u32 {
                for k in 0..(1u64 << j) {
                    let psi: f64 = haar_psi(j, k, y).unwrap();
                    direct += density::laplace_log_density(z[coefficient_index(j, k)], psi, ch.scale);
                }
            }
            assert!((ch.log_density(&z, y) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_log_densities() {
        let lap: Channel = LaplaceChannel { domain: sym(10.0), epsilon: 1.0, scale: 20.0 }.into();
        assert!((lap.log_density(&[0.0], &[0.0]).unwrap() + 3.688879).abs() < 1e-6);
        let gau: Channel = GaussianChannel::with_variance(sym(10.0), 1.0).unwrap().into();
        assert!((gau.log_density(&[1.0], &[0.0]).unwrap() + 1.418939).abs() < 1e-6);
        assert!(lap.log_density(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn local_densities_integrate_to_one() {
        let lap = LaplaceChannel::new(sym(10.0), 2.0).unwrap();
        let gau = GaussianChannel::with_variance(sym(10.0), 2.5).unwrap();
        let simpson = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize| {
            let h = (hi - lo) / n as f64;
            let mut s = f(lo) + f(hi);
            for i in 1..n {
                s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        for &y in &[-3.0, 0.0, 7.5] {
            // Laplace has a kink at y: integrate the halves separately.
            let f = |z: f64| lap.log_density(&[z], y).exp();
            // tail mass beyond 12 scales is e^-12 ~ 6e-6, so widen to 20
            let w = 20.0 * lap.scale;
            let total = simpson(&f, y - w, y, 20_000) + simpson(&f, y, y + w, 20_000);
            assert!((total - 1.0).abs() < 1e-6, "laplace {total}");
            let g = |z: f64| gau.log_density(&[z], y).exp();
            let w = 12.0 * gau.sigma2.sqrt();
            assert!((simpson(&g, y - w, y + w, 20_000) - 1.0).abs() < 1e-6);
        }
        // wavelet: coordinate (j,k) has marginal density L(psi_{j,k}(y), s)
        let wav = WaveletChannel::new(Interval::unit(), 2, 20.0).unwrap();
        let y = 0.3;
        let mut psi = vec![0.0; wav.dim()];
        for j in 0..=2u32 {
            for k in 0..(1u64 << j) {
                psi[coefficient_index(j, k)] = haar_psi(j, k, y).unwrap();
            }
        }
        for idx in 0..wav.dim() {
            let mut z = psi.clone();
            let at_mode = wav.log_density(&z, y) - density::laplace_log_density(0.0, 0.0, wav.scale);
            let f = |t: f64| {
                let mut z = psi.clone();
                z[idx] = t;
                (wav.log_density(&z, y) - at_mode).exp()
            };
            z[idx] = psi[idx];
            let w = 20.0 * wav.scale;
            let total = simpson(&f, psi[idx] - w, psi[idx], 20_000) + simpson(&f, psi[idx], psi[idx] + w, 20_000);
            assert!((total - 1.0).abs() < 1e-6, "wavelet coord {idx}: {total}");
        }
    }

    #[test]
    fn ldp_ratio_grid() {
        let ch: Channel = LaplaceChannel::new(sym(10.0), 1.0).unwrap().into();
        let ys = grid(-10.0, 10.0, 41);
        let zs: Vec<Vec<f64>> = grid(-40.0, 40.0, 161).into_iter().map(|z| vec![z]).collect();
        let check = verify_ldp_ratio(&ch, 1.0, &ys, &zs).unwrap();
        assert!(check.holds);
        assert!(check.max_ratio <= 1f64.exp() * (1.0 + 1e-12));
        assert!(check.max_ratio >= 0.99f64.exp());

        let same = verify_ldp_ratio(&ch, 1.0, &[0.5], &zs).unwrap();
        assert_eq!(same.max_ratio, 1.0);

        let gau: Channel = GaussianChannel::with_variance(sym(10.0), 4.0).unwrap().into();
        let g = verify_ldp_ratio(&gau, 1.0, &ys, &zs).unwrap();
        assert!(g.max_ratio.is_finite());
        assert!(!g.holds);

        let hist: Channel = SmoothedHistogramChannel::new(Interval::unit(), 4, 0.3, 5, 1.0, 10).unwrap().into();
        assert!(matches!(verify_ldp_ratio(&hist, 1.0, &ys, &zs), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn laplace_ratio_bound_holds_pointwise(
            eps in 0.05f64..20.0, z in -100.0f64..100.0, y1 in -10.0f64..10.0, y2 in -10.0f64..10.0,
        ) {
            let ch = LaplaceChannel::new(sym(10.0), eps).unwrap();
            let d = (ch.log_density(&[z], y1) - ch.log_density(&[z], y2)).abs();
            prop_assert!(d <= eps * (1.0 + 1e-12));
        }

        #[test]
        fn laplace_ratio_bound_holds_off_domain(
            eps in 0.05f64..20.0, z in -100.0f64..100.0, y1 in -60.0f64..60.0, y2 in -60.0f64..60.0,
        ) {
            let ch = LaplaceChannel::new(sym(10.0), eps).unwrap();
            let d = (ch.log_density(&[z], y1) - ch.log_density(&[z], y2)).abs();
            prop_assert!(d <= eps * (1.0 + 1e-12));
        }
    }
}
