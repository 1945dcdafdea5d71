use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Interval;
use crate::error::{arg, Error, Result};

/// Global mechanism releasing `k` i.i.d. draws from the smoothed histogram
/// density `f(x) = (1 - delta_h) * m * c_{j(x)} / n + delta_h` on `[0, 1]`.
///
/// Released values are on the unit scale of `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedHistogramChannel {
    pub domain: Interval,
    pub bins: usize,
    /// Smoothing mass `delta_h` (distinct from the `delta` of (eps, delta)-DP).
    pub smoothing: f64,
    pub release_k: usize,
    pub epsilon: f64,
    /// Number of confidential records the histogram is built from.
    pub records: usize,
}

/// Absolute bisection tolerance on `delta_h` guaranteed by [`solve_delta`].
pub const DELTA_TOLERANCE: f64 = 1e-10;

/// `k log(((1 - delta) / delta) (m / n) - 1)`, or `-inf` where the
/// argument of the logarithm is not positive.
pub fn histogram_privacy_loss(n: usize, m: usize, k: usize, delta: f64) -> f64 {
    let arg = (1.0 - delta) / delta * (m as f64 / n as f64) - 1.0;
    if arg <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * arg.ln()
    }
}

/// Smallest `delta` in `(0, 1)` with `k log(((1-delta)/delta)(m/n) - 1) <= eps`.
///
/// The left side decreases in `delta` and is only defined below
/// `m / (m + n)`, so the search runs over `(0, m / (m + n))`.
pub fn solve_delta(n: usize, m: usize, k: usize, epsilon: f64) -> Result<f64> {
    if n == 0 || m == 0 || k == 0 {
        return arg(format!("solve_delta needs n, m, k >= 1; got ({n}, {m}, {k})"));
    }
    if !epsilon.is_finite() {
        return Err(Error::Infeasible(format!("epsilon must be finite, got {epsilon}")));
    }
    let h = |d: f64| histogram_privacy_loss(n, m, k, d) - epsilon;
    let mut lo = f64::MIN_POSITIVE;
    if h(lo) <= 0.0 {
        return Err(Error::Infeasible(format!(
            "constraint holds for every delta (n={n}, m={m}, k={k}, eps={epsilon}); no smallest delta"
        )));
    }
    let mut hi = m as f64 / (m + n) as f64;
    while hi - lo > 1e-3 * DELTA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Appendix-style parameterization for a sample of size `n`:
/// `m = L floor(n^{1/5} + 1)` bins and `k = floor(n^{3/5} + 1)` released draws.
pub fn rate_parameters(n: usize, multiplier: usize) -> (usize, usize) {
    let nf = n as f64;
    let m = multiplier * (nf.powf(0.2) + 1.0).floor() as usize;
    let k = (nf.powf(0.6) + 1.0).floor() as usize;
    (m, k)
}

impl SmoothedHistogramChannel {
    pub fn new(
        domain: Interval,
        bins: usize,
        smoothing: f64,
        release_k: usize,
        epsilon: f64,
        records: usize,
    ) -> Result<Self> {
        if records == 0 {
            return arg("global release needs at least one record");
        }
        if bins == 0 {
            return arg("histogram needs at least one bin");
        }
        if !(smoothing > 0.0 && smoothing < 1.0) {
            return arg(format!("smoothing mass must lie in (0,1), got {smoothing}"));
        }
        if !(epsilon > 0.0) {
            return arg(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self { domain, bins, smoothing, release_k, epsilon, records })
    }

    /// Smoothing chosen by [`solve_delta`] for a dataset of size `n`.
    pub fn calibrated(domain: Interval, n: usize, bins: usize, release_k: usize, epsilon: f64) -> Result<Self> {
        let smoothing = solve_delta(n, bins, release_k, epsilon)?;
        Self::new(domain, bins, smoothing, release_k, epsilon, n)
    }

    /// Bin of a confidential value (original units). Values outside the
    /// domain fall into the boundary bins.
    #[inline]
    pub fn bin_of(&self, y: f64) -> usize {
        self.unit_bin(self.domain.to_unit(y))
    }

    #[inline]
    pub fn unit_bin(&self, u: f64) -> usize {
        let b = (u.clamp(0.0, 1.0) * self.bins as f64).floor();
        (b as usize).min(self.bins - 1)
    }

    /// `log f(x)` for a point in a bin holding `count` of `n` records.
    #[inline]
    pub fn log_bin_density(&self, count: usize, n: usize) -> f64 {
        ((1.0 - self.smoothing) * self.bins as f64 * count as f64 / n as f64 + self.smoothing).ln()
    }

    pub fn privacy_loss(&self, n: usize) -> f64 {
        histogram_privacy_loss(n, self.bins, self.release_k, self.smoothing)
    }

    pub fn bin_counts(&self, y: &[f64]) -> Vec<usize> {
        let mut c = vec![0; self.bins];
        for &v in y {
            c[self.bin_of(v)] += 1;
        }
        c
    }

    /// Counts of released unit-scale points per bin.
    pub fn release_counts(&self, w: &[f64]) -> Vec<usize> {
        let mut c = vec![0; self.bins];
        for &v in w {
            c[self.unit_bin(v)] += 1;
        }
        c
    }

    pub fn check_domain(&self, y: &[f64]) -> Result<()> {
        for &v in y {
            if !self.domain.contains(v) {
                return Err(Error::Domain { value: v, lo: self.domain.lo, hi: self.domain.hi });
            }
        }
        Ok(())
    }

    /// Draws the `k` released points (unit scale).
    pub fn sample_release<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_domain(y)?;
        if y.len() != self.records {
            return arg(format!("channel calibrated for {} records, got {}", self.records, y.len()));
        }
        let loss = self.privacy_loss(y.len());
        if loss > self.epsilon * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "smoothing {} gives privacy loss {loss} > eps {} for n={}",
                self.smoothing,
                self.epsilon,
                y.len()
            )));
        }
        let width = 1.0 / self.bins as f64;
        Ok((0..self.release_k)
            .map(|_| {
                if rng.random::<f64>() < self.smoothing {
                    rng.random::<f64>()
                } else {
                    let i = rng.random_range(0..y.len());
                    let b = self.bin_of(y[i]) as f64;
                    (b + rng.random::<f64>()) * width
                }
            })
            .collect())
    }

    /// `log q(W | Y) = sum_l log f(W_l)`.
    pub fn log_density(&self, w: &[f64], y: &[f64]) -> f64 {
        let counts = self.bin_counts(y);
        w.iter().map(|&v| self.log_bin_density(counts[self.unit_bin(v)], y.len())).sum()
    }
}

/// Histogram counts of the latent data, kept in sync with single-record
/// moves so that `log q(W | Y)` changes are evaluated in O(1).
#[derive(Clone, Debug)]
pub struct HistogramCache {
    counts: Vec<usize>,
    latent_bins: Vec<usize>,
    release: Vec<usize>,
}

impl HistogramCache {
    pub fn new(channel: &SmoothedHistogramChannel, w: &[f64], latent: &[f64]) -> Self {
        let latent_bins: Vec<usize> = latent.iter().map(|&y| channel.bin_of(y)).collect();
        let mut counts = vec![0; channel.bins];
        for &b in &latent_bins {
            counts[b] += 1;
        }
        Self { counts, latent_bins, release: channel.release_counts(w) }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bin_of_record(&self, i: usize) -> usize {
        self.latent_bins[i]
    }

    pub fn log_q(&self, channel: &SmoothedHistogramChannel) -> f64 {
        let n = self.latent_bins.len();
        self.release
            .iter()
            .zip(&self.counts)
            .filter(|(d, _)| **d > 0)
            .map(|(&d, &c)| d as f64 * channel.log_bin_density(c, n))
            .sum()
    }

    /// Change in `log q(W | Y)` if record `i` moves to bin `to`.
    #[inline]
    pub fn log_ratio_move(&self, channel: &SmoothedHistogramChannel, i: usize, to: usize) -> f64 {
        let from = self.latent_bins[i];
        if from == to {
            return 0.0;
        }
        let n = self.latent_bins.len();
        let (cf, ct) = (self.counts[from], self.counts[to]);
        let (df, dt) = (self.release[from] as f64, self.release[to] as f64);
        let mut delta = 0.0;
        if df > 0.0 {
            delta += df * (channel.log_bin_density(cf - 1, n) - channel.log_bin_density(cf, n));
        }
        if dt > 0.0 {
            delta += dt * (channel.log_bin_density(ct + 1, n) - channel.log_bin_density(ct, n));
        }
        delta
    }

    #[inline]
    pub fn apply_move(&mut self, i: usize, to: usize) {
        let from = self.latent_bins[i];
        self.counts[from] -= 1;
        self.counts[to] += 1;
        self.latent_bins[i] = to;
    }

    /// Recomputes the counts from `latent` and reports any mismatch.
    pub fn verify(&self, channel: &SmoothedHistogramChannel, latent: &[f64]) -> Result<()> {
        let fresh = channel.bin_counts(latent);
        if fresh != self.counts {
            return Err(Error::Internal("cached histogram counts out of sync with latent data".into()));
        }
        Ok(())
    }
}
