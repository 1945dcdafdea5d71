use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{arg, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// The trace was constant; `value` is then its length by convention.
    pub constant: bool,
}

/// Sample autocorrelations `rho_0 .. rho_{n-1}` computed by FFT.
pub fn autocorrelation<F: Real>(trace: &[F]) -> Vec<f64> {
    let n = trace.len();
    let mean = trace.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = trace
        .iter()
        .map(|v| Complex::new(v.to_f64().unwrap_or(f64::NAN) - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| if c0 > 0.0 { c.re / c0 } else { 0.0 }).collect()
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
pub fn ess<F: Real>(trace: &[F]) -> Result<Ess> {
    let n = trace.len();
    if n < 10 {
        return arg(format!("effective sample size needs at least 10 draws, got {n}"));
    }
    let first = trace[0];
    if trace.iter().all(|&v| v == first) {
        return Ok(Ess { value: n as f64, constant: true });
    }
    let rho = autocorrelation(trace);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = rho[2 * k] + rho[2 * k + 1];
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Ok(Ess { value: (n as f64 / tau).min(n as f64), constant: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = ess(&x).unwrap();
        assert!(e.value >= 9_000.0 && e.value <= 10_000.0, "{}", e.value);
    }

    #[test]
    fn ar1_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut x = Vec::with_capacity(n);
        let mut v = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            v = 0.9 * v + e;
            x.push(v);
        }
        let e = ess(&x).unwrap().value;
        let target = n as f64 / 19.0;
        assert!((e - target).abs() < 0.15 * target, "{e} vs {target}");
    }

    #[test]
    fn constant_and_short_traces() {
        let e = ess(&[3usize as f64; 10]).unwrap();
        assert_eq!(e, Ess { value: 10.0, constant: true });
        assert!(ess(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0, 4.0, 1.0];
        let m = x.iter().sum::<f64>() / 7.0;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let rho = autocorrelation(&x);
        for t in 0..7 {
            let ct: f64 = (0..7 - t).map(|i| (x[i] - m) * (x[i + t] - m)).sum();
            assert!((rho[t] - ct / c0).abs() < 1e-12);
        }
    }
}
