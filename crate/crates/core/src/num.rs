//! Scalar abstraction shared by the density and diagnostic kernels.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Default + Send + Sync + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `log(sum(exp(xs)))`, stable for large negative inputs.
pub fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let s = xs.iter().fold(F::zero(), |acc, &x| acc + (x - max).exp());
    max + s.ln()
}

/// Draws an index with probability proportional to `exp(log_weights[i])`.
pub fn sample_log_weights<R: rand::Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "no finite weight");
    let total: f64 = log_weights.iter().map(|&l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &l) in log_weights.iter().enumerate() {
        let w = (l - max).exp();
        if w > 0.0 {
            last = i;
        }
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    last
}

/// One stepping-out slice sampling update of a univariate log density.
pub fn slice_sample_1d<R, L>(x0: f64, log_f: L, width: f64, max_steps: usize, rng: &mut R) -> f64
where
    R: rand::Rng + ?Sized,
    L: Fn(f64) -> f64,
{
    let f0 = log_f(x0);
    let level = f0 + rng.random::<f64>().ln();
    let mut lo = x0 - width * rng.random::<f64>();
    let mut hi = lo + width;
    let j = (rng.random::<f64>() * max_steps as f64) as usize;
    let mut k = max_steps.saturating_sub(1) - j;
    let mut j = j;
    while j > 0 && log_f(lo) > level {
        lo -= width;
        j -= 1;
    }
    while k > 0 && log_f(hi) > level {
        hi += width;
        k -= 1;
    }
    loop {
        let x = lo + rng.random::<f64>() * (hi - lo);
        if log_f(x) > level {
            return x;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
}
