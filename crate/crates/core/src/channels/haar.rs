use crate::error::{arg, Result};
use crate::num::Real;

/// Haar wavelet `psi_{j,k}(x) = 2^{j/2} (1[0,1/2)(2^j x - k) - 1[1/2,1)(2^j x - k))`.
pub fn haar_psi<F: Real>(j: u32, k: u64, x: F) -> Result<F> {
    if j >= 63 || k >= (1u64 << j) {
        return arg(format!("haar index k={k} out of range for level j={j}"));
    }
    Ok(haar_psi_unchecked(j, k, x))
}

#[inline]
pub(crate) fn haar_psi_unchecked<F: Real>(j: u32, k: u64, x: F) -> F {
    let scale = F::lit((j as f64 * 0.5).exp2());
    let t = x * F::lit((j as f64).exp2()) - F::lit(k as f64);
    let half = F::lit(0.5);
    if t >= F::zero() && t < half {
        scale
    } else if t >= half && t < F::one() {
        -scale
    } else {
        F::zero()
    }
}

/// Number of detail coefficients for levels `0..=levels`: `2^(levels+1) - 1`.
pub const fn coefficient_count(levels: u32) -> usize {
    (1usize << (levels + 1)) - 1
}

/// Row-major position of `(j, k)`: levels ascending, then `k` ascending.
#[inline]
pub const fn coefficient_index(j: u32, k: u64) -> usize {
    (1usize << j) - 1 + k as usize
}

/// The single `k` with a non-zero `psi_{j,k}(x)` at level `j`, if any.
#[inline]
pub(crate) fn active_translate(j: u32, x: f64) -> Option<u64> {
    if !(0.0..1.0).contains(&x) {
        return None;
    }
    Some(((x * (j as f64).exp2()).floor() as u64).min((1u64 << j) - 1))
}
