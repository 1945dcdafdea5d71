//! Scalar log-densities used by the channels and kernels.

use crate::num::Real;

#[inline]
pub fn laplace_log_density<F: Real>(x: F, loc: F, scale: F) -> F {
    -(F::lit(2.0) * scale).ln() - (x - loc).abs() / scale
}

#[inline]
pub fn normal_log_density<F: Real>(x: F, mean: F, var: F) -> F {
    let d = x - mean;
    F::lit(-0.5) * (F::lit(2.0) * F::PI() * var).ln() - d * d / (F::lit(2.0) * var)
}
