use crate::error::{arg, Result};
use crate::num::Real;

/// Trapezoid rule for samples `y` on the (possibly uneven) grid `x`.
pub fn trapezoid<F: Real>(y: &[F], x: &[F]) -> F {
    let half = F::lit(0.5);
    x.windows(2).zip(y.windows(2)).fold(F::zero(), |acc, (xs, ys)| acc + half * (xs[1] - xs[0]) * (ys[0] + ys[1]))
}

fn check<F: Real>(f: &[F], g: &[F], grid: &[F]) -> Result<()> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return arg(format!("densities of length {} and {} on a grid of {}", f.len(), g.len(), grid.len()));
    }
    if f.iter().chain(g).any(|v| !(*v >= F::zero())) {
        return arg("densities must be nonnegative");
    }
    Ok(())
}

/// `sqrt(0.5 * int (sqrt f - sqrt g)^2)`, clamped to `[0, 1]`.
pub fn hellinger<F: Real>(f: &[F], g: &[F], grid: &[F]) -> Result<F> {
    check(f, g, grid)?;
    let sq: Vec<F> = f.iter().zip(g).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).collect();
    Ok((F::lit(0.5) * trapezoid(&sq, grid)).sqrt().min(F::one()))
}

/// `int |f - g|` by the trapezoid rule.
pub fn l1_distance<F: Real>(f: &[F], g: &[F], grid: &[F]) -> Result<F> {
    check(f, g, grid)?;
    let d: Vec<F> = f.iter().zip(g).map(|(a, b)| (*a - *b).abs()).collect();
    Ok(trapezoid(&d, grid))
}
