use serde::{Deserialize, Serialize};

use super::quantile_sorted;
use crate::error::{arg, Result};

/// Posterior mean density on a grid with optional pointwise 95% bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower95: Option<Vec<f64>>,
    pub upper95: Option<Vec<f64>>,
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// 200 points spanning the data range padded by 10% on each side.
pub fn default_grid(data: &[f64]) -> Vec<f64> {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
    let pad = 0.1 * (hi - lo);
    uniform_grid(lo - pad, hi + pad, 200)
}

/// Mean and pointwise 2.5% / 97.5% quantiles of per-iteration density
/// draws. Bands are widened to contain the mean where skewness would
/// otherwise push it outside.
pub fn density_estimate(grid: &[f64], draws: &[Vec<f64>], bands: bool) -> Result<DensityEstimate> {
    let mut acc = DensityAccumulator::new(grid.to_vec(), bands);
    for d in draws {
        acc.push(d)?;
    }
    acc.finish()
}

/// Streaming version of [`density_estimate`].
#[derive(Clone, Debug)]
pub struct DensityAccumulator {
    grid: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
    draws: Option<Vec<Vec<f64>>>,
}

impl DensityAccumulator {
    pub fn new(grid: Vec<f64>, keep_draws: bool) -> Self {
        let sum = vec![0.0; grid.len()];
        Self { grid, sum, count: 0, draws: keep_draws.then(Vec::new) }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return arg(format!("density draw of length {} on a grid of {}", values.len(), self.grid.len()));
        }
        for (s, v) in self.sum.iter_mut().zip(values) {
            *s += v;
        }
        self.count += 1;
        if let Some(d) = self.draws.as_mut() {
            d.push(values.to_vec());
        }
        Ok(())
    }

    pub fn finish(self) -> Result<DensityEstimate> {
        if self.count == 0 {
            return arg("no retained iterations to estimate a density from");
        }
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count as f64).collect();
        let (lower95, upper95) = match self.draws {
            Some(draws) => {
                let mut lo = Vec::with_capacity(mean.len());
                let mut hi = Vec::with_capacity(mean.len());
                let mut col = Vec::with_capacity(draws.len());
                for (j, &m) in mean.iter().enumerate() {
                    col.clear();
                    col.extend(draws.iter().map(|d| d[j]));
                    col.sort_by(f64::total_cmp);
                    lo.push(quantile_sorted(&col, 0.025).min(m));
                    hi.push(quantile_sorted(&col, 0.975).max(m));
                }
                (Some(lo), Some(hi))
            }
            None => (None, None),
        };
        Ok(DensityEstimate { grid: self.grid, mean, lower95, upper95 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::trapezoid;

    #[test]
    fn mean_and_bands() {
        let grid = vec![0.0, 1.0];
        let draws: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64, 1.0]).collect();
        let est = density_estimate(&grid, &draws, true).unwrap();
        assert_eq!(est.mean, vec![50.0, 1.0]);
        assert_eq!(est.lower95.as_ref().unwrap()[0], 2.5);
        assert_eq!(est.upper95.as_ref().unwrap()[0], 97.5);
        let plain = density_estimate(&grid, &draws, false).unwrap();
        assert!(plain.lower95.is_none());
        assert!(density_estimate(&grid, &[], false).is_err());
    }

    #[test]
    fn bands_contain_skewed_mean() {
        let grid = vec![0.0];
        let mut draws = vec![vec![0.0]; 99];
        draws.push(vec![1e6]);
        let est = density_estimate(&grid, &draws, true).unwrap();
        assert!(est.upper95.unwrap()[0] >= est.mean[0]);
    }

    #[test]
    fn default_grid_spans_padded_range() {
        let g = default_grid(&[-1.0, 3.0, 0.0]);
        assert_eq!(g.len(), 200);
        assert!((g[0] + 1.4).abs() < 1e-12 && (g[199] - 3.4).abs() < 1e-12);
        let u = uniform_grid(-6.0, 6.0, 400);
        let f: Vec<f64> = u.iter().map(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).collect();
        assert!((trapezoid(&f, &u) - 1.0).abs() < 0.02);
    }
}
