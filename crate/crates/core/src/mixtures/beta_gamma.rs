use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{BaseMeasure, BetaKernel, BetaKernelParam, Kernel, BETA_EDGE};
use crate::error::{arg, Result};
use crate::quadrature::gauss_legendre_unit;
use crate::special::{digamma, gamma_p_inv_ln, ln_gamma};

pub const DEFAULT_MALA_STEP: f64 = 0.05;

/// Independent Gamma priors (shape/rate) on the two Beta parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGammaBase {
    pub shape_a: f64,
    pub rate_a: f64,
    pub shape_b: f64,
    pub rate_b: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    DEFAULT_MALA_STEP
}

impl GammaGammaBase {
    pub fn new(shape_a: f64, rate_a: f64, shape_b: f64, rate_b: f64) -> Result<Self> {
        for v in [shape_a, rate_a, shape_b, rate_b] {
            if !(v > 0.0 && v.is_finite()) {
                return arg(format!("Gamma hyperparameters must be positive, got {v}"));
            }
        }
        Ok(Self { shape_a, rate_a, shape_b, rate_b, step: DEFAULT_MALA_STEP })
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return arg(format!("MALA step must be positive, got {step}"));
        }
        self.step = step;
        Ok(self)
    }
}

impl Default for GammaGammaBase {
    fn default() -> Self {
        Self { shape_a: 2.0, rate_a: 2.0, shape_b: 2.0, rate_b: 2.0, step: DEFAULT_MALA_STEP }
    }
}

/// Log full conditional of `(ln a, ln b)` for one Beta cluster, up to a constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaClusterTarget {
    pub n: usize,
    pub sum_ln_y: f64,
    pub sum_ln_1my: f64,
    pub prior: GammaGammaBase,
}

impl BetaClusterTarget {
    pub fn new(data: &[f64], prior: GammaGammaBase) -> Self {
        let (mut s1, mut s2) = (0.0, 0.0);
        for &y in data {
            let y = y.clamp(BETA_EDGE, 1.0 - BETA_EDGE);
            s1 += y.ln();
            s2 += (-y).ln_1p();
        }
        Self { n: data.len(), sum_ln_y: s1, sum_ln_1my: s2, prior }
    }

    pub fn log_density(&self, u: f64, v: f64) -> f64 {
        let (a, b) = (u.exp(), v.exp());
        let n = self.n as f64;
        let p = &self.prior;
        n * (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)) + (a - 1.0) * self.sum_ln_y + (b - 1.0) * self.sum_ln_1my
            + p.shape_a * u
            - p.rate_a * a
            + p.shape_b * v
            - p.rate_b * b
    }

    pub fn gradient(&self, u: f64, v: f64) -> [f64; 2] {
        let (a, b) = (u.exp(), v.exp());
        let n = self.n as f64;
        let p = &self.prior;
        let dab = if self.n > 0 { digamma(a + b) } else { 0.0 };
        let ga = if self.n > 0 { n * (dab - digamma(a)) } else { 0.0 };
        let gb = if self.n > 0 { n * (dab - digamma(b)) } else { 0.0 };
        [
            a * (ga + self.sum_ln_y - p.rate_a) + p.shape_a,
            b * (gb + self.sum_ln_1my - p.rate_b) + p.shape_b,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MalaOutcome {
    pub param: BetaKernelParam,
    pub accepted: bool,
}

/// One Langevin proposal `x' = x + (step^2 / 2) grad + step xi` in
/// `(ln a, ln b)` with Metropolis correction; `step` is the proposal
/// standard deviation.
pub fn mala_beta_params_step<R: Rng + ?Sized>(
    data: &[f64],
    current: BetaKernelParam,
    step: f64,
    prior: &GammaGammaBase,
    rng: &mut R,
) -> MalaOutcome {
    let target = BetaClusterTarget::new(data, *prior);
    mala_step(&target, current, step, rng)
}

fn mala_step<R: Rng + ?Sized>(target: &BetaClusterTarget, current: BetaKernelParam, step: f64, rng: &mut R) -> MalaOutcome {
    let reject = MalaOutcome { param: current, accepted: false };
    let x = [current.a.ln(), current.b.ln()];
    let lx = target.log_density(x[0], x[1]);
    let gx = target.gradient(x[0], x[1]);
    let sd = step;
    let step = 0.5 * step * step;
    let mut y = [0.0; 2];
    for d in 0..2 {
        let e: f64 = StandardNormal.sample(rng);
        y[d] = x[d] + step * gx[d] + sd * e;
    }
    if !(y[0].exp().is_normal() && y[1].exp().is_normal()) {
        return reject;
    }
    let ly = target.log_density(y[0], y[1]);
    let gy = target.gradient(y[0], y[1]);
    if !(ly.is_finite() && gy[0].is_finite() && gy[1].is_finite()) {
        return reject;
    }
    let log_q = |to: &[f64; 2], from: &[f64; 2], g: &[f64; 2]| -> f64 {
        (0..2).map(|d| (to[d] - from[d] - step * g[d]).powi(2)).sum::<f64>() / (-4.0 * step)
    };
    let log_ratio = ly - lx + log_q(&x, &y, &gy) - log_q(&y, &x, &gx);
    let u: f64 = rng.random();
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        MalaOutcome { param: BetaKernelParam { a: y[0].exp(), b: y[1].exp() }, accepted: true }
    } else {
        reject
    }
}

/// Gamma(shape, rate) quantiles at the Gauss-Legendre nodes.
fn gamma_quantile_nodes(shape: f64, rate: f64, u: &[f64]) -> Vec<f64> {
    u.iter().map(|&p| gamma_p_inv_ln(shape, p.ln()) / rate).collect()
}

const PREDICTIVE_NODES: usize = 32;

impl BaseMeasure for GammaGammaBase {
    type Kernel = BetaKernel;

    fn kernel(&self) -> &BetaKernel {
        &BetaKernel
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BetaKernelParam {
        let a: f64 = Gamma::new(self.shape_a, 1.0 / self.rate_a).expect("valid gamma").sample(rng);
        let b: f64 = Gamma::new(self.shape_b, 1.0 / self.rate_b).expect("valid gamma").sample(rng);
        BetaKernelParam { a: a.max(f64::MIN_POSITIVE), b: b.max(f64::MIN_POSITIVE) }
    }

    fn update<R: Rng + ?Sized>(&self, current: &BetaKernelParam, data: &[f64], rng: &mut R) -> BetaKernelParam {
        mala_beta_params_step(data, *current, self.step, self, rng).param
    }

    fn prior_predictive(&self, x: f64) -> f64 {
        let (u, w) = gauss_legendre_unit(PREDICTIVE_NODES);
        let qa = gamma_quantile_nodes(self.shape_a, self.rate_a, &u);
        let qb = gamma_quantile_nodes(self.shape_b, self.rate_b, &u);
        let mut total = 0.0;
        for (a, wa) in qa.iter().zip(&w) {
            for (b, wb) in qb.iter().zip(&w) {
                total += wa * wb * BetaKernel.log_density(&BetaKernelParam { a: *a, b: *b }, x).exp();
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DATA: [f64; 5] = [0.12, 0.3, 0.45, 0.07, 0.81];

    #[test]
    fn gradient_matches_finite_differences() {
        let t = BetaClusterTarget::new(&DATA, GammaGammaBase::default());
        let (u, v) = (2.0f64.ln(), 2.0f64.ln());
        let h = 1e-5;
        let g = t.gradient(u, v);
        let fu = (t.log_density(u + h, v) - t.log_density(u - h, v)) / (2.0 * h);
        let fv = (t.log_density(u, v + h) - t.log_density(u, v - h)) / (2.0 * h);
        assert!((g[0] - fu).abs() <= 1e-4 * fu.abs().max(1e-8), "{} vs {fu}", g[0]);
        assert!((g[1] - fv).abs() <= 1e-4 * fv.abs().max(1e-8), "{} vs {fv}", g[1]);
    }

    #[test]
    fn tiny_step_always_accepts() {
        let prior = GammaGammaBase::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = BetaKernelParam { a: 2.0, b: 2.0 };
        let mut acc = 0;
        for _ in 0..10_000 {
            let o = mala_beta_params_step(&DATA, p, 1e-8, &prior, &mut rng);
            acc += o.accepted as usize;
            p = o.param;
        }
        assert!(acc as f64 / 1e4 >= 0.999);
    }

    #[test]
    fn empty_cluster_targets_prior() {
        let prior = GammaGammaBase { shape_a: 3.0, rate_a: 2.0, ..GammaGammaBase::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = BetaKernelParam { a: 1.0, b: 1.0 };
        let iters = 400_000;
        let (mut mean_a, mut mean_ln_b) = (0.0, 0.0);
        for _ in 0..iters {
            p = mala_beta_params_step(&[], p, 0.05, &prior, &mut rng).param;
            mean_a += p.a;
            mean_ln_b += p.b.ln();
        }
        mean_a /= iters as f64;
        mean_ln_b /= iters as f64;
        let direct: Vec<BetaKernelParam> = (0..iters).map(|_| prior.sample(&mut rng)).collect();
        let da = direct.iter().map(|p| p.a).sum::<f64>() / iters as f64;
        let db = direct.iter().map(|p| p.b.ln()).sum::<f64>() / iters as f64;
        // Chain autocorrelation inflates the MC error by roughly an order of magnitude.
        assert!((mean_a - da).abs() < 0.03, "{mean_a} vs {da}");
        assert!((mean_ln_b - db).abs() < 0.03, "{mean_ln_b} vs {db}");
    }

    #[test]
    fn long_run_histogram_matches_target() {
        let prior = GammaGammaBase::default();
        let data = [0.2, 0.35, 0.6];
        let t = BetaClusterTarget::new(&data, prior);
        let edges = [-3.0f64, -0.75, -0.25, 0.25, 0.75, 3.5];
        let cell = |x: f64| edges.windows(2).position(|w| x >= w[0] && x < w[1]);
        // Quadrature reference over the same (ln a, ln b) cells.
        let (gu, gw) = gauss_legendre_unit(40);
        let mut reference = [[0.0f64; 5]; 5];
        let mut total = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let (ha, hb) = (edges[i + 1] - edges[i], edges[j + 1] - edges[j]);
                let mut s = 0.0;
                for (x, wx) in gu.iter().zip(&gw) {
                    for (y, wy) in gu.iter().zip(&gw) {
                        s += wx * wy * ha * hb * t.log_density(edges[i] + ha * x, edges[j] + hb * y).exp();
                    }
                }
                reference[i][j] = s;
                total += s;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = BetaKernelParam { a: 1.0, b: 1.0 };
        let mut hist = [[0.0f64; 5]; 5];
        let iters = 1_000_000;
        let mut inside = 0.0;
        for _ in 0..iters {
            p = mala_beta_params_step(&data, p, 0.05, &prior, &mut rng).param;
            if let (Some(i), Some(j)) = (cell(p.a.ln()), cell(p.b.ln())) {
                hist[i][j] += 1.0;
                inside += 1.0;
            }
        }
        let mut tv = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                tv += (hist[i][j] / inside - reference[i][j] / total).abs();
            }
        }
        tv *= 0.5;
        assert!(tv < 0.02, "TV {tv}");
    }

    #[test]
    fn predictive_matches_monte_carlo() {
        let base = GammaGammaBase::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<BetaKernelParam> = (0..200_000).map(|_| base.sample(&mut rng)).collect();
        for x in [0.2, 0.5, 0.8] {
            let vals: Vec<f64> = draws.iter().map(|p| BetaKernel.log_density(p, x).exp()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * n)).sqrt();
            let q = base.prior_predictive(x);
            assert!((q - mean).abs() < 4.0 * se, "x={x}: {q} vs {mean} (se {se})");
        }
    }
}
