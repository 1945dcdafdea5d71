//! Mixture building blocks: kernels, base measures and the Dirichlet
//! process prior (stick-breaking, Polya urn, EPPF).

mod beta_gamma;
mod kernel;
mod nig;
mod partition;

use std::fmt::Debug;

use rand::Rng;

use crate::error::{arg, Result};

pub use beta_gamma::{mala_beta_params_step, BetaClusterTarget, GammaGammaBase, MalaOutcome, DEFAULT_MALA_STEP};
pub use kernel::{BetaKernel, BetaKernelParam, GaussianKernel, GaussianKernelParam, BETA_EDGE};
pub use nig::{nig_posterior, student_t_log_density, NigBase, SuffStats};
pub use partition::{eppf_log_prob, polya_urn_propose, stick_breaking_weights, Partition, StickBreaking};

/// Component density `f(y | theta)`.
pub trait Kernel: Send + Sync {
    type Param: Clone + Debug + PartialEq + Send + Sync;

    fn log_density(&self, theta: &Self::Param, y: f64) -> f64;

    fn sample<R: Rng + ?Sized>(&self, theta: &Self::Param, rng: &mut R) -> f64;

    /// Open support of `f`, `None` for the whole real line.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    /// [`Kernel::log_density`] with a domain check on `y`.
    fn checked_log_density(&self, theta: &Self::Param, y: f64) -> Result<f64> {
        if let Some((lo, hi)) = self.support() {
            if !(y > lo && y < hi) {
                return arg(format!("y={y} outside kernel support ({lo}, {hi})"));
            }
        }
        Ok(self.log_density(theta, y))
    }
}

pub type ParamOf<B> = <<B as BaseMeasure>::Kernel as Kernel>::Param;

/// Base measure `G0` of the Dirichlet process, paired with its kernel.
pub trait BaseMeasure: Send + Sync {
    type Kernel: Kernel;

    fn kernel(&self) -> &Self::Kernel;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamOf<Self>;

    /// One transition leaving `p(theta | data) ∝ prod f(data | theta) G0(theta)`
    /// invariant. Conjugate families return an exact draw.
    fn update<R: Rng + ?Sized>(&self, current: &ParamOf<Self>, data: &[f64], rng: &mut R) -> ParamOf<Self>;

    /// `E_{G0} f(x | theta)`.
    fn prior_predictive(&self, x: f64) -> f64;
}

/// Dirichlet process mixture: base measure plus concentration `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel<B> {
    pub base: B,
    pub alpha: f64,
}

impl<B: BaseMeasure> MixtureModel<B> {
    pub fn new(base: B, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return arg(format!("DP concentration must be positive, got {alpha}"));
        }
        Ok(Self { base, alpha })
    }

    pub fn kernel(&self) -> &B::Kernel {
        self.base.kernel()
    }
}
