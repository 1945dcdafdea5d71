//! MCMC samplers for Dirichlet process mixtures observed through a privacy
//! channel, and the driver that runs them.

mod global;
mod marginal;
mod neal5;
mod run;
mod slice;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::{BaseMeasure, Kernel};

pub use global::{GlobalConditional, GlobalMarginal};
pub use marginal::{Neal2, Neal3};
pub use neal5::{pseudo_marginal_log_estimate, Neal5};
pub use run::{run_chain, RunConfig, RunSummary};
pub use slice::{admissible_atoms, slice_xi, SliceSampler, SLICE_KAPPA};

/// Random number generator driving every chain.
pub type ChainRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Neal5,
    Slice,
    Neal2,
    Neal3,
    GlobalConditional,
    GlobalMarginal,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::Neal5,
        SamplerKind::Slice,
        SamplerKind::Neal2,
        SamplerKind::Neal3,
        SamplerKind::GlobalConditional,
        SamplerKind::GlobalMarginal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Neal5 => "neal5",
            SamplerKind::Slice => "slice",
            SamplerKind::Neal2 => "neal2",
            SamplerKind::Neal3 => "neal3",
            SamplerKind::GlobalConditional => "global-conditional",
            SamplerKind::GlobalMarginal => "global-marginal",
        }
    }

    /// Conditional samplers keep the random measure and report per-iteration
    /// density draws; marginal samplers report predictive densities.
    pub fn is_conditional(&self) -> bool {
        matches!(self, SamplerKind::Slice | SamplerKind::GlobalConditional)
    }

    pub fn is_global(&self) -> bool {
        matches!(self, SamplerKind::GlobalConditional | SamplerKind::GlobalMarginal)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown sampler {s:?}")))
    }
}

/// Metropolis-Hastings bookkeeping for one update block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Sum of `min(1, ratio)` over proposals.
    pub sum_prob: f64,
    pub min_log_ratio: f64,
    /// Proposals whose ratio fell below `exp(-epsilon)` for a pure-DP channel.
    pub violations: u64,
}

impl Default for AcceptStats {
    fn default() -> Self {
        Self { proposals: 0, accepted: 0, sum_prob: 0.0, min_log_ratio: f64::INFINITY, violations: 0 }
    }
}

impl AcceptStats {
    /// Records one proposal. `epsilon` is the channel's pure-DP level, if any.
    #[inline]
    pub fn record(&mut self, log_ratio: f64, accepted: bool, epsilon: Option<f64>) {
        self.proposals += 1;
        self.accepted += accepted as u64;
        self.sum_prob += log_ratio.min(0.0).exp();
        self.min_log_ratio = self.min_log_ratio.min(log_ratio);
        if let Some(eps) = epsilon {
            if log_ratio < -eps - 1e-12 * eps.max(1.0) {
                self.violations += 1;
            }
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposals == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposals as f64
    }

    pub fn mean_prob(&self) -> f64 {
        if self.proposals == 0 {
            return f64::NAN;
        }
        self.sum_prob / self.proposals as f64
    }
}

#[inline]
pub(crate) fn mh_accept<R: rand::Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Evaluation grid with the base-measure predictive `E_{G0} f(x | .)` cached.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveGrid {
    pub x: Vec<f64>,
    pub prior: Vec<f64>,
}

impl PredictiveGrid {
    pub fn new<B: BaseMeasure>(x: Vec<f64>, base: &B) -> Self {
        let prior = x.iter().map(|&v| base.prior_predictive(v)).collect();
        Self { x, prior }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `sum_h w_h f(x | theta_h) + rest * E_{G0} f(x | .)` on the grid.
pub(crate) fn mixture_density<'a, K, I>(kernel: &K, components: I, rest: f64, grid: &PredictiveGrid, out: &mut [f64])
where
    K: Kernel,
    K::Param: 'a,
    I: Iterator<Item = (f64, &'a K::Param)> + Clone,
{
    for ((o, &x), &p) in out.iter_mut().zip(&grid.x).zip(&grid.prior) {
        *o = rest * p + components.clone().map(|(w, th)| w * kernel.log_density(th, x).exp()).sum::<f64>();
    }
}

/// One Markov chain over a mixture posterior.
pub trait Chain: Send {
    fn kind(&self) -> SamplerKind;

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()>;

    fn num_records(&self) -> usize;

    /// Number of occupied clusters.
    fn num_clusters(&self) -> usize;

    /// Allocation labels renumbered by first appearance.
    fn labels(&self) -> Vec<usize>;

    /// Density of the confidential data implied by the current state.
    fn density(&self, grid: &PredictiveGrid, out: &mut [f64]);

    fn acceptance(&self) -> Vec<(&'static str, AcceptStats)>;

    fn reset_acceptance(&mut self);

    /// Recomputes cached quantities and reports any mismatch.
    fn check_invariants(&self) -> Result<()>;
}
