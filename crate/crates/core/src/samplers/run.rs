use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{AcceptStats, Chain, ChainRng, PredictiveGrid, SamplerKind};
use crate::diagnostics::{point_estimate_partition, DensityAccumulator, DensityEstimate};
use crate::error::{arg, Result};
use crate::mixtures::Partition;

/// Iteration schedule of one chain. `iterations` counts burn-in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    /// Evaluate the density at every this many retained draws; 0 disables it.
    #[serde(default = "one")]
    pub density_every: usize,
    /// Keep allocations at every this many retained draws for the point
    /// estimate; 0 disables it.
    #[serde(default)]
    pub labels_every: usize,
    /// Recompute cached quantities every this many sweeps; 0 disables it.
    #[serde(default)]
    pub check_every: usize,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn new(iterations: usize, burn_in: usize) -> Self {
        Self { iterations, burn_in, thin: 1, density_every: 1, labels_every: 0, check_every: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.iterations {
            return arg(format!("burn-in {} exceeds the {} iterations", self.burn_in, self.iterations));
        }
        if self.thin == 0 {
            return arg("thinning interval must be at least 1");
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Output of [`run_chain`]. Equality ignores `elapsed`.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub sampler: SamplerKind,
    /// Number of occupied clusters at each retained iteration.
    pub cluster_trace: Vec<usize>,
    /// Post-burn-in acceptance statistics per update block.
    pub acceptance: Vec<(String, AcceptStats)>,
    /// Cumulative post-burn-in `(accepted, proposals)` per block at each retained iteration.
    pub acceptance_trace: Vec<Vec<(u64, u64)>>,
    pub density: Option<DensityEstimate>,
    pub point_partition: Option<Partition>,
    /// No iteration was retained.
    pub empty: bool,
    pub elapsed: Duration,
}

impl PartialEq for RunSummary {
    fn eq(&self, other: &Self) -> bool {
        self.sampler == other.sampler
            && self.cluster_trace == other.cluster_trace
            && self.acceptance == other.acceptance
            && self.acceptance_trace == other.acceptance_trace
            && self.density == other.density
            && self.point_partition == other.point_partition
            && self.empty == other.empty
    }
}

impl RunSummary {
    pub fn acceptance_of(&self, block: &str) -> Option<&AcceptStats> {
        self.acceptance.iter().find(|(b, _)| b == block).map(|(_, s)| s)
    }
}

/// Runs burn-in and sampling, recording the cluster-count trace, acceptance
/// statistics, density evaluations and allocation samples.
pub fn run_chain(
    chain: &mut dyn Chain,
    config: &RunConfig,
    grid: Option<&PredictiveGrid>,
    rng: &mut ChainRng,
) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let bands = chain.kind().is_conditional();
    let mut density = match (grid, config.density_every) {
        (Some(g), e) if e > 0 => Some(DensityAccumulator::new(g.x.clone(), bands)),
        _ => None,
    };
    let mut buf = vec![0.0; grid.map_or(0, PredictiveGrid::len)];
    let mut labels = Vec::new();
    let mut trace = Vec::with_capacity(config.retained());
    let mut acceptance_trace = Vec::with_capacity(config.retained());
    for it in 0..config.iterations {
        if it == config.burn_in {
            chain.reset_acceptance();
        }
        chain.sweep(rng)?;
        if config.check_every > 0 && (it + 1) % config.check_every == 0 {
            chain.check_invariants()?;
        }
        if it < config.burn_in || (it - config.burn_in) % config.thin != 0 {
            continue;
        }
        let r = trace.len();
        trace.push(chain.num_clusters());
        acceptance_trace.push(chain.acceptance().iter().map(|(_, s)| (s.accepted, s.proposals)).collect());
        if let (Some(acc), Some(g)) = (density.as_mut(), grid) {
            if r % config.density_every == 0 {
                chain.density(g, &mut buf);
                acc.push(&buf)?;
            }
        }
        if config.labels_every > 0 && r % config.labels_every == 0 {
            labels.push(chain.labels());
        }
    }
    if config.burn_in == config.iterations {
        chain.reset_acceptance();
    }
    let empty = trace.is_empty();
    let density = match density {
        Some(acc) if acc.count() > 0 => Some(acc.finish()?),
        _ => None,
    };
    let point_partition = if labels.is_empty() { None } else { Some(point_estimate_partition(&labels)?) };
    Ok(RunSummary {
        sampler: chain.kind(),
        cluster_trace: trace,
        acceptance: chain.acceptance().into_iter().map(|(b, s)| (b.to_string(), s)).collect(),
        acceptance_trace,
        density,
        point_partition,
        empty,
        elapsed: start.elapsed(),
    })
}
