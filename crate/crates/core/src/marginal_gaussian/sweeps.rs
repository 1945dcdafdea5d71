use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cluster_log_marginal, MarginalParam, ShiftedNigBase, TruncatedNigBase};
use crate::channels::density::normal_log_density;
use crate::error::{arg, Result};
use crate::mixtures::{NigBase, Partition, SuffStats};
use crate::num::sample_log_weights;

/// Dirichlet process mixture on the released values of a Gaussian channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalGaussianModel {
    pub base: TruncatedNigBase,
    pub alpha: f64,
}

impl MarginalGaussianModel {
    /// `eta2` is the channel noise variance.
    pub fn new(nig: NigBase, eta2: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return arg(format!("DP concentration must be positive, got {alpha}"));
        }
        Ok(Self { base: TruncatedNigBase::new(nig, eta2)?, alpha })
    }

    pub fn eta2(&self) -> f64 {
        self.base.eta2
    }

    /// The equivalent prior on the confidential-data kernel parameters.
    pub fn kernel_base(&self) -> ShiftedNigBase {
        ShiftedNigBase::new(self.base)
    }

    pub fn log_marginal(&self, stats: &SuffStats) -> Result<f64> {
        cluster_log_marginal(stats, &self.base)
    }
}

fn cluster_stats(partition: &Partition, z: &[f64]) -> Vec<SuffStats> {
    let mut stats = vec![SuffStats::default(); partition.num_clusters()];
    for (i, &c) in partition.labels().iter().enumerate() {
        stats[c].add(z[i]);
    }
    stats
}

fn check_lengths(partition: &Partition, z: &[f64]) -> Result<()> {
    if partition.n() != z.len() {
        return arg(format!("partition has {} entries but data has {}", partition.n(), z.len()));
    }
    Ok(())
}

/// One Gibbs sweep over allocations with cluster parameters integrated out.
pub fn neal3_sweep<R: Rng + ?Sized>(
    partition: &mut Partition,
    z: &[f64],
    model: &MarginalGaussianModel,
    rng: &mut R,
) -> Result<()> {
    check_lengths(partition, z)?;
    let mut stats = cluster_stats(partition, z);
    let mut log_m = stats.iter().map(|s| model.log_marginal(s)).collect::<Result<Vec<_>>>()?;
    let mut logw = Vec::new();
    for (i, &zi) in z.iter().enumerate() {
        let c = partition.label(i);
        partition.detach(i);
        stats[c].remove(zi);
        if partition.sizes()[c] == 0 {
            if partition.remove_empty(c).is_some() {
                stats.swap_remove(c);
                log_m.swap_remove(c);
            } else {
                stats.pop();
                log_m.pop();
            }
        } else {
            log_m[c] = model.log_marginal(&stats[c])?;
        }
        logw.clear();
        for (h, s) in stats.iter().enumerate() {
            let mut with = *s;
            with.add(zi);
            logw.push((partition.sizes()[h] as f64).ln() + model.log_marginal(&with)? - log_m[h]);
        }
        let single = SuffStats::from_data(&[zi]);
        logw.push(model.alpha.ln() + model.log_marginal(&single)?);
        let h = sample_log_weights(&logw, rng);
        partition.attach(i, h);
        if h == stats.len() {
            stats.push(single);
            log_m.push(logw[h] - model.alpha.ln());
        } else {
            stats[h].add(zi);
            log_m[h] = model.log_marginal(&stats[h])?;
        }
    }
    Ok(())
}

/// One sweep of allocations given cluster parameters, followed by exact draws of
/// each cluster's parameters from its truncated conjugate posterior.
pub fn neal2_sweep<R: Rng + ?Sized>(
    partition: &mut Partition,
    params: &mut Vec<MarginalParam>,
    z: &[f64],
    model: &MarginalGaussianModel,
    rng: &mut R,
) -> Result<()> {
    check_lengths(partition, z)?;
    if params.len() != partition.num_clusters() {
        return arg(format!("{} cluster parameters for {} clusters", params.len(), partition.num_clusters()));
    }
    let mut logw = Vec::new();
    for (i, &zi) in z.iter().enumerate() {
        let c = partition.label(i);
        partition.detach(i);
        if partition.sizes()[c] == 0 {
            partition.remove_empty(c);
            params.swap_remove(c);
        }
        logw.clear();
        for (h, p) in params.iter().enumerate() {
            logw.push((partition.sizes()[h] as f64).ln() + normal_log_density(zi, p.mu, p.tau2));
        }
        let single = SuffStats::from_data(&[zi]);
        logw.push(model.alpha.ln() + model.log_marginal(&single)?);
        let h = sample_log_weights(&logw, rng);
        if h == params.len() {
            params.push(model.base.posterior(&single).draw(rng));
        }
        partition.attach(i, h);
    }
    let stats = cluster_stats(partition, z);
    for (p, s) in params.iter_mut().zip(&stats) {
        *p = model.base.posterior(s).draw(rng);
        debug_assert!(p.tau2 >= model.eta2());
    }
    Ok(())
}
