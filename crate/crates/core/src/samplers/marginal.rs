use rand::Rng;

use super::{mixture_density, AcceptStats, Chain, ChainRng, PredictiveGrid, SamplerKind};
use crate::error::{arg, Error, Result};
use crate::marginal_gaussian::{neal2_sweep, neal3_sweep, MarginalGaussianModel, MarginalParam};
use crate::mixtures::{GaussianKernel, GaussianKernelParam, Partition, SuffStats};

fn check_data(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return arg("no released records");
    }
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return arg(format!("released value {bad} is not finite"));
    }
    Ok(())
}

fn predictive_density(
    model: &MarginalGaussianModel,
    partition: &Partition,
    params: &[MarginalParam],
    grid: &PredictiveGrid,
    out: &mut [f64],
) {
    let base = model.kernel_base();
    let total = partition.n() as f64 + model.alpha;
    let kernel_params: Vec<GaussianKernelParam> = params.iter().map(|p| base.to_kernel(p)).collect();
    let comps = partition.sizes().iter().zip(&kernel_params).map(|(&s, p)| (s as f64 / total, p));
    mixture_density(&GaussianKernel, comps, model.alpha / total, grid, out);
}

fn draw_params<R: Rng + ?Sized>(model: &MarginalGaussianModel, partition: &Partition, z: &[f64], rng: &mut R) -> Vec<MarginalParam> {
    let mut stats = vec![SuffStats::default(); partition.num_clusters()];
    for (&c, &x) in partition.labels().iter().zip(z) {
        stats[c].add(x);
    }
    stats.iter().map(|s| model.base.posterior(s).draw(rng)).collect()
}

/// Gibbs sampler over allocations and cluster parameters with the latent
/// data integrated out.
pub struct Neal2 {
    model: MarginalGaussianModel,
    z: Vec<f64>,
    partition: Partition,
    params: Vec<MarginalParam>,
}

impl Neal2 {
    pub fn new<R: Rng + ?Sized>(model: MarginalGaussianModel, z: Vec<f64>, rng: &mut R) -> Result<Self> {
        check_data(&z)?;
        let partition = Partition::one_cluster(z.len());
        let params = draw_params(&model, &partition, &z, rng);
        Ok(Self { model, z, partition, params })
    }

    pub fn params(&self) -> &[MarginalParam] {
        &self.params
    }
}

impl Chain for Neal2 {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Neal2
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        neal2_sweep(&mut self.partition, &mut self.params, &self.z, &self.model, rng)
    }

    fn num_records(&self) -> usize {
        self.z.len()
    }

    fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }

    fn labels(&self) -> Vec<usize> {
        self.partition.canonical().labels().to_vec()
    }

    fn density(&self, grid: &PredictiveGrid, out: &mut [f64]) {
        predictive_density(&self.model, &self.partition, &self.params, grid, out)
    }

    fn acceptance(&self) -> Vec<(&'static str, AcceptStats)> {
        Vec::new()
    }

    fn reset_acceptance(&mut self) {}

    fn check_invariants(&self) -> Result<()> {
        self.partition.validate()?;
        if self.params.iter().any(|p| p.tau2 < self.model.eta2()) {
            return Err(Error::Internal("cluster variance below the channel variance".into()));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler over allocations only. Cluster parameters are
/// redrawn from their posteriors after each sweep for density reporting.
pub struct Neal3 {
    model: MarginalGaussianModel,
    z: Vec<f64>,
    partition: Partition,
    params: Vec<MarginalParam>,
}

impl Neal3 {
    pub fn new<R: Rng + ?Sized>(model: MarginalGaussianModel, z: Vec<f64>, rng: &mut R) -> Result<Self> {
        check_data(&z)?;
        let partition = Partition::one_cluster(z.len());
        let params = draw_params(&model, &partition, &z, rng);
        Ok(Self { model, z, partition, params })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }
}

impl Chain for Neal3 {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Neal3
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        neal3_sweep(&mut self.partition, &self.z, &self.model, rng)?;
        self.params = draw_params(&self.model, &self.partition, &self.z, rng);
        Ok(())
    }

    fn num_records(&self) -> usize {
        self.z.len()
    }

    fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }

    fn labels(&self) -> Vec<usize> {
        self.partition.canonical().labels().to_vec()
    }

    fn density(&self, grid: &PredictiveGrid, out: &mut [f64]) {
        predictive_density(&self.model, &self.partition, &self.params, grid, out)
    }

    fn acceptance(&self) -> Vec<(&'static str, AcceptStats)> {
        Vec::new()
    }

    fn reset_acceptance(&mut self) {}

    fn check_invariants(&self) -> Result<()> {
        self.partition.validate()
    }
}
