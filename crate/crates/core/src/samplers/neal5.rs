use rand::Rng;

use super::{mh_accept, mixture_density, AcceptStats, Chain, ChainRng, PredictiveGrid, SamplerKind};
use crate::channels::LocalChannel;
use crate::error::{arg, Error, Result};
use crate::mixtures::{polya_urn_propose, BaseMeasure, Kernel, MixtureModel, ParamOf, Partition};

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Draws `out.len()` replicates from `f(. | theta)` and returns the log of
/// `mean_j q(z | out[j])`, an unbiased estimate of `g(z | theta)` on the
/// natural scale.
pub fn pseudo_marginal_log_estimate<K, C, R>(
    z: &[f64],
    theta: &K::Param,
    channel: &C,
    kernel: &K,
    out: &mut [f64],
    rng: &mut R,
) -> f64
where
    K: Kernel,
    C: LocalChannel + ?Sized,
    R: Rng + ?Sized,
{
    let mut acc = f64::NEG_INFINITY;
    for y in out.iter_mut() {
        *y = kernel.sample(theta, rng);
        acc = log_add_exp(acc, channel.log_density(z, *y));
    }
    acc - (out.len() as f64).ln()
}

/// Pseudo-marginal Metropolis-within-Gibbs sampler over allocations with
/// Polya-urn proposals and `m` auxiliary replicates per record.
pub struct Neal5<B: BaseMeasure, C> {
    model: MixtureModel<B>,
    channel: C,
    z: Vec<f64>,
    dim: usize,
    m: usize,
    partition: Partition,
    params: Vec<ParamOf<B>>,
    aux: Vec<f64>,
    log_g: Vec<f64>,
    stats: AcceptStats,
    proposal_aux: Vec<f64>,
    sizes: Vec<usize>,
}

impl<B: BaseMeasure, C: LocalChannel> Neal5<B, C> {
    /// `z` holds the released records row-major.
    pub fn new<R: Rng + ?Sized>(model: MixtureModel<B>, channel: C, z: Vec<f64>, m: usize, rng: &mut R) -> Result<Self> {
        let dim = channel.record_len();
        if z.is_empty() || z.len() % dim != 0 {
            return arg(format!("{} released values do not form records of width {dim}", z.len()));
        }
        if m == 0 {
            return arg("need at least one auxiliary replicate");
        }
        let n = z.len() / dim;
        let latent: Vec<f64> = z.chunks_exact(dim).map(|row| channel.initial_latent(row, rng)).collect();
        let mut aux = Vec::with_capacity(n * m);
        let mut log_g = Vec::with_capacity(n);
        for (row, &y) in z.chunks_exact(dim).zip(&latent) {
            aux.extend(std::iter::repeat_n(y, m));
            log_g.push(channel.log_density(row, y));
        }
        let start = model.base.sample(rng);
        let params = vec![model.base.update(&start, &aux, rng)];
        Ok(Self {
            model,
            channel,
            z,
            dim,
            m,
            partition: Partition::one_cluster(n),
            params,
            aux,
            log_g,
            stats: AcceptStats::default(),
            proposal_aux: vec![0.0; m],
            sizes: Vec::new(),
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn params(&self) -> &[ParamOf<B>] {
        &self.params
    }

    fn update_record<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        let c = self.partition.label(i);
        self.sizes.clear();
        self.sizes.extend_from_slice(self.partition.sizes());
        self.sizes[c] -= 1;
        let k = self.sizes.len();
        let h = polya_urn_propose(&self.sizes, self.model.alpha, rng);
        let fresh = (h == k).then(|| self.model.base.sample(rng));
        let theta = fresh.as_ref().unwrap_or_else(|| &self.params[h]);
        let row = &self.z[i * self.dim..(i + 1) * self.dim];
        let log_g_new =
            pseudo_marginal_log_estimate(row, theta, &self.channel, self.model.kernel(), &mut self.proposal_aux, rng);
        let log_ratio = log_g_new - self.log_g[i];
        let accept = mh_accept(log_ratio, rng);
        self.stats.record(log_ratio, accept, self.channel.pure_epsilon());
        if !accept {
            return;
        }
        self.aux[i * self.m..(i + 1) * self.m].copy_from_slice(&self.proposal_aux);
        self.log_g[i] = log_g_new;
        if h == c {
            return;
        }
        if let Some(theta) = fresh {
            self.params.push(theta);
        }
        self.partition.detach(i);
        self.partition.attach(i, h);
        if self.partition.sizes()[c] == 0 {
            self.partition.remove_empty(c);
            self.params.swap_remove(c);
        }
    }

    fn update_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = self.partition.num_clusters();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (i, &c) in self.partition.labels().iter().enumerate() {
            data[c].extend_from_slice(&self.aux[i * self.m..(i + 1) * self.m]);
        }
        for (p, d) in self.params.iter_mut().zip(&data) {
            *p = self.model.base.update(p, d, rng);
        }
    }
}

impl<B, C> Chain for Neal5<B, C>
where
    B: BaseMeasure,
    C: LocalChannel,
    ParamOf<B>: 'static,
{
    fn kind(&self) -> SamplerKind {
        SamplerKind::Neal5
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        for i in 0..self.partition.n() {
            self.update_record(i, rng);
        }
        self.update_params(rng);
        Ok(())
    }

    fn num_records(&self) -> usize {
        self.partition.n()
    }

    fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }

    fn labels(&self) -> Vec<usize> {
        self.partition.canonical().labels().to_vec()
    }

    fn density(&self, grid: &PredictiveGrid, out: &mut [f64]) {
        let total = self.partition.n() as f64 + self.model.alpha;
        let comps = self.partition.sizes().iter().zip(&self.params).map(|(&s, p)| (s as f64 / total, p));
        mixture_density(self.model.kernel(), comps, self.model.alpha / total, grid, out);
    }

    fn acceptance(&self) -> Vec<(&'static str, AcceptStats)> {
        vec![("allocation", self.stats)]
    }

    fn reset_acceptance(&mut self) {
        self.stats = AcceptStats::default();
    }

    fn check_invariants(&self) -> Result<()> {
        self.partition.validate()?;
        if self.params.len() != self.partition.num_clusters() {
            return Err(Error::Internal("parameter count differs from cluster count".into()));
        }
        for (i, row) in self.z.chunks_exact(self.dim).enumerate() {
            let mut acc = f64::NEG_INFINITY;
            for &y in &self.aux[i * self.m..(i + 1) * self.m] {
                acc = log_add_exp(acc, self.channel.log_density(row, y));
            }
            let fresh = acc - (self.m as f64).ln();
            if (fresh - self.log_g[i]).abs() > 1e-12 * fresh.abs().max(1.0) {
                return Err(Error::Internal(format!("stored likelihood estimate of record {i} is stale")));
            }
        }
        Ok(())
    }
}
