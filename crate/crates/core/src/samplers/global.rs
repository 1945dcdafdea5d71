use rand::Rng;

use super::slice::SliceMixture;
use super::{mh_accept, mixture_density, AcceptStats, Chain, ChainRng, PredictiveGrid, SamplerKind};
use crate::channels::{HistogramCache, SmoothedHistogramChannel};
use crate::error::{arg, Error, Result};
use crate::mixtures::{polya_urn_propose, BaseMeasure, Kernel, MixtureModel, ParamOf, Partition};

/// Starting latent values: the released points cycled over the records, or
/// uniform draws when nothing was released.
fn initial_latent<R: Rng + ?Sized>(channel: &SmoothedHistogramChannel, w: &[f64], rng: &mut R) -> Vec<f64> {
    let d = channel.domain;
    (0..channel.records)
        .map(|i| {
            let u = if w.is_empty() { rng.random::<f64>() } else { w[i % w.len()] };
            d.interior(d.from_unit(u))
        })
        .collect()
}

fn check_release(channel: &SmoothedHistogramChannel, w: &[f64]) -> Result<()> {
    if let Some(bad) = w.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return arg(format!("released value {bad} outside [0, 1]"));
    }
    if channel.records == 0 {
        return arg("channel must describe at least one record");
    }
    Ok(())
}

/// Slice sampler for the smoothed-histogram release.
pub struct GlobalConditional<B: BaseMeasure> {
    mix: SliceMixture<B>,
    channel: SmoothedHistogramChannel,
    latent: Vec<f64>,
    cache: HistogramCache,
    stats: AcceptStats,
}

impl<B: BaseMeasure> GlobalConditional<B> {
    pub fn new<R: Rng + ?Sized>(
        model: MixtureModel<B>,
        channel: SmoothedHistogramChannel,
        w: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        check_release(&channel, &w)?;
        let latent = initial_latent(&channel, &w, rng);
        let cache = HistogramCache::new(&channel, &w, &latent);
        let mix = SliceMixture::new(model, &latent, rng);
        Ok(Self { mix, channel, latent, cache, stats: AcceptStats::default() })
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn cache(&self) -> &HistogramCache {
        &self.cache
    }

    pub fn channel(&self) -> &SmoothedHistogramChannel {
        &self.channel
    }
}

impl<B: BaseMeasure> Chain for GlobalConditional<B> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::GlobalConditional
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        self.mix.refresh(&self.latent, rng);
        let kernel = self.mix.model.kernel();
        for i in 0..self.latent.len() {
            let y = kernel.sample(&self.mix.atoms[self.mix.alloc[i]], rng);
            let to = self.channel.bin_of(y);
            let log_ratio = self.cache.log_ratio_move(&self.channel, i, to);
            let accept = mh_accept(log_ratio, rng);
            self.stats.record(log_ratio, accept, None);
            if accept {
                self.cache.apply_move(i, to);
                self.latent[i] = y;
            }
        }
        Ok(())
    }

    fn num_records(&self) -> usize {
        self.latent.len()
    }

    fn num_clusters(&self) -> usize {
        self.mix.num_clusters()
    }

    fn labels(&self) -> Vec<usize> {
        self.mix.labels()
    }

    fn density(&self, grid: &PredictiveGrid, out: &mut [f64]) {
        self.mix.density(grid, out)
    }

    fn acceptance(&self) -> Vec<(&'static str, AcceptStats)> {
        vec![("latent", self.stats)]
    }

    fn reset_acceptance(&mut self) {
        self.stats = AcceptStats::default();
    }

    fn check_invariants(&self) -> Result<()> {
        self.mix.check()?;
        self.cache.verify(&self.channel, &self.latent)
    }
}

/// Marginal sampler for the smoothed-histogram release: joint Metropolis
/// proposals of `(Y_i, theta_i)` from the Polya urn composed with the kernel.
pub struct GlobalMarginal<B: BaseMeasure> {
    model: MixtureModel<B>,
    channel: SmoothedHistogramChannel,
    latent: Vec<f64>,
    cache: HistogramCache,
    partition: Partition,
    params: Vec<ParamOf<B>>,
    stats: AcceptStats,
    sizes: Vec<usize>,
}

impl<B: BaseMeasure> GlobalMarginal<B> {
    pub fn new<R: Rng + ?Sized>(
        model: MixtureModel<B>,
        channel: SmoothedHistogramChannel,
        w: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        check_release(&channel, &w)?;
        let latent = initial_latent(&channel, &w, rng);
        let cache = HistogramCache::new(&channel, &w, &latent);
        let start = model.base.sample(rng);
        let params = vec![model.base.update(&start, &latent, rng)];
        let partition = Partition::one_cluster(latent.len());
        Ok(Self { model, channel, latent, cache, partition, params, stats: AcceptStats::default(), sizes: Vec::new() })
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    fn update_record<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        let c = self.partition.label(i);
        self.sizes.clear();
        self.sizes.extend_from_slice(self.partition.sizes());
        self.sizes[c] -= 1;
        let k = self.sizes.len();
        let h = polya_urn_propose(&self.sizes, self.model.alpha, rng);
        let fresh = (h == k).then(|| self.model.base.sample(rng));
        let y = self.model.kernel().sample(fresh.as_ref().unwrap_or_else(|| &self.params[h]), rng);
        let to = self.channel.bin_of(y);
        let log_ratio = self.cache.log_ratio_move(&self.channel, i, to);
        let accept = mh_accept(log_ratio, rng);
        self.stats.record(log_ratio, accept, None);
        if !accept {
            return;
        }
        self.cache.apply_move(i, to);
        self.latent[i] = y;
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
}

impl<B: BaseMeasure> Chain for GlobalMarginal<B> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::GlobalMarginal
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        for i in 0..self.latent.len() {
            self.update_record(i, rng);
        }
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); self.params.len()];
        for (&c, &y) in self.partition.labels().iter().zip(&self.latent) {
            data[c].push(y);
        }
        for (p, d) in self.params.iter_mut().zip(&data) {
            *p = self.model.base.update(p, d, rng);
        }
        Ok(())
    }

    fn num_records(&self) -> usize {
        self.latent.len()
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
        vec![("latent", self.stats)]
    }

    fn reset_acceptance(&mut self) {
        self.stats = AcceptStats::default();
    }

    fn check_invariants(&self) -> Result<()> {
        self.partition.validate()?;
        if self.params.len() != self.partition.num_clusters() {
            return Err(Error::Internal("parameter count differs from cluster count".into()));
        }
        self.cache.verify(&self.channel, &self.latent)
    }
}
