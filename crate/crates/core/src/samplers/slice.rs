use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{mh_accept, mixture_density, AcceptStats, Chain, ChainRng, PredictiveGrid, SamplerKind};
use crate::channels::LocalChannel;
use crate::error::{arg, Error, Result};
use crate::mixtures::{BaseMeasure, Kernel, MixtureModel, ParamOf, Partition};
use crate::num::sample_log_weights;

/// Ratio of the geometric slice sequence `xi_h = (1 - kappa) kappa^h`.
pub const SLICE_KAPPA: f64 = 0.5;

/// `xi_h` for the zero-based atom index `h`.
#[inline]
pub fn slice_xi(h: usize) -> f64 {
    (1.0 - SLICE_KAPPA) * SLICE_KAPPA.powi(h as i32)
}

/// Number of atoms `h` with `xi_h > u`.
pub fn admissible_atoms(u: f64) -> usize {
    let mut h = if u >= 1.0 - SLICE_KAPPA {
        0
    } else {
        ((u / (1.0 - SLICE_KAPPA)).ln() / SLICE_KAPPA.ln()).ceil().max(0.0) as usize
    };
    while slice_xi(h) > u {
        h += 1;
    }
    while h > 0 && slice_xi(h - 1) <= u {
        h -= 1;
    }
    h
}

/// Truncated stick-breaking representation with slice variables, shared by
/// the local and global conditional samplers.
pub(crate) struct SliceMixture<B: BaseMeasure> {
    pub(crate) model: MixtureModel<B>,
    pub(crate) atoms: Vec<ParamOf<B>>,
    pub(crate) weights: Vec<f64>,
    pub(crate) alloc: Vec<usize>,
    slices: Vec<f64>,
    counts: Vec<usize>,
    logw: Vec<f64>,
}

impl<B: BaseMeasure> SliceMixture<B> {
    pub(crate) fn new<R: Rng + ?Sized>(model: MixtureModel<B>, latent: &[f64], rng: &mut R) -> Self {
        let start = model.base.sample(rng);
        let atom = model.base.update(&start, latent, rng);
        Self {
            model,
            atoms: vec![atom],
            weights: vec![1.0],
            alloc: vec![0; latent.len()],
            slices: vec![0.0; latent.len()],
            counts: Vec::new(),
            logw: Vec::new(),
        }
    }

    /// Refreshes slices, weights, atoms and allocations given the latent data.
    pub(crate) fn refresh<R: Rng + ?Sized>(&mut self, latent: &[f64], rng: &mut R) {
        let mut min_u = 1.0f64;
        let mut max_c = 0;
        for (u, &c) in self.slices.iter_mut().zip(&self.alloc) {
            *u = rng.random::<f64>() * slice_xi(c);
            min_u = min_u.min(*u);
            max_c = max_c.max(c);
        }
        let h_max = (max_c + 1).max(admissible_atoms(min_u));

        self.counts.clear();
        self.counts.resize(h_max, 0);
        for &c in &self.alloc {
            self.counts[c] += 1;
        }
        self.weights.clear();
        let mut tail = self.alloc.len();
        let mut rest = 1.0;
        for h in 0..h_max {
            tail -= self.counts[h];
            let v: f64 = Beta::new(1.0 + self.counts[h] as f64, self.model.alpha + tail as f64)
                .expect("positive Beta parameters")
                .sample(rng);
            self.weights.push(rest * v);
            rest *= 1.0 - v;
        }

        self.atoms.truncate(h_max);
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); h_max];
        for (&c, &y) in self.alloc.iter().zip(latent) {
            data[c].push(y);
        }
        for (h, d) in data.iter().enumerate() {
            if h >= self.atoms.len() {
                self.atoms.push(self.model.base.sample(rng));
            } else if d.is_empty() {
                self.atoms[h] = self.model.base.sample(rng);
            } else {
                self.atoms[h] = self.model.base.update(&self.atoms[h], d, rng);
            }
        }

        let kernel = self.model.kernel();
        for i in 0..self.alloc.len() {
            let admissible = admissible_atoms(self.slices[i]).min(h_max);
            self.logw.clear();
            for h in 0..admissible {
                self.logw
                    .push(self.weights[h].ln() - slice_xi(h).ln() + kernel.log_density(&self.atoms[h], latent[i]));
            }
            if self.logw.iter().any(|l| l.is_finite()) {
                self.alloc[i] = sample_log_weights(&self.logw, rng);
            }
        }
    }

    pub(crate) fn remainder(&self) -> f64 {
        (1.0 - self.weights.iter().sum::<f64>()).max(0.0)
    }

    pub(crate) fn num_clusters(&self) -> usize {
        let mut seen = vec![false; self.atoms.len()];
        self.alloc.iter().filter(|&&c| !std::mem::replace(&mut seen[c], true)).count()
    }

    pub(crate) fn labels(&self) -> Vec<usize> {
        Partition::from_labels(&self.alloc).labels().to_vec()
    }

    pub(crate) fn density(&self, grid: &PredictiveGrid, out: &mut [f64]) {
        let comps = self.weights.iter().copied().zip(&self.atoms);
        mixture_density(self.model.kernel(), comps, self.remainder(), grid, out);
    }

    pub(crate) fn check(&self) -> Result<()> {
        for (i, &c) in self.alloc.iter().enumerate() {
            if c >= self.atoms.len() || self.slices[i] >= slice_xi(c) {
                return Err(Error::Internal(format!("record {i} allocated to an inadmissible atom {c}")));
            }
        }
        Ok(())
    }
}

/// Conditional slice sampler for local channels with a Metropolis step on
/// each latent value using the kernel as proposal.
pub struct SliceSampler<B: BaseMeasure, C> {
    mix: SliceMixture<B>,
    channel: C,
    z: Vec<f64>,
    dim: usize,
    latent: Vec<f64>,
    log_q: Vec<f64>,
    stats: AcceptStats,
}

impl<B: BaseMeasure, C: LocalChannel> SliceSampler<B, C> {
    pub fn new<R: Rng + ?Sized>(model: MixtureModel<B>, channel: C, z: Vec<f64>, rng: &mut R) -> Result<Self> {
        let dim = channel.record_len();
        if z.is_empty() || z.len() % dim != 0 {
            return arg(format!("{} released values do not form records of width {dim}", z.len()));
        }
        let latent: Vec<f64> = z.chunks_exact(dim).map(|row| channel.initial_latent(row, rng)).collect();
        let log_q = z.chunks_exact(dim).zip(&latent).map(|(row, &y)| channel.log_density(row, y)).collect();
        let mix = SliceMixture::new(model, &latent, rng);
        Ok(Self { mix, channel, z, dim, latent, log_q, stats: AcceptStats::default() })
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn weights(&self) -> &[f64] {
        &self.mix.weights
    }

    pub fn atoms(&self) -> &[ParamOf<B>] {
        &self.mix.atoms
    }
}

impl<B, C> Chain for SliceSampler<B, C>
where
    B: BaseMeasure,
    C: LocalChannel,
{
    fn kind(&self) -> SamplerKind {
        SamplerKind::Slice
    }

    fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        self.mix.refresh(&self.latent, rng);
        let eps = self.channel.pure_epsilon();
        let kernel = self.mix.model.kernel();
        for (i, row) in self.z.chunks_exact(self.dim).enumerate() {
            let y = kernel.sample(&self.mix.atoms[self.mix.alloc[i]], rng);
            let lq = self.channel.log_density(row, y);
            let log_ratio = lq - self.log_q[i];
            let accept = mh_accept(log_ratio, rng);
            self.stats.record(log_ratio, accept, eps);
            if accept {
                self.latent[i] = y;
                self.log_q[i] = lq;
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
        for (i, row) in self.z.chunks_exact(self.dim).enumerate() {
            let fresh = self.channel.log_density(row, self.latent[i]);
            if (fresh - self.log_q[i]).abs() > 1e-12 * fresh.abs().max(1.0) {
                return Err(Error::Internal(format!("cached channel density of record {i} is stale")));
            }
        }
        Ok(())
    }
}
