use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Cluster allocations with zero-based contiguous labels `0..k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    pub fn one_cluster(n: usize) -> Self {
        Self { labels: vec![0; n], sizes: if n > 0 { vec![n] } else { vec![] } }
    }

    pub fn singletons(n: usize) -> Self {
        Self { labels: (0..n).collect(), sizes: vec![1; n] }
    }

    /// Builds a partition from arbitrary labels, renumbered by first appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut sizes = Vec::new();
        for &r in raw {
            let next = map.len();
            let c = *map.entry(r).or_insert(next);
            if c == sizes.len() {
                sizes.push(0);
            }
            sizes[c] += 1;
            labels.push(c);
        }
        Self { labels, sizes }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Same partition with labels renumbered by first appearance.
    pub fn canonical(&self) -> Self {
        Self::from_labels(&self.labels)
    }

    pub fn members(&self, h: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(move |(_, &c)| c == h).map(|(i, _)| i)
    }

    /// Decrements the size of `i`'s cluster without changing its label.
    pub(crate) fn detach(&mut self, i: usize) {
        self.sizes[self.labels[i]] -= 1;
    }

    /// Assigns `i` to cluster `h`; `h == k` opens a new cluster.
    pub(crate) fn attach(&mut self, i: usize, h: usize) {
        if h == self.sizes.len() {
            self.sizes.push(0);
        }
        self.sizes[h] += 1;
        self.labels[i] = h;
    }

    /// Removes the empty cluster `h` by moving the last cluster into its slot.
    /// Returns the old index of the moved cluster, if any.
    pub(crate) fn remove_empty(&mut self, h: usize) -> Option<usize> {
        debug_assert_eq!(self.sizes[h], 0);
        let last = self.sizes.len() - 1;
        self.sizes.swap_remove(h);
        if h == last {
            return None;
        }
        for c in self.labels.iter_mut() {
            if *c == last {
                *c = h;
            }
        }
        Some(last)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.sizes.len();
        let mut counts = vec![0usize; k];
        for &c in &self.labels {
            if c >= k {
                return Err(Error::Internal(format!("label {c} out of range for {k} clusters")));
            }
            counts[c] += 1;
        }
        if counts != self.sizes {
            return Err(Error::Internal(format!("cluster sizes {:?} disagree with labels {:?}", self.sizes, counts)));
        }
        if counts.contains(&0) {
            return Err(Error::Internal("empty cluster".into()));
        }
        Ok(())
    }
}

/// Draws a label from the Polya urn: `h < k` with weight `sizes[h]`,
/// `k` (new cluster) with weight `alpha`.
pub fn polya_urn_propose<R: Rng + ?Sized>(sizes: &[usize], alpha: f64, rng: &mut R) -> usize {
    let total = sizes.iter().sum::<usize>() as f64 + alpha;
    let mut u = rng.random::<f64>() * total;
    for (h, &s) in sizes.iter().enumerate() {
        u -= s as f64;
        if u < 0.0 {
            return h;
        }
    }
    sizes.len()
}

/// Log probability of the partition under the Chinese restaurant process.
pub fn eppf_log_prob(partition: &Partition, alpha: f64) -> f64 {
    let n = partition.n() as f64;
    let k = partition.num_clusters() as f64;
    k * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n)
        + partition.sizes().iter().map(|&s| ln_gamma(s as f64)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StickBreaking {
    pub weights: Vec<f64>,
    /// Mass `1 - sum(weights)` left beyond the truncation.
    pub remainder: f64,
}

/// First `h` stick-breaking weights with `Beta(1, alpha)` breaks.
pub fn stick_breaking_weights<R: Rng + ?Sized>(alpha: f64, h: usize, rng: &mut R) -> StickBreaking {
    let mut weights = Vec::with_capacity(h);
    let mut ln_rest = 0.0f64;
    let mut rest = 1.0f64;
    for _ in 0..h {
        // ln(1 - v) for v ~ Beta(1, alpha) is -Exp(1) / alpha.
        let e: f64 = Exp1.sample(rng);
        ln_rest -= e / alpha;
        let next = ln_rest.exp();
        weights.push(rest - next);
        rest = next;
    }
    StickBreaking { weights, remainder: rest }
}
