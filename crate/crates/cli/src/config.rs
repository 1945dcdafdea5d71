//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use privmix::channels::{
    rate_parameters, Channel, GaussianChannel, Interval, LaplaceChannel, SmoothedHistogramChannel, WaveletChannel,
};
use privmix::experiment::Truth;
use privmix::mixtures::{GammaGammaBase, NigBase, DEFAULT_MALA_STEP};
use privmix::samplers::{RunConfig, SamplerKind};

pub const DESK_REPLICATES: usize = 10;
pub const DESK_ITERATIONS: usize = 20_000;
pub const PAPER_REPLICATES: usize = 50;
pub const PAPER_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub data: DataSpec,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    pub model: ModelSpec,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_replicates() -> usize {
    DESK_REPLICATES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    /// Synthetic confidential data, sanitized by the configured channel.
    Generator { truth: Truth, n: usize },
    /// Confidential values (one per line, optional header), sanitized by the configured channel.
    Confidential { path: PathBuf },
    /// An already sanitized dataset; its embedded channel is used.
    Sanitized { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Laplace {
        epsilon: f64,
        #[serde(default)]
        domain: Option<[f64; 2]>,
    },
    /// Exactly one of `epsilon` + `delta`, `rho`, or `variance`.
    Gaussian {
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        variance: Option<f64>,
        #[serde(default)]
        domain: Option<[f64; 2]>,
    },
    Wavelet {
        epsilon: f64,
        levels: u32,
        #[serde(default)]
        domain: Option<[f64; 2]>,
    },
    /// Smoothed histogram with `bins = multiplier * floor(n^{1/5} + 1)` and
    /// `k = floor(n^{3/5} + 1)` unless given explicitly.
    Histogram {
        epsilon: f64,
        #[serde(default = "default_multiplier")]
        multiplier: usize,
        #[serde(default)]
        bins: Option<usize>,
        #[serde(default)]
        release_k: Option<usize>,
        #[serde(default)]
        domain: Option<[f64; 2]>,
    },
}

fn default_multiplier() -> usize {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Gaussian,
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kernel: KernelKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub base: Option<BaseSpec>,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseSpec {
    Nig { mu0: f64, lambda: f64, a: f64, b: f64 },
    /// `mu0 = mean(Z)`; `(a, b)` matched so that `E[sigma2]` is half the
    /// empirical variance of `Z` and `Var[sigma2] = 0.5`.
    EmpiricalBayes {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    GammaGamma {
        shape_a: f64,
        rate_a: f64,
        shape_b: f64,
        rate_b: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
}

fn default_lambda() -> f64 {
    0.1
}
fn default_step() -> f64 {
    DEFAULT_MALA_STEP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub algorithm: SamplerKind,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Defaults to half of `iterations`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "one")]
    pub thin: usize,
    /// Auxiliary replicates per record (Neal 5 only).
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "one")]
    pub density_every: usize,
    #[serde(default = "default_labels_every")]
    pub labels_every: usize,
    #[serde(default)]
    pub check_every: usize,
}

fn default_iterations() -> usize {
    DESK_ITERATIONS
}
fn one() -> usize {
    1
}
fn default_labels_every() -> usize {
    10
}

impl SamplerSpec {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            iterations: self.iterations,
            burn_in: self.burn_in.unwrap_or(self.iterations / 2),
            thin: self.thin,
            density_every: self.density_every,
            labels_every: self.labels_every,
            check_every: self.check_every,
        }
    }
}

/// Cartesian grid of cells. Empty lists keep the base configuration's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub multipliers: Vec<usize>,
    #[serde(default)]
    pub samplers: Vec<SamplerKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    200
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Replaces the schedule with the full-length protocol.
    pub fn paper_scale(&mut self) {
        self.replicates = PAPER_REPLICATES;
        self.sampler.iterations = PAPER_ITERATIONS;
        self.sampler.burn_in = Some(PAPER_ITERATIONS / 2);
    }

    /// Channel domain: explicit, else the generator's support.
    pub fn domain(&self) -> Option<Interval> {
        let explicit = self.channel.as_ref().and_then(|c| match c {
            ChannelSpec::Laplace { domain, .. }
            | ChannelSpec::Gaussian { domain, .. }
            | ChannelSpec::Wavelet { domain, .. }
            | ChannelSpec::Histogram { domain, .. } => *domain,
        });
        let [lo, hi] = explicit.or(match &self.data {
            DataSpec::Generator { truth, .. } => {
                let (lo, hi) = truth.domain();
                Some([lo, hi])
            }
            _ => None,
        })?;
        Interval::new(lo, hi).ok()
    }
}

impl ChannelSpec {
    pub fn with_epsilon(&self, eps: f64) -> Result<Self> {
        let mut c = self.clone();
        match &mut c {
            ChannelSpec::Laplace { epsilon, .. }
            | ChannelSpec::Wavelet { epsilon, .. }
            | ChannelSpec::Histogram { epsilon, .. } => *epsilon = eps,
            ChannelSpec::Gaussian { epsilon, .. } => *epsilon = Some(eps),
        }
        Ok(c)
    }

    pub fn with_delta(&self, d: f64) -> Result<Self> {
        let mut c = self.clone();
        match &mut c {
            ChannelSpec::Gaussian { delta, .. } => *delta = Some(d),
            _ => bail!("a delta sweep needs the gaussian mechanism"),
        }
        Ok(c)
    }

    pub fn with_multiplier(&self, l: usize) -> Result<Self> {
        let mut c = self.clone();
        match &mut c {
            ChannelSpec::Histogram { multiplier, bins, .. } => {
                *multiplier = l;
                *bins = None;
            }
            _ => bail!("a multiplier sweep needs the histogram mechanism"),
        }
        Ok(c)
    }

    pub fn is_global(&self) -> bool {
        matches!(self, ChannelSpec::Histogram { .. })
    }

    /// Builds the mechanism for `n` confidential records on `domain`.
    pub fn build(&self, domain: Interval, n: usize) -> Result<Channel> {
        Ok(match *self {
            ChannelSpec::Laplace { epsilon, .. } => LaplaceChannel::new(domain, epsilon)?.into(),
            ChannelSpec::Gaussian { epsilon, delta, rho, variance, .. } => match (epsilon, delta, rho, variance) {
                (Some(e), Some(d), None, None) => GaussianChannel::eps_delta(domain, e, d)?.into(),
                (None, None, Some(r), None) => GaussianChannel::zcdp(domain, r)?.into(),
                (None, None, None, Some(v)) => GaussianChannel::with_variance(domain, v)?.into(),
                _ => bail!("gaussian mechanism needs exactly one of: epsilon and delta, rho, variance"),
            },
            ChannelSpec::Wavelet { epsilon, levels, .. } => WaveletChannel::new(domain, levels, epsilon)?.into(),
            ChannelSpec::Histogram { epsilon, multiplier, bins, release_k, .. } => {
                let (m, k) = rate_parameters(n, multiplier);
                SmoothedHistogramChannel::calibrated(domain, n, bins.unwrap_or(m), release_k.unwrap_or(k), epsilon)?.into()
            }
        })
    }
}

impl BaseSpec {
    pub fn default_for(kernel: KernelKind) -> Self {
        match kernel {
            KernelKind::Gaussian => BaseSpec::Nig { mu0: 0.0, lambda: 0.1, a: 3.0, b: 3.0 },
            KernelKind::Beta => {
                let g = GammaGammaBase::default();
                BaseSpec::GammaGamma {
                    shape_a: g.shape_a,
                    rate_a: g.rate_a,
                    shape_b: g.shape_b,
                    rate_b: g.rate_b,
                    step: g.step,
                }
            }
        }
    }
}

/// Empirical-Bayes NIG hyperparameters from released scalars.
pub fn empirical_bayes_nig(z: &[f64], lambda: f64) -> Result<NigBase> {
    if z.len() < 2 {
        bail!("empirical Bayes needs at least two released values");
    }
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // IG(a, b): E = b / (a - 1) = var / 2 and Var = E^2 / (a - 2) = 0.5.
    let target = 0.5 * var;
    let a = 2.0 + target * target / 0.5;
    let b = (a - 1.0) * target;
    if !(a > 2.0 && b > 0.0) {
        bail!("empirical Bayes moments give invalid inverse-gamma ({a}, {b})");
    }
    Ok(NigBase::new(mean, lambda, a, b)?)
}
