//! Chain construction and the sampler / channel / kernel compatibility matrix.

use anyhow::{bail, Result};

use privmix::channels::{Channel, GlobalMechanism, LocalChannel, LocalMechanism, SanitizedDataset};
use privmix::marginal_gaussian::MarginalGaussianModel;
use privmix::mixtures::{BaseMeasure, GammaGammaBase, MixtureModel, NigBase};
use privmix::samplers::{
    Chain, ChainRng, GlobalConditional, GlobalMarginal, Neal2, Neal3, Neal5, PredictiveGrid, SamplerKind,
    SliceSampler,
};

use crate::config::{empirical_bayes_nig, BaseSpec, KernelKind};

/// Coarse mechanism class used by the compatibility matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismClass {
    Laplace,
    Gaussian,
    Wavelet,
    Histogram,
}

impl MechanismClass {
    pub fn of(channel: &Channel) -> Self {
        match channel {
            Channel::Local(LocalMechanism::Laplace(_)) => MechanismClass::Laplace,
            Channel::Local(LocalMechanism::Gaussian(_)) => MechanismClass::Gaussian,
            Channel::Local(LocalMechanism::Wavelet(_)) => MechanismClass::Wavelet,
            Channel::Global(_) => MechanismClass::Histogram,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismClass::Laplace => "laplace",
            MechanismClass::Gaussian => "gaussian",
            MechanismClass::Wavelet => "wavelet",
            MechanismClass::Histogram => "histogram",
        }
    }
}

pub const COMPATIBILITY: &str = "\
compatibility matrix (sampler: mechanisms / kernels):
  neal5, slice                      : laplace, gaussian, wavelet / gaussian, beta
  neal2, neal3                      : gaussian / gaussian with an NIG base
  global-conditional, global-marginal: histogram / gaussian, beta
  beta kernels need the domain [0, 1]";

/// Rejects combinations outside the compatibility matrix.
pub fn check_compatible(sampler: SamplerKind, mechanism: MechanismClass, kernel: KernelKind, base: &BaseSpec) -> Result<()> {
    use MechanismClass as M;
    use SamplerKind as S;
    let ok = match sampler {
        S::Neal5 | S::Slice => mechanism != M::Histogram,
        S::Neal2 | S::Neal3 => mechanism == M::Gaussian && kernel == KernelKind::Gaussian,
        S::GlobalConditional | S::GlobalMarginal => mechanism == M::Histogram,
    };
    let base_ok = matches!(
        (kernel, base),
        (KernelKind::Gaussian, BaseSpec::Nig { .. } | BaseSpec::EmpiricalBayes { .. })
            | (KernelKind::Beta, BaseSpec::GammaGamma { .. })
    );
    if !ok || !base_ok {
        bail!(
            "sampler {sampler} cannot run a {:?} kernel with a {:?} base on the {} mechanism\n{COMPATIBILITY}",
            kernel,
            base,
            mechanism.as_str()
        );
    }
    Ok(())
}

/// A chain ready to run plus its evaluation grid.
pub struct BuiltChain {
    pub chain: Box<dyn Chain>,
    pub grid: PredictiveGrid,
}

fn nig_of(base: &BaseSpec, data: &SanitizedDataset) -> Result<NigBase> {
    match *base {
        BaseSpec::Nig { mu0, lambda, a, b } => Ok(NigBase::new(mu0, lambda, a, b)?),
        BaseSpec::EmpiricalBayes { lambda } => {
            if data.dim != 1 {
                bail!("empirical Bayes needs scalar released records");
            }
            empirical_bayes_nig(&data.values, lambda)
        }
        BaseSpec::GammaGamma { .. } => bail!("gamma-gamma base is for beta kernels"),
    }
}

fn local<B, C>(
    sampler: SamplerKind,
    model: MixtureModel<B>,
    channel: C,
    z: Vec<f64>,
    m: usize,
    grid: Vec<f64>,
    rng: &mut ChainRng,
) -> Result<BuiltChain>
where
    B: BaseMeasure + Clone + 'static,
    C: LocalChannel + Clone + 'static,
{
    let pg = PredictiveGrid::new(grid, &model.base);
    let chain: Box<dyn Chain> = match sampler {
        SamplerKind::Neal5 => Box::new(Neal5::new(model, channel, z, m, rng)?),
        SamplerKind::Slice => Box::new(SliceSampler::new(model, channel, z, rng)?),
        other => bail!("{other} is not a local-channel sampler"),
    };
    Ok(BuiltChain { chain, grid: pg })
}

fn global<B: BaseMeasure + Clone + 'static>(
    sampler: SamplerKind,
    model: MixtureModel<B>,
    channel: privmix::channels::SmoothedHistogramChannel,
    w: Vec<f64>,
    grid: Vec<f64>,
    rng: &mut ChainRng,
) -> Result<BuiltChain> {
    let pg = PredictiveGrid::new(grid, &model.base);
    let chain: Box<dyn Chain> = match sampler {
        SamplerKind::GlobalConditional => Box::new(GlobalConditional::new(model, channel, w, rng)?),
        SamplerKind::GlobalMarginal => Box::new(GlobalMarginal::new(model, channel, w, rng)?),
        other => bail!("{other} is not a global-channel sampler"),
    };
    Ok(BuiltChain { chain, grid: pg })
}

/// Constructs the chain for `data`. With a Gaussian channel and Gaussian
/// kernel every sampler targets the same model: the truncated NIG prior on
/// the convolved variance, seen by Neal 5 and slice through its image on the
/// kernel parameters.
pub fn build_chain(
    sampler: SamplerKind,
    data: &SanitizedDataset,
    kernel: KernelKind,
    base: &BaseSpec,
    alpha: f64,
    m: usize,
    grid: Vec<f64>,
    rng: &mut ChainRng,
) -> Result<BuiltChain> {
    check_compatible(sampler, MechanismClass::of(&data.channel), kernel, base)?;
    let z = data.values.clone();
    match (&data.channel, kernel) {
        (Channel::Local(LocalMechanism::Gaussian(c)), KernelKind::Gaussian) => {
            let marginal = MarginalGaussianModel::new(nig_of(base, data)?, c.sigma2, alpha)?;
            match sampler {
                SamplerKind::Neal2 | SamplerKind::Neal3 => {
                    let pg = PredictiveGrid::new(grid, &marginal.kernel_base());
                    let chain: Box<dyn Chain> = if sampler == SamplerKind::Neal2 {
                        Box::new(Neal2::new(marginal, z, rng)?)
                    } else {
                        Box::new(Neal3::new(marginal, z, rng)?)
                    };
                    Ok(BuiltChain { chain, grid: pg })
                }
                _ => local(sampler, MixtureModel::new(marginal.kernel_base(), alpha)?, c.clone(), z, m, grid, rng),
            }
        }
        (Channel::Local(c), KernelKind::Gaussian) => {
            local(sampler, MixtureModel::new(nig_of(base, data)?, alpha)?, c.clone(), z, m, grid, rng)
        }
        (Channel::Local(c), KernelKind::Beta) => {
            local(sampler, MixtureModel::new(gamma_gamma(base)?, alpha)?, c.clone(), z, m, grid, rng)
        }
        (Channel::Global(GlobalMechanism::SmoothedHistogram(c)), KernelKind::Gaussian) => {
            global(sampler, MixtureModel::new(nig_of(base, data)?, alpha)?, c.clone(), z, grid, rng)
        }
        (Channel::Global(GlobalMechanism::SmoothedHistogram(c)), KernelKind::Beta) => {
            global(sampler, MixtureModel::new(gamma_gamma(base)?, alpha)?, c.clone(), z, grid, rng)
        }
    }
}

fn gamma_gamma(base: &BaseSpec) -> Result<GammaGammaBase> {
    match *base {
        BaseSpec::GammaGamma { shape_a, rate_a, shape_b, rate_b, step } => {
            Ok(GammaGammaBase::new(shape_a, rate_a, shape_b, rate_b)?.with_step(step)?)
        }
        _ => bail!("beta kernels need a gamma-gamma base"),
    }
}
