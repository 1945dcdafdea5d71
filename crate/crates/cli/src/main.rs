use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use privmix::channels::Interval;
use privmix::experiment::Truth;
use privmix::samplers::{ChainRng, SamplerKind};
use privmix_cli::config::{ChannelSpec, DataSpec};
use privmix_cli::plot::density_svg;
use privmix_cli::runner::{read_density, read_sanitized};
use privmix_cli::{run_experiment, summarize, worker_budget, ExperimentConfig};

#[derive(Parser)]
#[command(name = "privmix", version, about = "Dirichlet process mixtures fitted to differentially private data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Release a sanitized copy of confidential values, through a config's
    /// channel or one given by flags.
    Sanitize(SanitizeArgs),
    /// Run one configuration (all replicates).
    Run(RunArgs),
    /// Run the configuration's [sweep] grid.
    Sweep(RunArgs),
    /// Recompute the aggregate table of an artifact directory.
    Summarize {
        dir: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Plot a density CSV as SVG.
    Plot {
        density: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Overlay a known generating density.
        #[arg(long, value_enum)]
        truth: Option<TruthArg>,
        #[arg(long, default_value = "")]
        title: String,
    },
}

#[derive(Args)]
struct SanitizeArgs {
    /// Take the channel (and, without --in, the data) from a config file.
    #[arg(long, conflicts_with = "mechanism")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    mechanism: Option<MechanismArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, conflicts_with = "rho")]
    delta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Finest wavelet resolution level.
    #[arg(long = "J", alias = "levels")]
    levels: Option<u32>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    release_k: Option<usize>,
    /// Channel domain as `lo,hi`; defaults to [0, 1] for wavelet and histogram.
    #[arg(long, value_parser = parse_domain, allow_hyphen_values = true)]
    domain: Option<[f64; 2]>,
    /// Confidential values, one per line.
    #[arg(long = "in", alias = "input")]
    input: Option<PathBuf>,
    #[arg(long = "out", alias = "output")]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_domain(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts[..] else {
        return Err("expected `lo,hi`".into());
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"));
    Ok([num(lo)?, num(hi)?])
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MechanismArg {
    Laplace,
    Gaussian,
    Wavelet,
    SmoothedHist,
}

impl SanitizeArgs {
    fn channel_spec(&self, mechanism: MechanismArg) -> Result<ChannelSpec> {
        let eps = || self.epsilon.context("--epsilon is required for this mechanism");
        let domain = self.domain;
        Ok(match mechanism {
            MechanismArg::Laplace => ChannelSpec::Laplace { epsilon: eps()?, domain },
            MechanismArg::Gaussian => ChannelSpec::Gaussian {
                epsilon: self.epsilon,
                delta: self.delta,
                rho: self.rho,
                variance: None,
                domain,
            },
            MechanismArg::Wavelet => ChannelSpec::Wavelet {
                epsilon: eps()?,
                levels: self.levels.context("--J is required for the wavelet mechanism")?,
                domain,
            },
            MechanismArg::SmoothedHist => ChannelSpec::Histogram {
                epsilon: eps()?,
                multiplier: 4,
                bins: self.bins,
                release_k: self.release_k,
                domain,
            },
        })
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TruthArg {
    GaussianMixture,
    BetaMixture,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// 50 replicates of 100k iterations with 50k burn-in.
    #[arg(long)]
    paper_scale: bool,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if self.paper_scale {
            c.paper_scale();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.replicates {
            c.replicates = r;
        }
        if let Some(i) = self.iterations {
            c.sampler.iterations = i;
        }
        if let Some(b) = self.burn_in {
            c.sampler.burn_in = Some(b);
        }
        if let Some(s) = self.sampler {
            c.sampler.algorithm = s;
        }
        if let Some(e) = self.epsilon {
            let ch = c.channel.as_ref().context("--epsilon needs a [channel] section")?;
            c.channel = Some(ch.with_epsilon(e)?);
        }
        let out = self.out.clone().or_else(|| c.output.clone()).context("no output directory: pass --out or set `output`")?;
        Ok((c, out))
    }
}

fn read_values(path: &PathBuf) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.split(',').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => bail!("{}: line {} is not a number", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn sanitize(args: SanitizeArgs) -> Result<()> {
    let config = args.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let (spec, domain) = match (&config, args.mechanism) {
        (Some(c), _) => {
            let spec = c.channel.clone().context("config has no [channel] section")?;
            (spec, c.domain())
        }
        (None, Some(m)) => {
            let spec = args.channel_spec(m)?;
            let domain = match (&args.domain, m) {
                (Some(d), _) => Some(Interval::new(d[0], d[1])?),
                (None, MechanismArg::Wavelet | MechanismArg::SmoothedHist) => Some(Interval::unit()),
                (None, _) => None,
            };
            (spec, domain)
        }
        (None, None) => bail!("pass --config or --mechanism"),
    };
    let mut rng = ChainRng::seed_from_u64(args.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0));
    let values = match (&args.input, config.as_ref().map(|c| &c.data)) {
        (Some(p), _) => read_values(p)?,
        (None, Some(DataSpec::Confidential { path })) => read_values(path)?,
        (None, Some(DataSpec::Generator { truth, n })) => truth.sample(*n, &mut rng).values,
        (None, Some(DataSpec::Sanitized { .. })) => bail!("data are already sanitized"),
        (None, None) => bail!("--in is required without --config"),
    };
    let domain = domain.context("channel domain must be given (--domain lo,hi or `domain` in the config)")?;
    let data = spec.build(domain, values.len())?.sanitize(&values, &mut rng)?;
    let output = &args.output;
    data.write_csv(fs::File::create(output).with_context(|| format!("creating {}", output.display()))?)?;
    eprintln!("wrote {} released rows to {}", data.len(), output.display());
    Ok(())
}

fn run(args: RunArgs, sweep: bool) -> Result<()> {
    let (config, out) = args.load()?;
    if sweep && config.sweep.is_none() {
        bail!("`sweep` needs a [sweep] section; use `run` for a single configuration");
    }
    if !sweep && config.sweep.is_some() {
        bail!("config has a [sweep] section; use `sweep`");
    }
    if let DataSpec::Sanitized { path } = &config.data {
        read_sanitized(path)?;
    }
    let workers = worker_budget();
    let manifest = run_experiment(&config, &out, workers)?;
    let runs: usize = manifest.cells.iter().map(|c| c.replicates.len()).sum();
    eprintln!("{} cells, {runs} chains, {workers} workers -> {}", manifest.cells.len(), out.display());
    print!("{}", fs::read_to_string(out.join("summary.csv"))?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sanitize(a) => sanitize(a),
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::Summarize { dir, output } => {
            let table = summarize(&dir)?;
            match output {
                Some(p) => fs::write(p, table)?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Plot { density, output, truth, title } => {
            let d = read_density(&density)?;
            let truth = truth.map(|t| match t {
                TruthArg::GaussianMixture => Truth::TruncatedGaussianMixture,
                TruthArg::BetaMixture => Truth::BetaMixture,
            });
            fs::write(&output, density_svg(&d, truth, &title)?)?;
            Ok(())
        }
    }
}
