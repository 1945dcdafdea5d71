//! Replicate orchestration and artifact emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use privmix::channels::{Channel, GlobalMechanism, SanitizedDataset};
use privmix::diagnostics::{ari, ess, hellinger, median, uniform_grid, DensityEstimate};
use privmix::experiment::Truth;
use privmix::samplers::{run_chain, ChainRng, RunSummary, SamplerKind};

use crate::build::{build_chain, check_compatible, MechanismClass};
use crate::config::{BaseSpec, ChannelSpec, DataSpec, ExperimentConfig, KernelKind};
use crate::plot::density_svg;

/// Environment variable holding the worker budget.
pub const WORKERS_ENV: &str = "PRIVMIX_WORKERS";

/// One point of the sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub sampler: SamplerKind,
    pub channel: Option<ChannelSpec>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub multiplier: Option<usize>,
    /// Cells sharing this key see the same sanitized data.
    pub channel_key: usize,
}

/// Quantities fixed by the configuration, computed before sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub noise_variance: Option<f64>,
    pub bins: Option<usize>,
    pub release_k: Option<usize>,
    pub smoothing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub data_seed: u64,
    pub noise_seed: u64,
    pub chain_seed: u64,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: Cell,
    pub derived: Derived,
    pub replicates: Vec<ReplicateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellRecord>,
    pub aggregate: String,
}

/// Per-replicate metrics, written as JSON and aggregated into medians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub cell: String,
    pub sampler: SamplerKind,
    pub replicate: usize,
    pub retained: usize,
    pub acceptance_rate: Option<f64>,
    pub mean_acceptance_prob: Option<f64>,
    pub min_log_ratio: Option<f64>,
    pub ratio_violations: u64,
    pub ess_clusters: Option<f64>,
    pub ess_constant: bool,
    pub median_clusters: Option<f64>,
    pub hellinger_truth: Option<f64>,
    pub hellinger_prior: Option<f64>,
    pub ari: Option<f64>,
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
}

/// SplitMix64 finalizer over the base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut x = base;
    for &p in path {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

fn fmt_param(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

/// Expands the sweep into cells and validates every one of them.
pub fn plan(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    if config.replicates == 0 {
        bail!("replicates must be at least 1");
    }
    let run = config.sampler.run_config();
    run.validate()?;
    if run.burn_in >= run.iterations {
        bail!("iterations ({}) must exceed burn-in ({})", run.iterations, run.burn_in);
    }
    if config.sampler.m == 0 {
        bail!("auxiliary replicate count m must be at least 1");
    }
    let sanitized = matches!(config.data, DataSpec::Sanitized { .. });
    match (&config.channel, sanitized) {
        (None, false) => bail!("a [channel] section is needed unless the data are already sanitized"),
        (Some(_), true) => bail!("sanitized data carry their own channel; remove the [channel] section"),
        _ => {}
    }
    if let DataSpec::Generator { n, .. } = config.data {
        if n == 0 {
            bail!("generator needs n >= 1");
        }
    }
    let sweep = config.sweep.clone().unwrap_or_default();
    if sanitized && !(sweep.epsilons.is_empty() && sweep.deltas.is_empty() && sweep.multipliers.is_empty()) {
        bail!("channel parameters cannot be swept over already sanitized data");
    }
    let samplers = if sweep.samplers.is_empty() { vec![config.sampler.algorithm] } else { sweep.samplers.clone() };
    let opt = |v: &[f64]| if v.is_empty() { vec![None] } else { v.iter().map(|x| Some(*x)).collect() };
    let epsilons = opt(&sweep.epsilons);
    let deltas = opt(&sweep.deltas);
    let multipliers: Vec<Option<usize>> =
        if sweep.multipliers.is_empty() { vec![None] } else { sweep.multipliers.iter().map(|x| Some(*x)).collect() };

    let base = config.model.base.clone().unwrap_or_else(|| BaseSpec::default_for(config.model.kernel));
    let mut cells = Vec::new();
    let mut key = 0;
    for &eps in &epsilons {
        for &delta in &deltas {
            for &mult in &multipliers {
                let channel = match &config.channel {
                    Some(c) => {
                        let mut c = c.clone();
                        if let Some(e) = eps {
                            c = c.with_epsilon(e)?;
                        }
                        if let Some(d) = delta {
                            c = c.with_delta(d)?;
                        }
                        if let Some(l) = mult {
                            c = c.with_multiplier(l)?;
                        }
                        Some(c)
                    }
                    None => None,
                };
                for &sampler in &samplers {
                    let mut id = sampler.as_str().to_string();
                    if let Some(e) = eps {
                        write!(id, "_eps{}", fmt_param(e)).unwrap();
                    }
                    if let Some(d) = delta {
                        write!(id, "_delta{}", fmt_param(d)).unwrap();
                    }
                    if let Some(l) = mult {
                        write!(id, "_L{l}").unwrap();
                    }
                    cells.push(Cell {
                        id,
                        sampler,
                        channel: channel.clone(),
                        epsilon: eps,
                        delta,
                        multiplier: mult,
                        channel_key: key,
                    });
                }
                key += 1;
            }
        }
    }

    let n_hint = match config.data {
        DataSpec::Generator { n, .. } => Some(n),
        _ => None,
    };
    for cell in &cells {
        if let Some(spec) = &cell.channel {
            let domain = config
                .domain()
                .with_context(|| "channel domain must be given for file input (domain = [lo, hi])".to_string())?;
            let probe = spec.build(domain, n_hint.unwrap_or(100))?;
            check_compatible(cell.sampler, MechanismClass::of(&probe), config.model.kernel, &base)?;
            if config.model.kernel == KernelKind::Beta && (domain.lo != 0.0 || domain.hi != 1.0) {
                bail!("beta kernels need the channel domain [0, 1]");
            }
        }
    }
    Ok(cells)
}

/// Confidential data for one replicate, with labels when generated.
struct Confidential {
    values: Vec<f64>,
    labels: Option<Vec<usize>>,
}

fn read_confidential(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("{}: line {} is not a number: {field:?}", path.display(), i + 1),
        }
    }
    if out.is_empty() {
        bail!("{} holds no values", path.display());
    }
    Ok(out)
}

pub fn read_sanitized(path: &Path) -> Result<SanitizedDataset> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SanitizedDataset::read_csv(f)?)
}

fn derived_of(channel: &Channel) -> Derived {
    match channel {
        Channel::Local(privmix::channels::LocalMechanism::Gaussian(g)) => {
            Derived { noise_variance: Some(g.sigma2), bins: None, release_k: None, smoothing: None }
        }
        Channel::Global(GlobalMechanism::SmoothedHistogram(h)) => Derived {
            noise_variance: None,
            bins: Some(h.bins),
            release_k: Some(h.release_k),
            smoothing: Some(h.smoothing),
        },
        _ => Derived { noise_variance: None, bins: None, release_k: None, smoothing: None },
    }
}

struct Job {
    cell: usize,
    replicate: usize,
}

struct JobOutput {
    summary: RunSummary,
    metrics: ReplicateMetrics,
    density: Option<DensityEstimate>,
    derived: Derived,
    seeds: (u64, u64, u64),
}

fn truth_of(config: &ExperimentConfig) -> Option<Truth> {
    match config.data {
        DataSpec::Generator { truth, .. } => Some(truth),
        _ => None,
    }
}

fn grid_for(config: &ExperimentConfig, data: &SanitizedDataset) -> Vec<f64> {
    if let Some(g) = &config.grid {
        return uniform_grid(g.lo, g.hi, g.points);
    }
    let d = data.channel.domain();
    if config.model.kernel == KernelKind::Beta {
        // Midpoints keep the grid off the edges where Beta densities may diverge.
        return (0..200).map(|i| d.lo + d.diameter() * (i as f64 + 0.5) / 200.0).collect();
    }
    let pad = 0.1 * d.diameter();
    uniform_grid(d.lo - pad, d.hi + pad, 200)
}

fn run_job(config: &ExperimentConfig, cells: &[Cell], job: &Job, fixed: Option<&[f64]>) -> Result<JobOutput> {
    let cell = &cells[job.cell];
    let r = job.replicate as u64;
    let data_seed = derive_seed(config.seed, &[0, r]);
    let noise_seed = derive_seed(config.seed, &[1, r, cell.channel_key as u64]);
    let chain_seed = derive_seed(config.seed, &[2, r, job.cell as u64]);

    let conf = match (&config.data, fixed) {
        (DataSpec::Generator { truth, n }, _) => {
            let s = truth.sample(*n, &mut ChainRng::seed_from_u64(data_seed));
            Some(Confidential { values: s.values, labels: Some(s.labels) })
        }
        (DataSpec::Confidential { .. }, Some(v)) => Some(Confidential { values: v.to_vec(), labels: None }),
        _ => None,
    };
    let data = match (&config.data, &conf, &cell.channel) {
        (DataSpec::Sanitized { path }, _, _) => read_sanitized(path)?,
        (_, Some(c), Some(spec)) => {
            let domain = config.domain().context("channel domain")?;
            let channel = spec.build(domain, c.values.len())?;
            channel.sanitize(&c.values, &mut ChainRng::seed_from_u64(noise_seed))?
        }
        _ => bail!("no data source"),
    };

    let base = config.model.base.clone().unwrap_or_else(|| BaseSpec::default_for(config.model.kernel));
    let mut rng = ChainRng::seed_from_u64(chain_seed);
    let grid = grid_for(config, &data);
    let mut built =
        build_chain(cell.sampler, &data, config.model.kernel, &base, config.model.alpha, config.sampler.m, grid, &mut rng)?;
    let summary = run_chain(built.chain.as_mut(), &config.sampler.run_config(), Some(&built.grid), &mut rng)?;

    let trace: Vec<f64> = summary.cluster_trace.iter().map(|&k| k as f64).collect();
    let e = if trace.len() >= 10 { Some(ess(&trace)?) } else { None };
    let acc = summary.acceptance.first().map(|(_, s)| *s);
    let density = summary.density.clone();
    let truth = truth_of(config);
    let hellinger_truth = match (&density, truth) {
        (Some(d), Some(t)) => {
            let f: Vec<f64> = d.grid.iter().map(|&x| t.density(x)).collect();
            Some(hellinger(&d.mean, &f, &d.grid)?)
        }
        _ => None,
    };
    let hellinger_prior = match &density {
        Some(d) => Some(hellinger(&d.mean, &built.grid.prior, &d.grid)?),
        None => None,
    };
    let ari_value = match (&summary.point_partition, conf.as_ref().and_then(|c| c.labels.as_ref())) {
        (Some(p), Some(labels)) if matches!(data.channel, Channel::Local(_)) => Some(ari(p.labels(), labels)?),
        _ => None,
    };
    let metrics = ReplicateMetrics {
        cell: cell.id.clone(),
        sampler: cell.sampler,
        replicate: job.replicate,
        retained: summary.cluster_trace.len(),
        acceptance_rate: acc.filter(|s| s.proposals > 0).map(|s| s.rate()),
        mean_acceptance_prob: acc.filter(|s| s.proposals > 0).map(|s| s.mean_prob()),
        min_log_ratio: acc.filter(|s| s.proposals > 0).map(|s| s.min_log_ratio),
        ratio_violations: acc.map_or(0, |s| s.violations),
        ess_clusters: e.map(|e| e.value),
        ess_constant: e.is_some_and(|e| e.constant),
        median_clusters: if trace.is_empty() { None } else { Some(median(&trace)) },
        hellinger_truth,
        hellinger_prior,
        ari: ari_value,
    };
    Ok(JobOutput {
        summary,
        metrics,
        density,
        derived: derived_of(&data.channel),
        seeds: (data_seed, noise_seed, chain_seed),
    })
}

/// Worker budget from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_budget() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_trace(path: &Path, summary: &RunSummary, burn_in: usize, thin: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string(), "k".to_string()];
    for (block, _) in &summary.acceptance {
        header.push(format!("{block}_accepted"));
        header.push(format!("{block}_proposals"));
    }
    w.write_record(&header)?;
    for (r, (&k, acc)) in summary.cluster_trace.iter().zip(&summary.acceptance_trace).enumerate() {
        let mut row = vec![(burn_in + r * thin + 1).to_string(), k.to_string()];
        for (a, p) in acc {
            row.push(a.to_string());
            row.push(p.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Density CSV with a one-line JSON header describing its origin.
pub fn write_density(path: &Path, header: &serde_json::Value, d: &DensityEstimate) -> Result<()> {
    let mut text = format!("# {}\n", serde_json::to_string(header)?);
    let bands = d.lower95.is_some() && d.upper95.is_some();
    text.push_str(if bands { "x,mean,lower95,upper95\n" } else { "x,mean\n" });
    for i in 0..d.grid.len() {
        write!(text, "{},{}", d.grid[i], d.mean[i]).unwrap();
        if let (Some(l), Some(u)) = (&d.lower95, &d.upper95) {
            write!(text, ",{},{}", l[i], u[i]).unwrap();
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a density CSV written by [`write_density`].
pub fn read_density(path: &Path) -> Result<DensityEstimate> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let cols = rdr.headers()?.len();
    let (mut grid, mut mean, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let v: Vec<f64> = rec.iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>()?;
        grid.push(v[0]);
        mean.push(v[1]);
        if cols == 4 {
            lo.push(v[2]);
            hi.push(v[3]);
        }
    }
    let bands = cols == 4;
    Ok(DensityEstimate { grid, mean, lower95: bands.then_some(lo), upper95: bands.then_some(hi) })
}

fn med(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(median(&v))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

/// Aggregate table: one row per cell with medians across replicates.
pub fn aggregate_csv(cells: &[Cell], metrics: &[ReplicateMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "sampler",
        "epsilon",
        "delta",
        "multiplier",
        "replicates",
        "median_acceptance",
        "median_ess",
        "median_clusters",
        "median_hellinger_truth",
        "median_hellinger_prior",
        "median_ari",
        "ratio_violations",
    ])?;
    for cell in cells {
        let rows: Vec<&ReplicateMetrics> = metrics.iter().filter(|m| m.cell == cell.id).collect();
        w.write_record([
            cell.id.clone(),
            cell.sampler.to_string(),
            opt(cell.epsilon),
            opt(cell.delta),
            cell.multiplier.map_or(String::new(), |l| l.to_string()),
            rows.len().to_string(),
            opt(med(rows.iter().map(|m| m.acceptance_rate))),
            opt(med(rows.iter().map(|m| m.ess_clusters))),
            opt(med(rows.iter().map(|m| m.median_clusters))),
            opt(med(rows.iter().map(|m| m.hellinger_truth))),
            opt(med(rows.iter().map(|m| m.hellinger_prior))),
            opt(med(rows.iter().map(|m| m.ari))),
            rows.iter().map(|m| m.ratio_violations).sum::<u64>().to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Runs every cell and replicate and writes the artifact directory.
///
/// All files except `timing.json` are reproducible byte for byte from the
/// configuration.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<Manifest> {
    let cells = plan(config)?;
    let fixed = match &config.data {
        DataSpec::Confidential { path } => Some(read_confidential(path)?),
        _ => None,
    };
    let hash = config_hash(config)?;
    fs::create_dir_all(out.join("cells")).with_context(|| format!("creating {}", out.display()))?;

    let jobs: Vec<Job> =
        (0..cells.len()).flat_map(|cell| (0..config.replicates).map(move |replicate| Job { cell, replicate })).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let outputs: Vec<Result<JobOutput>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(config, &cells, j, fixed.as_deref())).collect());

    let run = config.sampler.run_config();
    let truth = truth_of(config);
    let mut records: Vec<CellRecord> = Vec::new();
    let mut metrics = Vec::new();
    let mut timing = BTreeMap::new();
    for (job, output) in jobs.iter().zip(outputs) {
        let cell = &cells[job.cell];
        let output = output.with_context(|| format!("cell {} replicate {}", cell.id, job.replicate))?;
        let dir = out.join("cells").join(&cell.id);
        fs::create_dir_all(&dir)?;
        let stem = format!("rep{:03}", job.replicate);
        let mut files = Vec::new();
        let rel = |name: &str| format!("cells/{}/{name}", cell.id);

        let trace_name = format!("{stem}_trace.csv");
        write_trace(&dir.join(&trace_name), &output.summary, run.burn_in, run.thin)?;
        files.push(rel(&trace_name));

        if let Some(d) = &output.density {
            let header = serde_json::json!({
                "config_hash": hash,
                "cell": cell.id,
                "replicate": job.replicate,
                "chain_seed": output.seeds.2,
                "sampler": cell.sampler,
            });
            let name = format!("{stem}_density.csv");
            write_density(&dir.join(&name), &header, d)?;
            files.push(rel(&name));
            if job.replicate == 0 {
                let svg = density_svg(d, truth, &format!("{} ({})", config.name, cell.id))?;
                fs::write(dir.join("density.svg"), svg)?;
                files.push(rel("density.svg"));
            }
        }
        let name = format!("{stem}_summary.json");
        fs::write(dir.join(&name), serde_json::to_string_pretty(&output.metrics)?)?;
        files.push(rel(&name));
        timing.insert(format!("{}/{stem}", cell.id), output.summary.elapsed.as_secs_f64());

        let rec = ReplicateRecord {
            replicate: job.replicate,
            data_seed: output.seeds.0,
            noise_seed: output.seeds.1,
            chain_seed: output.seeds.2,
            files,
        };
        match records.iter_mut().find(|c| c.cell.id == cell.id) {
            Some(c) => c.replicates.push(rec),
            None => records.push(CellRecord { cell: cell.clone(), derived: output.derived.clone(), replicates: vec![rec] }),
        }
        metrics.push(output.metrics);
    }

    fs::write(out.join("summary.csv"), aggregate_csv(&cells, &metrics)?)?;
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing)?)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: config.clone(),
        cells: records,
        aggregate: "summary.csv".into(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Recomputes the aggregate table from the per-replicate JSON files of an
/// artifact directory.
pub fn summarize(dir: &Path) -> Result<String> {
    let manifest: Manifest = serde_json::from_str(
        &fs::read_to_string(dir.join("manifest.json")).with_context(|| format!("no manifest in {}", dir.display()))?,
    )?;
    let mut metrics = Vec::new();
    let mut cells = Vec::new();
    for c in &manifest.cells {
        cells.push(c.cell.clone());
        for r in &c.replicates {
            for f in r.files.iter().filter(|f| f.ends_with("_summary.json")) {
                let p: PathBuf = dir.join(f);
                metrics.push(serde_json::from_str::<ReplicateMetrics>(&fs::read_to_string(&p)?)?);
            }
        }
    }
    aggregate_csv(&cells, &metrics)
}
