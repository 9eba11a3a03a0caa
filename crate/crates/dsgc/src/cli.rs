//! The `dsgc` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dsgc_core::encoder::EncoderKind;
use dsgc_core::experiment::{prepare_dataset, ExperimentConfig};
use dsgc_core::graph::Dataset;
use dsgc_core::sampling::{self, SamplerConfig, SamplerKind};
use serde::Serialize;

use crate::config::{self, RunManifest};
use crate::output;
use crate::runner;
use crate::tu;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dsgc", version, about = "Graph contrastive learning over Euclidean and hyperbolic views")]
pub struct Cli {
    /// Root directory holding one sub-directory per dataset.
    #[arg(long, global = true, env = "DSGC_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print graph count, classes and mean sizes of a dataset.
    Stats {
        /// Dataset name under the data directory, or a path to its directory.
        #[arg(default_value = "MUTAG")]
        dataset: String,
        /// Report statistics before dropping disconnected graphs.
        #[arg(long)]
        no_filter: bool,
    },
    /// Train and evaluate over all folds.
    Train(RunArgs),
    /// Print a sampled view of one graph.
    Sample(SampleArgs),
    /// Hidden-dimension sweep or encoder-pair grid.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config (a previous run's manifest.json also works). Defaults to the
    /// MUTAG, label ratio 0.5 setting.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set hidden_dimension=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Contrastive weight ω.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel_folds: usize,
    /// Output directory; defaults to `runs/<timestamp>-seed<seed>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Dim,
    Encoders,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(default_value = "MUTAG")]
    pub dataset: String,
    /// Graph index (0-based, after connectivity filtering).
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, value_parser = PossibleValuesParser::new(["diffusion", "community_expansion"]))]
    pub sampler: String,
    #[arg(long, default_value_t = 0.8)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Verify connectivity, size, induced-edge completeness and determinism.
    #[arg(long)]
    pub check: bool,
    /// With `--check`, number of consecutive seeds to verify.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> u8 {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match run(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Stats { dataset, no_filter } => cmd_stats(&resolve(&cli.data_dir, dataset), *no_filter, out),
        Command::Train(args) => cmd_train(&cli.data_dir, args, out).map(drop),
        Command::Sample(args) => cmd_sample(&cli.data_dir, args, out),
        Command::Sweep { kind, run } => cmd_sweep(&cli.data_dir, *kind, run, out).map(drop),
    }
}

/// A name under `data_dir`, unless `dataset` already names a directory.
pub fn resolve(data_dir: &Path, dataset: &str) -> PathBuf {
    let direct = Path::new(dataset);
    if direct.is_dir() {
        direct.to_owned()
    } else {
        data_dir.join(dataset)
    }
}

fn io(out: std::io::Result<()>) -> Result<()> {
    out.map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

pub fn cmd_stats(dir: &Path, no_filter: bool, out: &mut impl Write) -> Result<()> {
    let raw = tu::load(dir)?;
    let ds = if no_filter { raw } else { raw.filter_connected() };
    let s = ds.stats()?;
    io(writeln!(out, "{:<16} {:>7} {:>8} {:>10} {:>10}", "dataset", "graphs", "classes", "avg_nodes", "avg_edges"))?;
    io(writeln!(out, "{:<16} {:>7} {:>8} {:>10.4} {:>10.4}", ds.name, s.graphs, s.classes, s.mean_nodes, s.mean_edges))
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(p) => config::load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let mut overrides = args.overrides.iter().map(|s| config::parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    if let Some(w) = args.omega {
        overrides.push(("weight_of_contrastive_learning".into(), w.to_string()));
    }
    if let Some(e) = args.epochs {
        overrides.push(("number_of_training_epoch".into(), e.to_string()));
    }
    if let Some(s) = args.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    config::apply_overrides(&base, &overrides)
}

struct Prepared {
    cfg: ExperimentConfig,
    dataset: Dataset,
    dir: PathBuf,
}

/// Loads config and dataset, creates the output directory and writes the
/// manifest. Nothing touches the disk until both inputs are valid.
fn prepare(data_dir: &Path, args: &RunArgs, command: &str) -> Result<Prepared> {
    let cfg = resolve_config(args)?;
    let dataset_path = resolve(data_dir, &cfg.dataset);
    let dataset = prepare_dataset(&tu::load(&dataset_path)?, &cfg);
    let now = chrono::Utc::now();
    let dir =
        args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-seed{}", now.format("%Y%m%dT%H%M%S%.3fZ"), cfg.seed)));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    let manifest = RunManifest {
        config: cfg.clone(),
        dataset_path,
        output_dir: dir.clone(),
        command: command.into(),
        timestamp: now.to_rfc3339(),
        seed: cfg.seed,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(Prepared { cfg, dataset, dir })
}

#[derive(Serialize)]
struct Failure {
    epoch: Option<usize>,
    error: String,
}

/// Records a failed run: result files are removed, `failure.json` is written
/// next to the manifest.
fn record_failure(dir: &Path, e: dsgc_core::Error) -> Error {
    for f in ["folds.csv", "loss_trace.csv", "summary.json"] {
        let _ = std::fs::remove_file(dir.join(f));
    }
    let epoch = match e {
        dsgc_core::Error::NonFinite { epoch } => Some(epoch),
        _ => None,
    };
    if let Err(w) = output::write_json(&dir.join("failure.json"), &Failure { epoch, error: e.to_string() }) {
        eprintln!("error: {w}");
    }
    e.into()
}

pub fn cmd_train(data_dir: &Path, args: &RunArgs, out: &mut impl Write) -> Result<PathBuf> {
    let p = prepare(data_dir, args, "train")?;
    let record = runner::run_experiment(&p.dataset, &p.cfg, args.parallel_folds).map_err(|e| record_failure(&p.dir, e))?;
    output::write_run(&p.dir, &record)?;
    io(writeln!(out, "{}: accuracy {:.4} ± {:.4} over {} folds", p.dir.display(), record.mean, record.std, record.fold_accuracies.len()))?;
    Ok(p.dir)
}

pub fn cmd_sweep(data_dir: &Path, kind: SweepKind, args: &RunArgs, out: &mut impl Write) -> Result<PathBuf> {
    let name = match kind {
        SweepKind::Dim => "dim",
        SweepKind::Encoders => "encoders",
    };
    let p = prepare(data_dir, args, &format!("sweep {name}"))?;
    let labelled: Vec<(String, dsgc_core::experiment::MetricsRecord)> = match kind {
        SweepKind::Dim => runner::hidden_dim_sweep(&p.dataset, &p.cfg, &runner::SWEEP_DIMS, args.parallel_folds)
            .map_err(|e| record_failure(&p.dir, e))?
            .into_iter()
            .map(|(d, r)| (format!("d={d}"), r))
            .collect(),
        SweepKind::Encoders => runner::encoder_pair_grid(&p.dataset, &p.cfg, &EncoderKind::ALL, args.parallel_folds)
            .map_err(|e| record_failure(&p.dir, e))?
            .into_iter()
            .map(|g| (format!("{}/{}", g.euclidean, g.hyperbolic), g.record))
            .collect(),
    };
    let path = p.dir.join(format!("sweep_{name}.csv"));
    output::write_csv(&path, output::sweep_rows(labelled.iter().map(|(c, r)| (c.clone(), r))))?;
    for (c, r) in &labelled {
        io(writeln!(out, "{c:<20} {:.4} ± {:.4}", r.mean, r.std))?;
    }
    io(writeln!(out, "wrote {}", path.display()))?;
    Ok(p.dir)
}

pub fn cmd_sample(data_dir: &Path, args: &SampleArgs, out: &mut impl Write) -> Result<()> {
    let kind: SamplerKind = args.sampler.parse().map_err(|e: dsgc_core::Error| Error::Usage(e.to_string()))?;
    let ds = tu::load(&resolve(data_dir, &args.dataset))?.filter_connected();
    let g = ds.graphs.get(args.index).ok_or_else(|| Error::Usage(format!("graph index {} outside 0..{}", args.index, ds.len())))?;
    if args.check {
        for seed in args.seed..args.seed + args.seeds.max(1) {
            let cfg = SamplerConfig::new(args.rate, seed).map_err(|e| Error::Usage(e.to_string()))?;
            if let Some(problem) = sampling::check_invariants(g, kind, &cfg)? {
                return Err(Error::Usage(format!("check failed for seed {seed}: {problem}")));
            }
        }
        return io(writeln!(out, "check passed: {} seeds, {kind}, rate {}", args.seeds.max(1), args.rate));
    }
    let cfg = SamplerConfig::new(args.rate, args.seed).map_err(|e| Error::Usage(e.to_string()))?;
    let s = kind.sample(g, &cfg)?;
    io(writeln!(
        out,
        "# graph {} ({} nodes, {} edges), {kind}, rate {}, seed {}",
        args.index,
        g.node_count(),
        g.edge_count(),
        args.rate,
        args.seed
    ))?;
    io(writeln!(out, "# nodes: sampled -> original"))?;
    for (k, v) in s.original_ids.iter().enumerate() {
        io(writeln!(out, "{k} -> {v}"))?;
    }
    io(writeln!(out, "# edges ({})", s.graph.edge_count()))?;
    for (a, b) in s.graph.edges() {
        io(writeln!(out, "{a} {b}"))?;
    }
    Ok(())
}
