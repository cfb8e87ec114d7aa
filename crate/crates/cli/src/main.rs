use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use quadhc::harness::{
    self, DatasetConfig, DatasetInput, KernelDumpParams, KernelMode, KernelSource, Method, RunManifest,
    SweepConfig,
};
use quadhc::{io, oracle};

#[derive(Parser)]
#[command(name = "quadhc", version, about = "Hierarchical clustering from quadruplet comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over the planted hierarchical model.
    PlantedSweep(SweepArgs),
    /// Run methods on features or comparison files.
    DatasetRun(DatasetArgs),
    /// Compute a kernel matrix and write it as CSV.
    KernelDump(KernelArgs),
    /// Re-run one recorded row of a manifest and compare.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML or JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Comma-separated method names, e.g. SL,CL,4-AL-I5.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "input")]
struct DatasetInputArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    quadruplets: Option<PathBuf>,
    #[arg(long)]
    triplets: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    input: DatasetInputArgs,
    /// Sampling rates, used with feature input.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "SL,CL,4K-AL,4-AL")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Active,
    Passive,
}

#[derive(Args)]
struct KernelArgs {
    /// Similarity matrix CSV.
    #[arg(long, conflicts_with = "quadruplets", required_unless_present = "quadruplets")]
    matrix: Option<PathBuf>,
    /// Quadruplet CSV, passive mode only.
    #[arg(long)]
    quadruplets: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Passive sampling rate when a matrix is given.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Landmark probability for active mode.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Number of reference pairs for active mode.
    #[arg(long, default_value_t = 1)]
    references: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    row: usize,
}

fn report(manifest: &RunManifest, out: &std::path::Path) -> Result<ExitCode> {
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    let written = harness::write_outputs(out, manifest)?;
    for p in &written {
        println!("{}", p.display());
    }
    if !manifest.all_completed() {
        let failed = manifest.rows.iter().filter(|r| r.status == harness::Status::Failed).count();
        eprintln!("{failed} of {} rows did not complete", manifest.rows.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn planted_sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = SweepConfig::load(&args.config)?;
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.master_seed {
        cfg.master_seed = s;
    }
    if let Some(m) = args.methods {
        cfg.methods = m;
    }
    let manifest = harness::planted_sweep(&cfg)?;
    report(&manifest, &args.out)
}

fn dataset_run(args: DatasetArgs) -> Result<ExitCode> {
    let i = args.input;
    let input = match (i.features, i.quadruplets, i.triplets) {
        (Some(p), None, None) => DatasetInput::Features(p),
        (None, Some(p), None) => DatasetInput::Quadruplets(p),
        (None, None, Some(p)) => DatasetInput::Triplets(p),
        _ => bail!("give exactly one of --features, --quadruplets, --triplets"),
    };
    let cfg = DatasetConfig {
        input,
        p_grid: args.p,
        methods: args.methods,
        seed: args.seed,
        threads: args.threads,
    };
    let (manifest, trees) = harness::dataset_run(&cfg)?;
    for p in harness::write_trees(&args.out, &trees)? {
        println!("{}", p.display());
    }
    report(&manifest, &args.out)
}

fn kernel_dump(args: KernelArgs) -> Result<ExitCode> {
    let source = match (&args.matrix, &args.quadruplets) {
        (Some(p), _) => {
            let text = io::read_text(p)?;
            KernelSource::Similarities(io::parse_similarity_csv(&text, &p.display().to_string())?)
        }
        (None, Some(p)) => {
            let text = io::read_text(p)?;
            let rows = io::parse_quadruplets_csv(&text, &p.display().to_string())?;
            KernelSource::Comparisons(oracle::ingest_quadruplets(&rows, None)?)
        }
        (None, None) => bail!("give --matrix or --quadruplets"),
    };
    let params = KernelDumpParams {
        mode: match args.mode {
            ModeArg::Active => KernelMode::Active,
            ModeArg::Passive => KernelMode::Passive,
        },
        p: args.p,
        landmark_prob: args.q,
        num_references: args.references,
        seed: args.seed,
    };
    let (_, text) = harness::kernel_dump(&source, &params)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(args: ReplayArgs) -> Result<ExitCode> {
    let manifest = RunManifest::load(&args.manifest)?;
    let recorded = manifest
        .rows
        .get(args.row)
        .with_context(|| format!("manifest has {} rows", manifest.rows.len()))?;
    let row = harness::replay(&manifest, args.row)?;
    print!("{}", harness::results_csv(std::slice::from_ref(&row))?);
    let same = row.aari.map(f64::to_bits) == recorded.aari.map(f64::to_bits)
        && row.queries == recorded.queries
        && row.comparisons == recorded.comparisons;
    if !same {
        eprintln!("replay differs from the recorded row");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::PlantedSweep(a) => planted_sweep(a),
        Command::DatasetRun(a) => dataset_run(a),
        Command::KernelDump(a) => kernel_dump(a),
        Command::Replay(a) => replay(a),
    }
}
