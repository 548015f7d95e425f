use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ust::config::scenario_spec_to_toml;
use ust::runner::BenchPlan;
use ust::sequence::{render_scenario, PpmSequence};
use ust::{bench, run_seeds, write_run, Input, RunConfig, RunOptions, ScenarioSource, Seeds};
use ust_core::tracker::Variant;

/// Uncertainty-sampling co-tracker: run trackers on simulated scenarios or
/// PPM sequences and emit traces, success curves and attribute tables.
///
/// Logging is controlled by UST_LOG (off, error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "ust", version)]
struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track one scenario or sequence over a set of seeds.
    Run(RunArgs),
    /// Run every built-in scenario with every variant and tabulate AUC per
    /// attribute.
    Bench(BenchArgs),
    /// Render a scenario to a PPM sequence with ground truth.
    Render(RenderArgs),
    /// Print a default configuration or a built-in scenario as TOML.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (TOML); missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Success-curve grid size (overrides the configuration).
    #[arg(long)]
    grid: Option<usize>,
    /// Truncate every input to this many frames.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
struct InputArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long, group = "input")]
    scenario: Option<String>,
    /// Directory with frame_NNNNNN.ppm files and groundtruth.txt.
    #[arg(long, group = "input")]
    sequence: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "ust")]
    variant: Variant,
    /// Seeds, e.g. 1..5 (inclusive), 3, or 1,4,9.
    #[arg(long, default_value = "1")]
    seeds: Seeds,
    /// Also write each seed's final fast-classifier store.
    #[arg(long)]
    store_snapshot: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "1..5")]
    seeds: Seeds,
    /// Comma-separated subset of variants (default: all).
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
    /// Comma-separated subset of scenarios (default: all built-ins).
    #[arg(long, value_delimiter = ',')]
    scenarios: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportKind {
    Config,
    Scenario,
}

#[derive(Debug, Args)]
struct ExportArgs {
    kind: ExportKind,
    /// Scenario to export.
    name: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn options(common: &Common) -> Result<RunOptions> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(grid) = common.grid {
        config.eval.grid = grid;
    }
    config.validate()?;
    Ok(RunOptions { config, frames: common.frames, store_snapshot: false })
}

fn run(args: RunArgs) -> Result<()> {
    let mut opts = options(&args.common)?;
    opts.store_snapshot = args.store_snapshot;
    let input = match (&args.input.scenario, &args.input.sequence) {
        (Some(name), _) => Input::Scenario(ScenarioSource::resolve(name)?),
        (None, Some(dir)) => Input::Sequence(PpmSequence::open(dir)?),
        (None, None) => unreachable!("clap requires an input"),
    };
    let outcomes = run_seeds(&input, args.variant, &args.seeds, &opts)?;
    let summary = write_run(&args.common.out, &outcomes)?;
    for o in &outcomes {
        println!(
            "{} {} seed {}: auc {:.4}, oracle queries {}, store {}, {:.0} fps",
            o.summary.input,
            o.summary.variant,
            o.summary.seed,
            o.summary.auc,
            o.summary.oracle_queries,
            o.summary.final_store_size,
            o.timing.fps
        );
    }
    println!(
        "{} {} mean auc {:.4} over {} seed(s) -> {}",
        summary.input,
        summary.variant,
        summary.mean_auc,
        summary.seeds.len(),
        args.common.out.display()
    );
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let opts = options(&args.common)?;
    let mut plan = BenchPlan::full(args.seeds);
    if !args.variants.is_empty() {
        plan.variants = args.variants;
    }
    if !args.scenarios.is_empty() {
        plan.scenarios = args.scenarios;
    }
    let report = bench(&plan, &opts, &args.common.out)?;
    for v in &report.variants {
        let cells: Vec<String> = v.table.rows.iter().map(|r| format!("{} {:.3}", r.attribute, r.mean_auc)).collect();
        println!("{:<18} {}", v.variant.as_str(), cells.join("  "));
    }
    println!("attribute tables -> {}", args.common.out.display());
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let mut scenario = ScenarioSource::resolve(&args.scenario)?.instantiate(args.seed)?;
    if let Some(f) = args.frames {
        scenario = scenario.with_frame_count(f.max(1));
    }
    render_scenario(&scenario, &args.out)?;
    println!("{} frames -> {}", scenario.frame_count(), args.out.display());
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let text = match args.kind {
        ExportKind::Config => RunConfig::default().to_toml(),
        ExportKind::Scenario => {
            let name = args.name.context("export scenario needs a scenario name")?;
            match ScenarioSource::resolve(&name)? {
                ScenarioSource::Builtin(name) => {
                    scenario_spec_to_toml(&ust_core::simulator::builtin_spec(&name, args.seed)?)
                }
                ScenarioSource::File(spec) => scenario_spec_to_toml(&spec),
            }
        }
    };
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UST_LOG", "warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    match cli.command {
        Command::Run(args) => run(args),
        Command::Bench(args) => run_bench(args),
        Command::Render(args) => render(args),
        Command::Export(args) => export(args),
    }
}
