//! Drives trackers over scenarios and sequences and writes the artifacts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use ust_core::eval::{aggregate, success_curve, AttributeTable, RunRecord, SuccessCurve};
use ust_core::oracle::{ArchiveNnOracle, GroundTruth, Oracle, ScriptedOracle, TruthTable};
use ust_core::simulator::BUILTIN_SCENARIOS;
use ust_core::tracker::{FrameSource, Tracker, Variant};
use ust_core::TargetState;

use crate::artifacts::{self, RunSummary, RunTiming, SeedSummary, Timing, TraceRow};
use crate::config::{OracleKind, RunConfig, ScenarioSource};
use crate::sequence::PpmSequence;

/// Inclusive list of seeds: `A..B` (both ends included), `A..=B`, `A`, or a
/// comma-separated list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let seeds = if let Some((a, b)) = s.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
            ensure!(a <= b, "seed range {s} is empty");
            (a..=b).collect()
        } else {
            s.split(',').map(|p| p.trim().parse::<u64>()).collect::<Result<Vec<_>, _>>()?
        };
        ensure!(!seeds.is_empty(), "no seeds given");
        Ok(Seeds(seeds))
    }
}

impl fmt::Display for Seeds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// What a run tracks.
#[derive(Debug, Clone)]
pub enum Input {
    Scenario(ScenarioSource),
    Sequence(PpmSequence),
}

impl Input {
    pub fn name(&self) -> &str {
        match self {
            Input::Scenario(s) => s.name(),
            Input::Sequence(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: RunConfig,
    /// Truncates every input to this many frames.
    pub frames: Option<usize>,
    /// Also write the final fast-classifier store of each seed.
    pub store_snapshot: bool,
}

impl RunOptions {
    pub fn new(config: RunConfig) -> Self {
        RunOptions { config, frames: None, store_snapshot: false }
    }
}

/// Everything one seed of one run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: SeedSummary,
    pub trace: Vec<TraceRow>,
    pub curve: SuccessCurve,
    pub timing: RunTiming,
    /// Final store, when requested.
    pub store: Option<ust_core::knn::KnnStore>,
}

type DynOracle = Box<dyn Oracle + Send>;

fn make_oracle<G: GroundTruth + Send + 'static>(cfg: &RunConfig, truth: G, seed: u64) -> Result<DynOracle> {
    let o = &cfg.oracle;
    Ok(match o.kind {
        OracleKind::Scripted => Box::new(
            ScriptedOracle::try_new(truth, o.flip_probability, o.overlap_threshold, seed)?
                .with_min_visibility(o.min_visibility),
        ),
        OracleKind::Archive => Box::new(ArchiveNnOracle::new(o.archive_k)?),
    })
}

struct Drive<'a> {
    input: &'a str,
    tags: Vec<String>,
    variant: Variant,
    seed: u64,
    truth: &'a [TargetState],
    opts: &'a RunOptions,
}

impl Drive<'_> {
    fn run<F, G>(self, oracle: DynOracle, mut frame: G) -> Result<RunOutcome>
    where
        F: FrameSource,
        G: FnMut(usize) -> Result<F>,
    {
        let n = self.truth.len();
        ensure!(n >= 1, "{} has no frames", self.input);
        let first = frame(0)?;
        let mut tracker =
            Tracker::init(&first, self.truth[0], self.opts.config.tracker.clone(), self.variant, oracle, self.seed)
                .with_context(|| format!("initialising on {}", self.input))?;
        let [x, y, w, h] = self.truth[0].to_corner();
        let mut trace = vec![TraceRow {
            frame: 0,
            x,
            y,
            w,
            h,
            occluded: false,
            uncertain: 0,
            store_size: tracker.knn().len(),
            oracle_queries_cumulative: tracker.oracle().query_count(),
            // Initialisation trains the oracle; frame 0 is on the schedule.
            retrained: self.variant.uses_oracle(),
        }];
        let mut estimates = vec![self.truth[0]];
        let (mut occluded_frames, mut skipped_frames) = (0, 0);
        let mut step_seconds = 0.0;
        for t in 1..n {
            let f = frame(t)?;
            let start = Instant::now();
            let r = tracker.step(&f).with_context(|| format!("{} frame {t}", self.input))?;
            step_seconds += start.elapsed().as_secs_f64();
            occluded_frames += usize::from(r.occluded);
            skipped_frames += usize::from(r.skipped);
            let [x, y, w, h] = r.estimate.to_corner();
            trace.push(TraceRow {
                frame: t,
                x,
                y,
                w,
                h,
                occluded: r.occluded,
                uncertain: r.uncertain_count,
                store_size: r.knn_store_size,
                oracle_queries_cumulative: r.oracle_queries_total,
                retrained: r.retrained_oracle,
            });
            estimates.push(r.estimate);
        }
        let curve = success_curve(&estimates, self.truth, self.opts.config.eval.grid)?;
        let frames = n - 1;
        log::info!("{} {} seed {}: auc {:.4}", self.input, self.variant, self.seed, curve.auc);
        Ok(RunOutcome {
            summary: SeedSummary {
                input: self.input.to_string(),
                variant: self.variant,
                seed: self.seed,
                tags: self.tags,
                frames: n,
                auc: curve.auc,
                oracle_queries: tracker.oracle().query_count(),
                final_store_size: tracker.knn().len(),
                occluded_frames,
                skipped_frames,
            },
            trace,
            curve,
            timing: RunTiming {
                input: self.input.to_string(),
                variant: self.variant,
                seed: self.seed,
                frames,
                step_seconds,
                fps: if step_seconds > 0.0 { frames as f64 / step_seconds } else { 0.0 },
            },
            store: self.opts.store_snapshot.then(|| tracker.knn().clone()),
        })
    }
}

/// Runs one seed of `variant` on `input`.
pub fn run_once(input: &Input, variant: Variant, seed: u64, opts: &RunOptions) -> Result<RunOutcome> {
    let limit = |n: usize| opts.frames.map_or(n, |f| f.min(n));
    match input {
        Input::Scenario(source) => {
            let mut scenario = source.instantiate(seed)?;
            if let Some(f) = opts.frames {
                scenario = scenario.with_frame_count(f.max(1));
            }
            let scenario = Arc::new(scenario);
            let oracle = make_oracle(&opts.config, scenario.clone(), seed)?;
            let drive = Drive {
                input: source.name(),
                tags: scenario.tags().to_vec(),
                variant,
                seed,
                truth: scenario.trajectory(),
                opts,
            };
            drive.run(oracle, |t| Ok(scenario.frame(t)))
        }
        Input::Sequence(seq) => {
            let truth = &seq.ground_truth()[..limit(seq.len())];
            let oracle = make_oracle(&opts.config, TruthTable(truth.to_vec()), seed)?;
            let bins = opts.config.sequence.bins_per_channel;
            let drive = Drive { input: seq.name(), tags: Vec::new(), variant, seed, truth, opts };
            drive.run(oracle, |t| seq.frame(t, bins))
        }
    }
}

/// Runs every seed, in parallel, returning outcomes in seed order.
pub fn run_seeds(input: &Input, variant: Variant, seeds: &Seeds, opts: &RunOptions) -> Result<Vec<RunOutcome>> {
    seeds.0.par_iter().map(|&seed| run_once(input, variant, seed, opts)).collect()
}

pub fn summarize(outcomes: &[RunOutcome]) -> Result<RunSummary> {
    let first = outcomes.first().context("no runs to summarize")?;
    let n = outcomes.len() as f64;
    let aucs: Vec<f64> = outcomes.iter().map(|o| o.summary.auc).collect();
    let mean_auc = aucs.iter().sum::<f64>() / n;
    let auc_variance = aucs.iter().map(|a| (a - mean_auc).powi(2)).sum::<f64>() / n;
    let records: Vec<RunRecord> = outcomes
        .iter()
        .map(|o| {
            let tags: Vec<&str> = o.summary.tags.iter().map(String::as_str).collect();
            RunRecord::new(o.summary.input.clone(), &tags, &o.curve)
        })
        .collect();
    Ok(RunSummary {
        input: first.summary.input.clone(),
        variant: first.summary.variant,
        tags: first.summary.tags.clone(),
        seeds: outcomes.iter().map(|o| o.summary.seed).collect(),
        mean_auc,
        auc_variance,
        mean_oracle_queries: outcomes.iter().map(|o| o.summary.oracle_queries as f64).sum::<f64>() / n,
        mean_final_store_size: outcomes.iter().map(|o| o.summary.final_store_size as f64).sum::<f64>() / n,
        attributes: aggregate(&records)?,
    })
}

/// Writes per-seed traces, curves and summaries, the seed-averaged summary
/// and the timings of one run into `dir`.
pub fn write_run(dir: &Path, outcomes: &[RunOutcome]) -> Result<RunSummary> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for o in outcomes {
        let seed = o.summary.seed;
        artifacts::write_csv(&dir.join(artifacts::trace_file(seed)), &o.trace)?;
        artifacts::write_csv(&dir.join(artifacts::curve_file(seed)), &artifacts::curve_rows(&o.curve))?;
        artifacts::write_json(&dir.join(artifacts::seed_summary_file(seed)), &o.summary)?;
        if let Some(store) = &o.store {
            artifacts::write_store_snapshot(&dir.join(artifacts::store_file(seed)), store)?;
        }
    }
    let summary = summarize(outcomes)?;
    artifacts::write_json(&dir.join(artifacts::SUMMARY_FILE), &summary)?;
    let timing = Timing::new(outcomes.iter().map(|o| o.timing.clone()).collect());
    artifacts::write_json(&dir.join(artifacts::TIMING_FILE), &timing)?;
    Ok(summary)
}

/// One cell of the bench matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchRow {
    pub variant: Variant,
    pub attribute: String,
    pub mean_auc: f64,
    pub scenarios: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchVariant {
    pub variant: Variant,
    pub mean_oracle_queries: f64,
    pub table: AttributeTable,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchReport {
    pub seeds: Vec<u64>,
    pub scenarios: Vec<String>,
    pub variants: Vec<BenchVariant>,
}

pub const ATTRIBUTES_JSON: &str = "attributes.json";
pub const ATTRIBUTES_CSV: &str = "attributes.csv";

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub scenarios: Vec<String>,
    pub variants: Vec<Variant>,
    pub seeds: Seeds,
}

impl BenchPlan {
    /// Every built-in scenario and every variant.
    pub fn full(seeds: Seeds) -> Self {
        BenchPlan {
            scenarios: BUILTIN_SCENARIOS.iter().map(|s| s.to_string()).collect(),
            variants: Variant::ALL.to_vec(),
            seeds,
        }
    }
}

/// Runs the scenario x variant x seed matrix and writes one run directory
/// per (scenario, variant) under `out`, plus the attribute tables.
pub fn bench(plan: &BenchPlan, opts: &RunOptions, out: &Path) -> Result<BenchReport> {
    if plan.scenarios.is_empty() || plan.variants.is_empty() {
        bail!("bench needs at least one scenario and one variant");
    }
    let sources: Vec<ScenarioSource> =
        plan.scenarios.iter().map(|s| ScenarioSource::resolve(s)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (si, _) in sources.iter().enumerate() {
        for &variant in &plan.variants {
            for &seed in &plan.seeds.0 {
                jobs.push((si, variant, seed));
            }
        }
    }
    let inputs: Vec<Input> = sources.into_iter().map(Input::Scenario).collect();
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(si, variant, seed)| run_once(&inputs[si], variant, seed, opts))
        .collect::<Result<_>>()?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let per_cell = plan.seeds.0.len();
    let mut timings = Vec::new();
    for chunk in outcomes.chunks(per_cell) {
        let s = &chunk[0].summary;
        write_run(&run_dir(out, &s.input, s.variant), chunk)?;
        timings.extend(chunk.iter().map(|o| o.timing.clone()));
    }

    let mut variants = Vec::new();
    let mut rows = Vec::new();
    for &variant in &plan.variants {
        let mine: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.summary.variant == variant).collect();
        let records: Vec<RunRecord> = mine
            .iter()
            .map(|o| {
                let tags: Vec<&str> = o.summary.tags.iter().map(String::as_str).collect();
                RunRecord::new(o.summary.input.clone(), &tags, &o.curve)
            })
            .collect();
        let table = aggregate(&records)?;
        for r in &table.rows {
            rows.push(BenchRow {
                variant,
                attribute: r.attribute.clone(),
                mean_auc: r.mean_auc,
                scenarios: r.scenarios,
                runs: r.runs,
            });
        }
        let mean_oracle_queries = mine.iter().map(|o| o.summary.oracle_queries as f64).sum::<f64>() / mine.len() as f64;
        variants.push(BenchVariant { variant, mean_oracle_queries, table });
    }
    let report = BenchReport { seeds: plan.seeds.0.clone(), scenarios: plan.scenarios.clone(), variants };
    artifacts::write_json(&out.join(ATTRIBUTES_JSON), &report)?;
    artifacts::write_csv(&out.join(ATTRIBUTES_CSV), &rows)?;
    artifacts::write_json(&out.join(artifacts::TIMING_FILE), &Timing::new(timings))?;
    Ok(report)
}

pub fn run_dir(out: &Path, input: &str, variant: Variant) -> PathBuf {
    out.join(input).join(variant.as_str())
}
