//! Run configuration and scenario files, both TOML.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use ust_core::eval::DEFAULT_GRID;
use ust_core::oracle::{ScriptedOracle, TruthTable};
use ust_core::simulator::{builtin_spec, Scenario, ScenarioSpec, BUILTIN_SCENARIOS};
use ust_core::tracker::TrackerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Answers from ground truth; the desk-scale stand-in for a strong
    /// long-memory classifier.
    Scripted,
    /// Nearest-neighbour vote over every labelled sample it has been given.
    Archive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    /// Scripted oracle: probability of a flipped answer.
    pub flip_probability: f64,
    /// Scripted oracle: overlap with the target above which a box is the
    /// target.
    pub overlap_threshold: f64,
    /// Scripted oracle: visible fraction below which the target is absent.
    pub min_visibility: f64,
    /// Archive oracle: neighbours in the vote.
    pub archive_k: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Scripted,
            flip_probability: 0.0,
            overlap_threshold: ScriptedOracle::<TruthTable>::DEFAULT_OVERLAP_THRESHOLD,
            min_visibility: 0.5,
            archive_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    /// Color histogram bins per channel for image frames.
    pub bins_per_channel: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig { bins_per_channel: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Number of overlap thresholds in the success curve.
    pub grid: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { grid: DEFAULT_GRID }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub oracle: OracleConfig,
    pub sequence: SequenceConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        let o = &self.oracle;
        ensure!((0.0..1.0).contains(&o.flip_probability), "oracle.flip_probability must be in [0, 1)");
        ensure!(o.overlap_threshold > 0.0 && o.overlap_threshold < 1.0, "oracle.overlap_threshold must be in (0, 1)");
        ensure!((0.0..=1.0).contains(&o.min_visibility), "oracle.min_visibility must be in [0, 1]");
        ensure!(o.archive_k >= 1, "oracle.archive_k must be at least 1");
        ensure!(self.sequence.bins_per_channel >= 2, "sequence.bins_per_channel must be at least 2");
        ensure!(self.eval.grid >= 2, "eval.grid must be at least 2");
        Ok(())
    }
}

pub fn scenario_spec_from_toml(text: &str) -> Result<ScenarioSpec> {
    let spec: ScenarioSpec = toml::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn scenario_spec_to_toml(spec: &ScenarioSpec) -> String {
    toml::to_string_pretty(spec).expect("scenario spec serializes")
}

/// A scenario named on the command line: a built-in name or a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Builtin(String),
    File(ScenarioSpec),
}

impl ScenarioSource {
    pub fn resolve(name: &str) -> Result<Self> {
        if BUILTIN_SCENARIOS.contains(&name) {
            return Ok(ScenarioSource::Builtin(name.to_string()));
        }
        let path = Path::new(name);
        ensure!(
            path.is_file(),
            "unknown scenario '{name}' (built-ins: {}; or a path to a scenario file)",
            BUILTIN_SCENARIOS.join(", ")
        );
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec = scenario_spec_from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(ScenarioSource::File(spec))
    }

    /// The scenario realised with `seed`, which replaces the file's seed so
    /// that repeated seeds give independent noise.
    pub fn instantiate(&self, seed: u64) -> Result<Scenario> {
        let spec = match self {
            ScenarioSource::Builtin(name) => builtin_spec(name, seed)?,
            ScenarioSource::File(spec) => ScenarioSpec { seed, ..spec.clone() },
        };
        Ok(Scenario::new(spec)?)
    }

    pub fn name(&self) -> &str {
        match self {
            ScenarioSource::Builtin(name) => name,
            ScenarioSource::File(spec) => &spec.name,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml(
            "[tracker]\nk = 7\nbudget_cap = 500\n[tracker.sampler]\nn = 100\n[oracle]\nkind = \"archive\"\n",
        )
        .unwrap();
        assert_eq!(cfg.tracker.k, 7);
        assert_eq!(cfg.tracker.budget_cap, Some(500));
        assert_eq!(cfg.tracker.sampler.n, 100);
        assert_eq!(cfg.tracker.m, TrackerConfig::default().m);
        assert_eq!(cfg.oracle.kind, OracleKind::Archive);
    }

    #[test]
    fn typos_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("[tracker]\nkk = 7\n").is_err());
        assert!(RunConfig::from_toml("[trakcer]\nk = 7\n").is_err());
        assert!(RunConfig::from_toml("[tracker]\nk = 0\n").is_err());
        assert!(RunConfig::from_toml("[oracle]\nflip_probability = 1.5\n").is_err());
        assert!(RunConfig::from_toml("[eval]\ngrid = 1\n").is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.tracker.budget_cap = Some(321);
        cfg.tracker.tau_l = -0.25;
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml(&RunConfig::default().to_toml()).unwrap(), RunConfig::default());
    }

    #[test]
    fn every_builtin_scenario_round_trips_through_toml() {
        for name in BUILTIN_SCENARIOS {
            let spec = builtin_spec(name, 3).unwrap();
            let text = scenario_spec_to_toml(&spec);
            assert_eq!(scenario_spec_from_toml(&text).unwrap(), spec, "{name}");
        }
    }

    #[test]
    fn unknown_scenario_is_an_error() {
        let err = ScenarioSource::resolve("no-such-scenario").unwrap_err();
        assert!(err.to_string().contains("unknown scenario"));
    }
}
