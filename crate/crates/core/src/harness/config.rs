use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{ConvergenceSettings, VerdictThresholds, MIN_SLOPE_WINDOW};
use crate::environments::EnvironmentSpec;
use crate::estimators::EncodingSpec;
use crate::rng::substream;
use crate::strategies::StrategySpec;
use crate::types::{DebitSchedule, WealthVector};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Sub-steps used by the flow engine when neither the config nor the
/// environment fixes them.
pub const DEFAULT_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub environment: EnvironmentSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub engine: EngineSpec,
    pub rounds: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub strategy: StrategySpec,
    pub initial_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EngineSpec {
    #[default]
    Discrete,
    /// Debit schedule given either as explicit weights or as a number of
    /// equal sub-steps.
    Flow {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        substeps: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub verdict: VerdictThresholds,
    pub convergence: ConvergenceSettings,
    /// Rounds `[start, end]` for the log-wealth slope; defaults to the last
    /// 90% of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[usize; 2]>,
    /// Decoded estimates are averaged over this many final rounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate_window: Option<usize>,
    /// Decoding applied to market forecasts; inferred from the environment
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Every `thin`-th round is written, plus the last one.
    pub thin: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, thin: 1 }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub rounds: Option<usize>,
    pub out: Option<PathBuf>,
    pub thin: Option<usize>,
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let config = Self::parse_unchecked(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without semantic validation.
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.inner())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(r) = overrides.replicas {
            self.replicas = r;
        }
        if let Some(t) = overrides.rounds {
            self.rounds = t;
        }
        if let Some(dir) = &overrides.out {
            self.output.dir = Some(dir.clone());
        }
        if let Some(thin) = overrides.thin {
            self.output.thin = thin;
        }
    }

    /// Hex digest of the config with the output directory removed.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&canonical).expect("config serializes"));
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn initial_wealth(&self) -> Result<WealthVector> {
        let amounts: Vec<f64> = self.agents.iter().map(|a| a.initial_wealth).collect();
        WealthVector::from_initial(&amounts)
    }

    /// The debit schedule of the flow engine, or `None` for discrete runs.
    pub fn schedule(&self) -> Result<Option<DebitSchedule>> {
        let EngineSpec::Flow { substeps, weights } = &self.engine else {
            return Ok(None);
        };
        let schedule = match (substeps, weights) {
            (_, Some(w)) => DebitSchedule::new(w.clone()).map_err(|e| Error::config("engine.weights", e))?,
            (Some(k), None) => DebitSchedule::uniform(*k).map_err(|e| Error::config("engine.substeps", e))?,
            (None, None) => {
                let k = self.required_substeps().unwrap_or(DEFAULT_SUBSTEPS);
                DebitSchedule::uniform(k).map_err(|e| Error::config("engine", e))?
            }
        };
        if let (Some(k), Some(_)) = (substeps, weights) {
            if *k != schedule.substeps() {
                return Err(Error::config(
                    "engine.substeps",
                    format!("{k} sub-steps but {} weights", schedule.substeps()),
                ));
            }
        }
        Ok(Some(schedule))
    }

    fn required_substeps(&self) -> Option<usize> {
        match self.environment {
            EnvironmentSpec::ProgressiveRevelation { coins, .. } => Some(coins),
            _ => None,
        }
    }

    pub fn encoding(&self) -> Option<EncodingSpec> {
        self.diagnostics.encoding.clone().or_else(|| EncodingSpec::for_environment(&self.environment))
    }

    pub fn slope_window(&self) -> Option<(usize, usize)> {
        match self.diagnostics.slope_window {
            Some([a, b]) => Some((a, b)),
            None => {
                let start = self.rounds / 10;
                (self.rounds >= start + MIN_SLOPE_WINDOW).then_some((start, self.rounds))
            }
        }
    }

    pub fn estimate_window(&self) -> usize {
        self.diagnostics.estimate_window.unwrap_or(500).min(self.rounds).max(1)
    }

    /// Checks every semantic constraint, reporting the first violation with
    /// its field path.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "at least one round is required"));
        }
        if self.replicas == 0 {
            return Err(Error::config("replicas", "at least one replica is required"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("agents", "at least one agent is required"));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if !(agent.initial_wealth > 0.0 && agent.initial_wealth.is_finite()) {
                return Err(Error::config(
                    format!("agents[{i}].initial_wealth"),
                    format!("initial wealth must be strictly positive, got {}", agent.initial_wealth),
                ));
            }
        }

        let probe = substream(self.seed, 0, 0);
        let environment = self.environment.build_flow(probe.clone()).map_err(|e| Error::config("environment", e))?;
        let dimension = environment.dimension();
        let schedule = self.schedule()?;
        match &schedule {
            None if self.environment.requires_flow() => {
                return Err(Error::config("engine", "this environment reveals information inside a round and needs the flow engine"));
            }
            Some(s) => {
                if let Some(k) = environment.required_substeps() {
                    if k != s.substeps() {
                        return Err(Error::config(
                            "engine.substeps",
                            format!("environment reveals {k} signals per round, schedule has {} sub-steps", s.substeps()),
                        ));
                    }
                }
            }
            None => {}
        }
        let substeps = schedule.as_ref().map_or(1, DebitSchedule::substeps);
        for (i, agent) in self.agents.iter().enumerate() {
            agent
                .strategy
                .build(dimension, probe.clone())
                .map_err(|e| Error::config(format!("agents[{i}].strategy"), e))?;
            if let Some(len) = agent.strategy.path_len() {
                if len != substeps {
                    return Err(Error::config(
                        format!("agents[{i}].strategy.path"),
                        format!("allocation path has {len} entries, engine has {substeps} sub-steps"),
                    ));
                }
            }
        }

        self.diagnostics.verdict.validate().map_err(|e| Error::config("diagnostics.verdict", e))?;
        if self.diagnostics.convergence.windows == 0 || !(self.diagnostics.convergence.delta > 0.0) {
            return Err(Error::config("diagnostics.convergence", "needs at least one window and a positive delta"));
        }
        if let Some([a, b]) = self.diagnostics.slope_window {
            if b > self.rounds || b < a + MIN_SLOPE_WINDOW {
                return Err(Error::config(
                    "diagnostics.slope_window",
                    format!("window [{a}, {b}] must span at least {MIN_SLOPE_WINDOW} rounds within [0, {}]", self.rounds),
                ));
            }
        }
        if self.diagnostics.estimate_window == Some(0) {
            return Err(Error::config("diagnostics.estimate_window", "must be positive"));
        }
        if let Some(enc) = &self.diagnostics.encoding {
            enc.validate().map_err(|e| Error::config("diagnostics.encoding", e))?;
            if enc.dimension() != dimension {
                return Err(Error::config(
                    "diagnostics.encoding",
                    format!("encoding has dimension {}, environment has {dimension}", enc.dimension()),
                ));
            }
        }
        if self.output.thin == 0 {
            return Err(Error::config("output.thin", "must be at least 1"));
        }
        Ok(())
    }
}
