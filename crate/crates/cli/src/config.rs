//! Experiment configuration, read from TOML.
//!
//! ```toml
//! experiment = "ld14-cfr"
//! seed = 7
//!
//! [game]
//! game = "liars_dice"
//! dice = 1
//! faces = 4
//!
//! [baseline]
//! solver = "cfr"
//! iterations = 1024
//! ```

use std::path::{Path, PathBuf};

use rebel_core::equilibrium::{CfrVariant, FpVariant};
use rebel_core::game::{GameSpec, TABULAR_HISTORY_LIMIT};
use rebel_core::selfplay::RebelConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Invalid or inconsistent configuration; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Required, either here or on the command line.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub game: GameSpec,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub rebel: RebelSection,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Cfr,
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub solver: Solver,
    pub cfr_variant: CfrVariant,
    pub fp_variant: FpVariant,
    pub iterations: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Cfr,
            cfr_variant: CfrVariant::Linear,
            fp_variant: FpVariant::Linear,
            iterations: 1024,
        }
    }
}

/// Leaf evaluator used by search during a ReBeL run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    /// The network being trained.
    Net,
    /// Exact solves of the remaining game; no training.
    Oracle,
    /// Zero for every infostate; no training.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    /// Bit-reproducible training.
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebelSection {
    pub epochs: usize,
    pub value: ValueSource,
    pub precision: Precision,
    /// Self-play, network and buffer settings. Seeds are overwritten from
    /// the experiment seed.
    pub trainer: RebelConfig,
}

impl Default for RebelSection {
    fn default() -> Self {
        Self {
            epochs: 20,
            value: ValueSource::Net,
            precision: Precision::F32,
            trainer: RebelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Epochs between exploitability evaluations; the last epoch is always
    /// evaluated.
    pub every: usize,
    /// Safe-search runs averaged into the evaluated policy.
    pub playthroughs: usize,
    /// Evaluations averaged into the final number.
    pub last: usize,
    /// Exploitability target of the oracle value function.
    pub oracle_target: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every: 1,
            playthroughs: 1024,
            last: 3,
            oracle_target: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub coin_prior: f64,
    pub coin_step: f64,
    pub coin_tolerance: f64,
    pub gradient_nets: usize,
    pub gradient_tolerance: f64,
    pub overfit_steps: usize,
    pub overfit_loss: f64,
    pub mixture_games: usize,
    pub mixture_tolerance: f64,
    pub modified_iterations: usize,
    pub modified_tolerance: f64,
    pub safe_iterations: usize,
    pub safe_playthroughs: usize,
    pub safe_ratio: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            coin_prior: 0.5,
            coin_step: 0.05,
            coin_tolerance: 1e-6,
            gradient_nets: 10,
            gradient_tolerance: 1e-4,
            overfit_steps: 2000,
            overfit_loss: 1e-3,
            mixture_games: 100,
            mixture_tolerance: 1e-10,
            modified_iterations: 256,
            modified_tolerance: 1e-12,
            safe_iterations: 1024,
            safe_playthroughs: 1024,
            safe_ratio: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Applies command-line overrides and checks that a seed and an output
    /// directory are known.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Resolved, ConfigError> {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(o) = out {
            self.out = Some(o);
        }
        let Some(seed) = self.seed else {
            return bad("a seed is required (config `seed` or --seed)");
        };
        if seed > i64::MAX as u64 {
            return bad("seed must fit in a signed 64-bit integer");
        }
        let Some(out) = self.out.clone() else {
            return bad("an output directory is required (config `out` or --out)");
        };
        if self.experiment.is_empty() || self.experiment.contains([',', '\n', '"']) {
            return bad("experiment id must be non-empty and free of commas, quotes and newlines");
        }
        self.game.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.rebel.trainer.selfplay.seed = seed;
        self.rebel.trainer.net_seed = seed;
        Ok(Resolved {
            config: self,
            seed,
            out,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A config with its seed and output directory fixed.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Resolved {
    /// SHA-256 of the canonical TOML form without the output directory, hex
    /// encoded.
    pub fn hash(&self) -> String {
        let config = ExperimentConfig {
            out: None,
            ..self.config.clone()
        };
        let digest = Sha256::digest(config.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn check_tractable(&self) -> Result<(), ConfigError> {
        let estimate = self.config.game.estimated_histories();
        if estimate > TABULAR_HISTORY_LIMIT {
            return bad(format!(
                "{} has about {estimate} histories, above the tabular limit of {TABULAR_HISTORY_LIMIT}",
                self.config.game.short_name()
            ));
        }
        Ok(())
    }

    pub fn check_baseline(&self) -> Result<(), ConfigError> {
        self.check_tractable()?;
        if self.config.baseline.iterations == 0 {
            return bad("baseline iterations must be at least one");
        }
        Ok(())
    }

    pub fn check_rebel(&self) -> Result<(), ConfigError> {
        self.check_tractable()?;
        let r = &self.config.rebel;
        let e = &self.config.eval;
        if r.epochs == 0 {
            return bad("rebel epochs must be at least one");
        }
        if e.every == 0 || e.playthroughs == 0 || e.last == 0 {
            return bad("eval every, playthroughs and last must be positive");
        }
        if !(e.oracle_target > 0.0) {
            return bad("eval oracle_target must be positive");
        }
        r.trainer
            .selfplay
            .validate()
            .map_err(|err| ConfigError(err.to_string()))?;
        if r.value == ValueSource::Net {
            if !matches!(self.config.game, GameSpec::LiarsDice { .. }) {
                return bad("a value network is only available for liars dice; use value = \"oracle\" or \"zero\"");
            }
            let mut net = r.trainer.net.clone();
            net.input = 1;
            net.output = 1;
            net.validate().map_err(|err| ConfigError(err.to_string()))?;
            if r.trainer.buffer_capacity == 0 || r.trainer.examples_per_epoch == 0 {
                return bad("buffer_capacity and examples_per_epoch must be positive");
            }
        }
        Ok(())
    }
}
