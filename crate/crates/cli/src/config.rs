use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use dys::data::Schema;
use dys::selection::SelectionConfig;
use dys::synthgen::SynthConfig;
use dys::{HeadMode, TrainConfig};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stages {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Grid indices to plot; four evenly spaced times when absent.
    pub times: Option<Vec<usize>>,
    pub svg: bool,
    /// Include pruned effects (their curves are identically zero).
    pub all_effects: bool,
    pub main_resolution: usize,
    pub pair_resolution: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            times: None,
            svg: false,
            all_effects: false,
            main_resolution: dys::interpret::DEFAULT_MAIN_RESOLUTION,
            pair_resolution: dys::interpret::DEFAULT_PAIR_RESOLUTION,
        }
    }
}

/// Everything a command needs. Loaded from `--config`, then overridden by
/// flags; the resolved value is written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub schema: Schema,
    /// Number of evaluation times K.
    pub n_times: usize,
    pub mode: HeadMode,
    /// Defaults to one stage for `train` and two for `select`.
    pub stages: Option<Stages>,
    pub trials: usize,
    pub parallel_trials: bool,
    pub train: TrainConfig,
    pub selection: SelectionConfig,
    pub synth: SynthConfig,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            model: None,
            out: PathBuf::from("dys-out"),
            seed: 0,
            schema: Schema::default(),
            n_times: 100,
            mode: HeadMode::Rps,
            stages: None,
            trials: 1,
            parallel_trials: false,
            train: TrainConfig::default(),
            selection: SelectionConfig::default(),
            synth: SynthConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Propagates the run seed into the nested configs.
    pub fn resolve(mut self) -> Self {
        self.train.seed = self.seed;
        self.synth.seed = self.seed;
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            return Err(ConfigError("trials must be >= 1".into()).into());
        }
        if self.n_times < 2 {
            return Err(ConfigError(format!("n_times must be >= 2, got {}", self.n_times)).into());
        }
        self.train.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.synth.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn require_data(&self) -> anyhow::Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| ConfigError("a data file is required (--data or \"data\" in the config)".into()).into())
    }

    pub fn require_model(&self) -> anyhow::Result<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| ConfigError("a model file is required (--model or \"model\" in the config)".into()).into())
    }

    pub fn snapshot(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("config.json"), json)?;
        Ok(())
    }
}
