//! Flat `key = value` run configuration.
//!
//! One `Config` carries every tunable: model shape, ablation switches,
//! training schedule, batching, and the chronological split. Values resolve
//! with the precedence **CLI flag > config file > built-in default**; the
//! CLI applies file settings first and `--set key=value` overrides second,
//! so each key is independently testable at every precedence level.
//!
//! File format: one `key = value` per line, `#` starts a comment, blank
//! lines ignored. Unknown keys are usage errors rather than silent typos.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DygppError, Result};
use crate::event_store::SplitConfig;
use crate::model::ModelConfig;
use crate::trainer::TrainRunConfig;

/// Every tunable with its default value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainRunConfig,
    pub split: SplitConfig,
    /// Maximum timestamp span of a training batch, seconds.
    pub time_gap_seconds: i64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            model: ModelConfig::default(),
            train: TrainRunConfig::default(),
            split: SplitConfig::default(),
            time_gap_seconds: 1000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        DygppError::Usage(format!("invalid value `{value}` for key `{key}`"))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(DygppError::Usage(format!(
            "invalid boolean `{other}` for key `{key}`"
        ))),
    }
}

impl Config {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "batch.time_gap_seconds" => {
                self.time_gap_seconds = parse_num(key, value)?;
                self.train.time_gap = self.time_gap_seconds;
            }
            "model.num_neighbors" => self.model.num_neighbors = parse_num(key, value)?,
            "model.max_sequence" => self.model.max_sequence = parse_num(key, value)?,
            "model.dim_node" => self.model.dim_node = parse_num(key, value)?,
            "model.dim_edge" => self.model.dim_edge = parse_num(key, value)?,
            "model.dim_time" => self.model.dim_time = parse_num(key, value)?,
            "model.dim_channel" => self.model.dim_channel = parse_num(key, value)?,
            "model.dim_embed" => self.model.dim_embed = parse_num(key, value)?,
            "model.dim_out" => self.model.dim_out = parse_num(key, value)?,
            "model.ffn_layers" => self.model.ffn_layers = parse_num(key, value)?,
            "model.dropout" => self.model.dropout = parse_num(key, value)?,
            "model.time_scale" => self.model.time_scale = parse_num(key, value)?,
            "model.time_omega_exp" => self.model.time_omega_exp = parse_num(key, value)?,
            "head.literal_form" => self.model.head_literal_form = parse_bool(key, value)?,
            "ablate.edge" => self.model.ablate.edge = parse_bool(key, value)?,
            "ablate.time" => self.model.ablate.time = parse_bool(key, value)?,
            "ablate.co" => self.model.ablate.co = parse_bool(key, value)?,
            "ablate.co_self" => self.model.ablate.co_self = parse_bool(key, value)?,
            "ablate.co_cross" => self.model.ablate.co_cross = parse_bool(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse_num(key, value)?,
            "train.max_epochs" => self.train.max_epochs = parse_num(key, value)?,
            "train.patience" => self.train.patience = parse_num(key, value)?,
            "train.seed" => self.train.seed = parse_num(key, value)?,
            "train.eval_seed" => self.train.eval_seed = parse_num(key, value)?,
            "split.train_ratio" => self.split.train_ratio = parse_num(key, value)?,
            "split.val_ratio" => self.split.val_ratio = parse_num(key, value)?,
            "split.inductive_fraction" => {
                self.split.inductive_fraction = parse_num(key, value)?
            }
            "split.seed" => self.split.seed = parse_num(key, value)?,
            other => {
                return Err(DygppError::Usage(format!("unknown config key `{other}`")))
            }
        }
        Ok(())
    }

    /// Apply a whole file of `key = value` lines.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DygppError::io(path.display().to_string(), e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Apply `key = value` lines from a string; `source` names it in errors.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(DygppError::Usage(format!(
                    "{source}:{}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            self.set(key, value).map_err(|e| match e {
                DygppError::Usage(msg) => {
                    DygppError::Usage(format!("{source}:{}: {msg}", lineno + 1))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    /// Apply repeated `--set key=value` style assignments.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let Some((key, value)) = item.split_once('=') else {
                return Err(DygppError::Usage(format!(
                    "--set expects key=value, got `{item}`"
                )));
            };
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Resolve defaults, then an optional file, then CLI overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    /// Render every key at its current value, in file syntax.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("batch.time_gap_seconds", self.time_gap_seconds.to_string());
        kv("model.num_neighbors", self.model.num_neighbors.to_string());
        kv("model.max_sequence", self.model.max_sequence.to_string());
        kv("model.dim_node", self.model.dim_node.to_string());
        kv("model.dim_edge", self.model.dim_edge.to_string());
        kv("model.dim_time", self.model.dim_time.to_string());
        kv("model.dim_channel", self.model.dim_channel.to_string());
        kv("model.dim_embed", self.model.dim_embed.to_string());
        kv("model.dim_out", self.model.dim_out.to_string());
        kv("model.ffn_layers", self.model.ffn_layers.to_string());
        kv("model.dropout", self.model.dropout.to_string());
        kv("model.time_scale", self.model.time_scale.to_string());
        kv(
            "model.time_omega_exp",
            self.model.time_omega_exp.to_string(),
        );
        kv("head.literal_form", self.model.head_literal_form.to_string());
        kv("ablate.edge", self.model.ablate.edge.to_string());
        kv("ablate.time", self.model.ablate.time.to_string());
        kv("ablate.co", self.model.ablate.co.to_string());
        kv("ablate.co_self", self.model.ablate.co_self.to_string());
        kv("ablate.co_cross", self.model.ablate.co_cross.to_string());
        kv("train.learning_rate", self.train.learning_rate.to_string());
        kv("train.max_epochs", self.train.max_epochs.to_string());
        kv("train.patience", self.train.patience.to_string());
        kv("train.seed", self.train.seed.to_string());
        kv("train.eval_seed", self.train.eval_seed.to_string());
        kv("split.train_ratio", self.split.train_ratio.to_string());
        kv("split.val_ratio", self.split.val_ratio.to_string());
        kv(
            "split.inductive_fraction",
            self.split.inductive_fraction.to_string(),
        );
        kv("split.seed", self.split.seed.to_string());
        s
    }
}
