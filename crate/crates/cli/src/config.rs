//! Flat `key=value` experiment configuration.
//!
//! A config file holds one `key=value` per line; blank lines and lines
//! starting with `#` are ignored. Command-line `--key=value` flags are
//! applied on top. Every key has a default, so an empty file is valid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mcrnet::meta::{MetaConfig, MetaOrder};
use mcrnet::model::{CompressionRatio, ModelConfig};
use mcrnet::psi::{ChannelConfig, ChannelMode, Generator, TaskSpec};

use crate::CliError;

/// Known keys and their defaults, in canonical order.
pub const SCHEMA: &[(&str, &str)] = &[
    ("bench.runs", "100"),
    ("bench.warmup", "10"),
    ("channel.mode", "awgn"),
    ("channel.snr_db", "10"),
    ("data.bits", "4"),
    ("data.count", "1000"),
    ("data.freq_max", "0.5"),
    ("data.freq_min", "-0.5"),
    ("data.generator", "ramp-beam"),
    ("data.h", "32"),
    ("data.jitter", "0.05"),
    ("data.ramps", "1"),
    ("data.w", "32"),
    ("eval.reps", "1"),
    ("eval.samples", "200"),
    ("eval.snr_list", "0,5,10,15,20"),
    ("meta.channel", "ideal"),
    ("meta.channel_snr_db", "10"),
    ("meta.inner_lr", "0.001"),
    ("meta.inner_steps", "1"),
    ("meta.max_iters", "1000"),
    ("meta.meta_batch", "8"),
    ("meta.order", "first-order"),
    ("meta.outer_lr", "0.0005"),
    ("meta.patience", "50"),
    ("meta.query", "64"),
    ("meta.support", "100"),
    ("meta.val_every", "10"),
    ("meta.val_tasks", "4"),
    ("model.channels", "64"),
    ("model.cr", "1/8"),
    ("model.dwcg_modules", "2"),
    ("model.heads", "4"),
    ("model.mhsa_blocks", "3"),
    ("seed", "0"),
];

pub fn is_key(key: &str) -> bool {
    SCHEMA.iter().any(|(k, _)| *k == key)
}

/// Raw resolved values, keyed canonically.
#[derive(Clone, Debug, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig(SCHEMA.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !is_key(key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        self.0.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).expect("schema key")
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key=value, got `{line}`", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Canonical `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Config(format!("`{key}` has invalid value `{v}`")))
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let task = TaskSpec {
            h: self.parse("data.h")?,
            w: self.parse("data.w")?,
            bits: self.parse("data.bits")?,
            generator: match self.get("data.generator") {
                "ramp-beam" => Generator::RampBeam {
                    ramps: self.parse("data.ramps")?,
                    freq_min: self.parse("data.freq_min")?,
                    freq_max: self.parse("data.freq_max")?,
                    jitter: self.parse("data.jitter")?,
                },
                "iid-uniform" => Generator::IidUniform,
                other => {
                    return Err(CliError::Config(format!(
                        "`data.generator` must be ramp-beam or iid-uniform, got `{other}`"
                    )))
                }
            },
        };
        task.validate()?;
        let cr = CompressionRatio::parse(self.get("model.cr"))?;
        let model = ModelConfig {
            hw: task.hw(),
            channels: self.parse("model.channels")?,
            cr_stages: cr.stages,
            mhsa_blocks: self.parse("model.mhsa_blocks")?,
            heads: self.parse("model.heads")?,
            dwcg_modules: self.parse("model.dwcg_modules")?,
        };
        model.validate()?;
        let meta = MetaConfig {
            inner_lr: self.parse("meta.inner_lr")?,
            outer_lr: self.parse("meta.outer_lr")?,
            inner_steps: self.parse("meta.inner_steps")?,
            meta_batch: self.parse("meta.meta_batch")?,
            max_iters: self.parse("meta.max_iters")?,
            patience: self.parse("meta.patience")?,
            val_every: self.parse("meta.val_every")?,
            val_tasks: self.parse("meta.val_tasks")?,
            support: self.parse("meta.support")?,
            query: self.parse("meta.query")?,
            order: match self.get("meta.order") {
                "first-order" => MetaOrder::FirstOrder,
                "second-order" => MetaOrder::SecondOrder,
                other => {
                    return Err(CliError::Config(format!(
                        "`meta.order` must be first-order or second-order, got `{other}`"
                    )))
                }
            },
            channel: ChannelConfig {
                mode: self.get("meta.channel").parse::<ChannelMode>()?,
                snr_db: self.parse("meta.channel_snr_db")?,
            },
        };
        let channel = ChannelConfig {
            mode: self.get("channel.mode").parse::<ChannelMode>()?,
            snr_db: self.parse("channel.snr_db")?,
        };
        channel.validate()?;
        let snr_list = self
            .get("eval.snr_list")
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Config(format!("`eval.snr_list` entry `{s}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let eval = EvalConfig {
            snr_list,
            samples: self.parse("eval.samples")?,
            reps: self.parse("eval.reps")?,
        };
        if eval.samples == 0 || eval.reps == 0 {
            return Err(CliError::Config("`eval.samples` and `eval.reps` must be at least 1".into()));
        }
        Ok(ExperimentConfig {
            model,
            task,
            meta,
            channel,
            eval,
            bench: BenchConfig {
                runs: self.parse("bench.runs")?,
                warmup: self.parse("bench.warmup")?,
            },
            count: self.parse("data.count")?,
            seed: self.parse("seed")?,
            raw: self.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub snr_list: Vec<f64>,
    pub samples: usize,
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchConfig {
    pub runs: usize,
    pub warmup: usize,
}

/// Typed view of a resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub task: TaskSpec,
    pub meta: MetaConfig,
    /// Channel used for evaluation.
    pub channel: ChannelConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
    /// Number of samples written by `generate`.
    pub count: usize,
    pub seed: u64,
    pub raw: RawConfig,
}
