use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Flattened PSI length `H·W`.
    pub hw: usize,
    /// Feature width `C`.
    pub channels: usize,
    /// Number of stride-2 stages `n`; compression ratio is `1/2^n`.
    pub cr_stages: usize,
    pub mhsa_blocks: usize,
    pub heads: usize,
    pub dwcg_modules: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hw: 1024,
            channels: 64,
            cr_stages: 3,
            mhsa_blocks: 3,
            heads: 4,
            dwcg_modules: 2,
        }
    }
}

/// Compression ratio `1 / 2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressionRatio {
    pub stages: usize,
}

impl CompressionRatio {
    pub fn denominator(self) -> usize {
        1 << self.stages
    }

    pub fn value(self) -> f64 {
        1.0 / self.denominator() as f64
    }

    /// Parses `1/2`, `1/4` or `1/8`.
    pub fn parse(s: &str) -> Result<Self> {
        let stages = match s.trim() {
            "1/2" => 1,
            "1/4" => 2,
            "1/8" => 3,
            other => {
                return Err(Error::Config(format!(
                    "compression ratio must be 1/2, 1/4 or 1/8, got `{other}`"
                )))
            }
        };
        Ok(CompressionRatio { stages })
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.denominator())
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.cr_stages) {
            return Err(Error::Config(format!(
                "cr_stages must be 1, 2 or 3 (CR 1/2, 1/4, 1/8), got {}",
                self.cr_stages
            )));
        }
        let down = 1usize << self.cr_stages;
        if self.hw == 0 || !self.hw.is_multiple_of(down) {
            return Err(Error::Config(format!(
                "hw = {} is not divisible by 2^{} = {down}",
                self.hw, self.cr_stages
            )));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be positive".into()));
        }
        if self.heads == 0 || !self.channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "channels = {} is not divisible by heads = {}",
                self.channels, self.heads
            )));
        }
        Ok(())
    }

    pub fn compression_ratio(&self) -> CompressionRatio {
        CompressionRatio {
            stages: self.cr_stages,
        }
    }

    pub fn latent_len(&self) -> usize {
        self.hw >> self.cr_stages
    }

    /// Canonical `key=value` lines, keys sorted.
    pub fn to_record(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    fn entries(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            ("channels", self.channels),
            ("cr_stages", self.cr_stages),
            ("dwcg_modules", self.dwcg_modules),
            ("heads", self.heads),
            ("hw", self.hw),
            ("mhsa_blocks", self.mhsa_blocks),
        ])
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed config line `{line}`")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("`{k}` is not an integer: `{v}`")))?;
            values.insert(k.trim().to_string(), v);
        }
        let mut take = |key: &str| {
            values
                .remove(key)
                .ok_or_else(|| Error::Config(format!("missing model key `{key}`")))
        };
        let cfg = ModelConfig {
            channels: take("channels")?,
            cr_stages: take("cr_stages")?,
            dwcg_modules: take("dwcg_modules")?,
            heads: take("heads")?,
            hw: take("hw")?,
            mhsa_blocks: take("mhsa_blocks")?,
        };
        if let Some(k) = values.keys().next() {
            return Err(Error::Config(format!("unknown model key `{k}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
