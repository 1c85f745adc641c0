//! Model and training configuration with a `key = value` file grammar.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "V2C_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub max_len: usize,
    /// Frame feature width; filled in from the data.
    pub feature_dim: usize,
    pub caption_vocab: usize,
    pub commonsense_vocab: usize,
    /// Init scale of the two output projections relative to fan-in.
    pub output_gain: f64,
}

impl ModelConfig {
    /// Desk-scale default: 2 blocks, 4 heads, width 128.
    pub fn desk() -> Self {
        Self {
            d_model: 128,
            n_blocks: 2,
            n_heads: 4,
            d_ff: 512,
            dropout: 0.1,
            max_len: 32,
            feature_dim: 0,
            caption_vocab: 0,
            commonsense_vocab: 0,
            output_gain: 0.1,
        }
    }

    /// Full scale: 6 blocks, 8 heads, width 1024.
    pub fn large() -> Self {
        Self {
            d_model: 1024,
            n_blocks: 6,
            n_heads: 8,
            d_ff: 4096,
            max_len: 64,
            ..Self::desk()
        }
    }

    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_model", self.d_model),
            ("n_blocks", self.n_blocks),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
            ("feature_dim", self.feature_dim),
            ("caption_vocab", self.caption_vocab),
            ("commonsense_vocab", self.commonsense_vocab),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.output_gain > 0.0 && self.output_gain.is_finite()) {
            return Err(Error::Config("output_gain must be positive".into()));
        }
        Ok(())
    }

    /// Serialises every field as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("d_model", self.d_model.to_string()),
            ("n_blocks", self.n_blocks.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("d_ff", self.d_ff.to_string()),
            ("dropout", self.dropout.to_string()),
            ("max_len", self.max_len.to_string()),
            ("feature_dim", self.feature_dim.to_string()),
            ("caption_vocab", self.caption_vocab.to_string()),
            ("commonsense_vocab", self.commonsense_vocab.to_string()),
            ("output_gain", self.output_gain.to_string()),
        ] {
            writeln!(s, "{k} = {v}").expect("string write");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::desk();
        for (line, k, v) in parse_pairs(text)? {
            if !cfg.set(&k, &v)? {
                return Err(Error::Config(format!("line {line}: unknown model key {k:?}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, k: &str, v: &str) -> Result<bool> {
        match k {
            "d_model" => self.d_model = parse(k, v)?,
            "n_blocks" => self.n_blocks = parse(k, v)?,
            "n_heads" => self.n_heads = parse(k, v)?,
            "d_ff" => self.d_ff = parse(k, v)?,
            "dropout" => self.dropout = parse(k, v)?,
            "max_len" => self.max_len = parse(k, v)?,
            "feature_dim" => self.feature_dim = parse(k, v)?,
            "caption_vocab" => self.caption_vocab = parse(k, v)?,
            "commonsense_vocab" => self.commonsense_vocab = parse(k, v)?,
            "output_gain" => self.output_gain = parse(k, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Which targets the commonsense decoder is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    Commonsense,
    /// Full story sentences, decoded under the intention marker.
    Story,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub min_freq: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_grad_norm: Option<f64>,
    pub target: TargetMode,
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            lr: 1e-4,
            warmup_steps: 200,
            batch_size: 8,
            max_steps: 2000,
            seed: 0,
            min_freq: 1,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-9,
            max_grad_norm: None,
            target: TargetMode::Commonsense,
        }
    }

    pub fn large() -> Self {
        Self {
            warmup_steps: 5000,
            max_steps: 100_000,
            batch_size: 32,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        for (k, v) in [
            ("warmup_steps", self.warmup_steps),
            ("batch_size", self.batch_size),
            ("max_steps", self.max_steps),
            ("min_freq", self.min_freq),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{k} {b} outside [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        if let Some(n) = self.max_grad_norm {
            if !(n > 0.0) {
                return Err(Error::Config("max_grad_norm must be positive".into()));
            }
        }
        Ok(())
    }

    fn set(&mut self, k: &str, v: &str) -> Result<bool> {
        match k {
            "lr" => self.lr = parse(k, v)?,
            "warmup_steps" => self.warmup_steps = parse(k, v)?,
            "batch_size" => self.batch_size = parse(k, v)?,
            "max_steps" => self.max_steps = parse(k, v)?,
            "seed" => self.seed = parse(k, v)?,
            "min_freq" => self.min_freq = parse(k, v)?,
            "beta1" => self.beta1 = parse(k, v)?,
            "beta2" => self.beta2 = parse(k, v)?,
            "adam_eps" => self.adam_eps = parse(k, v)?,
            "max_grad_norm" => {
                self.max_grad_norm = match v {
                    "none" | "off" => None,
                    _ => Some(parse(k, v)?),
                }
            }
            "target" => {
                self.target = match v {
                    "commonsense" => TargetMode::Commonsense,
                    "story" => TargetMode::Story,
                    _ => return Err(Error::Config(format!("target must be commonsense or story, got {v:?}"))),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
        }
    }
}

impl RunConfig {
    /// Parses `key = value` lines. A `preset` key (desk or large) is applied
    /// before every other key regardless of position.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut cfg = Self::default();
        for (_, k, v) in &pairs {
            if k == "preset" {
                cfg = Self::preset(v)?;
            }
        }
        for (line, k, v) in &pairs {
            if k == "preset" {
                continue;
            }
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {line}: {m}")),
                e => e,
            })?;
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::default()),
            "large" => Ok(Self {
                model: ModelConfig::large(),
                train: TrainConfig::large(),
            }),
            _ => Err(Error::Config(format!("unknown preset {name:?}"))),
        }
    }

    /// Applies one override. Errors on unknown keys.
    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        if self.model.set(k, v)? || self.train.set(k, v)? {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown key {k:?}")))
        }
    }

    /// Applies `V2C_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }
}

fn parse<T: FromStr>(k: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {k}")))
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}
