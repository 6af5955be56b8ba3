//! Model and training configuration, and the plain-text `key = value`
//! config file that covers every field.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How token representations attend to description tokens inside the
/// adapter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionVariant {
    /// Compositional de-attention (quasi-attention in (−1, 1)).
    Coda,
    /// Softmax dot-product attention, the ablation baseline.
    Dpa,
}

impl fmt::Display for AttentionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionVariant::Coda => "coda",
            AttentionVariant::Dpa => "dpa",
        })
    }
}

impl FromStr for AttentionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coda" => Ok(AttentionVariant::Coda),
            "dpa" => Ok(AttentionVariant::Dpa),
            other => Err(Error::Config(format!("unknown attention variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub layers: usize,
    /// Maximum sequence length; longer posts are truncated for the model.
    pub max_len: usize,
    /// Vocabulary cap including the unknown token; 0 keeps every word seen.
    pub vocab_size: usize,
    pub dropout: f64,
    pub descnet_dropout: f64,
    /// 1-based encoder block after which the adapter runs.
    pub adapter_layer: usize,
    pub use_descnet: bool,
    pub attention: AttentionVariant,
    /// When false the gating stage is replaced by `Z + Z'W`.
    pub use_igm: bool,
    /// Add the adapter output to its input instead of replacing it.
    pub residual_adapter: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            d_ff: 128,
            layers: 4,
            max_len: 64,
            vocab_size: 0,
            dropout: 0.1,
            descnet_dropout: 0.1,
            adapter_layer: 4,
            use_descnet: true,
            attention: AttentionVariant::Coda,
            use_igm: true,
            residual_adapter: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.heads == 0 || self.d_ff == 0 || self.layers == 0 {
            return bad("d_model, heads, d_ff and layers must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return bad(format!(
                "heads ({}) must divide d_model ({})",
                self.heads, self.d_model
            ));
        }
        if self.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if !(1..=self.layers).contains(&self.adapter_layer) {
            return bad(format!(
                "adapter_layer {} outside 1..={}",
                self.adapter_layer, self.layers
            ));
        }
        for (name, p) in [("dropout", self.dropout), ("descnet_dropout", self.descnet_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation Dice improvement before stopping.
    pub patience: usize,
    /// Fraction of the input corpus held out for validation when no
    /// separate validation corpus is given.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 20,
            patience: 5,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The optimizer settings used for the full-size pretrained backbone.
    pub const PRETRAINED_LEARNING_RATE: f64 = 4e-5;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive".into());
        }
        if self.patience > self.max_epochs {
            return bad(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction {} outside [0, 1)", self.val_fraction));
        }
        Ok(())
    }
}

/// Everything a config file can set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "d_model" => m.d_model = parse(key, value)?,
            "heads" => m.heads = parse(key, value)?,
            "d_ff" => m.d_ff = parse(key, value)?,
            "layers" => m.layers = parse(key, value)?,
            "max_len" => m.max_len = parse(key, value)?,
            "vocab_size" => m.vocab_size = parse(key, value)?,
            "dropout" => m.dropout = parse(key, value)?,
            "descnet_dropout" => m.descnet_dropout = parse(key, value)?,
            "adapter_layer" => m.adapter_layer = parse(key, value)?,
            "use_descnet" => m.use_descnet = parse(key, value)?,
            "attention" => m.attention = value.parse()?,
            "use_igm" => m.use_igm = parse(key, value)?,
            "residual_adapter" => m.residual_adapter = parse(key, value)?,
            "model_seed" => m.seed = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "val_fraction" => t.val_fraction = parse(key, value)?,
            "train_seed" => t.seed = parse(key, value)?,
            "seed" => {
                m.seed = parse(key, value)?;
                t.seed = m.seed;
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse_str(content: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_str(&crate::error::read_text(path.as_ref())?)
    }

    /// Renders every field as `key = value`.
    pub fn to_kv_string(&self) -> String {
        let (m, t) = (&self.model, &self.train);
        let mut out = String::new();
        let pairs: [(&str, String); 20] = [
            ("d_model", m.d_model.to_string()),
            ("heads", m.heads.to_string()),
            ("d_ff", m.d_ff.to_string()),
            ("layers", m.layers.to_string()),
            ("max_len", m.max_len.to_string()),
            ("vocab_size", m.vocab_size.to_string()),
            ("dropout", m.dropout.to_string()),
            ("descnet_dropout", m.descnet_dropout.to_string()),
            ("adapter_layer", m.adapter_layer.to_string()),
            ("use_descnet", m.use_descnet.to_string()),
            ("attention", m.attention.to_string()),
            ("use_igm", m.use_igm.to_string()),
            ("residual_adapter", m.residual_adapter.to_string()),
            ("model_seed", m.seed.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("val_fraction", t.val_fraction.to_string()),
            ("train_seed", t.seed.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_every_field() {
        let mut cfg = Config::default();
        cfg.model.d_model = 32;
        cfg.model.heads = 2;
        cfg.model.attention = AttentionVariant::Dpa;
        cfg.model.use_igm = false;
        cfg.model.adapter_layer = 2;
        cfg.train.learning_rate = 4e-5;
        cfg.train.seed = 7;
        let text = cfg.to_kv_string();
        assert_eq!(Config::parse_str(&text).unwrap(), cfg);
    }

    #[test]
    fn comments_and_seed_shorthand() {
        let cfg = Config::parse_str("# toy\n\nseed = 5\nlayers=2\nadapter_layer = 1\n").unwrap();
        assert_eq!(cfg.model.seed, 5);
        assert_eq!(cfg.train.seed, 5);
        assert_eq!(cfg.model.layers, 2);
    }

    #[test]
    fn rejects_invalid() {
        assert!(Config::parse_str("bogus = 1").is_err());
        assert!(Config::parse_str("heads = 3").is_err());
        assert!(Config::parse_str("adapter_layer = 0").is_err());
        assert!(Config::parse_str("adapter_layer = 5").is_err());
        assert!(Config::parse_str("dropout = 1.0").is_err());
        assert!(Config::parse_str("patience = 30").is_err());
        assert!(Config::parse_str("learning_rate = 0").is_err());
        assert!(Config::parse_str("layers").is_err());
    }
}
