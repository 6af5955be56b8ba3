//! JSON checkpoints holding the configuration, vocabulary, description
//! texts and every named weight.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, TrainConfig};
use crate::model::ClaimTagger;
use crate::params::NamedTensor;
use crate::vocab::Vocab;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    pub vocab: Vocab,
    pub descriptions: Vec<String>,
    pub params: BTreeMap<String, NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &ClaimTagger, train: Option<&TrainConfig>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            train: train.cloned(),
            vocab: model.vocab.clone(),
            descriptions: model.descriptions.clone(),
            params: model.store.to_named(),
        }
    }

    pub fn into_model(self) -> Result<ClaimTagger> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let mut model = ClaimTagger::new(self.config, self.vocab, self.descriptions)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        model.store.load_named(&self.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = crate::error::read_text(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Checkpoint(format!("{}: {e}", path.as_ref().display()))
        })
    }
}

pub fn save_model(model: &ClaimTagger, train: Option<&TrainConfig>, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_model(model, train).save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClaimTagger> {
    Checkpoint::load(path)?.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_weights() {
        let cfg = ModelConfig {
            d_model: 8,
            heads: 2,
            d_ff: 8,
            layers: 1,
            max_len: 4,
            adapter_layer: 1,
            seed: 3,
            ..ModelConfig::default()
        };
        let vocab = Vocab::build(["a b c"], 0);
        let mut model = ClaimTagger::new(cfg, vocab, vec!["a b".into()]).unwrap();
        model.store.get_mut(model.crf.emit_b)[[0, 1]] = 0.125;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, Some(&TrainConfig::default()), &path).unwrap();
        let back = load_model(&path).unwrap();
        for id in model.store.ids() {
            assert_eq!(back.store.get(id), model.store.get(id), "{}", model.store.name(id));
        }
        assert_eq!(back.vocab, model.vocab);
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_missing_tensor() {
        let cfg = ModelConfig {
            d_model: 4,
            heads: 1,
            d_ff: 4,
            layers: 1,
            max_len: 4,
            adapter_layer: 1,
            use_descnet: false,
            ..ModelConfig::default()
        };
        let model = ClaimTagger::new(cfg, Vocab::build(["a"], 0), vec![]).unwrap();
        let mut ck = Checkpoint::from_model(&model, None);
        ck.params.remove("crf.end");
        assert!(ck.into_model().is_err());
    }
}
