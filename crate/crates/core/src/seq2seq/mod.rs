//! Seq2seq autoencoders: the five variants, training, greedy decoding and
//! transfer through a style-specific model.

mod config;
mod corpus;
mod model;
mod train;

use std::path::Path;

pub use config::{ModelConfig, TrainConfig, Variant, DEFAULT_MAX_DECODE_LEN};
pub use corpus::{style_corpus, StyleCorpus};
pub use model::{Forward, Seq2SeqModel};
pub use train::{evaluate, run_epochs, train, EpochMetrics, ExtraLoss, StepStats, Trainer};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};

pub const CHECKPOINT_KIND: &str = "seq2seq";

impl Seq2SeqModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(CHECKPOINT_KIND, &serde_json::json!({ "model": self.config }))?;
        ck.add_store("", &self.store);
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    /// Rebuilds a model from a seq2seq or adversarial checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(&[CHECKPOINT_KIND, crate::adversarial::CHECKPOINT_KIND])?;
        let config: ModelConfig = ck.config_as("model")?;
        let mut model = Seq2SeqModel::new(config).map_err(|e| Error::CorruptCheckpoint {
            path: ck.path().to_path_buf(),
            reason: e.to_string(),
        })?;
        ck.fill_store("", &mut model.store)?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Loads into a model shaped by `expected` instead of the stored config,
    /// so any disagreement surfaces as a per-array shape error.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind(&[CHECKPOINT_KIND, crate::adversarial::CHECKPOINT_KIND])?;
        let mut model = Seq2SeqModel::new(expected.clone())?;
        ck.fill_store("", &mut model.store)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Batch;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut cfg = ModelConfig::new(Variant::Bidirectional, 20);
        cfg.embedding = 5;
        cfg.hidden = 6;
        let model = Seq2SeqModel::new(cfg).unwrap();
        model.save(&path).unwrap();
        let back = Seq2SeqModel::load(&path).unwrap();
        let mut rng = seeded(3);
        for _ in 0..5 {
            let seqs: Vec<Vec<usize>> = (0..3)
                .map(|_| (0..rng.gen_range(1..=10)).map(|_| rng.gen_range(4..20)).collect())
                .collect();
            let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
            let batch = Batch::autoencoder(&refs);
            assert_eq!(model.logits(&batch).unwrap(), back.logits(&batch).unwrap());
        }
    }

    #[test]
    fn mismatched_hidden_names_the_array() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut cfg = ModelConfig::new(Variant::Vanilla, 20);
        cfg.embedding = 5;
        cfg.hidden = 6;
        Seq2SeqModel::new(cfg.clone()).unwrap().save(&path).unwrap();
        cfg.hidden = 8;
        match Seq2SeqModel::load_expecting(&path, &cfg) {
            Err(Error::ArrayShape { name, .. }) => assert!(name.starts_with("encoder.l0"), "{name}"),
            r => panic!("unexpected {:?}", r.map(|_| ())),
        }
    }
}
