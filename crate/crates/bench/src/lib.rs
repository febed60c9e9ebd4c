//! Fixtures shared by the benchmarks.

use styleshift_core::data::Batch;
use styleshift_core::seq2seq::{ModelConfig, Seq2SeqModel, Variant};

/// A small model and a full batch of ten-token sentences.
pub fn fixture(variant: Variant, hidden: usize, batch: usize) -> (Seq2SeqModel, Batch) {
    let mut cfg = ModelConfig::new(variant, 500);
    cfg.embedding = 32;
    cfg.hidden = hidden;
    let model = Seq2SeqModel::new(cfg).expect("valid config");
    let seqs: Vec<Vec<usize>> = (0..batch)
        .map(|b| (0..10).map(|t| 4 + (b * 31 + t * 7) % 496).collect())
        .collect();
    let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
    (model, Batch::autoencoder(&refs))
}
