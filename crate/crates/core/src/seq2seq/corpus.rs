use crate::data::{subsample, Splits, Vocabulary};
use crate::error::Result;
use crate::seq2seq::config::Variant;

/// The id sequences and vocabulary one style model trains on.
#[derive(Clone, Debug)]
pub struct StyleCorpus {
    pub vocab: Vocabulary,
    pub train: Vec<Vec<usize>>,
    pub dev: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

/// Encodes one style's splits for `variant`.
///
/// Reduced variants keep a seeded subset of `reduced_records` training
/// sentences and rebuild a vocabulary of at most `max_vocab` words from that
/// subset alone; the others use `shared`.
pub fn style_corpus(
    variant: Variant,
    splits: &Splits,
    shared: &Vocabulary,
    max_vocab: usize,
    reduced_records: usize,
    seed: u64,
) -> Result<StyleCorpus> {
    let (train_tokens, vocab) = if variant.reduced() {
        let subset = subsample(&splits.train, reduced_records, seed);
        let vocab = Vocabulary::build(subset.iter().map(Vec::as_slice), max_vocab)?;
        (subset, vocab)
    } else {
        (splits.train.clone(), shared.clone())
    };
    let encode = |set: &[Vec<String>]| set.iter().map(|s| vocab.encode(s)).collect::<Vec<_>>();
    Ok(StyleCorpus {
        train: encode(&train_tokens),
        dev: encode(&splits.dev),
        test: encode(&splits.test),
        vocab,
    })
}
