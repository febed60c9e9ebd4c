//! Review ingestion, cleaning, vocabulary, splits and batching.

mod batch;
mod clean;
mod pipeline;
mod split;
mod vocab;

pub use batch::{
    batch_size_for, bucket_batches, bucket_indices, reverse_source, Batch, DEFAULT_MINIBATCHES,
};
pub use clean::{clean_text, label_from_stars, Example, Sentiment, MAX_SENTENCE_LEN, NUM_TOKEN};
pub use pipeline::{
    parse_review, preprocess, read_split, read_splits, write_splits, PreprocessStats, Preprocessed,
    RawReview,
};
pub use split::{
    balance_and_split, subsample, BalancedSplits, SplitName, Splits, MIN_CLASS_SIZE, REDUCED_RECORDS,
};
pub use vocab::{Vocabulary, DEFAULT_VOCAB_SIZE, EOS, GO, PAD, RESERVED, UNK};
