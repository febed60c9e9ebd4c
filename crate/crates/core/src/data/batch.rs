//! Padded, time-major minibatches and length bucketing.

use rand::seq::SliceRandom;

use crate::data::vocab::{EOS, GO, PAD};
use crate::rng::SeedRng;

/// Default number of minibatches per epoch.
pub const DEFAULT_MINIBATCHES: usize = 512;

/// A padded batch for teacher-forced seq2seq training. All id grids are
/// time-major: `source[t][b]` is token `t` of sequence `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub source: Vec<Vec<usize>>,
    pub source_lengths: Vec<usize>,
    /// `[_GO_, tokens…]`
    pub target_in: Vec<Vec<usize>>,
    /// `[tokens…, _EOS_]`
    pub target_out: Vec<Vec<usize>>,
    pub target_lengths: Vec<usize>,
    /// 1 on real target positions, 0 on padding.
    pub weights: Vec<Vec<f64>>,
}

impl Batch {
    /// Autoencoder batch: each sequence is both source and target.
    pub fn autoencoder(seqs: &[&[usize]]) -> Self {
        Self::new(seqs, seqs)
    }

    pub fn new(sources: &[&[usize]], targets: &[&[usize]]) -> Self {
        assert_eq!(sources.len(), targets.len(), "source/target count mismatch");
        let source_lengths: Vec<usize> = sources.iter().map(|s| s.len()).collect();
        let target_lengths: Vec<usize> = targets.iter().map(|s| s.len() + 1).collect();
        let ts = source_lengths.iter().copied().max().unwrap_or(0);
        let tt = target_lengths.iter().copied().max().unwrap_or(0);

        let source = time_major(sources.iter().map(|s| s.to_vec()), ts);
        let target_in = time_major(
            targets.iter().map(|s| std::iter::once(GO).chain(s.iter().copied()).collect()),
            tt,
        );
        let target_out = time_major(
            targets.iter().map(|s| s.iter().copied().chain(std::iter::once(EOS)).collect()),
            tt,
        );
        let weights = target_out
            .iter()
            .map(|row| row.iter().map(|&id| if id == PAD { 0.0 } else { 1.0 }).collect())
            .collect();
        Batch {
            source,
            source_lengths,
            target_in,
            target_out,
            target_lengths,
            weights,
        }
    }

    pub fn size(&self) -> usize {
        self.source_lengths.len()
    }

    pub fn source_steps(&self) -> usize {
        self.source.len()
    }

    pub fn target_steps(&self) -> usize {
        self.target_in.len()
    }

    /// Real (unpadded) source sequence `b`.
    pub fn source_seq(&self, b: usize) -> Vec<usize> {
        (0..self.source_lengths[b]).map(|t| self.source[t][b]).collect()
    }

    pub fn target_seq(&self, b: usize) -> Vec<usize> {
        (0..self.target_lengths[b] - 1).map(|t| self.target_out[t][b]).collect()
    }

    /// Appends `extra` all-padding time steps to the source and target grids.
    pub fn pad_more(&self, extra: usize) -> Self {
        let mut out = self.clone();
        let b = self.size();
        for _ in 0..extra {
            out.source.push(vec![PAD; b]);
            out.target_in.push(vec![PAD; b]);
            out.target_out.push(vec![PAD; b]);
            out.weights.push(vec![0.0; b]);
        }
        out
    }

    /// Targets flattened in time-major order, with their weights.
    pub fn flat_targets(&self) -> (Vec<usize>, Vec<f64>) {
        (
            self.target_out.iter().flatten().copied().collect(),
            self.weights.iter().flatten().copied().collect(),
        )
    }

    pub fn real_tokens(&self) -> usize {
        self.target_lengths.iter().sum()
    }
}

fn time_major(seqs: impl Iterator<Item = Vec<usize>>, steps: usize) -> Vec<Vec<usize>> {
    let seqs: Vec<Vec<usize>> = seqs.collect();
    (0..steps)
        .map(|t| seqs.iter().map(|s| s.get(t).copied().unwrap_or(PAD)).collect())
        .collect()
}

/// Reverses the real prefix of every source sequence; targets are untouched.
pub fn reverse_source(batch: &Batch) -> Batch {
    let mut out = batch.clone();
    for (b, &len) in batch.source_lengths.iter().enumerate() {
        for t in 0..len {
            out.source[t][b] = batch.source[len - 1 - t][b];
        }
    }
    out
}

/// Batch size giving roughly `target_minibatches` batches per epoch.
pub fn batch_size_for(n: usize, target_minibatches: usize) -> usize {
    n.div_ceil(target_minibatches.max(1)).max(1)
}

/// Groups sequence indices into batches of near-equal length.
///
/// Indices are shuffled, stably sorted by length, cut into consecutive
/// chunks of `batch_size`, and the chunk order is shuffled again.
pub fn bucket_indices(lengths: &[usize], batch_size: usize, rng: &mut SeedRng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..lengths.len()).collect();
    idx.shuffle(rng);
    idx.sort_by_key(|&i| lengths[i]);
    let mut groups: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    groups.shuffle(rng);
    groups
}

/// Autoencoder batches for one epoch.
pub fn bucket_batches(seqs: &[Vec<usize>], batch_size: usize, rng: &mut SeedRng) -> Vec<Batch> {
    let lengths: Vec<usize> = seqs.iter().map(Vec::len).collect();
    bucket_indices(&lengths, batch_size, rng)
        .into_iter()
        .map(|g| {
            let refs: Vec<&[usize]> = g.iter().map(|&i| seqs[i].as_slice()).collect();
            Batch::autoencoder(&refs)
        })
        .collect()
}
