use rand::seq::SliceRandom;

use crate::data::clean::{Example, Sentiment};
use crate::error::{Error, Result};
use crate::rng;

/// Records kept by the reduced variants.
pub const REDUCED_RECORDS: usize = 20_000;

/// Smallest class size `balance_and_split` accepts.
pub const MIN_CLASS_SIZE: usize = 1;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<Vec<String>>,
    pub dev: Vec<Vec<String>>,
    pub test: Vec<Vec<String>>,
}

impl Splits {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: SplitName) -> &[Vec<String>] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            SplitName::Train => "train.txt",
            SplitName::Dev => "dev.txt",
            SplitName::Test => "test.txt",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BalancedSplits {
    pub positive: Splits,
    pub negative: Splits,
    /// Examples removed from the larger class.
    pub downsampled: usize,
}

impl BalancedSplits {
    pub fn of(&self, sentiment: Sentiment) -> &Splits {
        match sentiment {
            Sentiment::Positive => &self.positive,
            Sentiment::Negative => &self.negative,
        }
    }
}

/// Downsamples the larger class to the size of the smaller one, then
/// shuffles each class and cuts it 80/10/10.
pub fn balance_and_split(examples: &[Example], seed: u64) -> Result<BalancedSplits> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for ex in examples {
        match ex.sentiment {
            Sentiment::Positive => pos.push(ex.tokens.clone()),
            Sentiment::Negative => neg.push(ex.tokens.clone()),
        }
    }
    for (class, items) in [(Sentiment::Positive, &pos), (Sentiment::Negative, &neg)] {
        if items.len() < MIN_CLASS_SIZE {
            return Err(Error::Data(format!(
                "{class} class has {} examples; at least {MIN_CLASS_SIZE} are needed",
                items.len()
            )));
        }
    }
    let n = pos.len().min(neg.len());
    let downsampled = pos.len() + neg.len() - 2 * n;
    let positive = shuffle_and_cut(pos, n, seed, 0);
    let negative = shuffle_and_cut(neg, n, seed, 1);
    Ok(BalancedSplits {
        positive,
        negative,
        downsampled,
    })
}

fn shuffle_and_cut(mut items: Vec<Vec<String>>, keep: usize, seed: u64, stream: u64) -> Splits {
    let mut rng = rng::stream(seed, stream);
    items.shuffle(&mut rng);
    items.truncate(keep);
    let n_train = keep * 8 / 10;
    let n_dev = keep / 10;
    let test = items.split_off(n_train + n_dev);
    let dev = items.split_off(n_train);
    Splits {
        train: items,
        dev,
        test,
    }
}

/// Seeded subset of at most `n` items, kept in their original order.
pub fn subsample<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    if items.len() <= n {
        return items.to_vec();
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut rng::seeded(seed));
    idx.truncate(n);
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn examples(pos: usize, neg: usize) -> Vec<Example> {
        let make = |i: usize, s: Sentiment| Example {
            tokens: vec![format!("{s}{i}")],
            sentiment: s,
        };
        (0..pos)
            .map(|i| make(i, Sentiment::Positive))
            .chain((0..neg).map(|i| make(i, Sentiment::Negative)))
            .collect()
    }

    #[test]
    fn exact_proportions_and_disjoint() {
        let s = balance_and_split(&examples(100, 100), 2).unwrap();
        for part in [&s.positive, &s.negative] {
            assert_eq!((part.train.len(), part.dev.len(), part.test.len()), (80, 10, 10));
            let all: HashSet<_> = part.train.iter().chain(&part.dev).chain(&part.test).collect();
            assert_eq!(all.len(), 100);
        }
        assert_eq!(s.downsampled, 0);
    }

    #[test]
    fn majority_class_is_downsampled() {
        let s = balance_and_split(&examples(300, 100), 2).unwrap();
        assert_eq!(s.positive.len(), 100);
        assert_eq!(s.negative.len(), 100);
        assert_eq!(s.downsampled, 200);
    }

    #[test]
    fn same_seed_same_split() {
        let ex = examples(57, 43);
        assert_eq!(balance_and_split(&ex, 9).unwrap(), balance_and_split(&ex, 9).unwrap());
        assert_ne!(balance_and_split(&ex, 9).unwrap(), balance_and_split(&ex, 10).unwrap());
    }

    #[test]
    fn empty_class_is_rejected() {
        assert!(balance_and_split(&examples(50, 0), 2).is_err());
    }

    #[test]
    fn four_per_class_still_splits() {
        let s = balance_and_split(&examples(4, 4), 2).unwrap();
        assert_eq!(s.positive.len() + s.negative.len(), 8);
        assert_eq!((s.positive.train.len(), s.positive.dev.len(), s.positive.test.len()), (3, 0, 1));
    }

    #[test]
    fn subsample_sizes() {
        let items: Vec<usize> = (0..50).collect();
        assert_eq!(subsample(&items, 80, 1), items);
        let s = subsample(&items, 20, 1);
        assert_eq!(s.len(), 20);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, subsample(&items, 20, 1));
    }
}
