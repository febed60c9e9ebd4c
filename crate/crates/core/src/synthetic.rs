//! Templated toy corpora with known sentiment.
//!
//! Every sentence carries its polarity through cue words only; the rest of
//! the template is shared by both classes.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Sentiment;
use crate::rng::SeedRng;

/// Positive cues, paired index-wise with their antonyms in [`NEGATIVE_CUES`].
pub const POSITIVE_CUES: [&str; 20] = [
    "good", "great", "excellent", "amazing", "delicious", "friendly", "wonderful", "fantastic", "awesome",
    "perfect", "tasty", "lovely", "fresh", "clean", "nice", "pleasant", "fast", "cheap", "warm", "helpful",
];

pub const NEGATIVE_CUES: [&str; 20] = [
    "bad", "terrible", "awful", "horrible", "disgusting", "rude", "dreadful", "lousy", "mediocre", "poor",
    "bland", "nasty", "stale", "dirty", "gross", "unpleasant", "slow", "overpriced", "cold", "useless",
];

pub const NOUNS: [&str; 12] = [
    "food", "service", "staff", "pizza", "place", "burger", "coffee", "waiter", "menu", "room", "price", "dessert",
];

/// `{n}` is a noun, `{m}` a second noun, `{c}` and `{d}` cue words.
const TEMPLATES: [&str; 10] = [
    "the {n} was {c}",
    "{c} {n}",
    "the {n} is {c}",
    "i found the {n} {c}",
    "really {c} {n} here",
    "our {n} was {c} tonight",
    "what a {c} {n}",
    "the {n} and the {m} were {c}",
    "{c} {n} and {d} {m}",
    "i think the {n} is very {c}",
];

fn cues(s: Sentiment) -> &'static [&'static str; 20] {
    match s {
        Sentiment::Positive => &POSITIVE_CUES,
        Sentiment::Negative => &NEGATIVE_CUES,
    }
}

/// A sentence skeleton with cue slots left as indices into the cue lists.
#[derive(Clone, Debug)]
struct Skeleton {
    template: &'static str,
    n: &'static str,
    m: &'static str,
    c: usize,
    d: usize,
}

impl Skeleton {
    fn random(rng: &mut SeedRng) -> Self {
        Skeleton {
            template: TEMPLATES.choose(rng).unwrap(),
            n: NOUNS.choose(rng).unwrap(),
            m: NOUNS.choose(rng).unwrap(),
            c: rng.gen_range(0..POSITIVE_CUES.len()),
            d: rng.gen_range(0..POSITIVE_CUES.len()),
        }
    }

    fn render(&self, s: Sentiment) -> Vec<String> {
        let cues = cues(s);
        self.template
            .split(' ')
            .map(|w| match w {
                "{n}" => self.n,
                "{m}" => self.m,
                "{c}" => cues[self.c],
                "{d}" => cues[self.d],
                other => other,
            })
            .map(str::to_string)
            .collect()
    }
}

/// `n` labeled sentences, alternating classes, with independent skeletons.
pub fn lexicon_corpus(n: usize, rng: &mut SeedRng) -> Vec<(Vec<String>, Sentiment)> {
    (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { Sentiment::Positive } else { Sentiment::Negative };
            (Skeleton::random(rng).render(s), s)
        })
        .collect()
}

/// `n` pairs of sentences that differ only in swapped antonym cues:
/// `(positive, negative)`.
pub fn antonym_pairs(n: usize, rng: &mut SeedRng) -> Vec<(Vec<String>, Vec<String>)> {
    (0..n)
        .map(|_| {
            let sk = Skeleton::random(rng);
            (sk.render(Sentiment::Positive), sk.render(Sentiment::Negative))
        })
        .collect()
}

/// True when `tokens` contains any cue word of polarity `s`.
pub fn has_cue(tokens: &[impl AsRef<str>], s: Sentiment) -> bool {
    tokens.iter().any(|t| cues(s).contains(&t.as_ref()))
}
