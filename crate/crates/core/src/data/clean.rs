use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replacement token for every run of digits.
pub const NUM_TOKEN: &str = "_NUM_";

/// Sentences longer than this are dropped.
pub const MAX_SENTENCE_LEN: usize = 10;

/// Lowercases, strips everything outside `[a-z0-9]` and whitespace, then
/// splits on whitespace. Each maximal digit run becomes [`NUM_TOKEN`]; since
/// punctuation is removed first, `1,000` and `3.5` are single runs.
pub fn clean_text(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let mut tokens = Vec::new();
    for word in lowered.split_whitespace() {
        let mut letters = String::new();
        let mut in_digits = false;
        for ch in word.chars() {
            if ch.is_ascii_digit() {
                if !in_digits {
                    if !letters.is_empty() {
                        tokens.push(std::mem::take(&mut letters));
                    }
                    tokens.push(NUM_TOKEN.to_string());
                    in_digits = true;
                }
            } else if ch.is_ascii_lowercase() {
                letters.push(ch);
                in_digits = false;
            }
        }
        if !letters.is_empty() {
            tokens.push(letters);
        }
    }
    tokens
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Negative,
}

impl Sentiment {
    pub const ALL: [Sentiment; 2] = [Sentiment::Positive, Sentiment::Negative];

    pub fn opposite(self) -> Self {
        match self {
            Sentiment::Positive => Sentiment::Negative,
            Sentiment::Negative => Sentiment::Positive,
        }
    }

    /// Directory name used for processed split files.
    pub fn dir_name(self) -> &'static str {
        match self {
            Sentiment::Positive => "pos",
            Sentiment::Negative => "neg",
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sentiment::Positive => 1.0,
            Sentiment::Negative => 0.0,
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
        })
    }
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "pos" => Ok(Sentiment::Positive),
            "negative" | "neg" => Ok(Sentiment::Negative),
            other => Err(Error::Config(format!("unknown sentiment `{other}`"))),
        }
    }
}

/// Maps a star rating to a sentiment: above 3 is positive, below 3 is
/// negative, exactly 3 is neutral (`None`). Ratings must lie in `[1, 5]`.
pub fn label_from_stars(stars: f64) -> Result<Option<Sentiment>> {
    if !(1.0..=5.0).contains(&stars) {
        return Err(Error::Data(format!("star rating {stars} outside [1, 5]")));
    }
    Ok(if stars > 3.0 {
        Some(Sentiment::Positive)
    } else if stars < 3.0 {
        Some(Sentiment::Negative)
    } else {
        None
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub tokens: Vec<String>,
    pub sentiment: Sentiment,
}
