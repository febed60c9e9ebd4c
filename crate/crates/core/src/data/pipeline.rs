//! Raw reviews → cleaned, labeled, balanced splits, plus the bookkeeping
//! needed to account for every input line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::data::clean::{clean_text, label_from_stars, Example, Sentiment, MAX_SENTENCE_LEN};
use crate::data::split::{balance_and_split, BalancedSplits, SplitName};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RawReview {
    pub text: String,
    pub stars: f64,
}

/// Parses one input record: a JSON object with a string `text` and a
/// numeric `stars` in `[1, 5]`.
pub fn parse_review(line: &str) -> Result<RawReview> {
    let v: Value = serde_json::from_str(line).map_err(|e| Error::Data(format!("bad record: {e}")))?;
    let text = v
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Data("record has no string `text`".into()))?;
    let stars = v
        .get("stars")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Data("record has no numeric `stars`".into()))?;
    label_from_stars(stars)?;
    Ok(RawReview {
        text: text.to_string(),
        stars,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessStats {
    pub lines: usize,
    pub malformed: usize,
    pub neutral: usize,
    pub empty: usize,
    pub too_long: usize,
    pub downsampled: usize,
    /// Labeled, length-filtered examples per class before balancing.
    pub labeled: BTreeMap<Sentiment, usize>,
    /// Cleaned token counts of every labeled review, before length filtering.
    pub length_histogram: BTreeMap<(Sentiment, usize), usize>,
    pub kept: BTreeMap<(Sentiment, &'static str), usize>,
}

impl PreprocessStats {
    pub fn kept_total(&self) -> usize {
        self.kept.values().sum()
    }

    /// Every input line lands in exactly one bucket.
    pub fn accounted(&self) -> usize {
        self.malformed + self.neutral + self.empty + self.too_long + self.downsampled + self.kept_total()
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("reason,count\n");
        for (k, v) in [
            ("lines", self.lines),
            ("malformed", self.malformed),
            ("neutral", self.neutral),
            ("empty", self.empty),
            ("too_long", self.too_long),
            ("downsampled", self.downsampled),
            ("kept", self.kept_total()),
        ] {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn splits_csv(&self) -> String {
        let mut s = String::from("sentiment,split,count\n");
        for ((sent, split), n) in &self.kept {
            let _ = writeln!(s, "{sent},{split},{n}");
        }
        s
    }

    pub fn class_balance_csv(&self) -> String {
        let mut s = String::from("sentiment,labeled,kept\n");
        for sent in Sentiment::ALL {
            let kept: usize = self
                .kept
                .iter()
                .filter(|((k, _), _)| *k == sent)
                .map(|(_, n)| n)
                .sum();
            let _ = writeln!(s, "{sent},{},{kept}", self.labeled.get(&sent).copied().unwrap_or(0));
        }
        s
    }

    pub fn length_histogram_csv(&self) -> String {
        let mut s = String::from("sentiment,length,count\n");
        for ((sent, len), n) in &self.length_histogram {
            let _ = writeln!(s, "{sent},{len},{n}");
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub splits: BalancedSplits,
    pub stats: PreprocessStats,
}

/// Runs cleaning, labeling, length filtering, balancing and splitting.
pub fn preprocess<'a>(lines: impl IntoIterator<Item = &'a str>, seed: u64) -> Result<Preprocessed> {
    let mut stats = PreprocessStats::default();
    let mut examples = Vec::new();
    for line in lines {
        stats.lines += 1;
        let Ok(review) = parse_review(line) else {
            stats.malformed += 1;
            continue;
        };
        let Some(sentiment) = label_from_stars(review.stars)? else {
            stats.neutral += 1;
            continue;
        };
        let tokens = clean_text(&review.text);
        *stats.length_histogram.entry((sentiment, tokens.len())).or_default() += 1;
        if tokens.is_empty() {
            stats.empty += 1;
        } else if tokens.len() > MAX_SENTENCE_LEN {
            stats.too_long += 1;
        } else {
            *stats.labeled.entry(sentiment).or_default() += 1;
            examples.push(Example { tokens, sentiment });
        }
    }
    if examples.is_empty() {
        return Err(Error::Data("no examples survived preprocessing".into()));
    }
    let splits = balance_and_split(&examples, seed)?;
    stats.downsampled = splits.downsampled;
    for sent in Sentiment::ALL {
        for name in SplitName::ALL {
            stats.kept.insert((sent, name.as_str()), splits.of(sent).get(name).len());
        }
    }
    Ok(Preprocessed { splits, stats })
}

fn split_path(dir: &Path, sentiment: Sentiment, split: SplitName) -> std::path::PathBuf {
    dir.join(sentiment.dir_name()).join(split.file_name())
}

/// Writes `pos/{train,dev,test}.txt` and `neg/…`, one space-joined example
/// per line.
pub fn write_splits(dir: &Path, splits: &BalancedSplits) -> Result<()> {
    for sent in Sentiment::ALL {
        let sub = dir.join(sent.dir_name());
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for name in SplitName::ALL {
            let path = split_path(dir, sent, name);
            let mut text = String::new();
            for ex in splits.of(sent).get(name) {
                text.push_str(&ex.join(" "));
                text.push('\n');
            }
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn read_split(dir: &Path, sentiment: Sentiment, split: SplitName) -> Result<Vec<Vec<String>>> {
    let path = split_path(dir, sentiment, split);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

pub fn read_splits(dir: &Path) -> Result<BalancedSplits> {
    let read = |sent| -> Result<crate::data::Splits> {
        Ok(crate::data::Splits {
            train: read_split(dir, sent, SplitName::Train)?,
            dev: read_split(dir, sent, SplitName::Dev)?,
            test: read_split(dir, sent, SplitName::Test)?,
        })
    };
    Ok(BalancedSplits {
        positive: read(Sentiment::Positive)?,
        negative: read(Sentiment::Negative)?,
        downsampled: 0,
    })
}
