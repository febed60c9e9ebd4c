use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DEFAULT_MINIBATCHES, MAX_SENTENCE_LEN};
use crate::error::{Error, Result};
use crate::optim::ClipSpec;

/// The five autoencoder variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vanilla,
    Reduced,
    Reversed,
    #[serde(rename = "bidi")]
    Bidirectional,
    #[serde(rename = "reduced-bidi")]
    ReducedBidirectional,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Vanilla,
        Variant::Reduced,
        Variant::Reversed,
        Variant::Bidirectional,
        Variant::ReducedBidirectional,
    ];

    /// Trains on a subsample with a vocabulary rebuilt from it.
    pub fn reduced(self) -> bool {
        matches!(self, Variant::Reduced | Variant::ReducedBidirectional)
    }

    /// Feeds the encoder reversed source sequences.
    pub fn reversed(self) -> bool {
        self == Variant::Reversed
    }

    pub fn bidirectional(self) -> bool {
        matches!(self, Variant::Bidirectional | Variant::ReducedBidirectional)
    }

    /// Command-line and directory name.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Reduced => "reduced",
            Variant::Reversed => "reversed",
            Variant::Bidirectional => "bidi",
            Variant::ReducedBidirectional => "reduced-bidi",
        }
    }

    /// Row label in reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Vanilla => "Vanilla",
            Variant::Reduced => "Reduced",
            Variant::Reversed => "Reversed",
            Variant::Bidirectional => "Bidirectional",
            Variant::ReducedBidirectional => "Reduced Bidirectional",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Everything that determines parameter shapes and initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub embedding: usize,
    /// Encoder output width; split evenly across directions when bidirectional.
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, vocab_size: usize) -> Self {
        ModelConfig {
            variant,
            vocab_size,
            embedding: 300,
            hidden: 1024,
            layers: 2,
            dropout: 0.0,
            seed: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.vocab_size <= crate::data::RESERVED.len() {
            return bad(format!("vocabulary of {} has no words", self.vocab_size));
        }
        if self.embedding == 0 || self.hidden == 0 || self.layers == 0 {
            return bad("embedding, hidden and layers must be positive".into());
        }
        if self.variant.bidirectional() && !self.hidden.is_multiple_of(2) {
            return bad(format!("bidirectional encoder needs an even hidden size, got {}", self.hidden));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn per_direction_hidden(&self) -> usize {
        if self.variant.bidirectional() {
            self.hidden / 2
        } else {
            self.hidden
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub clip: ClipSpec,
    /// Fixed batch size; 0 derives it from `minibatches_per_epoch`.
    pub batch_size: usize,
    pub minibatches_per_epoch: usize,
    pub seed: u64,
    /// Stop once dev accuracy (percent) reaches this value.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr: 0.01,
            clip: ClipSpec::default(),
            batch_size: 0,
            minibatches_per_epoch: DEFAULT_MINIBATCHES,
            seed: 2,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn batch_size_for(&self, n: usize) -> usize {
        if self.batch_size > 0 {
            self.batch_size
        } else {
            crate::data::batch_size_for(n, self.minibatches_per_epoch)
        }
    }
}

/// Longest greedy decode: the sentence cap plus one for `_EOS_`.
pub const DEFAULT_MAX_DECODE_LEN: usize = MAX_SENTENCE_LEN + 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_flags() {
        assert!(Variant::ReducedBidirectional.reduced() && Variant::ReducedBidirectional.bidirectional());
        assert!(Variant::Reversed.reversed() && !Variant::Reversed.bidirectional());
        assert!(!Variant::Vanilla.reduced());
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn bidirectional_halves_hidden() {
        let mut c = ModelConfig::new(Variant::Bidirectional, 100);
        assert_eq!(c.per_direction_hidden(), 512);
        c.hidden = 7;
        assert!(c.validate().is_err());
    }
}
