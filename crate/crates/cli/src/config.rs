//! Flat `key = value` run configuration.
//!
//! A profile supplies every key; a user file and command-line flags may
//! override values but never introduce new keys.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use styleshift_core::adversarial::AdvConfig;
use styleshift_core::data::Sentiment;
use styleshift_core::optim::ClipSpec;
use styleshift_core::sentiment::ClassifierConfig;
use styleshift_core::seq2seq::{ModelConfig, TrainConfig, Variant};
use styleshift_core::{Error, Result};

pub const DESK: &str = include_str!("../configs/desk.conf");
pub const PAPER: &str = include_str!("../configs/paper.conf");

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn text(self) -> &'static str {
        match self {
            Profile::Desk => DESK,
            Profile::Paper => PAPER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    entries: Vec<(String, String)>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Config(format!("line {}: bad key {k:?}", n + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("line {}: key `{k}` given twice", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn profile(p: Profile) -> Self {
        RunConfig {
            entries: parse_pairs(p.text()).expect("built-in profiles parse"),
        }
    }

    /// Overrides values from a config file's text.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => {
                e.1 = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key `{key}`"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("no config key `{key}`"))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::Config(format!("`{key}` has invalid value {v:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parsed(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let x: f64 = self.parsed(key)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Config(format!("`{key}` must be finite")))
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parsed(key)
    }

    /// `none` means unset.
    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.get(key) == "none" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed")
    }

    pub fn data_dir(&self) -> PathBuf {
        PathBuf::from(self.get("data"))
    }

    pub fn style(&self) -> Result<Sentiment> {
        self.get("style").parse()
    }

    pub fn max_decode_len(&self) -> Result<usize> {
        self.usize("max_decode_len")
    }

    pub fn model_config(&self, variant: Variant, vocab_size: usize) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            variant,
            vocab_size,
            embedding: self.usize("embedding")?,
            hidden: self.usize("hidden")?,
            layers: self.usize("layers")?,
            dropout: self.f64("dropout")?,
            seed: self.seed()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.usize("epochs")?,
            lr: self.f64("lr")?,
            clip: ClipSpec::symmetric(self.f64("clip")?)?,
            batch_size: self.usize("batch_size")?,
            minibatches_per_epoch: self.usize("minibatches_per_epoch")?,
            seed: self.seed()?,
            target_accuracy: self.opt_f64("target_accuracy")?,
        })
    }

    pub fn adv_config(&self) -> Result<AdvConfig> {
        let cfg = AdvConfig {
            lambda: self.f64("lambda")?,
            disc_steps: self.usize("disc_steps")?,
            lr: self.f64("disc_lr")?,
            iterations: self.usize("iterations")?,
            minibatch_stat: self.bool("minibatch_stat")?,
            disc_hidden: self.usize("disc_hidden")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn classifier_config(&self, vocab_size: usize) -> Result<ClassifierConfig> {
        let cfg = ClassifierConfig {
            vocab_size,
            embedding: self.usize("cls_embedding")?,
            hidden: self.usize("cls_hidden")?,
            layers: self.usize("cls_layers")?,
            dropout: self.f64("cls_dropout")?,
            mlp_hidden: self.usize("cls_mlp_hidden")?,
            epochs: self.usize("cls_epochs")?,
            lr: self.f64("cls_lr")?,
            batch_size: self.usize("cls_batch_size")?,
            seed: self.seed()?,
            target_accuracy: self.opt_f64("cls_target_accuracy")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Writes the resolved config as `<name>.conf` inside `dir`.
    pub fn write_resolved(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(format!("{name}.conf"));
        fs::write(&path, self.render()).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Reads a config previously written by [`RunConfig::write_resolved`].
    pub fn read_resolved(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let profile = match parse_pairs(&text)?.iter().find(|(k, _)| k == "profile") {
            Some((_, v)) if v == "paper" => Profile::Paper,
            _ => Profile::Desk,
        };
        let mut cfg = RunConfig::profile(profile);
        cfg.apply(&text)?;
        Ok(cfg)
    }
}
