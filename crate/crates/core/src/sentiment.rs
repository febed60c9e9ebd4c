//! Bidirectional LSTM sentiment classifier and the transfer-accuracy score.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::checkpoint::Checkpoint;
use crate::data::{bucket_indices, clean_text, Batch, Sentiment, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, Dense, Direction, Embedding, LstmStack, ParamStore};
use crate::optim::{clip_by_value, Adam, AdamConfig, ClipSpec};
use crate::rng::{self, SeedRng};
use crate::tensor::Tensor;

pub const CHECKPOINT_KIND: &str = "classifier";

const EVAL_BATCH: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub vocab_size: usize,
    pub embedding: usize,
    /// Per direction.
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub mlp_hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once dev accuracy (percent) reaches this value.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
}

impl ClassifierConfig {
    /// Small profile used for synthetic and desk-scale data.
    pub fn desk(vocab_size: usize) -> Self {
        ClassifierConfig {
            vocab_size,
            embedding: 32,
            hidden: 64,
            layers: 2,
            dropout: 0.2,
            mlp_hidden: 64,
            epochs: 20,
            lr: 0.01,
            batch_size: 32,
            seed: 2,
            target_accuracy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("classifier dropout {} outside [0, 1)", self.dropout)));
        }
        if self.vocab_size == 0 || self.embedding == 0 || self.hidden == 0 || self.layers == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("classifier sizes must be positive".into()));
        }
        if self.batch_size == 0 || !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("classifier batch size must be positive and lr finite".into()));
        }
        Ok(())
    }
}

/// A labeled, encoded sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub ids: Vec<usize>,
    pub label: Sentiment,
}

#[derive(Clone, Debug)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    embedding: Embedding,
    encoder: LstmStack,
    head: Dense,
    out: Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
}

impl Classifier {
    pub fn new(config: ClassifierConfig, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Config(format!(
                "classifier expects {} tokens, vocabulary has {}",
                config.vocab_size,
                vocab.len()
            )));
        }
        let mut rng = rng::stream(config.seed, 5);
        let mut store = ParamStore::new();
        let embedding = Embedding::new(&mut store, "cls.embedding", config.vocab_size, config.embedding, &mut rng);
        let encoder = LstmStack::new(
            &mut store,
            "cls.encoder",
            config.embedding,
            config.hidden,
            config.layers,
            Direction::Bidirectional,
            config.dropout,
            &mut rng,
        );
        let head = Dense::new(
            &mut store,
            "cls.head",
            encoder.output_width(),
            config.mlp_hidden,
            Activation::Tanh,
            &mut rng,
        );
        let out = Dense::new(&mut store, "cls.out", config.mlp_hidden, 1, Activation::None, &mut rng);
        Ok(Classifier {
            config,
            vocab,
            store,
            embedding,
            encoder,
            head,
            out,
        })
    }

    /// Logits `B × 1` for encoded sentences.
    fn logits(&self, tape: &mut Tape, bound: &Bound, seqs: &[&[usize]], rng: Option<&mut SeedRng>) -> Result<Var> {
        let batch = Batch::autoencoder(seqs);
        let inputs: Vec<Var> = batch
            .source
            .iter()
            .map(|ids| self.embedding.forward(tape, bound, ids))
            .collect::<Result<_>>()?;
        let run = self.encoder.run(tape, bound, &inputs, &batch.source_lengths, None, rng)?;
        let top = run.final_state.last().expect("classifier has layers").h;
        let h = self.head.forward(tape, bound, top)?;
        self.out.forward(tape, bound, h)
    }

    /// Binary cross-entropy, averaged over the batch.
    fn loss(tape: &mut Tape, logits: Var, labels: &[Sentiment]) -> Result<Var> {
        let signs: Vec<f64> = labels.iter().map(|l| 2.0 * l.as_f64() - 1.0).collect();
        let s = tape.constant(Tensor::new(vec![labels.len(), 1], signs)?)?;
        let z = tape.mul(logits, s)?;
        let ls = tape.log_sigmoid(z)?;
        let m = tape.mean(ls)?;
        tape.scale(m, -1.0)
    }

    /// Positive-class probabilities in evaluation mode, in input order.
    pub fn probabilities(&self, seqs: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(EVAL_BATCH) {
            if let Some(s) = chunk.iter().find(|s| s.is_empty()) {
                return Err(Error::EmptyInput(format!("cannot classify an empty sequence {s:?}")));
            }
            let refs: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
            let mut tape = Tape::new();
            let bound = self.store.bind(&mut tape, false)?;
            let z = self.logits(&mut tape, &bound, &refs, None)?;
            out.extend(tape.value(z).data().iter().map(|&z| crate::autograd::sigmoid(z)));
        }
        Ok(out)
    }

    /// `(label, p(positive))`; `p ≥ 0.5` means positive.
    pub fn classify(&self, sentence: &str) -> Result<(Sentiment, f64)> {
        let tokens = clean_text(sentence);
        if tokens.is_empty() {
            return Err(Error::EmptyInput(format!("sentence {sentence:?} is empty after cleaning")));
        }
        let p = self.probabilities(&[self.vocab.encode(&tokens)])?[0];
        Ok((label_of(p), p))
    }

    /// Mean loss and accuracy (percent) in evaluation mode.
    pub fn evaluate(&self, data: &[Labeled]) -> Result<(f64, f64)> {
        if data.is_empty() {
            return Err(Error::EmptyInput("classifier evaluation set".into()));
        }
        let mut loss = 0.0;
        let mut correct = 0;
        for chunk in data.chunks(EVAL_BATCH) {
            let refs: Vec<&[usize]> = chunk.iter().map(|d| d.ids.as_slice()).collect();
            let labels: Vec<Sentiment> = chunk.iter().map(|d| d.label).collect();
            let mut tape = Tape::new();
            let bound = self.store.bind(&mut tape, false)?;
            let z = self.logits(&mut tape, &bound, &refs, None)?;
            for (&zi, &l) in tape.value(z).data().iter().zip(&labels) {
                if label_of(crate::autograd::sigmoid(zi)) == l {
                    correct += 1;
                }
            }
            let l = Self::loss(&mut tape, z, &labels)?;
            loss += tape.value(l).item() * chunk.len() as f64;
        }
        let n = data.len() as f64;
        Ok((loss / n, 100.0 * correct as f64 / n))
    }

    /// Trains for `config.epochs` epochs with bucketed, shuffled batches.
    pub fn train(
        &mut self,
        train: &[Labeled],
        dev: &[Labeled],
        mut on_epoch: impl FnMut(&ClassifierEpoch),
    ) -> Result<Vec<ClassifierEpoch>> {
        if train.is_empty() {
            return Err(Error::EmptyInput("classifier training set".into()));
        }
        let mut adam = Adam::new(AdamConfig::with_lr(self.config.lr), &self.store);
        let mut batch_rng = rng::stream(self.config.seed, 6);
        let mut dropout_rng = rng::stream(self.config.seed, 7);
        let lengths: Vec<usize> = train.iter().map(|d| d.ids.len()).collect();
        let mut curves = Vec::with_capacity(self.config.epochs);
        for epoch in 1..=self.config.epochs {
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for group in bucket_indices(&lengths, self.config.batch_size, &mut batch_rng) {
                let refs: Vec<&[usize]> = group.iter().map(|&i| train[i].ids.as_slice()).collect();
                let labels: Vec<Sentiment> = group.iter().map(|&i| train[i].label).collect();
                let mut tape = Tape::new();
                let bound = self.store.bind(&mut tape, true)?;
                let z = self.logits(&mut tape, &bound, &refs, Some(&mut dropout_rng))?;
                for (&zi, &l) in tape.value(z).data().iter().zip(&labels) {
                    if label_of(crate::autograd::sigmoid(zi)) == l {
                        correct += 1;
                    }
                }
                let loss = Self::loss(&mut tape, z, &labels)?;
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!("classifier loss is {value}")));
                }
                loss_sum += value * group.len() as f64;
                let mut grads = tape.backward(loss)?;
                let mut grads = self.store.gradients(&bound, &mut grads);
                clip_by_value(&mut grads, ClipSpec::default());
                adam.step(&mut self.store, &grads)?;
            }
            let (dev_loss, dev_accuracy) = if dev.is_empty() { (f64::NAN, f64::NAN) } else { self.evaluate(dev)? };
            let n = train.len() as f64;
            let e = ClassifierEpoch {
                epoch,
                train_loss: loss_sum / n,
                train_accuracy: 100.0 * correct as f64 / n,
                dev_loss,
                dev_accuracy,
            };
            on_epoch(&e);
            let done = self.config.target_accuracy.is_some_and(|t| e.dev_accuracy >= t);
            curves.push(e);
            if done {
                break;
            }
        }
        self.store.round_to_f32();
        Ok(curves)
    }

    /// Checksum of the frozen parameters.
    pub fn checksum(&self) -> u64 {
        self.store.checksum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ck = Checkpoint::new(
            CHECKPOINT_KIND,
            &serde_json::json!({
                "classifier": self.config,
                "vocab": self.vocab.tokens(),
                "checksum": self.checksum().to_string(),
            }),
        )?;
        ck.add_store("", &self.store);
        ck.save(path)
    }

    /// Loads a classifier and verifies the recorded parameter checksum.
    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        ck.expect_kind(&[CHECKPOINT_KIND])?;
        let config: ClassifierConfig = ck.config_as("classifier")?;
        let vocab = Vocabulary::from_tokens(ck.config_as("vocab")?)?;
        let mut cls = Classifier::new(config, vocab)?;
        ck.fill_store("", &mut cls.store)?;
        let recorded: String = ck.config_as("checksum")?;
        if recorded != cls.checksum().to_string() {
            return Err(Error::CorruptCheckpoint {
                path: path.to_path_buf(),
                reason: "classifier parameters do not match the recorded checksum".into(),
            });
        }
        Ok(cls)
    }
}

fn label_of(p: f64) -> Sentiment {
    if p >= 0.5 {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    }
}

/// Encodes labeled token sequences, dropping the empty ones.
pub fn encode_labeled(vocab: &Vocabulary, data: &[(Vec<String>, Sentiment)]) -> Vec<Labeled> {
    data.iter()
        .filter(|(t, _)| !t.is_empty())
        .map(|(t, l)| Labeled {
            ids: vocab.encode(t),
            label: *l,
        })
        .collect()
}

/// Randomly permutes the labels of `data`, keeping the class counts.
pub fn shuffle_labels(data: &mut [Labeled], rng: &mut SeedRng) {
    let mut labels: Vec<Sentiment> = data.iter().map(|d| d.label).collect();
    labels.shuffle(rng);
    for (d, l) in data.iter_mut().zip(labels) {
        d.label = l;
    }
}

/// Percentage of `sentences` classified as `target`. Sentences that clean
/// to nothing count as failures.
pub fn transfer_accuracy<S: AsRef<str>>(classifier: &Classifier, sentences: &[S], target: Sentiment) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput("transfer accuracy needs at least one sentence".into()));
    }
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| classifier.vocab.encode(&clean_text(s.as_ref())))
        .collect();
    let scorable: Vec<Vec<usize>> = encoded.iter().filter(|e| !e.is_empty()).cloned().collect();
    let probs = classifier.probabilities(&scorable)?;
    let hits = probs.iter().filter(|&&p| label_of(p) == target).count();
    Ok(100.0 * hits as f64 / sentences.len() as f64)
}

/// One row of the evaluation report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    /// `None` when the model's checkpoint was missing.
    pub scores: Option<Scores>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub recon_loss: f64,
    pub recon_acc: f64,
    pub transfer_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub const HEADER: &'static str = "model,recon_loss,recon_acc,transfer_acc";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            match &r.scores {
                Some(x) => {
                    let _ = writeln!(s, "{},{:.4},{:.2},{:.2}", r.model, x.recon_loss, x.recon_acc, x.transfer_acc);
                }
                None => {
                    let _ = writeln!(s, "{},absent,absent,absent", r.model);
                }
            }
        }
        s
    }
}
