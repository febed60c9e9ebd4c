use serde::Serialize;

use crate::autograd::{Tape, Var};
use crate::data::{bucket_batches, Batch};
use crate::error::{Error, Result};
use crate::nn::Bound;
use crate::optim::{clip_by_value, Adam, AdamConfig};
use crate::rng::{self, SeedRng};
use crate::seq2seq::config::TrainConfig;
use crate::seq2seq::model::{Forward, Seq2SeqModel};
use crate::tensor::argmax;

/// Batches used when scoring; large enough to keep the tape short.
const EVAL_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Token-weighted mean training loss over the epoch.
    pub loss: f64,
    /// Teacher-forced token accuracy on the dev set, in percent.
    pub accuracy: f64,
    pub dev_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub tokens: f64,
    /// Value of the extra term, when one was given.
    pub extra: Option<f64>,
}

/// Extra scalar term built on the step's tape from the forward pass.
pub type ExtraLoss<'a> = &'a mut dyn FnMut(&mut Tape, &Bound, &Forward) -> Result<Var>;

/// Owns the optimizer state and the randomness of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    adam: Adam,
    batch_rng: SeedRng,
    dropout_rng: SeedRng,
}

impl Trainer {
    pub fn new(model: &Seq2SeqModel, config: TrainConfig) -> Result<Self> {
        let clip = config.clip.validated()?;
        if !(config.lr >= 0.0 && config.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and ≥ 0", config.lr)));
        }
        let adam = Adam::new(AdamConfig::with_lr(config.lr), &model.store);
        Ok(Trainer {
            batch_rng: rng::stream(config.seed, 1),
            dropout_rng: rng::stream(config.seed, 2),
            config: TrainConfig { clip, ..config },
            adam,
        })
    }

    /// Shuffled, length-bucketed batches for one epoch.
    pub fn epoch_batches(&mut self, seqs: &[Vec<usize>]) -> Vec<Batch> {
        let bs = self.config.batch_size_for(seqs.len());
        bucket_batches(seqs, bs, &mut self.batch_rng)
    }

    pub fn step(&mut self, model: &mut Seq2SeqModel, batch: &Batch) -> Result<StepStats> {
        self.step_with(model, batch, None)
    }

    /// backward → clip → Adam on `loss + weight · extra`.
    ///
    /// The extra term is always evaluated, but with a zero weight it is left
    /// out of the graph and the update equals a plain [`Trainer::step`].
    pub fn step_with(
        &mut self,
        model: &mut Seq2SeqModel,
        batch: &Batch,
        extra: Option<(f64, ExtraLoss<'_>)>,
    ) -> Result<StepStats> {
        let batch = model.prepare(batch);
        let mut tape = Tape::new();
        let bound = model.store.bind(&mut tape, true)?;
        let dropout = (model.config.dropout > 0.0).then_some(&mut self.dropout_rng);
        let fwd = model.forward(&mut tape, &bound, &batch, dropout)?;
        let loss_value = tape.value(fwd.loss.loss).item();
        if !loss_value.is_finite() {
            return Err(Error::NonFinite(format!("reconstruction loss is {loss_value}")));
        }
        let mut total = fwd.loss.loss;
        let mut extra_value = None;
        if let Some((weight, f)) = extra {
            let term = f(&mut tape, &bound, &fwd)?;
            let v = tape.value(term).item();
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("extra loss term is {v}")));
            }
            extra_value = Some(v);
            if weight != 0.0 {
                let scaled = tape.scale(term, weight)?;
                total = tape.add(total, scaled)?;
            }
        }
        let mut grads = tape.backward(total)?;
        let mut grads = model.store.gradients(&bound, &mut grads);
        clip_by_value(&mut grads, self.config.clip);
        self.adam.step(&mut model.store, &grads)?;
        Ok(StepStats {
            loss: loss_value,
            tokens: fwd.loss.total_weight,
            extra: extra_value,
        })
    }
}

/// Teacher-forced loss and token accuracy (percent) in eval mode.
///
/// Batches are formed in input order so the result does not depend on
/// any randomness.
pub fn evaluate(model: &Seq2SeqModel, seqs: &[Vec<usize>]) -> Result<(f64, f64)> {
    if seqs.is_empty() {
        return Err(Error::EmptyInput("evaluation set".into()));
    }
    let mut loss_sum = 0.0;
    let mut weight_sum = 0.0;
    let mut correct = 0usize;
    for chunk in seqs.chunks(EVAL_BATCH) {
        let refs: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
        let batch = model.prepare(&Batch::autoencoder(&refs));
        let mut tape = Tape::new();
        let bound = model.store.bind(&mut tape, false)?;
        let fwd = model.forward(&mut tape, &bound, &batch, None)?;
        loss_sum += tape.value(fwd.loss.loss).item() * fwd.loss.total_weight;
        weight_sum += fwd.loss.total_weight;
        let logits = tape.value(fwd.logits);
        let (targets, weights) = batch.flat_targets();
        for (r, (&t, &w)) in targets.iter().zip(&weights).enumerate() {
            if w > 0.0 && argmax(logits.row(r)) == t {
                correct += 1;
            }
        }
    }
    let loss = loss_sum / weight_sum;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("evaluation loss is {loss}")));
    }
    Ok((loss, 100.0 * correct as f64 / weight_sum))
}

/// Trains for `config.epochs` epochs, reporting each epoch to `on_epoch`.
///
/// On a numerical failure the parameters are rolled back to the start of
/// the failing epoch before the error is returned. Parameters are rounded
/// to f32 at the end so a checkpoint round trip is exact.
pub fn train(
    model: &mut Seq2SeqModel,
    train_seqs: &[Vec<usize>],
    dev_seqs: &[Vec<usize>],
    config: TrainConfig,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    let mut trainer = Trainer::new(model, config)?;
    run_epochs(model, &mut trainer, train_seqs, dev_seqs, None, |t, m, b| t.step(m, b), on_epoch)
}

/// The epoch loop behind [`train`], with a pluggable step. Stops early
/// once `max_steps` steps have run; a partial last epoch is still scored.
pub fn run_epochs(
    model: &mut Seq2SeqModel,
    trainer: &mut Trainer,
    train_seqs: &[Vec<usize>],
    dev_seqs: &[Vec<usize>],
    max_steps: Option<usize>,
    mut step: impl FnMut(&mut Trainer, &mut Seq2SeqModel, &Batch) -> Result<StepStats>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    if train_seqs.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    let mut history = Vec::with_capacity(trainer.config.epochs);
    let mut steps = 0;
    for epoch in 1..=trainer.config.epochs {
        if max_steps.is_some_and(|m| steps >= m) {
            break;
        }
        let last_good = model.store.clone();
        let mut run_epoch = || {
            let mut loss = 0.0;
            let mut tokens = 0.0;
            for batch in trainer.epoch_batches(train_seqs) {
                if max_steps.is_some_and(|m| steps >= m) {
                    break;
                }
                let s = step(trainer, model, &batch)?;
                steps += 1;
                loss += s.loss * s.tokens;
                tokens += s.tokens;
            }
            let (dev_loss, accuracy) = evaluate(model, dev_seqs)?;
            Ok::<_, Error>(EpochMetrics {
                epoch,
                loss: loss / tokens,
                accuracy,
                dev_loss,
            })
        };
        match run_epoch() {
            Ok(m) => {
                on_epoch(&m);
                let done = trainer.config.target_accuracy.is_some_and(|t| m.accuracy >= t);
                history.push(m);
                if done {
                    break;
                }
            }
            Err(e) => {
                model.store = last_good;
                return Err(e);
            }
        }
    }
    model.store.round_to_f32();
    Ok(history)
}
