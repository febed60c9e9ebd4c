//! Adversarial training of a seq2seq autoencoder.
//!
//! A small discriminator looks at pooled top-layer decoder states. Real
//! features come from the style corpus, fake ones from uniformly random
//! token sequences pushed through the same decoder. The generator side adds
//! `λ · −log D(real features)` to its reconstruction loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::checkpoint::Checkpoint;
use crate::data::{Batch, RESERVED};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, Dense, ParamStore};
use crate::optim::{clip_by_value, Adam, AdamConfig, ClipSpec};
use crate::rng::{self, SeedRng};
use crate::seq2seq::{run_epochs, EpochMetrics, Forward, ModelConfig, Seq2SeqModel, StepStats, TrainConfig, Trainer};
use crate::tensor::Tensor;

pub const CHECKPOINT_KIND: &str = "adversarial";

/// Discriminator loss below which a step counts toward mode collapse.
pub const COLLAPSE_LOSS: f64 = 0.01;
/// Consecutive low-loss steps that trigger a warning.
pub const COLLAPSE_STEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvConfig {
    /// Weight of the generator's adversarial term.
    pub lambda: f64,
    /// Discriminator steps per generator step.
    pub disc_steps: usize,
    /// Discriminator learning rate.
    pub lr: f64,
    /// Generator step cap; 0 runs the full epoch budget.
    pub iterations: usize,
    /// Append the batch-mean feature to every discriminator input.
    pub minibatch_stat: bool,
    pub disc_hidden: usize,
}

impl Default for AdvConfig {
    fn default() -> Self {
        AdvConfig {
            lambda: 0.1,
            disc_steps: 1,
            lr: 1e-4,
            iterations: 2000,
            minibatch_stat: true,
            disc_hidden: 64,
        }
    }
}

impl AdvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and ≥ 0", self.lambda)));
        }
        if self.disc_steps == 0 {
            return Err(Error::Config("disc_steps must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || self.disc_hidden == 0 {
            return Err(Error::Config("discriminator lr must be ≥ 0 and disc_hidden positive".into()));
        }
        Ok(())
    }
}

/// Masked mean of the decoder's top-layer states over real target steps.
/// Gradients flow back into the decoder.
pub fn decoder_features(tape: &mut Tape, fwd: &Forward, batch: &Batch) -> Result<Var> {
    let rows = batch.size();
    let width = tape.shape(fwd.decoder_top[0])[1];
    let expand = |col: &[f64]| -> Result<Tensor> {
        Tensor::new(
            vec![rows, width],
            col.iter().flat_map(|&v| std::iter::repeat_n(v, width)).collect(),
        )
    };
    let mut acc: Option<Var> = None;
    for (t, &h) in fwd.decoder_top.iter().enumerate() {
        let mask = tape.constant(expand(&batch.weights[t])?)?;
        let term = tape.mul(h, mask)?;
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term)?,
        });
    }
    let inv: Vec<f64> = batch.target_lengths.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
    let inv = tape.constant(expand(&inv)?)?;
    let acc = acc.expect("decoder produced no steps");
    tape.mul(acc, inv)
}

/// Empirical distribution of training sentence lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthHistogram {
    lengths: Vec<usize>,
}

impl LengthHistogram {
    pub fn from_seqs(seqs: &[Vec<usize>]) -> Result<Self> {
        let mut lengths: Vec<usize> = seqs.iter().map(Vec::len).filter(|&n| n > 0).collect();
        if lengths.is_empty() {
            return Err(Error::EmptyInput("length histogram".into()));
        }
        lengths.sort_unstable();
        Ok(LengthHistogram { lengths })
    }

    pub fn sample(&self, rng: &mut SeedRng) -> usize {
        self.lengths[rng.gen_range(0..self.lengths.len())]
    }

    /// Fraction of training sentences with length ≤ `n`.
    pub fn cdf(&self, n: usize) -> f64 {
        self.lengths.partition_point(|&l| l <= n) as f64 / self.lengths.len() as f64
    }

    pub fn max(&self) -> usize {
        *self.lengths.last().unwrap()
    }
}

/// `n` random sequences: lengths from `hist`, tokens uniform over the
/// non-reserved ids of a vocabulary of `vocab_size`.
pub fn sample_fake_batch(vocab_size: usize, hist: &LengthHistogram, n: usize, rng: &mut SeedRng) -> Vec<Vec<usize>> {
    let words = RESERVED.len()..vocab_size;
    (0..n)
        .map(|_| {
            let len = hist.sample(rng);
            (0..len).map(|_| rng.gen_range(words.clone())).collect()
        })
        .collect()
}

/// Two dense layers over a pooled feature vector, producing one logit.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub store: ParamStore,
    pub hidden: Dense,
    pub output: Dense,
    pub feature_width: usize,
    pub minibatch_stat: bool,
}

impl Discriminator {
    pub fn new(feature_width: usize, cfg: &AdvConfig, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 4);
        let mut store = ParamStore::new();
        let input = if cfg.minibatch_stat { 2 * feature_width } else { feature_width };
        let hidden = Dense::new(&mut store, "disc.l0", input, cfg.disc_hidden, Activation::Tanh, &mut rng);
        let output = Dense::new(&mut store, "disc.l1", cfg.disc_hidden, 1, Activation::None, &mut rng);
        Discriminator {
            store,
            hidden,
            output,
            feature_width,
            minibatch_stat: cfg.minibatch_stat,
        }
    }

    /// Logits `B × 1` for features `B × feature_width`.
    pub fn logits(&self, tape: &mut Tape, bound: &Bound, features: Var) -> Result<Var> {
        let shape = tape.shape(features).to_vec();
        if shape.len() != 2 || shape[1] != self.feature_width || shape[0] == 0 {
            return Err(Error::shape("discriminator", &shape, &[0, self.feature_width]));
        }
        let x = if self.minibatch_stat {
            let rows = shape[0];
            let avg = tape.constant(Tensor::full(&[rows, rows], 1.0 / rows as f64))?;
            let mean = tape.matmul(avg, features)?;
            tape.concat(&[features, mean], 1)?
        } else {
            features
        };
        let h = self.hidden.forward(tape, bound, x)?;
        self.output.forward(tape, bound, h)
    }

    /// Probability of "real" for each row, in eval mode.
    pub fn probabilities(&self, features: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape, false)?;
        let f = tape.constant(features.clone())?;
        let z = self.logits(&mut tape, &bound, f)?;
        Ok(tape.value(z).data().iter().map(|&z| crate::autograd::sigmoid(z)).collect())
    }
}

/// `0.5 · (mean −log D(real) + mean −log(1 − D(fake)))` on the tape.
pub fn discriminator_loss(tape: &mut Tape, disc: &Discriminator, bound: &Bound, real: Var, fake: Var) -> Result<Var> {
    let zr = disc.logits(tape, bound, real)?;
    let zf = disc.logits(tape, bound, fake)?;
    let lr = tape.log_sigmoid(zr)?;
    let nzf = tape.scale(zf, -1.0)?;
    let lf = tape.log_sigmoid(nzf)?;
    let mr = tape.mean(lr)?;
    let mf = tape.mean(lf)?;
    let both = tape.add(mr, mf)?;
    tape.scale(both, -0.5)
}

/// One discriminator update on fixed features; returns the loss before it.
pub fn discriminator_step(
    disc: &mut Discriminator,
    adam: &mut Adam,
    clip: ClipSpec,
    real: &Tensor,
    fake: &Tensor,
) -> Result<f64> {
    if real.rows() == 0 || fake.rows() == 0 {
        return Err(Error::EmptyInput("discriminator batch".into()));
    }
    let mut tape = Tape::new();
    let bound = disc.store.bind(&mut tape, true)?;
    let r = tape.constant(real.clone())?;
    let f = tape.constant(fake.clone())?;
    let loss = discriminator_loss(&mut tape, disc, &bound, r, f)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("discriminator loss is {value}")));
    }
    let mut grads = tape.backward(loss)?;
    let mut grads = disc.store.gradients(&bound, &mut grads);
    clip_by_value(&mut grads, clip);
    adam.step(&mut disc.store, &grads)?;
    Ok(value)
}

/// Pooled decoder features of `batch` with the model frozen.
pub fn features_of(model: &Seq2SeqModel, batch: &Batch) -> Result<Tensor> {
    let batch = model.prepare(batch);
    let mut tape = Tape::new();
    let bound = model.store.bind(&mut tape, false)?;
    let fwd = model.forward(&mut tape, &bound, &batch, None)?;
    let f = decoder_features(&mut tape, &fwd, &batch)?;
    Ok(tape.value(f).clone())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvStepStats {
    pub recon_loss: f64,
    /// Generator adversarial term, `mean −log D(real features)`.
    pub adv_loss: f64,
    /// Last discriminator loss of the step.
    pub disc_loss: f64,
    pub tokens: f64,
}

/// Generator and discriminator with separate Adam states.
#[derive(Clone, Debug)]
pub struct AdversarialTrainer {
    pub config: AdvConfig,
    pub disc: Discriminator,
    disc_adam: Adam,
    clip: ClipSpec,
    fake_rng: SeedRng,
    lengths: LengthHistogram,
    low_streak: usize,
    pub collapse_warnings: Vec<usize>,
    pub steps: usize,
}

impl AdversarialTrainer {
    pub fn new(model: &Seq2SeqModel, train_seqs: &[Vec<usize>], config: AdvConfig, train: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let disc = Discriminator::new(model.config.hidden, &config, train.seed);
        Self::with_discriminator(disc, train_seqs, config, train)
    }

    pub fn with_discriminator(
        disc: Discriminator,
        train_seqs: &[Vec<usize>],
        config: AdvConfig,
        train: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(AdversarialTrainer {
            disc_adam: Adam::new(AdamConfig::with_lr(config.lr), &disc.store),
            clip: train.clip.validated()?,
            fake_rng: rng::stream(train.seed, 3),
            lengths: LengthHistogram::from_seqs(train_seqs)?,
            low_streak: 0,
            collapse_warnings: Vec::new(),
            steps: 0,
            disc,
            config,
        })
    }

    fn fake_batch(&mut self, vocab_size: usize, n: usize) -> Batch {
        let seqs = sample_fake_batch(vocab_size, &self.lengths, n, &mut self.fake_rng);
        let refs: Vec<&[usize]> = seqs.iter().map(Vec::as_slice).collect();
        Batch::autoencoder(&refs)
    }

    /// `disc_steps` discriminator updates, then one generator update.
    pub fn step(&mut self, trainer: &mut Trainer, model: &mut Seq2SeqModel, batch: &Batch) -> Result<AdvStepStats> {
        let mut disc_loss = f64::NAN;
        let real = features_of(model, batch)?;
        for _ in 0..self.config.disc_steps {
            let fake = self.fake_batch(model.config.vocab_size, batch.size());
            let fake = features_of(model, &fake)?;
            disc_loss = discriminator_step(&mut self.disc, &mut self.disc_adam, self.clip, &real, &fake)?;
        }
        self.steps += 1;
        if disc_loss < COLLAPSE_LOSS {
            self.low_streak += 1;
            if self.low_streak == COLLAPSE_STEPS {
                log::warn!(
                    "possible mode collapse: discriminator loss below {COLLAPSE_LOSS} for {COLLAPSE_STEPS} steps (step {})",
                    self.steps
                );
                self.collapse_warnings.push(self.steps);
            }
        } else {
            self.low_streak = 0;
        }

        let disc = &self.disc;
        let weights_batch = batch;
        let mut term = |tape: &mut Tape, _: &Bound, fwd: &Forward| -> Result<Var> {
            let dbound = disc.store.bind(tape, false)?;
            let feats = decoder_features(tape, fwd, weights_batch)?;
            let z = disc.logits(tape, &dbound, feats)?;
            let ls = tape.log_sigmoid(z)?;
            let m = tape.mean(ls)?;
            tape.scale(m, -1.0)
        };
        let s: StepStats = trainer.step_with(model, batch, Some((self.config.lambda, &mut term)))?;
        Ok(AdvStepStats {
            recon_loss: s.loss,
            adv_loss: s.extra.unwrap_or(f64::NAN),
            disc_loss,
            tokens: s.tokens,
        })
    }
}

/// Per-epoch adversarial diagnostics, alongside the usual metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdvEpochMetrics {
    pub epoch: usize,
    pub disc_loss: f64,
    pub adv_loss: f64,
}

#[derive(Clone, Debug)]
pub struct AdvRun {
    pub metrics: Vec<EpochMetrics>,
    pub adversarial: Vec<AdvEpochMetrics>,
    pub trainer: AdversarialTrainer,
}

/// Same epoch loop as plain training, with adversarial steps. With
/// `lambda = 0` the model follows the plain trajectory exactly.
pub fn train_adversarial(
    model: &mut Seq2SeqModel,
    train_seqs: &[Vec<usize>],
    dev_seqs: &[Vec<usize>],
    train: TrainConfig,
    adv: AdvConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<AdvRun> {
    let mut trainer = Trainer::new(model, train.clone())?;
    let mut adv_trainer = AdversarialTrainer::new(model, train_seqs, adv.clone(), &train)?;
    let cap = (adv.iterations > 0).then_some(adv.iterations);
    let sums = std::cell::Cell::new((0.0, 0.0, 0usize));
    let mut adversarial = Vec::new();
    let metrics = run_epochs(
        model,
        &mut trainer,
        train_seqs,
        dev_seqs,
        cap,
        |t, m, b| {
            let s = adv_trainer.step(t, m, b)?;
            let (d, a, n) = sums.get();
            sums.set((d + s.disc_loss, a + s.adv_loss, n + 1));
            Ok(StepStats {
                loss: s.recon_loss,
                tokens: s.tokens,
                extra: Some(s.adv_loss),
            })
        },
        |m| {
            let (d, a, n) = sums.replace((0.0, 0.0, 0));
            let n = n.max(1) as f64;
            adversarial.push(AdvEpochMetrics {
                epoch: m.epoch,
                disc_loss: d / n,
                adv_loss: a / n,
            });
            on_epoch(m);
        },
    )?;
    adv_trainer.disc.store.round_to_f32();
    Ok(AdvRun {
        metrics,
        adversarial,
        trainer: adv_trainer,
    })
}

pub fn save(path: &std::path::Path, model: &Seq2SeqModel, disc: &Discriminator, adv: &AdvConfig) -> Result<()> {
    let mut ck = Checkpoint::new(
        CHECKPOINT_KIND,
        &serde_json::json!({ "model": model.config, "adversarial": adv, "feature_width": disc.feature_width }),
    )?;
    ck.add_store("", &model.store);
    ck.add_store("", &disc.store);
    ck.save(path)
}

pub fn load(path: &std::path::Path) -> Result<(Seq2SeqModel, Discriminator, AdvConfig)> {
    let ck = Checkpoint::load(path)?;
    ck.expect_kind(&[CHECKPOINT_KIND])?;
    let model = Seq2SeqModel::from_checkpoint(&ck)?;
    let adv: AdvConfig = ck.config_as("adversarial")?;
    let cfg: ModelConfig = ck.config_as("model")?;
    let mut disc = Discriminator::new(cfg.hidden, &adv, 0);
    ck.fill_store("", &mut disc.store)?;
    Ok((model, disc, adv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::{ModelConfig, Variant};

    fn model(hidden: usize) -> Seq2SeqModel {
        let mut cfg = ModelConfig::new(Variant::Vanilla, 15);
        cfg.embedding = 4;
        cfg.hidden = hidden;
        Seq2SeqModel::new(cfg).unwrap()
    }

    fn features(m: &Seq2SeqModel, batch: &Batch) -> Tensor {
        features_of(m, batch).unwrap()
    }

    #[test]
    fn single_step_feature_is_that_state() {
        let m = model(5);
        let batch = Batch::new(&[&[4, 5]], &[&[]]);
        let mut tape = Tape::new();
        let bound = m.store.bind(&mut tape, false).unwrap();
        let fwd = m.forward(&mut tape, &bound, &batch, None).unwrap();
        let f = decoder_features(&mut tape, &fwd, &batch).unwrap();
        assert_eq!(tape.value(f), tape.value(fwd.decoder_top[0]));
    }

    #[test]
    fn padding_leaves_features_unchanged() {
        let m = model(5);
        let batch = Batch::autoencoder(&[&[4, 5, 6], &[7]]);
        assert_eq!(features(&m, &batch), features(&m, &batch.pad_more(3)));
    }

    #[test]
    fn zero_model_gives_zero_features() {
        let mut m = model(5);
        m.store.iter_mut().for_each(|p| p.value = Tensor::zeros(p.value.shape()));
        let f = features(&m, &Batch::autoencoder(&[&[4, 5], &[6]]));
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fake_batches() {
        let hist = LengthHistogram::from_seqs(&[vec![4, 4], vec![4; 5]]).unwrap();
        let one = sample_fake_batch(5, &hist, 20, &mut rng::seeded(1));
        assert!(one.iter().flatten().all(|&t| t == 4));
        let a = sample_fake_batch(30, &hist, 20, &mut rng::seeded(7));
        let b = sample_fake_batch(30, &hist, 20, &mut rng::seeded(7));
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.len() == 2 || s.len() == 5));
        assert!(a.iter().flatten().all(|&t| (4..30).contains(&t)));
    }

    #[test]
    fn fake_lengths_follow_the_histogram() {
        let mut r = rng::seeded(11);
        let train: Vec<Vec<usize>> = (0..500).map(|_| vec![4; r.gen_range(1..=10)]).collect();
        let hist = LengthHistogram::from_seqs(&train).unwrap();
        let fake = sample_fake_batch(20, &hist, 10_000, &mut rng::seeded(3));
        let n = fake.len() as f64;
        let ks = (1..=10)
            .map(|l| {
                let emp = fake.iter().filter(|s| s.len() <= l).count() as f64 / n;
                (emp - hist.cdf(l)).abs()
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.1, "KS distance {ks}");
    }

    fn disc(width: usize, stat: bool) -> Discriminator {
        let cfg = AdvConfig {
            minibatch_stat: stat,
            disc_hidden: 8,
            ..AdvConfig::default()
        };
        Discriminator::new(width, &cfg, 2)
    }

    #[test]
    fn uninformative_discriminator_costs_ln2() {
        let mut d = disc(3, true);
        let w = d.output.weight;
        *d.store.get_mut(w) = Tensor::zeros(&[8, 1]);
        let f = Tensor::new(vec![2, 3], vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let mut adam = Adam::new(AdamConfig::with_lr(0.0), &d.store);
        let loss = discriminator_step(&mut d, &mut adam, ClipSpec::default(), &f, &f).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    fn separable() -> (Tensor, Tensor) {
        let real = Tensor::new(vec![4, 2], vec![1.0, 1.0, 1.2, 0.8, 0.9, 1.1, 1.1, 1.0]).unwrap();
        let fake = Tensor::new(vec![4, 2], vec![-1.0, -1.0, -0.8, -1.2, -1.1, -0.9, -1.0, -1.1]).unwrap();
        (real, fake)
    }

    #[test]
    fn separable_features_drive_the_loss_down() {
        let (real, fake) = separable();
        let mut d = disc(2, false);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), &d.store);
        let losses: Vec<f64> = (0..400)
            .map(|_| discriminator_step(&mut d, &mut adam, ClipSpec::default(), &real, &fake).unwrap())
            .collect();
        let smooth: Vec<f64> = losses.windows(5).take(46).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        assert!(smooth.windows(2).all(|w| w[1] < w[0]));
        assert!(*losses.last().unwrap() < 0.01);
    }

    #[test]
    fn identical_sets_settle_at_one_half() {
        let (real, _) = separable();
        let mut d = disc(2, true);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), &d.store);
        for _ in 0..500 {
            discriminator_step(&mut d, &mut adam, ClipSpec::default(), &real, &real).unwrap();
        }
        for p in d.probabilities(&real).unwrap() {
            assert!((p - 0.5).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn bias_only_optimum_by_grid_search() {
        // Loss of a constant output logit b on identical sets is minimised
        // at b = 0, i.e. D = 0.5.
        let loss = |b: f64| -0.5 * (crate::autograd::log_sigmoid(b) + crate::autograd::log_sigmoid(-b));
        let best = (-400..=400)
            .map(|i| i as f64 / 100.0)
            .min_by(|a, b| loss(*a).partial_cmp(&loss(*b)).unwrap())
            .unwrap();
        assert_eq!(best, 0.0);
    }

    #[test]
    fn without_the_statistic_rows_are_independent() {
        let d = disc(3, false);
        let a = Tensor::new(vec![2, 3], vec![0.1, 0.2, 0.3, 5.0, 5.0, 5.0]).unwrap();
        let b = Tensor::new(vec![2, 3], vec![0.1, 0.2, 0.3, -9.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.probabilities(&a).unwrap()[0], d.probabilities(&b).unwrap()[0]);
        let d = disc(3, true);
        assert_ne!(d.probabilities(&a).unwrap()[0], d.probabilities(&b).unwrap()[0]);
    }

    #[test]
    fn each_side_leaves_the_other_alone() {
        let mut m = model(6);
        let seqs = vec![vec![4, 5, 6], vec![7, 8], vec![9, 10, 11, 12]];
        let tc = TrainConfig::default();
        let mut trainer = Trainer::new(&m, tc.clone()).unwrap();
        let mut adv = AdversarialTrainer::new(&m, &seqs, AdvConfig::default(), &tc).unwrap();
        let batch = Batch::autoencoder(&[&seqs[0], &seqs[1]]);

        let model_sum = m.store.checksum();
        let real = features_of(&m, &batch).unwrap();
        let fake = features_of(&m, &adv.fake_batch(15, 2)).unwrap();
        let disc_sum = adv.disc.store.checksum();
        discriminator_step(&mut adv.disc, &mut adv.disc_adam, adv.clip, &real, &fake).unwrap();
        assert_eq!(m.store.checksum(), model_sum);
        assert_ne!(adv.disc.store.checksum(), disc_sum);

        let disc_sum = adv.disc.store.checksum();
        let d = &adv.disc;
        let mut term = |tape: &mut Tape, _: &Bound, fwd: &Forward| -> Result<Var> {
            let db = d.store.bind(tape, false)?;
            let f = decoder_features(tape, fwd, &batch)?;
            let z = d.logits(tape, &db, f)?;
            let l = tape.log_sigmoid(z)?;
            tape.mean(l)
        };
        trainer.step_with(&mut m, &batch, Some((0.5, &mut term))).unwrap();
        assert_ne!(m.store.checksum(), model_sum);
        assert_eq!(adv.disc.store.checksum(), disc_sum);

        adv.step(&mut trainer, &mut m, &batch).unwrap();
    }

    #[test]
    fn zero_lambda_matches_plain_training() {
        let seqs: Vec<Vec<usize>> = (0..12).map(|i| vec![4 + i % 9, 5 + i % 7, 6]).collect();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let mut plain = model(6);
        let mut adv = plain.clone();
        let a = crate::seq2seq::train(&mut plain, &seqs, &seqs, tc.clone(), |_| {}).unwrap();
        let cfg = AdvConfig {
            lambda: 0.0,
            iterations: 0,
            ..AdvConfig::default()
        };
        let b = train_adversarial(&mut adv, &seqs, &seqs, tc, cfg, |_| {}).unwrap();
        assert_eq!(a, b.metrics);
        assert_eq!(plain.store.checksum(), adv.store.checksum());
        assert_eq!(b.adversarial.len(), 3);
    }

    #[test]
    fn checkpoint_carries_both_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adv.ckpt");
        let m = model(4);
        let cfg = AdvConfig::default();
        let d = Discriminator::new(4, &cfg, 9);
        save(&path, &m, &d, &cfg).unwrap();
        let (m2, d2, cfg2) = load(&path).unwrap();
        assert_eq!(m2.store.checksum(), m.store.checksum());
        assert_eq!(d2.store.checksum(), d.store.checksum());
        assert_eq!(cfg2, cfg);
        assert_eq!(Seq2SeqModel::load(&path).unwrap().store.checksum(), m.store.checksum());
    }
}
