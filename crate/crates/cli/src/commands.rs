use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use styleshift_core::adversarial::{self, AdvEpochMetrics};
use styleshift_core::data::{
    self, read_splits, BalancedSplits, PreprocessStats, Sentiment, Vocabulary, RESERVED,
};
use styleshift_core::sentiment::{
    encode_labeled, transfer_accuracy, Classifier, ClassifierEpoch, EvalReport, ReportRow, Scores,
};
use styleshift_core::seq2seq::{self, style_corpus, EpochMetrics, Seq2SeqModel, Variant};
use styleshift_core::{Error, Result};

use crate::config::RunConfig;
use crate::plot::{line_chart, Series};

pub const MODEL_FILE: &str = "model.ckpt";
pub const CLASSIFIER_FILE: &str = "classifier.ckpt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SAMPLES_FILE: &str = "samples.tsv";

/// Maps an error to the process exit code: 1 config, 2 data, 3 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::NonFinite(_) => 3,
        _ => 2,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Cleans, labels, balances and splits a file of JSON review records.
pub fn preprocess(raw: &Path, out: &Path, cfg: &RunConfig) -> Result<PreprocessStats> {
    let text = fs::read_to_string(raw).map_err(|e| Error::Data(format!("cannot read {}: {e}", raw.display())))?;
    let result = data::preprocess(text.lines(), cfg.seed()?)?;
    create_dir(out)?;
    data::write_splits(out, &result.splits)?;
    let stats_dir = out.join("stats");
    create_dir(&stats_dir)?;
    let st = &result.stats;
    write(&stats_dir.join("summary.csv"), &st.summary_csv())?;
    write(&stats_dir.join("splits.csv"), &st.splits_csv())?;
    write(&stats_dir.join("class_balance.csv"), &st.class_balance_csv())?;
    write(&stats_dir.join("length_histogram.csv"), &st.length_histogram_csv())?;
    cfg.write_resolved(out, "preprocess")?;
    Ok(result.stats)
}

/// Shared vocabulary over both classes' training splits.
pub fn build_vocab(data_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<Vocabulary> {
    let splits = read_splits(data_dir)?;
    let vocab = Vocabulary::build(
        splits
            .positive
            .train
            .iter()
            .chain(&splits.negative.train)
            .map(Vec::as_slice),
        cfg.usize("max_vocab")?,
    )?;
    create_dir(out)?;
    vocab.save(&out.join(VOCAB_FILE))?;
    cfg.write_resolved(out, "build-vocab")?;
    Ok(vocab)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainKind {
    Seq2Seq(Variant),
    Adversarial,
    Classifier,
}

impl FromStr for TrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" => Ok(TrainKind::Adversarial),
            "classifier" => Ok(TrainKind::Classifier),
            other => other.parse().map(TrainKind::Seq2Seq),
        }
    }
}

fn load_shared_vocab(data_dir: &Path) -> Result<Vocabulary> {
    let path = data_dir.join(VOCAB_FILE);
    if !path.exists() {
        return Err(Error::Data(format!(
            "missing vocabulary {}; run build-vocab first",
            path.display()
        )));
    }
    Vocabulary::load(&path)
}

fn metrics_csv(rows: impl IntoIterator<Item = (usize, f64, f64)>) -> String {
    let mut s = String::from("epoch,loss,accuracy\n");
    for (e, l, a) in rows {
        let _ = writeln!(s, "{e},{l:.6},{a:.4}");
    }
    s
}

fn write_curves(out: &Path, what: &str, loss: Vec<Series<'_>>, acc: Vec<Series<'_>>) -> Result<()> {
    write(
        &out.join("loss.svg"),
        &line_chart(&format!("{what} loss"), "epoch", "loss", &loss),
    )?;
    write(
        &out.join("accuracy.svg"),
        &line_chart(&format!("{what} accuracy"), "epoch", "accuracy (%)", &acc),
    )
}

fn seq2seq_curves(out: &Path, what: &str, hist: &[EpochMetrics]) -> Result<()> {
    let pts = |f: fn(&EpochMetrics) -> f64| hist.iter().map(|m| (m.epoch as f64, f(m))).collect();
    write_curves(
        out,
        what,
        vec![
            Series { name: "train", points: pts(|m| m.loss) },
            Series { name: "dev", points: pts(|m| m.dev_loss) },
        ],
        vec![Series { name: "dev", points: pts(|m| m.accuracy) }],
    )
}

#[derive(Clone, Debug)]
pub enum TrainOutcome {
    Seq2Seq(Vec<EpochMetrics>),
    Adversarial(Vec<EpochMetrics>, Vec<AdvEpochMetrics>),
    Classifier(Vec<ClassifierEpoch>),
}

/// Trains one model and writes its checkpoint, metrics CSV, curves and
/// resolved config into `out`.
pub fn train(kind: TrainKind, data_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<TrainOutcome> {
    let splits = read_splits(data_dir)?;
    create_dir(out)?;
    cfg.write_resolved(out, "train")?;
    match kind {
        TrainKind::Classifier => train_classifier(&splits, data_dir, out, cfg),
        TrainKind::Seq2Seq(v) => train_seq2seq(v, false, &splits, data_dir, out, cfg),
        TrainKind::Adversarial => train_seq2seq(Variant::Vanilla, true, &splits, data_dir, out, cfg),
    }
}

fn train_seq2seq(
    variant: Variant,
    adversarial_run: bool,
    splits: &BalancedSplits,
    data_dir: &Path,
    out: &Path,
    cfg: &RunConfig,
) -> Result<TrainOutcome> {
    let shared = if variant.reduced() {
        Vocabulary::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect())?
    } else {
        load_shared_vocab(data_dir)?
    };
    let style = cfg.style()?;
    let corpus = style_corpus(
        variant,
        splits.of(style),
        &shared,
        cfg.usize("max_vocab")?,
        cfg.usize("reduced_records")?,
        cfg.seed()?,
    )?;
    if corpus.dev.is_empty() {
        return Err(Error::Data(format!("{style} dev split is empty")));
    }
    corpus.vocab.save(&out.join(VOCAB_FILE))?;
    let mut model = Seq2SeqModel::new(cfg.model_config(variant, corpus.vocab.len())?)?;
    let tc = cfg.train_config()?;
    let log_epoch = |m: &EpochMetrics| {
        log::info!(
            "epoch {} loss {:.4} dev loss {:.4} dev acc {:.2}%",
            m.epoch,
            m.loss,
            m.dev_loss,
            m.accuracy
        )
    };
    let outcome = if adversarial_run {
        let adv = cfg.adv_config()?;
        let run = adversarial::train_adversarial(&mut model, &corpus.train, &corpus.dev, tc, adv.clone(), log_epoch)?;
        adversarial::save(&out.join(MODEL_FILE), &model, &run.trainer.disc, &adv)?;
        let mut s = String::from("epoch,disc_loss,adv_loss\n");
        for a in &run.adversarial {
            let _ = writeln!(s, "{},{:.6},{:.6}", a.epoch, a.disc_loss, a.adv_loss);
        }
        write(&out.join("adversarial.csv"), &s)?;
        if !run.trainer.collapse_warnings.is_empty() {
            log::warn!("discriminator collapse warnings at steps {:?}", run.trainer.collapse_warnings);
        }
        TrainOutcome::Adversarial(run.metrics, run.adversarial)
    } else {
        let hist = seq2seq::train(&mut model, &corpus.train, &corpus.dev, tc, log_epoch)?;
        model.save(&out.join(MODEL_FILE))?;
        TrainOutcome::Seq2Seq(hist)
    };
    let hist = match &outcome {
        TrainOutcome::Seq2Seq(h) | TrainOutcome::Adversarial(h, _) => h,
        TrainOutcome::Classifier(_) => unreachable!(),
    };
    write(
        &out.join(METRICS_FILE),
        &metrics_csv(hist.iter().map(|m| (m.epoch, m.loss, m.accuracy))),
    )?;
    let what = if adversarial_run { "Adversarial" } else { variant.label() };
    seq2seq_curves(out, what, hist)?;
    Ok(outcome)
}

fn labeled(splits: &BalancedSplits, pick: fn(&data::Splits) -> &[Vec<String>]) -> Vec<(Vec<String>, Sentiment)> {
    let mut out = Vec::new();
    for s in Sentiment::ALL {
        out.extend(pick(splits.of(s)).iter().map(|t| (t.clone(), s)));
    }
    out
}

fn train_classifier(splits: &BalancedSplits, data_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<TrainOutcome> {
    let vocab = load_shared_vocab(data_dir)?;
    let train = encode_labeled(&vocab, &labeled(splits, |s| &s.train));
    let dev = encode_labeled(&vocab, &labeled(splits, |s| &s.dev));
    if dev.is_empty() {
        return Err(Error::Data("classifier dev split is empty".into()));
    }
    let mut cls = Classifier::new(cfg.classifier_config(vocab.len())?, vocab)?;
    let curves = cls.train(&train, &dev, |e| {
        log::info!(
            "epoch {} train loss {:.4} acc {:.2}% dev loss {:.4} acc {:.2}%",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            e.dev_loss,
            e.dev_accuracy
        )
    })?;
    cls.save(&out.join(CLASSIFIER_FILE))?;
    write(
        &out.join(METRICS_FILE),
        &metrics_csv(curves.iter().map(|e| (e.epoch, e.train_loss, e.dev_accuracy))),
    )?;
    let mut s = String::from("epoch,train_loss,train_accuracy,dev_loss,dev_accuracy\n");
    for e in &curves {
        let _ = writeln!(
            s,
            "{},{:.6},{:.4},{:.6},{:.4}",
            e.epoch, e.train_loss, e.train_accuracy, e.dev_loss, e.dev_accuracy
        );
    }
    write(&out.join("curves.csv"), &s)?;
    let pts = |f: fn(&ClassifierEpoch) -> f64| curves.iter().map(|e| (e.epoch as f64, f(e))).collect();
    write_curves(
        out,
        "Sentiment classifier",
        vec![
            Series { name: "train", points: pts(|e| e.train_loss) },
            Series { name: "dev", points: pts(|e| e.dev_loss) },
        ],
        vec![
            Series { name: "train", points: pts(|e| e.train_accuracy) },
            Series { name: "dev", points: pts(|e| e.dev_accuracy) },
        ],
    )?;
    Ok(TrainOutcome::Classifier(curves))
}

/// Transfers one sentence through a saved style model.
pub fn transfer(sentence: &str, checkpoint: &Path, vocab: &Path, max_len: usize) -> Result<String> {
    let model = Seq2SeqModel::load(checkpoint)?;
    let vocab = Vocabulary::load(vocab)?;
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Data(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    model.transfer(sentence, &vocab, max_len)
}

/// A trained style model as found in a models directory.
struct StyleModel {
    model: Seq2SeqModel,
    vocab: Vocabulary,
    style: Sentiment,
}

fn load_style_model(dir: &Path) -> Result<StyleModel> {
    let model = Seq2SeqModel::load(&dir.join(MODEL_FILE))?;
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    let style = RunConfig::read_resolved(&dir.join("train.conf"))?.style()?;
    Ok(StyleModel { model, vocab, style })
}

impl StyleModel {
    fn transfer_all(&self, sentences: &[Vec<String>], max_len: usize) -> Result<Vec<String>> {
        let ids: Vec<Vec<usize>> = sentences.iter().map(|s| self.vocab.encode(s)).collect();
        let mut out = Vec::with_capacity(ids.len());
        for chunk in ids.chunks(64) {
            for seq in self.model.reconstruct(chunk, max_len)? {
                out.push(self.vocab.decode(&seq).join(" "));
            }
        }
        Ok(out)
    }

    fn score(&self, splits: &BalancedSplits, cls: &Classifier, max_len: usize) -> Result<Scored> {
        let own: Vec<Vec<usize>> = splits.of(self.style).test.iter().map(|s| self.vocab.encode(s)).collect();
        let (recon_loss, recon_acc) = seq2seq::evaluate(&self.model, &own)?;
        let transferred = self.transfer_all(&splits.of(self.style.opposite()).test, max_len)?;
        let transfer_acc = transfer_accuracy(cls, &transferred, self.style)?;
        Ok(Scored {
            scores: Scores {
                recon_loss,
                recon_acc,
                transfer_acc,
            },
            transferred,
            style: self.style,
        })
    }
}

struct Scored {
    scores: Scores,
    /// Transfers of the opposite style's test split, in order.
    transferred: Vec<String>,
    style: Sentiment,
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub missing: Vec<String>,
    pub classifier_checksum: u64,
}

fn canonical(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Scores every variant under `models/<variant>` against a frozen
/// classifier and writes the report, the samples file and the resolved
/// config into `out`.
///
/// Missing checkpoints produce `absent` rows and are listed in the outcome.
pub fn evaluate(models: &Path, classifier: &Path, data_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<EvalOutcome> {
    let cls_dir = canonical(classifier.parent().unwrap_or(Path::new(".")));
    let models_dir = canonical(models);
    if cls_dir.starts_with(&models_dir) {
        return Err(Error::Config(format!(
            "classifier {} was produced inside the models directory {}; train it in a separate run",
            classifier.display(),
            models.display()
        )));
    }
    let cls = Classifier::load(classifier)?;
    let checksum = cls.checksum();
    let splits = read_splits(data_dir)?;
    let max_len = cfg.max_decode_len()?;

    let results: Vec<(Variant, Option<Result<Scored>>)> = std::thread::scope(|s| {
        let handles: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| {
                let dir = models.join(v.name());
                let (cls, splits) = (&cls, &splits);
                s.spawn(move || {
                    if !dir.join(MODEL_FILE).exists() {
                        return None;
                    }
                    Some(load_style_model(&dir).and_then(|m| m.score(splits, cls, max_len)))
                })
            })
            .collect();
        Variant::ALL
            .iter()
            .zip(handles)
            .map(|(&v, h)| (v, h.join().expect("scoring thread panicked")))
            .collect()
    });

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut samples: Vec<(Variant, Vec<String>)> = Vec::new();
    let mut sample_style = None;
    for (v, r) in results {
        match r {
            None => {
                log::warn!("no checkpoint for {}", v.name());
                missing.push(v.name().to_string());
                rows.push(ReportRow {
                    model: v.label().to_string(),
                    scores: None,
                });
            }
            Some(r) => {
                let scored = r?;
                rows.push(ReportRow {
                    model: v.label().to_string(),
                    scores: Some(scored.scores),
                });
                // Sample rows share one ground truth, so only models of the
                // first style seen are listed.
                if *sample_style.get_or_insert(scored.style) == scored.style {
                    samples.push((v, scored.transferred));
                }
            }
        }
    }
    let report = EvalReport { rows };
    create_dir(out)?;
    write(&out.join(REPORT_FILE), &report.to_csv())?;
    let mut tsv = String::from("source\tsentence\n");
    if let Some(style) = sample_style {
        let truth = &splits.of(style.opposite()).test;
        for (i, t) in truth.iter().take(cfg.usize("eval_samples")?).enumerate() {
            let _ = writeln!(tsv, "Ground Truth\t{}", t.join(" "));
            for (v, tr) in &samples {
                let _ = writeln!(tsv, "{}\t{}", v.label(), tr.get(i).map(String::as_str).unwrap_or(""));
            }
        }
    }
    write(&out.join(SAMPLES_FILE), &tsv)?;
    write(
        &out.join("evaluator.txt"),
        &format!("classifier = {}\nchecksum = {checksum}\n", classifier.display()),
    )?;
    cfg.write_resolved(out, "evaluate")?;
    Ok(EvalOutcome {
        report,
        missing,
        classifier_checksum: checksum,
    })
}
