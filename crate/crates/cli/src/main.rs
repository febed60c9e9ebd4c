use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use styleshift_cli::commands::{self, TrainKind, VOCAB_FILE};
use styleshift_cli::{exit_code, Profile, RunConfig};
use styleshift_core::Result;

#[derive(Parser)]
#[command(name = "styleshift", version, about = "Sentiment style transfer with seq2seq autoencoders")]
struct Cli {
    /// Config file whose keys override the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step [default: 2].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output (run) directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, label, balance and split a file of JSON review records.
    Preprocess { raw: PathBuf },
    /// Build the shared vocabulary from preprocessed splits.
    BuildVocab {
        /// Preprocessed data directory [default: config `data`].
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train one of: vanilla, reduced, reversed, bidi, reduced-bidi, adversarial, classifier.
    Train {
        kind: String,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Style the model learns to produce: pos or neg [default: config `style`].
        #[arg(long)]
        style: Option<String>,
    },
    /// Transfer one sentence through a trained style model.
    Transfer {
        sentence: String,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to vocab.txt next to the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Score the five variants under a models directory.
    Evaluate {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::profile(cli.profile);
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = resolve(&cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Preprocess { raw } => {
            let st = commands::preprocess(raw, out, &cfg)?;
            println!("kept {} of {} lines", st.kept_total(), st.lines);
        }
        Command::BuildVocab { data } => {
            let data = data.clone().unwrap_or_else(|| cfg.data_dir());
            let v = commands::build_vocab(&data, out, &cfg)?;
            println!("{} tokens", v.len());
        }
        Command::Train { kind, data, style } => {
            if let Some(data) = data {
                cfg.set("data", &data.to_string_lossy())?;
            }
            if let Some(style) = style {
                cfg.set("style", style)?;
            }
            let kind: TrainKind = kind.parse()?;
            commands::train(kind, &cfg.data_dir(), out, &cfg)?;
            println!("{}", out.display());
        }
        Command::Transfer {
            sentence,
            checkpoint,
            vocab,
        } => {
            let vocab = vocab
                .clone()
                .unwrap_or_else(|| checkpoint.with_file_name(VOCAB_FILE));
            println!(
                "{}",
                commands::transfer(sentence, checkpoint, &vocab, cfg.max_decode_len()?)?
            );
        }
        Command::Evaluate {
            models,
            classifier,
            data,
        } => {
            if let Some(data) = data {
                cfg.set("data", &data.to_string_lossy())?;
            }
            let outcome = commands::evaluate(models, classifier, &cfg.data_dir(), out, &cfg)?;
            print!("{}", outcome.report.to_csv());
            if !outcome.missing.is_empty() {
                eprintln!("missing checkpoints: {}", outcome.missing.join(", "));
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
