//! Command-line front end: data generation, index building, training,
//! answering, and evaluation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training divergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use simpleqa::error::Error;

use commands::{MentionSource, TrainKind};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "simpleqa", version, about = "Simple-question answering over a triple KB")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed recorded in every artifact.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for evaluation fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic micro-KB with train/test question splits.
    Synth {
        /// Output directory for kb.tsv, names.tsv, train.tsv, test.tsv,
        /// meta.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        entities: Option<usize>,
        #[arg(long)]
        predicates: Option<usize>,
        #[arg(long)]
        extra_predicates: Option<usize>,
        #[arg(long)]
        train_questions: Option<usize>,
        #[arg(long)]
        test_questions: Option<usize>,
        /// Fraction of questions whose gold subject is absent from the index.
        #[arg(long)]
        unreachable: Option<f64>,
    },
    /// Build the surface-form index from name triples, merging extra
    /// index files.
    BuildIndex {
        /// Triple file holding name/alias labels.
        #[arg(long)]
        kb: PathBuf,
        /// Additional index TSV files to merge in.
        #[arg(long)]
        extra: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one component and write its checkpoint.
    Train {
        #[arg(long, value_enum)]
        kind: TrainKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
    },
    /// Answer a single question or a file of questions.
    Answer {
        #[arg(long)]
        question: Option<String>,
        /// File with one question per line; output is JSON lines.
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        ner: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full component-wise evaluation and write reports.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        ner: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where linking-metric mentions come from.
        #[arg(long, value_enum, default_value = "predicted")]
        linking_mentions: MentionSource,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Train(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> simpleqa::Result<()> {
    let mut config = RunConfig::resolve(cli.config.as_deref(), cli.seed, cli.workers)?;
    match cli.command {
        Command::Synth {
            out,
            entities,
            predicates,
            extra_predicates,
            train_questions,
            test_questions,
            unreachable,
        } => {
            let s = &mut config.synth;
            if let Some(v) = entities {
                s.entities = v;
            }
            if let Some(v) = predicates {
                s.predicates = v;
            }
            if let Some(v) = extra_predicates {
                s.extra_predicates = v;
            }
            if let Some(v) = train_questions {
                s.train_questions = v;
            }
            if let Some(v) = test_questions {
                s.test_questions = v;
            }
            if let Some(v) = unreachable {
                s.unreachable_fraction = v;
            }
            commands::cmd_synth(&config, &out)
        }
        Command::BuildIndex { kb, extra, out } => {
            config::require_inputs(&[("kb", Some(&kb))])?;
            for path in &extra {
                config::require_inputs(&[("extra", Some(path))])?;
            }
            commands::cmd_build_index(&config, &kb, &extra, &out)
        }
        Command::Train {
            kind,
            out,
            dataset,
            index,
            kb,
            embeddings,
            word_vectors,
        } => {
            let p = &mut config.paths;
            if dataset.is_some() {
                p.train = dataset;
            }
            if index.is_some() {
                p.index = index;
            }
            if kb.is_some() {
                p.kb = kb;
            }
            if embeddings.is_some() {
                p.embeddings = embeddings;
            }
            if word_vectors.is_some() {
                p.word_vectors = word_vectors;
            }
            commands::cmd_train(&config, kind, &out)
        }
        Command::Answer {
            question,
            questions,
            index,
            kb,
            ner,
            model,
            out,
        } => {
            let p = &mut config.paths;
            if index.is_some() {
                p.index = index;
            }
            if kb.is_some() {
                p.kb = kb;
            }
            if ner.is_some() {
                p.ner = ner;
            }
            if model.is_some() {
                p.model = model;
            }
            commands::cmd_answer(&config, question, questions, out)
        }
        Command::Evaluate {
            dataset,
            index,
            kb,
            ner,
            model,
            out,
            linking_mentions,
        } => {
            let p = &mut config.paths;
            if dataset.is_some() {
                p.test = dataset;
            }
            if index.is_some() {
                p.index = index;
            }
            if kb.is_some() {
                p.kb = kb;
            }
            if ner.is_some() {
                p.ner = ner;
            }
            if model.is_some() {
                p.model = model;
            }
            commands::cmd_evaluate(&config, &out, linking_mentions)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
