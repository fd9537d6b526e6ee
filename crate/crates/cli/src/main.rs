mod config;
mod evaluate;
mod io;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lingmess_core::categorizer::{categorize, categorize_random, STOP_WORDS, PRONOUN_GROUPS};
use lingmess_core::corpus::JsonDocument;
use lingmess_core::diagnostics::{gradcheck, gradcheck_config, gradcheck_document, GRADCHECK_EPS};
use lingmess_core::synthdata::{generate, SynthSpec};
use lingmess_core::{checkpoint, pair_score, predict_corpus, train_model, Document, MentionPair, Model, Span};
use serde::Serialize;

use crate::config::ConfigFlags;
use crate::io::{read_documents, threads, write_output, InputFormat};

#[derive(Parser)]
#[command(name = "lingmess", version, about = "Multi-expert coreference resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus a JSONL loss log.
    Train(TrainArgs),
    /// Predict clusters for a corpus.
    Predict(PredictArgs),
    /// Score predictions against gold clusters.
    Evaluate(evaluate::EvaluateArgs),
    /// Routing audit, score breakdowns, table dumps and the gradient check.
    Diagnose {
        #[command(subcommand)]
        command: Diagnose,
    },
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus (JSONL, or CoNLL-2012 by extension).
    #[arg(long)]
    train: PathBuf,
    /// Config file, JSON or key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Loss log path; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
}

#[derive(Subcommand)]
enum Diagnose {
    /// Print the pronoun groups and stop words as JSON.
    DumpTables,
    /// Categorize a candidate/query pair given as plain text.
    Route {
        #[arg(long = "c")]
        candidate: String,
        #[arg(long = "q")]
        query: String,
        /// Use the random-category ablation instead of the rules.
        #[arg(long)]
        random: bool,
    },
    /// Score breakdown of one pair in a document.
    ScorePair {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the first document.
        #[arg(long)]
        doc_key: Option<String>,
        /// Candidate span as `start,end` token offsets.
        #[arg(long = "c")]
        candidate: String,
        #[arg(long = "q")]
        query: String,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
    },
    /// Gradient check on the bundled eight-token document.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = GRADCHECK_EPS)]
        eps: f64,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_docs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Add a distractor entity to every document.
    #[arg(long)]
    ambiguous: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = config::resolve(args.config.as_deref(), &args.flags)?;
    let docs = read_documents(&args.train, args.format)?;
    let log_path = args.log.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.jsonl");
        p.into()
    });
    let mut model = Model::new(config, &docs);
    let mut log = Vec::new();
    train_model(&mut model, &docs, threads()?, |entry| {
        eprintln!("epoch {} loss {:.6} ({:.1}s)", entry.epoch, entry.loss, entry.wall_time_s);
        log.push(*entry);
    })?;
    checkpoint::save(&model, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut lines = Vec::new();
    for entry in &log {
        serde_json::to_writer(&mut lines, entry)?;
        lines.push(b'\n');
    }
    std::fs::write(&log_path, lines).with_context(|| format!("writing {}", log_path.display()))?;
    Ok(())
}

fn load_model(path: &std::path::Path) -> Result<Model> {
    checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let docs = read_documents(&args.input, args.format)?;
    let predictions = predict_corpus(&model, &docs, threads()?);
    let mut out = Vec::new();
    for (doc, pred) in docs.iter().zip(predictions) {
        let gold = doc.gold_clusters();
        let line = JsonDocument {
            doc_key: pred.doc_key,
            sentences: doc.sentence_texts(),
            clusters: pred.clusters,
            gold_clusters: (!gold.is_empty()).then(|| gold.to_vec()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    write_output(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct PronounGroup {
    id: u8,
    pronouns: &'static [&'static str],
}

#[derive(Serialize)]
struct Tables {
    pronoun_groups: Vec<PronounGroup>,
    stop_words: &'static [&'static str],
}

/// Two-sentence document holding the candidate then the query.
fn pair_document(candidate: &str, query: &str) -> Result<(Document, MentionPair)> {
    let words = |s: &str| -> Vec<String> { s.split_whitespace().map(str::to_string).collect() };
    let (c, q) = (words(candidate), words(query));
    if c.is_empty() || q.is_empty() {
        bail!("both mentions need at least one token");
    }
    let (nc, nq) = (c.len(), q.len());
    let doc = Document::new("route", vec![c, q], Vec::new())?;
    let pair = MentionPair::new(Span::new(0, nc - 1), Span::new(nc, nc + nq - 1)).expect("candidate precedes query");
    Ok((doc, pair))
}

fn parse_span(text: &str) -> Result<Span> {
    let (s, e) = text
        .split_once(',')
        .with_context(|| format!("span `{text}` is not `start,end`"))?;
    Ok(Span::new(s.trim().parse()?, e.trim().parse()?))
}

fn cmd_diagnose(command: Diagnose) -> Result<ExitCode> {
    match command {
        Diagnose::DumpTables => {
            let tables = Tables {
                pronoun_groups: PRONOUN_GROUPS
                    .iter()
                    .map(|(id, pronouns)| PronounGroup { id: *id, pronouns })
                    .collect(),
                stop_words: &STOP_WORDS,
            };
            print_json(&tables)?;
        }
        Diagnose::Route { candidate, query, random } => {
            let (doc, pair) = pair_document(&candidate, &query)?;
            let category = if random {
                categorize_random(pair, &doc)
            } else {
                categorize(pair, &doc)
            };
            println!("{category}");
        }
        Diagnose::ScorePair {
            model,
            input,
            doc_key,
            candidate,
            query,
            format,
        } => {
            let model = load_model(&model)?;
            let docs = read_documents(&input, format)?;
            let doc = match &doc_key {
                Some(key) => docs.iter().find(|d| d.doc_key() == key),
                None => docs.first(),
            }
            .context("document not found")?;
            let (c, q) = (parse_span(&candidate)?, parse_span(&query)?);
            if c.end >= doc.len() || q.end >= doc.len() {
                bail!("span out of bounds for {} tokens", doc.len());
            }
            let pair = MentionPair::new(c, q).context("candidate must precede the query")?;
            print_json(&pair_score(pair, doc, &model.encode(doc), &model))?;
        }
        Diagnose::Gradcheck { seed, eps } => {
            let config = lingmess_core::TrainConfig {
                seed,
                ..gradcheck_config()
            };
            let report = gradcheck(&gradcheck_document(), config, eps)?;
            #[derive(Serialize)]
            struct Output {
                #[serde(flatten)]
                report: lingmess_core::diagnostics::GradcheckReport,
                tolerance: f64,
                passed: bool,
            }
            let passed = report.max_relative_error < 1e-5;
            print_json(&Output {
                report,
                tolerance: 1e-5,
                passed,
            })?;
            if !passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let docs = generate(&SynthSpec {
        n_docs: args.n_docs,
        seed: args.seed,
        ambiguous: args.ambiguous,
    })?;
    let mut out = Vec::new();
    lingmess_core::write_jsonl(&docs, &mut out)?;
    write_output(args.out.as_deref(), &out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(args) => cmd_train(args)?,
        Command::Predict(args) => cmd_predict(args)?,
        Command::Evaluate(args) => evaluate::run(args)?,
        Command::Diagnose { command } => return cmd_diagnose(command),
        Command::Synth(args) => cmd_synth(args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
