mod config;
mod corpus_io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use dcoref_core::decoder::SingletonPolicy;
use dcoref_core::evaluator::{evaluate_documents, Aggregation, EvalReport};
use dcoref_core::pipeline::{self, PipelineConfig};
use dcoref_core::preprocess::{augment_speakers, TransferMode};
use dcoref_core::score_table::{tables_from_jsonl, tables_to_jsonl};
use dcoref_core::scorer::Checkpoint;
use dcoref_core::synthetic::{generate_corpus, SyntheticConfig};
use dcoref_core::{corpus_stats, Corpus, CorefError, FormatError};
use serde::Serialize;

use corpus_io::{read_corpus, write_corpus, Format};

#[derive(Parser)]
#[command(name = "dcoref", version, about = "Singleton-aware coreference resolution for dialogue")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus between UA, CoNLL and JSON Lines.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        from: Option<Format>,
        #[arg(long, value_enum)]
        to: Option<Format>,
    },
    /// Corpus statistics: documents, mentions, clusters, singletons, pronouns, speakers.
    Stats {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        json: bool,
    },
    /// Train a model and write checkpoints to an output directory.
    Train(TrainArgs),
    /// Predict clusters for a corpus with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum)]
        output_format: Option<Format>,
        /// Also write the score tables (JSON Lines).
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Score a response corpus against a key corpus.
    Score {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long, value_enum)]
        key_format: Option<Format>,
        #[arg(long, value_enum)]
        response_format: Option<Format>,
        /// Count non-referring spans of the key like any other span.
        #[arg(long)]
        include_non_referring: bool,
        #[arg(long, value_enum, default_value = "micro")]
        aggregation: AggregationArg,
        #[arg(long)]
        json: bool,
    },
    /// Write the model's score tables for a corpus without decoding.
    ExportScores {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Write a synthetic dialogue corpus with known coreference.
    Generate {
        output: PathBuf,
        #[arg(long, default_value_t = 50)]
        documents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Decode exported score tables into clusters.
    Decode {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum)]
        output_format: Option<Format>,
        /// Plain mention ranking: never emit singletons.
        #[arg(long)]
        no_singletons: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Micro,
    Macro,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for checkpoints, logs and the config snapshot.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// uad, mix or pretrain.
    #[arg(long)]
    mode: Option<TransferMode>,
    #[arg(long)]
    uad_train: Vec<String>,
    #[arg(long)]
    od_train: Vec<String>,
    #[arg(long)]
    dev: Vec<String>,
    #[arg(long)]
    include_dev: bool,
    /// Do not inject speaker tokens.
    #[arg(long)]
    no_speakers: bool,
    /// Train without the mention loss and decode without singletons.
    #[arg(long)]
    no_singletons: bool,
    /// Keep one checkpoint file per epoch instead of only the latest.
    #[arg(long)]
    keep_checkpoints: bool,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
    causes: Vec<String>,
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.is::<FormatError>() {
            return "format";
        }
        if let Some(e) = cause.downcast_ref::<CorefError>() {
            return match e {
                CorefError::Checkpoint(_) => "checkpoint",
                CorefError::NonFinite { .. } => "diverged",
                CorefError::DocMismatch(_) => "doc_mismatch",
                _ => "coref",
            };
        }
        if cause.is::<toml::de::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "usage"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = ErrorReport {
                kind: error_kind(&err),
                message: err.to_string(),
                causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
            };
            eprintln!("{}", serde_json::json!({ "error": report }));
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert { input, output, from, to } => {
            let corpus = read_corpus(&input, from)?;
            let dropped = write_corpus(&corpus, &output, to)?;
            println!("converted {} document(s); {dropped} non-referring span(s) dropped", corpus.documents.len());
            Ok(())
        }
        Command::Stats { paths, format, json } => stats(&paths, format, json),
        Command::Train(args) => train(args),
        Command::Predict { model, input, output, format, output_format, scores } => {
            let (ck, cfg) = load_model(&model)?;
            let corpus = read_corpus(&input, format)?;
            warn_unknown_speakers(&ck, &corpus, cfg.speaker_augmentation);
            let (pred, tables) = pipeline::predict_corpus(&ck.parameters, &corpus, cfg.speaker_augmentation)?;
            write_corpus(&pred, &output, output_format.or(Some(Format::resolve(format, &input)?)))?;
            if let Some(path) = scores {
                std::fs::write(&path, tables_to_jsonl(&tables)).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("predicted {} document(s)", pred.documents.len());
            Ok(())
        }
        Command::Score { key, response, key_format, response_format, include_non_referring, aggregation, json } => {
            let key_corpus = read_corpus(&key, key_format)?;
            let response_corpus = read_corpus(&response, response_format)?;
            let aggregation = match aggregation {
                AggregationArg::Micro => Aggregation::Micro,
                AggregationArg::Macro => Aggregation::Macro,
            };
            let report = evaluate_documents(
                &key_corpus.documents,
                &response_corpus.documents,
                !include_non_referring,
                aggregation,
            )?;
            print_report(&report, json, &serde_json::json!({
                "key": key,
                "response": response,
                "exclude_non_referring": !include_non_referring,
            }));
            Ok(())
        }
        Command::ExportScores { model, input, output, format } => {
            let (ck, cfg) = load_model(&model)?;
            let corpus = read_corpus(&input, format)?;
            warn_unknown_speakers(&ck, &corpus, cfg.speaker_augmentation);
            let tables = corpus
                .documents
                .iter()
                .map(|d| pipeline::score_document(&ck.parameters, d, cfg.speaker_augmentation))
                .collect::<dcoref_core::error::Result<Vec<_>>>()?;
            std::fs::write(&output, tables_to_jsonl(&tables)).with_context(|| format!("writing {}", output.display()))?;
            println!("exported {} score table(s)", tables.len());
            Ok(())
        }
        Command::Generate { output, documents, seed, format } => {
            let name = output.file_stem().and_then(|s| s.to_str()).unwrap_or("synthetic").to_string();
            let cfg = SyntheticConfig { documents, ..Default::default() };
            let corpus = generate_corpus(&name, &cfg, seed);
            write_corpus(&corpus, &output, format)?;
            println!("generated {documents} document(s)");
            Ok(())
        }
        Command::Decode { scores, input, output, format, output_format, no_singletons } => {
            let text = std::fs::read_to_string(&scores).with_context(|| format!("reading {}", scores.display()))?;
            let tables = tables_from_jsonl(&text).with_context(|| format!("parsing {}", scores.display()))?;
            let corpus = read_corpus(&input, format)?;
            let policy = if no_singletons { SingletonPolicy::Never } else { SingletonPolicy::MentionScore };
            let mut out = Corpus { name: corpus.name.clone(), documents: Vec::new(), format_tag: corpus.format_tag };
            for doc in &corpus.documents {
                let Some(table) = tables.iter().find(|t| t.doc_id == doc.doc_id) else {
                    bail!(CorefError::DocMismatch(format!("no score table for {}", doc.doc_id)));
                };
                if let Some(bad) = table.candidates.iter().find(|s| s.end >= doc.len()) {
                    bail!(FormatError::SpanOutOfBounds { doc_id: doc.doc_id.clone(), span: *bad, len: doc.len() });
                }
                out.documents.push(pipeline::apply_table(doc, table, policy));
            }
            write_corpus(&out, &output, output_format.or(Some(Format::resolve(format, &input)?)))?;
            println!("decoded {} document(s)", out.documents.len());
            Ok(())
        }
    }
}

fn print_report(report: &EvalReport, json: bool, settings: &serde_json::Value) {
    if json {
        println!("{}", serde_json::json!({ "report": report, "settings": settings }));
    } else {
        print!("{}", report.render_table());
    }
}

fn stats(paths: &[PathBuf], format: Option<Format>, json: bool) -> Result<()> {
    let mut rows = Vec::new();
    for path in paths {
        let corpus = read_corpus(path, format)?;
        rows.push((corpus.name.clone(), corpus_stats(&corpus)?));
    }
    if json {
        let out: Vec<_> = rows.iter().map(|(name, s)| serde_json::json!({ "corpus": name, "stats": s })).collect();
        println!("{}", serde_json::Value::Array(out));
        return Ok(());
    }
    println!(
        "{:<20} {:>6} {:>8} {:>8} {:>10} {:>7} {:>9} {:>6}",
        "corpus", "#D", "#M", "#C", "singletons", "%S", "%Pron", "#Spk"
    );
    for (name, s) in rows {
        println!(
            "{:<20} {:>6} {:>8} {:>8} {:>10} {:>7.2} {:>9.2} {:>6.2}",
            name, s.documents, s.mentions, s.clusters, s.singletons, s.singleton_pct, s.pronoun_pct, s.avg_speakers
        );
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(Checkpoint, PipelineConfig)> {
    let ck = Checkpoint::load(path)?;
    let cfg = PipelineConfig::from_checkpoint(&ck)?;
    Ok((ck, cfg))
}

/// Speaker tokens the learned table never saw fall back to untrained vectors.
fn warn_unknown_speakers(ck: &Checkpoint, corpus: &Corpus, speaker_augmentation: bool) {
    let Some(table) = &ck.parameters.token_table else { return };
    if !speaker_augmentation {
        return;
    }
    let mut unknown = std::collections::BTreeSet::new();
    for doc in &corpus.documents {
        let (_, vocab) = augment_speakers(doc);
        for k in 1..=vocab.len() {
            let tok = dcoref_core::preprocess::speaker_token(k);
            if !table.vocab.contains_key(&tok) {
                unknown.insert(tok);
            }
        }
    }
    if !unknown.is_empty() {
        log::warn!(
            "speaker token(s) {} unseen in training; their turns use untrained speaker vectors",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        );
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = config::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(mode) = args.mode {
        cfg.transfer_mode = mode;
    }
    cfg.data.uad_train.extend(args.uad_train);
    cfg.data.od_train.extend(args.od_train);
    cfg.data.dev.extend(args.dev);
    cfg.data.include_dev_in_train |= args.include_dev;
    cfg.speaker_augmentation &= !args.no_speakers;
    cfg.model.singletons &= !args.no_singletons;

    // every corpus is loaded before any training starts
    let load = |paths: &[String]| paths.iter().map(|p| read_corpus(Path::new(p), None)).collect::<Result<Vec<_>>>();
    let mut uad = load(&cfg.data.uad_train)?;
    let od = load(&cfg.data.od_train)?;
    let dev = load(&cfg.data.dev)?;
    if cfg.data.include_dev_in_train {
        uad.extend(dev.iter().cloned());
    }
    if uad.iter().all(|c| c.documents.is_empty()) {
        bail!(CorefError::EmptyUad);
    }

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    std::fs::write(args.out.join("config.toml"), config::to_toml(&cfg))?;
    let mut log_lines = String::new();
    let out = args.out.clone();
    let keep = args.keep_checkpoints;
    let outcome = pipeline::train(&uad, &od, &cfg, &mut |ck, entry| {
        let name = if keep { format!("checkpoint-epoch-{:03}.json", ck.epochs_completed) } else { "checkpoint-last.json".into() };
        ck.save(&out.join(name))?;
        log_lines.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
        log_lines.push('\n');
        std::fs::write(out.join("train_log.jsonl"), &log_lines)
            .map_err(|e| CorefError::Checkpoint(format!("train_log.jsonl: {e}")))?;
        println!("{} epoch {}: mean loss {:.4}", entry.phase, entry.epoch + 1, entry.mean_loss);
        Ok(())
    })?;
    if let Some(d) = outcome.diverged {
        bail!(CorefError::NonFinite {
            location: format!("phase {} epoch {} document {:?}", d.phase, d.epoch + 1, d.doc_id),
            detail: format!("{}; last good checkpoint kept in {}", d.detail, args.out.display()),
        });
    }
    let epochs = outcome.log.len();
    let model_path = args.out.join("model.json");
    pipeline::checkpoint_for(outcome.params.clone(), &cfg, epochs).save(&model_path)?;
    println!("model written to {}", model_path.display());

    if !dev.is_empty() && !cfg.data.include_dev_in_train {
        let mut key = Vec::new();
        let mut response = Vec::new();
        for corpus in &dev {
            let (pred, _) = pipeline::predict_corpus(&outcome.params, corpus, cfg.speaker_augmentation)?;
            key.extend(corpus.documents.iter().cloned());
            response.extend(pred.documents);
        }
        let report = evaluate_documents(&key, &response, true, cfg.aggregation)?;
        let settings = serde_json::to_value(&cfg)?;
        std::fs::write(
            args.out.join("dev_report.json"),
            serde_json::to_string_pretty(&serde_json::json!({ "report": report, "settings": settings }))?,
        )?;
        print!("{}", report.render_table());
    }
    Ok(())
}
