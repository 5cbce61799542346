//! Reading and writing corpora in the three supported formats.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use dcoref_core::format_io::{from_interchange, parse, serialize_with_report, to_interchange, ColumnSchema};
use dcoref_core::{Corpus, FormatTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Column format with singletons and a non-referring column.
    Ua,
    /// CoNLL-2012 style columns.
    Conll,
    /// JSON Lines interchange.
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "ua" | "conllua" => Ok(Format::Ua),
            "conll" | "v4_gold_conll" | "gold_conll" => Ok(Format::Conll),
            "jsonl" | "json" => Ok(Format::Jsonl),
            _ => bail!("cannot infer the format of {} from its extension; pass --format", path.display()),
        }
    }

    pub fn resolve(explicit: Option<Format>, path: &Path) -> Result<Format> {
        explicit.map_or_else(|| Format::from_path(path), Ok)
    }
}

/// Relative paths are taken from `DCOREF_DATA_ROOT` when it is set.
pub fn data_path(path: &Path) -> PathBuf {
    match std::env::var_os("DCOREF_DATA_ROOT") {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path.to_path_buf(),
    }
}

fn corpus_name(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus").to_string()
}

pub fn read_corpus(path: &Path, format: Option<Format>) -> Result<Corpus> {
    let path = data_path(path);
    let format = Format::resolve(format, &path)?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let corpus = match format {
        Format::Ua => parse(&text, &ColumnSchema::ua(), &corpus_name(&path)),
        Format::Conll => parse(&text, &ColumnSchema::conll(), &corpus_name(&path)),
        Format::Jsonl => from_interchange(&text),
    }
    .with_context(|| format!("parsing {}", path.display()))?;
    Ok(corpus)
}

/// Writes `corpus`; returns how many non-referring spans the format dropped.
pub fn write_corpus(corpus: &Corpus, path: &Path, format: Option<Format>) -> Result<usize> {
    let format = Format::resolve(format, path)?;
    let (text, dropped) = match format {
        Format::Jsonl => (to_interchange(corpus), 0),
        Format::Ua | Format::Conll => {
            let tag = if format == Format::Ua { FormatTag::Ua } else { FormatTag::Conll };
            let (text, report) = serialize_with_report(corpus, &ColumnSchema::for_tag(tag))?;
            (text, report.dropped_non_referring)
        }
    };
    if dropped > 0 {
        log::warn!("{}: {dropped} non-referring span(s) dropped, the format cannot hold them", path.display());
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(dropped)
}
