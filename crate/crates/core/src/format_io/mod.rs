//! Column-format corpora (CoNLL-2012 style and its UA extension) and the
//! JSON-lines interchange format.
//!
//! A column file is a sequence of documents, each delimited by a
//! `#begin document <doc_id>` line and an `#end document` line. Inside a
//! document every non-blank, non-comment line is one token row and a blank
//! line ends a sentence. Column positions are given by a [`ColumnSchema`].

mod brackets;
mod interchange;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use brackets::{parse_cell, render_cells, BracketMatcher, Item};
pub use interchange::{from_interchange, to_interchange, INTERCHANGE_SCHEMA, INTERCHANGE_VERSION};

use crate::doc_model::{ClusterSet, Corpus, Document, FormatTag, Sentence, Span, Token};
use crate::error::FormatError;

pub const BEGIN_MARKER: &str = "#begin document";
pub const END_MARKER: &str = "#end document";

/// Column layout of a token row. Positions are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub format_tag: FormatTag,
    pub doc_id: usize,
    pub token_index: usize,
    pub token_text: usize,
    pub speaker: usize,
    pub coref: usize,
    /// Only meaningful for UA files.
    pub non_referring: Option<usize>,
    /// Value of the token-index column for the first token of a sentence.
    pub index_base: usize,
}

impl ColumnSchema {
    /// `doc_id  index  token  speaker  coref`
    pub fn conll() -> Self {
        ColumnSchema {
            format_tag: FormatTag::Conll,
            doc_id: 0,
            token_index: 1,
            token_text: 2,
            speaker: 3,
            coref: 4,
            non_referring: None,
            index_base: 0,
        }
    }

    /// `doc_id  index  token  speaker  coref  non_referring`
    pub fn ua() -> Self {
        ColumnSchema { format_tag: FormatTag::Ua, non_referring: Some(5), ..ColumnSchema::conll() }
    }

    pub fn for_tag(tag: FormatTag) -> Self {
        match tag {
            FormatTag::Ua => ColumnSchema::ua(),
            FormatTag::Conll => ColumnSchema::conll(),
        }
    }

    fn positions(&self) -> Vec<usize> {
        let mut p = vec![self.doc_id, self.token_index, self.token_text, self.speaker, self.coref];
        p.extend(self.non_referring);
        p
    }

    pub fn width(&self) -> usize {
        self.positions().into_iter().max().unwrap_or(0) + 1
    }

    pub fn check(&self) -> Result<(), String> {
        let positions = self.positions();
        if positions.iter().collect::<HashSet<_>>().len() != positions.len() {
            return Err("column roles must use distinct positions".into());
        }
        if self.format_tag == FormatTag::Conll && self.non_referring.is_some() {
            return Err("the CONLL schema has no non-referring column".into());
        }
        Ok(())
    }
}

/// What a serializer had to leave out.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SerializeReport {
    pub dropped_non_referring: usize,
}

struct DocBuilder {
    doc_id: String,
    begin_line: usize,
    tokens: Vec<Token>,
    sentences: Vec<Sentence>,
    sentence_start: usize,
    sentence_speaker: Option<String>,
    expected_index: usize,
    coref: BracketMatcher,
    non_referring: BracketMatcher,
}

impl DocBuilder {
    fn close_sentence(&mut self) {
        if self.tokens.len() > self.sentence_start {
            self.sentences.push(Sentence {
                start: self.sentence_start,
                end: self.tokens.len(),
                speaker: self.sentence_speaker.take(),
            });
            self.sentence_start = self.tokens.len();
        }
        self.expected_index = 0;
    }

    fn finish(mut self, schema: &ColumnSchema, end_line: usize) -> Result<Document, FormatError> {
        self.close_sentence();
        for matcher in [&self.coref, &self.non_referring] {
            if let Some((id, line)) = matcher.unclosed() {
                return Err(FormatError::Parse { line, message: format!("unclosed mention bracket {id:?}") });
            }
        }
        let mut order: Vec<String> = Vec::new();
        let mut by_id: HashMap<String, Vec<Span>> = HashMap::new();
        for (id, span) in std::mem::take(&mut self.coref.mentions) {
            if !by_id.contains_key(&id) {
                order.push(id.clone());
            }
            by_id.entry(id).or_default().push(span);
        }
        let clusters: Vec<Vec<Span>> = order.iter().map(|id| by_id.remove(id).unwrap_or_default()).collect();
        let gold = ClusterSet::new(clusters)
            .map_err(|e| FormatError::Parse { line: end_line, message: format!("document {:?}: {e}", self.doc_id) })?;
        let non_referring = schema
            .non_referring
            .map(|_| self.non_referring.mentions.iter().map(|(_, s)| *s).collect::<BTreeSet<_>>());
        let is_dialogue = self.sentences.iter().any(|s| s.speaker.is_some());
        let doc = Document {
            doc_id: self.doc_id,
            tokens: self.tokens,
            sentences: self.sentences,
            is_dialogue,
            gold_clusters: Some(gold),
            non_referring,
        };
        doc.validate()
            .map_err(|e| FormatError::Parse { line: self.begin_line, message: e.to_string() })?;
        Ok(doc)
    }
}

fn normalize_speaker(raw: &str) -> Option<String> {
    match raw {
        "" | "-" | "_" => None,
        s => Some(s.to_string()),
    }
}

/// Parses a column-format stream into a corpus named `name`.
pub fn parse(text: &str, schema: &ColumnSchema, name: &str) -> Result<Corpus, FormatError> {
    schema.check().map_err(|message| FormatError::Parse { line: 0, message })?;
    let mut corpus = Corpus::new(name, schema.format_tag);
    let mut seen_ids = HashSet::new();
    let mut current: Option<DocBuilder> = None;
    let width = schema.width();

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        let err = |message: String| FormatError::Parse { line: line_no, message };

        if let Some(rest) = line.strip_prefix(BEGIN_MARKER) {
            if current.is_some() {
                return Err(err("nested #begin document".into()));
            }
            let doc_id = rest.strip_prefix(' ').unwrap_or(rest).to_string();
            if !seen_ids.insert(doc_id.clone()) {
                return Err(FormatError::DuplicateDocId(doc_id));
            }
            current = Some(DocBuilder {
                doc_id,
                begin_line: line_no,
                tokens: Vec::new(),
                sentences: Vec::new(),
                sentence_start: 0,
                sentence_speaker: None,
                expected_index: 0,
                coref: BracketMatcher::default(),
                non_referring: BracketMatcher::default(),
            });
            continue;
        }
        if line.starts_with(END_MARKER) {
            let builder = current.take().ok_or_else(|| err("#end document without #begin".into()))?;
            corpus.documents.push(builder.finish(schema, line_no)?);
            continue;
        }
        let Some(doc) = current.as_mut() else {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            return Err(err("token row outside of a document".into()));
        };
        if line.trim().is_empty() {
            doc.close_sentence();
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < width {
            return Err(err(format!("expected at least {width} columns, found {}", cols.len())));
        }
        let index: usize = cols[schema.token_index]
            .parse()
            .map_err(|_| err(format!("token index {:?} is not a number", cols[schema.token_index])))?;
        if index != doc.expected_index + schema.index_base {
            return Err(err(format!(
                "token index discontinuity: expected {}, found {index}",
                doc.expected_index + schema.index_base
            )));
        }
        doc.expected_index += 1;
        let position = doc.tokens.len();
        if position == doc.sentence_start {
            doc.sentence_speaker = normalize_speaker(cols[schema.speaker]);
        }
        doc.tokens.push(Token { text: cols[schema.token_text].to_string(), index: position });
        let items = parse_cell(cols[schema.coref]).map_err(&err)?;
        doc.coref.feed(position, line_no, &items).map_err(&err)?;
        if let Some(col) = schema.non_referring {
            let items = parse_cell(cols[col]).map_err(&err)?;
            doc.non_referring.feed(position, line_no, &items).map_err(&err)?;
        }
    }
    if let Some(doc) = current {
        return Err(FormatError::Parse {
            line: doc.begin_line,
            message: format!("document {:?} has no #end document line", doc.doc_id),
        });
    }
    Ok(corpus)
}

fn check_field(doc: &Document, what: &str, value: &str) -> Result<(), FormatError> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        return Err(FormatError::Unserializable {
            doc_id: doc.doc_id.clone(),
            message: format!("{what} {value:?} cannot be written to a column"),
        });
    }
    Ok(())
}

fn check_spans<'a>(doc: &Document, spans: impl Iterator<Item = &'a Span>) -> Result<(), FormatError> {
    for span in spans {
        if span.start > span.end || span.end >= doc.tokens.len() {
            return Err(FormatError::SpanOutOfBounds { doc_id: doc.doc_id.clone(), span: *span, len: doc.tokens.len() });
        }
    }
    Ok(())
}

/// Writes `corpus` with `schema`, returning the text and what was dropped.
pub fn serialize_with_report(corpus: &Corpus, schema: &ColumnSchema) -> Result<(String, SerializeReport), FormatError> {
    schema.check().map_err(|message| FormatError::Parse { line: 0, message })?;
    let mut out = String::new();
    let mut report = SerializeReport::default();
    for doc in &corpus.documents {
        let len = doc.tokens.len();
        let gold = doc.gold_clusters.clone().unwrap_or_default();
        check_spans(doc, gold.clusters().iter().flatten())?;
        for cluster in gold.clusters() {
            for (i, a) in cluster.iter().enumerate() {
                if let Some(b) = cluster[i + 1..].iter().find(|b| a.crosses(b)) {
                    return Err(FormatError::Unserializable {
                        doc_id: doc.doc_id.clone(),
                        message: format!("mentions {a} and {b} of one cluster cross"),
                    });
                }
            }
        }
        let mentions: Vec<(String, Span)> = gold
            .clusters()
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.iter().map(move |s| ((i + 1).to_string(), *s)))
            .collect();
        let coref_cells = render_cells(len, &mentions);
        let nr_cells = match schema.non_referring {
            Some(_) => {
                check_spans(doc, doc.non_referring_iter().collect::<Vec<_>>().iter())?;
                let nr: Vec<(String, Span)> =
                    doc.non_referring_iter().enumerate().map(|(i, s)| ((i + 1).to_string(), s)).collect();
                Some(render_cells(len, &nr))
            }
            None => {
                report.dropped_non_referring += doc.non_referring_iter().count();
                None
            }
        };

        let key: String = doc.doc_id.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
        let key = if key.is_empty() { "-".to_string() } else { key };
        out.push_str(BEGIN_MARKER);
        out.push(' ');
        out.push_str(&doc.doc_id);
        out.push('\n');
        for sentence in &doc.sentences {
            let speaker = sentence.speaker.as_deref().unwrap_or("-");
            check_field(doc, "speaker", speaker)?;
            for t in sentence.start..sentence.end {
                check_field(doc, "token", &doc.tokens[t].text)?;
                let mut row = vec![String::from("-"); schema.width()];
                row[schema.doc_id] = key.clone();
                row[schema.token_index] = (t - sentence.start + schema.index_base).to_string();
                row[schema.token_text] = doc.tokens[t].text.clone();
                row[schema.speaker] = speaker.to_string();
                row[schema.coref] = coref_cells[t].clone();
                if let (Some(col), Some(cells)) = (schema.non_referring, &nr_cells) {
                    row[col] = cells[t].clone();
                }
                out.push_str(&row.join("\t"));
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str(END_MARKER);
        out.push('\n');
    }
    Ok((out, report))
}

pub fn serialize(corpus: &Corpus, schema: &ColumnSchema) -> Result<String, FormatError> {
    serialize_with_report(corpus, schema).map(|(text, _)| text)
}
