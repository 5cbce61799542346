//! JSON-lines interchange format.
//!
//! The first line is a header record:
//!
//! ```text
//! {"schema":"dcoref-interchange","version":1,"name":"<corpus>","format_tag":"UA"}
//! ```
//!
//! followed by one [`Document`] record per line with the fields `doc_id`,
//! `tokens`, `sentences`, `is_dialogue` and optionally `gold_clusters` and
//! `non_referring`. Spans are written as `{"start":s,"end":e}`.

use serde::{Deserialize, Serialize};

use crate::doc_model::{Corpus, Document, FormatTag};
use crate::error::FormatError;

pub const INTERCHANGE_SCHEMA: &str = "dcoref-interchange";
pub const INTERCHANGE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    name: String,
    format_tag: FormatTag,
}

pub fn to_interchange(corpus: &Corpus) -> String {
    let header = Header {
        schema: INTERCHANGE_SCHEMA.to_string(),
        version: INTERCHANGE_VERSION,
        name: corpus.name.clone(),
        format_tag: corpus.format_tag,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for doc in &corpus.documents {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    out
}

pub fn from_interchange(text: &str) -> Result<Corpus, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| FormatError::SchemaVersion {
        expected: format!("{INTERCHANGE_SCHEMA} v{INTERCHANGE_VERSION}"),
        found: "empty input".into(),
    })?;
    let header: Header = serde_json::from_str(first).map_err(|source| FormatError::Json { line: 1, source })?;
    if header.schema != INTERCHANGE_SCHEMA || header.version != INTERCHANGE_VERSION {
        return Err(FormatError::SchemaVersion {
            expected: format!("{INTERCHANGE_SCHEMA} v{INTERCHANGE_VERSION}"),
            found: format!("{} v{}", header.schema, header.version),
        });
    }
    let mut corpus = Corpus::new(header.name, header.format_tag);
    for (i, line) in lines {
        let doc: Document = serde_json::from_str(line).map_err(|source| FormatError::Json { line: i + 1, source })?;
        doc.validate().map_err(|e| FormatError::Parse { line: i + 1, message: e.to_string() })?;
        corpus.documents.push(doc);
    }
    corpus.validate().map_err(|e| match e {
        crate::error::CorefError::InvalidDocument { doc_id, .. } => FormatError::DuplicateDocId(doc_id),
        other => FormatError::Parse { line: 0, message: other.to_string() },
    })?;
    Ok(corpus)
}
