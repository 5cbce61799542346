//! Singleton-aware mention-ranking coreference resolution for dialogue
//! documents: corpus formats, speaker-augmented preprocessing, a trainable
//! span scorer, a singleton-aware decoder and the MUC / B³ / CEAF-φ4
//! evaluation suite.

pub mod decoder;
pub mod doc_model;
pub mod error;
pub mod evaluator;
pub mod format_io;
pub mod pipeline;
pub mod preprocess;
pub mod scorer;
pub mod score_table;
pub mod seed;
pub mod synthetic;

pub use doc_model::{candidate_order, corpus_stats, ClusterSet, Corpus, CorpusStats, Document, FormatTag, Sentence, Span, Token};
pub use error::{CorefError, FormatError};
