//! Scores produced by the span scorer for one document: mention scores for
//! the pruned candidates and antecedent scores inside each candidate's
//! window. The dummy antecedent always scores 0.

use serde::{Deserialize, Serialize};

use crate::doc_model::Span;
use crate::error::{CorefError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Antecedent {
    Dummy,
    Candidate(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct ScoreTable {
    pub doc_id: String,
    pub candidates: Vec<Span>,
    pub mention_scores: Vec<f64>,
    /// `antecedent_scores[i][k]` is s_a(i, window_start(i) + k).
    pub antecedent_scores: Vec<Vec<f64>>,
    pub max_antecedents: usize,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn window_start(&self, i: usize) -> usize {
        i.saturating_sub(self.max_antecedents)
    }

    pub fn window(&self, i: usize) -> std::ops::Range<usize> {
        self.window_start(i)..i
    }

    pub fn antecedent_score(&self, i: usize, j: usize) -> Result<f64> {
        if j >= i || j < self.window_start(i) || i >= self.len() {
            return Err(CorefError::InvalidAntecedent { candidate: i, antecedent: j });
        }
        Ok(self.antecedent_scores[i][j - self.window_start(i)])
    }

    /// s(i, y) = s_m(i) + s_m(y) + s_a(i, y); s(i, ε) = 0.
    pub fn pair_score(&self, i: usize, y: Antecedent) -> Result<f64> {
        match y {
            Antecedent::Dummy => Ok(0.0),
            Antecedent::Candidate(j) => {
                let sa = self.antecedent_score(i, j)?;
                Ok(self.mention_scores[i] + self.mention_scores[j] + sa)
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.candidates.len();
        let bad = |m: String| CorefError::InvalidClusters(format!("score table {}: {m}", self.doc_id));
        if self.mention_scores.len() != n || self.antecedent_scores.len() != n {
            return Err(bad("length mismatch".into()));
        }
        for (i, row) in self.antecedent_scores.iter().enumerate() {
            if row.len() != i - self.window_start(i) {
                return Err(bad(format!("window of candidate {i} has {} entries", row.len())));
            }
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("candidates are not in candidate order".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRecord {
    doc_id: String,
    max_antecedents: usize,
    candidates: Vec<Span>,
    mention_scores: Vec<f64>,
    /// (candidate, antecedent, s_a)
    antecedent_scores: Vec<(usize, usize, f64)>,
}

impl From<ScoreTable> for TableRecord {
    fn from(t: ScoreTable) -> Self {
        let antecedent_scores = t
            .antecedent_scores
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                let start = t.window_start(i);
                row.iter().enumerate().map(move |(k, s)| (i, start + k, *s))
            })
            .collect();
        TableRecord {
            doc_id: t.doc_id,
            max_antecedents: t.max_antecedents,
            candidates: t.candidates,
            mention_scores: t.mention_scores,
            antecedent_scores,
        }
    }
}

impl TryFrom<TableRecord> for ScoreTable {
    type Error = CorefError;

    fn try_from(r: TableRecord) -> Result<Self> {
        let mut table = ScoreTable {
            doc_id: r.doc_id,
            antecedent_scores: (0..r.candidates.len())
                .map(|i| vec![f64::NAN; i - i.saturating_sub(r.max_antecedents)])
                .collect(),
            candidates: r.candidates,
            mention_scores: r.mention_scores,
            max_antecedents: r.max_antecedents,
        };
        for (i, j, s) in r.antecedent_scores {
            if i >= table.len() || j >= i || j < table.window_start(i) {
                return Err(CorefError::InvalidAntecedent { candidate: i, antecedent: j });
            }
            let start = table.window_start(i);
            table.antecedent_scores[i][j - start] = s;
        }
        if table.antecedent_scores.iter().flatten().any(|s| s.is_nan()) {
            return Err(CorefError::InvalidClusters(format!("score table {}: missing antecedent scores", table.doc_id)));
        }
        table.check()?;
        Ok(table)
    }
}

/// One table per line.
pub fn tables_to_jsonl(tables: &[ScoreTable]) -> String {
    tables
        .iter()
        .map(|t| serde_json::to_string(t).expect("table serializes") + "\n")
        .collect()
}

pub fn tables_from_jsonl(text: &str) -> std::result::Result<Vec<ScoreTable>, crate::error::FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| crate::error::FormatError::Json { line: i + 1, source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table(sm: &[f64], sa: &[&[f64]]) -> ScoreTable {
        ScoreTable {
            doc_id: "t".into(),
            candidates: (0..sm.len()).map(|i| Span::new(i, i)).collect(),
            mention_scores: sm.to_vec(),
            antecedent_scores: sa.iter().map(|r| r.to_vec()).collect(),
            max_antecedents: 50,
        }
    }

    #[test]
    fn pair_score_sums_three_terms() {
        let t = table(&[0.5, 1.0], &[&[], &[-0.2]]);
        assert!((t.pair_score(1, Antecedent::Candidate(0)).unwrap() - 1.3).abs() < 1e-12);
        assert_eq!(t.pair_score(1, Antecedent::Dummy).unwrap(), 0.0);
        assert_eq!(t.pair_score(0, Antecedent::Dummy).unwrap(), 0.0);
        assert!(t.pair_score(0, Antecedent::Candidate(1)).is_err());
        assert!(t.pair_score(1, Antecedent::Candidate(1)).is_err());
    }

    #[test]
    fn window_limits() {
        let mut t = table(&[0.0; 4], &[&[], &[1.0], &[2.0], &[3.0]]);
        t.max_antecedents = 1;
        t.check().unwrap();
        assert_eq!(t.window(3), 2..3);
        assert!(t.antecedent_score(3, 1).is_err());
        assert_eq!(t.antecedent_score(3, 2).unwrap(), 3.0);
    }

    #[test]
    fn jsonl_round_trip() {
        let t = table(&[0.1, -0.7, 0.3], &[&[], &[0.25], &[-1.5, 1e-300]]);
        let text = tables_to_jsonl(std::slice::from_ref(&t));
        assert_eq!(tables_from_jsonl(&text).unwrap(), vec![t]);
        assert!(text.contains("[2,1,1e-300]"));
    }
}
