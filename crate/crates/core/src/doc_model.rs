//! Documents, spans, clusters and corpora.
//!
//! All indices are token-level. A [`Span`] is inclusive on both ends, a
//! [`Sentence`] is half-open `[start, end)`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, span: Span) -> bool {
        self.start <= span.start && span.end < self.end
    }
}

/// Token interval, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} after end {end}");
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }

    /// Partial overlap without nesting.
    pub fn crosses(&self, other: &Span) -> bool {
        (self.start < other.start && other.start <= self.end && self.end < other.end)
            || (other.start < self.start && self.start <= other.end && other.end < self.end)
    }

    pub fn shifted(&self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

/// Sorts spans ascending by start, then by end.
pub fn candidate_order<I: IntoIterator<Item = Span>>(spans: I) -> Vec<Span> {
    let mut out: Vec<Span> = spans.into_iter().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// A partition of a mention subset into entities.
///
/// Stored in normal form: each cluster sorted in candidate order and the
/// clusters sorted by their first mention, so structural equality is set
/// equality.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Span>>", into = "Vec<Vec<Span>>")]
pub struct ClusterSet {
    clusters: Vec<Vec<Span>>,
}

impl ClusterSet {
    pub fn new(clusters: Vec<Vec<Span>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(clusters.len());
        for cluster in clusters {
            if cluster.is_empty() {
                return Err(CorefError::InvalidClusters("empty cluster".into()));
            }
            let sorted = candidate_order(cluster.iter().copied());
            if sorted.len() != cluster.len() {
                return Err(CorefError::InvalidClusters("duplicate span inside a cluster".into()));
            }
            for span in &sorted {
                if span.start > span.end {
                    return Err(CorefError::InvalidClusters(format!("malformed span {span}")));
                }
                if !seen.insert(*span) {
                    return Err(CorefError::InvalidClusters(format!(
                        "span {span} appears in more than one cluster"
                    )));
                }
            }
            normalized.push(sorted);
        }
        normalized.sort_unstable();
        Ok(ClusterSet { clusters: normalized })
    }

    pub fn empty() -> Self {
        ClusterSet::default()
    }

    pub fn clusters(&self) -> &[Vec<Span>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mentions(&self) -> impl Iterator<Item = Span> + '_ {
        self.clusters.iter().flatten().copied()
    }

    pub fn mention_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn singletons(&self) -> impl Iterator<Item = Span> + '_ {
        self.clusters.iter().filter(|c| c.len() == 1).map(|c| c[0])
    }

    pub fn singleton_count(&self) -> usize {
        self.clusters.iter().filter(|c| c.len() == 1).count()
    }

    /// Applies `f` to every span and drops spans mapped to `None`, along with
    /// clusters left empty.
    pub fn filter_map_spans<F>(&self, mut f: F) -> Result<ClusterSet>
    where
        F: FnMut(Span) -> Option<Span>,
    {
        let clusters = self
            .clusters
            .iter()
            .map(|c| c.iter().filter_map(|s| f(*s)).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();
        ClusterSet::new(clusters)
    }

    pub fn into_inner(self) -> Vec<Vec<Span>> {
        self.clusters
    }
}

impl TryFrom<Vec<Vec<Span>>> for ClusterSet {
    type Error = CorefError;

    fn try_from(value: Vec<Vec<Span>>) -> Result<Self> {
        ClusterSet::new(value)
    }
}

impl From<ClusterSet> for Vec<Vec<Span>> {
    fn from(value: ClusterSet) -> Self {
        value.clusters
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
    pub is_dialogue: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_clusters: Option<ClusterSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_referring: Option<BTreeSet<Span>>,
}

impl Document {
    /// Builds a document from sentences of token strings.
    pub fn from_sentences<S: AsRef<str>>(
        doc_id: impl Into<String>,
        sentences: &[(Option<&str>, Vec<S>)],
        is_dialogue: bool,
    ) -> Document {
        let mut tokens = Vec::new();
        let mut bounds = Vec::new();
        for (speaker, words) in sentences {
            let start = tokens.len();
            for w in words {
                tokens.push(Token { text: w.as_ref().to_string(), index: tokens.len() });
            }
            bounds.push(Sentence { start, end: tokens.len(), speaker: speaker.map(str::to_string) });
        }
        Document {
            doc_id: doc_id.into(),
            tokens,
            sentences: bounds,
            is_dialogue,
            gold_clusters: None,
            non_referring: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Sentence index of every token.
    pub fn sentence_of_token(&self) -> Vec<usize> {
        let mut out = vec![0; self.tokens.len()];
        for (i, s) in self.sentences.iter().enumerate() {
            out[s.start..s.end].iter_mut().for_each(|x| *x = i);
        }
        out
    }

    pub fn non_referring_iter(&self) -> impl Iterator<Item = Span> + '_ {
        self.non_referring.iter().flatten().copied()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| CorefError::InvalidDocument { doc_id: self.doc_id.clone(), message };
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                return Err(bad(format!("token {i} carries index {}", t.index)));
            }
            if t.text.is_empty() {
                return Err(bad(format!("token {i} is empty")));
            }
        }
        let mut cursor = 0;
        for s in &self.sentences {
            if s.start != cursor || s.start >= s.end {
                return Err(bad(format!("sentence [{}, {}) does not tile the document", s.start, s.end)));
            }
            cursor = s.end;
        }
        if cursor != self.tokens.len() {
            return Err(bad(format!("sentences cover {cursor} of {} tokens", self.tokens.len())));
        }
        let len = self.tokens.len();
        let in_bounds = |s: &Span| s.start <= s.end && s.end < len;
        if let Some(gold) = &self.gold_clusters {
            if let Some(s) = gold.mentions().find(|s| !in_bounds(s)) {
                return Err(bad(format!("gold mention {s} out of bounds")));
            }
        }
        if let Some(nr) = &self.non_referring {
            if let Some(s) = nr.iter().find(|s| !in_bounds(s)) {
                return Err(bad(format!("non-referring span {s} out of bounds")));
            }
            if let Some(gold) = &self.gold_clusters {
                if let Some(s) = gold.mentions().find(|s| nr.contains(s)) {
                    return Err(bad(format!("span {s} is both a mention and non-referring")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatTag {
    #[serde(rename = "UA")]
    Ua,
    #[serde(rename = "CONLL")]
    Conll,
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormatTag::Ua => "UA",
            FormatTag::Conll => "CONLL",
        })
    }
}

impl std::str::FromStr for FormatTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "UA" => Ok(FormatTag::Ua),
            "CONLL" => Ok(FormatTag::Conll),
            other => Err(format!("unknown format tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<Document>,
    pub format_tag: FormatTag,
}

impl Corpus {
    pub fn new(name: impl Into<String>, format_tag: FormatTag) -> Self {
        Corpus { name: name.into(), documents: Vec::new(), format_tag }
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for d in &self.documents {
            if !ids.insert(d.doc_id.as_str()) {
                return Err(CorefError::InvalidDocument {
                    doc_id: d.doc_id.clone(),
                    message: "duplicate doc_id in corpus".into(),
                });
            }
            d.validate()?;
        }
        Ok(())
    }
}

/// Closed personal-pronoun list used for the pronoun mention count.
pub const PERSONAL_PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "you", "your", "yours", "he", "him", "his", "she", "her", "hers", "we",
    "us", "our", "ours", "they", "them", "their", "theirs", "it", "its",
];

pub fn is_personal_pronoun(text: &str) -> bool {
    let lower = text.to_lowercase();
    PERSONAL_PRONOUNS.contains(&lower.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub mentions: usize,
    pub clusters: usize,
    pub singletons: usize,
    pub singleton_pct: f64,
    pub pronoun_mentions: usize,
    pub pronoun_pct: f64,
    pub avg_speakers: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Counts documents, mentions, clusters, singletons, personal-pronoun
/// mentions and known speakers. Non-referring spans are never counted.
pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    let mut mentions = 0;
    let mut clusters = 0;
    let mut singletons = 0;
    let mut pronouns = 0;
    let mut speakers = 0;
    for doc in &corpus.documents {
        let gold = doc.gold_clusters.as_ref().ok_or_else(|| CorefError::MissingGold(doc.doc_id.clone()))?;
        let nr: BTreeSet<Span> = doc.non_referring_iter().collect();
        for cluster in gold.clusters() {
            let kept: Vec<&Span> = cluster.iter().filter(|s| !nr.contains(s)).collect();
            if kept.is_empty() {
                continue;
            }
            clusters += 1;
            mentions += kept.len();
            if kept.len() == 1 {
                singletons += 1;
            }
            pronouns += kept
                .iter()
                .filter(|s| s.width() == 1 && is_personal_pronoun(&doc.tokens[s.start].text))
                .count();
        }
        speakers += doc
            .sentences
            .iter()
            .filter_map(|s| s.speaker.as_deref())
            .collect::<BTreeSet<_>>()
            .len();
    }
    let documents = corpus.documents.len();
    Ok(CorpusStats {
        documents,
        mentions,
        clusters,
        singletons,
        singleton_pct: pct(singletons, clusters),
        pronoun_mentions: pronouns,
        pronoun_pct: pct(pronouns, mentions),
        avg_speakers: if documents == 0 { 0.0 } else { speakers as f64 / documents as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(s: usize, e: usize) -> Span {
        Span::new(s, e)
    }

    #[test]
    fn candidate_order_examples() {
        assert_eq!(candidate_order([sp(3, 4), sp(0, 0), sp(0, 2)]), vec![sp(0, 0), sp(0, 2), sp(3, 4)]);
        assert_eq!(candidate_order(Vec::<Span>::new()), vec![]);
        assert_eq!(candidate_order([sp(1, 5), sp(1, 3)]), vec![sp(1, 3), sp(1, 5)]);
    }

    proptest! {
        #[test]
        fn candidate_order_is_total(raw in proptest::collection::btree_set((0usize..20, 0usize..5), 0..30), seed in any::<u64>()) {
            let spans: Vec<Span> = raw.iter().map(|&(s, w)| sp(s, s + w)).collect();
            let once = candidate_order(spans.clone());
            prop_assert_eq!(candidate_order(once.clone()), once.clone());
            let mut shuffled = spans.clone();
            let k = (seed as usize) % (shuffled.len().max(1));
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(candidate_order(shuffled), once.clone());
            for w in once.windows(2) {
                prop_assert!((w[0].start, w[0].end) < (w[1].start, w[1].end));
            }
        }

        #[test]
        fn singleton_count_matches_recount(sizes in proptest::collection::vec(1usize..4, 0..10)) {
            let mut next = 0;
            let clusters: Vec<Vec<Span>> = sizes.iter().map(|&n| {
                (0..n).map(|_| { next += 1; sp(next, next) }).collect()
            }).collect();
            let tokens: Vec<String> = (0..=next).map(|i| format!("w{i}")).collect();
            let mut doc = Document::from_sentences("d", &[(None, tokens)], false);
            doc.gold_clusters = Some(ClusterSet::new(clusters).unwrap());
            let corpus = Corpus { name: "c".into(), documents: vec![doc], format_tag: FormatTag::Ua };
            let stats = corpus_stats(&corpus).unwrap();
            prop_assert_eq!(stats.singletons, sizes.iter().filter(|&&n| n == 1).count());
            prop_assert_eq!(stats.clusters, sizes.len());
        }
    }

    fn toy_corpus(clusters: Vec<Vec<Span>>) -> Corpus {
        let mut doc = Document::from_sentences("d", &[(Some("A"), vec!["a", "b", "c"])], true);
        doc.gold_clusters = Some(ClusterSet::new(clusters).unwrap());
        Corpus { name: "toy".into(), documents: vec![doc], format_tag: FormatTag::Ua }
    }

    #[test]
    fn stats_count_singletons() {
        let stats = corpus_stats(&toy_corpus(vec![vec![sp(0, 0)], vec![sp(1, 1), sp(2, 2)]])).unwrap();
        assert_eq!(stats.clusters, 2);
        assert_eq!(stats.singletons, 1);
        assert_eq!(stats.singleton_pct, 50.0);
        assert_eq!(stats.avg_speakers, 1.0);
    }

    #[test]
    fn stats_of_empty_cluster_set_report_zero_pct() {
        let stats = corpus_stats(&toy_corpus(vec![])).unwrap();
        assert_eq!(stats.clusters, 0);
        assert_eq!(stats.singleton_pct, 0.0);
    }

    #[test]
    fn stats_require_gold() {
        let doc = Document::from_sentences("x", &[(None, vec!["a"])], false);
        let corpus = Corpus { name: "c".into(), documents: vec![doc], format_tag: FormatTag::Conll };
        assert!(matches!(corpus_stats(&corpus), Err(CorefError::MissingGold(_))));
    }

    #[test]
    fn stats_count_pronouns_case_insensitively() {
        let mut doc = Document::from_sentences("d", &[(None, vec!["She", "saw", "IT", "there"])], false);
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(0, 0)], vec![sp(2, 2)], vec![sp(3, 3)]]).unwrap());
        let corpus = Corpus { name: "c".into(), documents: vec![doc], format_tag: FormatTag::Ua };
        assert_eq!(corpus_stats(&corpus).unwrap().pronoun_mentions, 2);
    }

    #[test]
    fn cluster_set_rejects_shared_span() {
        assert!(ClusterSet::new(vec![vec![sp(0, 0)], vec![sp(0, 0), sp(1, 1)]]).is_err());
        assert!(ClusterSet::new(vec![vec![]]).is_err());
    }

    #[test]
    fn crossing_detection() {
        assert!(sp(0, 2).crosses(&sp(1, 3)));
        assert!(sp(1, 3).crosses(&sp(0, 2)));
        assert!(!sp(0, 3).crosses(&sp(1, 2)));
        assert!(!sp(0, 1).crosses(&sp(2, 3)));
        assert!(!sp(0, 1).crosses(&sp(0, 2)));
    }

    #[test]
    fn validate_rejects_overlap_of_gold_and_non_referring() {
        let mut doc = Document::from_sentences("d", &[(None, vec!["it", "rains"])], false);
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(0, 0)]]).unwrap());
        doc.non_referring = Some([sp(0, 0)].into_iter().collect());
        assert!(doc.validate().is_err());
    }
}
