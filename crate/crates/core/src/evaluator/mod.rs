//! Coreference evaluation: MUC, B³, CEAF-φ4, their average, and mention /
//! singleton detection scores.
//!
//! Every metric is computed from additive [`Counts`] so a corpus score is the
//! ratio of summed numerators and denominators (micro aggregation). Macro
//! aggregation averages per-document precision and recall instead.

mod assignment;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use assignment::max_weight_assignment;

use crate::doc_model::{ClusterSet, Document, Span};
use crate::error::{CorefError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { precision, recall, f1 }
    }
}

/// Precision and recall as numerator/denominator pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub p_num: f64,
    pub p_den: f64,
    pub r_num: f64,
    pub r_den: f64,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        let ratio = |n: f64, d: f64| if d == 0.0 { 0.0 } else { n / d };
        Prf::new(ratio(self.p_num, self.p_den), ratio(self.r_num, self.r_den))
    }

    pub fn precision_defined(&self) -> bool {
        self.p_den > 0.0
    }

    pub fn recall_defined(&self) -> bool {
        self.r_den > 0.0
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.p_num += o.p_num;
        self.p_den += o.p_den;
        self.r_num += o.r_num;
        self.r_den += o.r_den;
    }
}

/// Removes `exclude` from both sides and drops clusters left empty.
pub fn align_and_filter(key: &ClusterSet, response: &ClusterSet, exclude: &BTreeSet<Span>) -> (ClusterSet, ClusterSet) {
    let keep = |s: Span| (!exclude.contains(&s)).then_some(s);
    (
        key.filter_map_spans(keep).expect("filtering keeps clusters disjoint"),
        response.filter_map_spans(keep).expect("filtering keeps clusters disjoint"),
    )
}

fn cluster_index(set: &ClusterSet) -> HashMap<Span, usize> {
    set.clusters()
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |s| (*s, i)))
        .collect()
}

/// Sum over `clusters` of |K| - parts(K), and of |K| - 1, where parts(K)
/// counts the pieces `other` splits K into, unmatched mentions counting one
/// piece each.
fn muc_side(clusters: &ClusterSet, other: &ClusterSet) -> (f64, f64) {
    let index = cluster_index(other);
    let mut num = 0.0;
    let mut den = 0.0;
    for c in clusters.clusters() {
        let mut parts = HashSet::new();
        let mut unmatched = 0;
        for s in c {
            match index.get(s) {
                Some(i) => {
                    parts.insert(*i);
                }
                None => unmatched += 1,
            }
        }
        num += (c.len() - parts.len() - unmatched) as f64;
        den += (c.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_counts(key: &ClusterSet, response: &ClusterSet) -> Counts {
    let (r_num, r_den) = muc_side(key, response);
    let (p_num, p_den) = muc_side(response, key);
    Counts { p_num, p_den, r_num, r_den }
}

/// MUC. On link-free inputs both denominators vanish and P = R = F = 0; use
/// [`muc_counts`] to detect that case.
pub fn muc(key: &ClusterSet, response: &ClusterSet) -> Prf {
    muc_counts(key, response).prf()
}

fn b3_side(clusters: &ClusterSet, other: &ClusterSet) -> (f64, f64) {
    let index = cluster_index(other);
    let others = other.clusters();
    let mut num = 0.0;
    for c in clusters.clusters() {
        let members: HashSet<&Span> = c.iter().collect();
        for s in c {
            if let Some(&i) = index.get(s) {
                let overlap = others[i].iter().filter(|m| members.contains(m)).count();
                num += overlap as f64 / c.len() as f64;
            }
        }
    }
    (num, clusters.mention_count() as f64)
}

pub fn b_cubed_counts(key: &ClusterSet, response: &ClusterSet) -> Counts {
    let (r_num, r_den) = b3_side(key, response);
    let (p_num, p_den) = b3_side(response, key);
    Counts { p_num, p_den, r_num, r_den }
}

pub fn b_cubed(key: &ClusterSet, response: &ClusterSet) -> Result<Prf> {
    if key.mention_count() == 0 {
        return Err(CorefError::EmptyKey);
    }
    Ok(b_cubed_counts(key, response).prf())
}

pub fn phi4(a: &[Span], b: &[Span]) -> f64 {
    let set: HashSet<&Span> = a.iter().collect();
    let common = b.iter().filter(|s| set.contains(s)).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

pub fn ceaf_phi4_counts(key: &ClusterSet, response: &ClusterSet) -> Counts {
    let weights: Vec<Vec<f64>> = key
        .clusters()
        .iter()
        .map(|k| response.clusters().iter().map(|r| phi4(k, r)).collect())
        .collect();
    let (total, _) = max_weight_assignment(&weights);
    Counts { p_num: total, p_den: response.len() as f64, r_num: total, r_den: key.len() as f64 }
}

/// CEAF with the φ4 entity similarity. An empty response yields precision 0
/// (undefined); see [`Counts::precision_defined`].
pub fn ceaf_phi4(key: &ClusterSet, response: &ClusterSet) -> Prf {
    ceaf_phi4_counts(key, response).prf()
}

fn set_counts(key: &HashSet<Span>, response: &HashSet<Span>) -> Counts {
    let common = key.intersection(response).count() as f64;
    Counts { p_num: common, p_den: response.len() as f64, r_num: common, r_den: key.len() as f64 }
}

pub fn mention_counts(key: &ClusterSet, response: &ClusterSet) -> Counts {
    set_counts(&key.mentions().collect(), &response.mentions().collect())
}

pub fn singleton_counts(key: &ClusterSet, response: &ClusterSet) -> Counts {
    set_counts(&key.singletons().collect(), &response.singletons().collect())
}

pub fn mention_prf(key: &ClusterSet, response: &ClusterSet) -> Prf {
    mention_counts(key, response).prf()
}

pub fn singleton_prf(key: &ClusterSet, response: &ClusterSet) -> Prf {
    singleton_counts(key, response).prf()
}

pub fn avg_f1(muc: f64, b_cubed: f64, ceaf: f64) -> f64 {
    (muc + b_cubed + ceaf) / 3.0
}

/// All counts for one document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DocumentCounts {
    pub muc: Counts,
    pub b_cubed: Counts,
    pub ceaf_phi4: Counts,
    pub mentions: Counts,
    pub singletons: Counts,
}

impl std::ops::AddAssign for DocumentCounts {
    fn add_assign(&mut self, o: DocumentCounts) {
        self.muc += o.muc;
        self.b_cubed += o.b_cubed;
        self.ceaf_phi4 += o.ceaf_phi4;
        self.mentions += o.mentions;
        self.singletons += o.singletons;
    }
}

pub fn document_counts(key: &ClusterSet, response: &ClusterSet, exclude: &BTreeSet<Span>) -> DocumentCounts {
    let (key, response) = align_and_filter(key, response, exclude);
    DocumentCounts {
        muc: muc_counts(&key, &response),
        b_cubed: b_cubed_counts(&key, &response),
        ceaf_phi4: ceaf_phi4_counts(&key, &response),
        mentions: mention_counts(&key, &response),
        singletons: singleton_counts(&key, &response),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Micro,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub aggregation: Aggregation,
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_phi4: Prf,
    pub avg_f1: f64,
    pub mentions: Prf,
    pub singletons: Prf,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvalReport {
    fn from_parts(documents: usize, aggregation: Aggregation, parts: [Prf; 5], warnings: Vec<String>) -> Self {
        let [muc, b_cubed, ceaf_phi4, mentions, singletons] = parts;
        EvalReport {
            documents,
            aggregation,
            muc,
            b_cubed,
            ceaf_phi4,
            avg_f1: avg_f1(muc.f1, b_cubed.f1, ceaf_phi4.f1),
            mentions,
            singletons,
            warnings,
        }
    }

    /// Percent table in the usual MUC / B³ / CEAF-φ4 / Avg layout.
    pub fn render_table(&self) -> String {
        let row = |name: &str, p: &Prf| {
            format!("{name:<10} {:>7.2} {:>7.2} {:>7.2}\n", 100.0 * p.precision, 100.0 * p.recall, 100.0 * p.f1)
        };
        let mut out = format!("{:<10} {:>7} {:>7} {:>7}\n", "metric", "P", "R", "F1");
        out += &row("MUC", &self.muc);
        out += &row("B3", &self.b_cubed);
        out += &row("CEAF_phi4", &self.ceaf_phi4);
        out += &format!("{:<10} {:>23.2}\n", "Avg F1", 100.0 * self.avg_f1);
        out += &row("Mentions", &self.mentions);
        out += &row("Singletons", &self.singletons);
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        out
    }
}

/// Scores one key/response pair of cluster sets.
pub fn evaluate(key: &ClusterSet, response: &ClusterSet, exclude: &BTreeSet<Span>) -> Result<EvalReport> {
    evaluate_counts(&[document_counts(key, response, exclude)], Aggregation::Micro)
}

pub fn evaluate_counts(per_doc: &[DocumentCounts], aggregation: Aggregation) -> Result<EvalReport> {
    let mut total = DocumentCounts::default();
    for c in per_doc {
        total += *c;
    }
    if total.b_cubed.r_den == 0.0 {
        return Err(CorefError::EmptyKey);
    }
    let mut warnings = Vec::new();
    if !total.muc.recall_defined() && !total.muc.precision_defined() {
        warnings.push("MUC undefined: neither key nor response contains a link".to_string());
    }
    if !total.ceaf_phi4.precision_defined() {
        warnings.push("CEAF precision undefined: empty response".to_string());
    }
    let parts = match aggregation {
        Aggregation::Micro => [total.muc, total.b_cubed, total.ceaf_phi4, total.mentions, total.singletons].map(|c| c.prf()),
        Aggregation::Macro => {
            let n = per_doc.len().max(1) as f64;
            let mean = |pick: fn(&DocumentCounts) -> Counts| {
                let (p, r) = per_doc.iter().fold((0.0, 0.0), |(p, r), d| {
                    let prf = pick(d).prf();
                    (p + prf.precision, r + prf.recall)
                });
                Prf::new(p / n, r / n)
            };
            [mean(|d| d.muc), mean(|d| d.b_cubed), mean(|d| d.ceaf_phi4), mean(|d| d.mentions), mean(|d| d.singletons)]
        }
    };
    Ok(EvalReport::from_parts(per_doc.len(), aggregation, parts, warnings))
}

/// Scores response documents against key documents matched by doc_id.
/// Non-referring spans of the key are excluded when `exclude_non_referring`.
pub fn evaluate_documents(
    key: &[Document],
    response: &[Document],
    exclude_non_referring: bool,
    aggregation: Aggregation,
) -> Result<EvalReport> {
    let by_id: HashMap<&str, &Document> = response.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let key_ids: HashSet<&str> = key.iter().map(|d| d.doc_id.as_str()).collect();
    let mut offenders: Vec<String> = key
        .iter()
        .filter(|d| !by_id.contains_key(d.doc_id.as_str()))
        .map(|d| format!("missing in response: {}", d.doc_id))
        .collect();
    offenders.extend(
        response
            .iter()
            .filter(|d| !key_ids.contains(d.doc_id.as_str()))
            .map(|d| format!("missing in key: {}", d.doc_id)),
    );
    if !offenders.is_empty() {
        return Err(CorefError::DocMismatch(offenders.join(", ")));
    }
    let empty = ClusterSet::empty();
    let per_doc: Vec<DocumentCounts> = key
        .iter()
        .map(|k| {
            let r = by_id[k.doc_id.as_str()];
            let exclude: BTreeSet<Span> =
                if exclude_non_referring { k.non_referring_iter().collect() } else { BTreeSet::new() };
            document_counts(
                k.gold_clusters.as_ref().unwrap_or(&empty),
                r.gold_clusters.as_ref().unwrap_or(&empty),
                &exclude,
            )
        })
        .collect();
    evaluate_counts(&per_doc, aggregation)
}
