//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use dcoref_core::doc_model::{ClusterSet, Document, Span};
use dcoref_core::preprocess::augment_speakers;
use dcoref_core::score_table::ScoreTable;
use dcoref_core::scorer::loss::{coref_loss_grad, gold_antecedents, gold_mention_indices, mention_loss_grad, ScoreGrad};
use dcoref_core::scorer::{sample_negatives, ModelConfig, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two speaker turns with one cross-turn link and a singleton.
pub fn toy_document() -> Document {
    let mut doc = Document::from_sentences(
        "toy",
        &[(Some("a"), vec!["mary", "saw", "the", "dog"]), (Some("b"), vec!["she", "likes", "it", "."])],
        true,
    );
    doc.gold_clusters = Some(
        ClusterSet::new(vec![
            vec![Span::new(0, 0), Span::new(4, 4)],
            vec![Span::new(2, 3), Span::new(6, 6)],
            vec![Span::new(5, 5)],
        ])
        .unwrap(),
    );
    augment_speakers(&doc).0
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        token_dim: 3,
        width_dim: 2,
        feature_dim: 2,
        hidden_size: 5,
        hidden_layers: 2,
        max_span_width: 3,
        max_antecedents: 4,
        ..ModelConfig::default()
    }
}

/// ℒ with candidates and negatives held fixed, so it is a smooth function
/// of the parameters (up to ReLU kinks).
pub struct FixedObjective {
    pub doc: Document,
    pub candidates: Vec<Span>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub alpha: f64,
}

impl FixedObjective {
    pub fn new(params: &Parameters, doc: Document, seed: u64, alpha: f64) -> Self {
        let table = params.score(&doc).unwrap();
        let gold = doc.gold_clusters.clone().unwrap();
        let positives = gold_mention_indices(&table, &gold);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let negatives = sample_negatives(table.len(), &positives, &mut rng);
        FixedObjective { doc, candidates: table.candidates, positives, negatives, alpha }
    }

    pub fn loss_and_grad(&self, params: &Parameters) -> (f64, Parameters) {
        let pass = params.forward(&self.doc, Some(&self.candidates)).unwrap();
        let (lc, mut g) = self.score_grad(&pass.table);
        let (lm, mut gm) = mention_loss_grad(&pass.table, &self.positives, &self.negatives);
        gm.scale(self.alpha);
        g.add(&gm);
        (lc + self.alpha * lm, params.backward(&pass, &g))
    }

    fn score_grad(&self, table: &ScoreTable) -> (f64, ScoreGrad) {
        let gold = gold_antecedents(table, self.doc.gold_clusters.as_ref().unwrap());
        coref_loss_grad(table, &gold).unwrap()
    }

    pub fn loss(&self, params: &Parameters) -> f64 {
        self.loss_and_grad(params).0
    }
}

pub struct GradientReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
}

/// Compares every analytic partial derivative against a central difference.
/// Relative error is |a − n| / max(|a|, |n|, floor).
pub fn gradient_check(seed: u64, h: f64, floor: f64) -> GradientReport {
    let config = tiny_config();
    let doc = toy_document();
    let vocab = doc.tokens.iter().map(|t| t.text.clone()).collect::<Vec<_>>();
    let mut params = Parameters::init(&config, vocab, seed);
    // non-zero attention so the soft-head path is exercised
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    params.head_attention.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    let objective = FixedObjective::new(&params, doc, seed, 0.1);
    let (_, analytic) = objective.loss_and_grad(&params);
    let analytic: Vec<(String, Vec<f64>)> =
        analytic.tensors().into_iter().map(|(n, _, t)| (n.to_string(), t.to_vec())).collect();

    let mut report = GradientReport { checked: 0, max_rel_error: 0.0, worst: String::new() };
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].2[k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].2[k] -= h;
            let numeric = (objective.loss(&plus) - objective.loss(&minus)) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = format!("{name}[{k}]: analytic {a:e}, numeric {numeric:e}");
            }
        }
    }
    report
}

/// Clusters as connected components of the chosen links (BFS), plus
/// unlinked candidates with a positive mention score.
pub fn components_oracle(table: &ScoreTable, allow_singletons: bool) -> BTreeSet<BTreeSet<Span>> {
    let n = table.len();
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let start = i.saturating_sub(table.max_antecedents);
        let mut best: Option<(usize, f64)> = None;
        for j in start..i {
            let s = table.mention_scores[i] + table.mention_scores[j] + table.antecedent_scores[i][j - start];
            // the nearest wins among equals, the dummy wins at zero
            if s > 0.0 && best.is_none_or(|(_, b)| s >= b) {
                best = Some((j, s));
            }
        }
        if let Some((j, _)) = best {
            adj.entry(i).or_default().push(j);
            adj.entry(j).or_default().push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut comp = BTreeSet::from([table.candidates[root]]);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &y in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
                if !seen[y] {
                    seen[y] = true;
                    comp.insert(table.candidates[y]);
                    queue.push_back(y);
                }
            }
        }
        if comp.len() > 1 || (allow_singletons && table.mention_scores[root] > 0.0) {
            out.insert(comp);
        }
    }
    out
}

pub fn as_sets(clusters: &ClusterSet) -> BTreeSet<BTreeSet<Span>> {
    clusters.clusters().iter().map(|c| c.iter().copied().collect()).collect()
}

/// A random table over `n` single-token candidates; scores on a coarse grid
/// so ties occur.
pub fn random_table<R: Rng>(rng: &mut R, n: usize, max_antecedents: usize) -> ScoreTable {
    let grid = |rng: &mut R| (rng.random_range(-6i32..=6) as f64) * 0.25;
    ScoreTable {
        doc_id: "rand".into(),
        candidates: (0..n).map(|i| Span::new(i, i)).collect(),
        mention_scores: (0..n).map(|_| grid(rng)).collect(),
        antecedent_scores: (0..n).map(|i| (i.saturating_sub(max_antecedents)..i).map(|_| grid(rng)).collect()).collect(),
        max_antecedents,
    }
}
