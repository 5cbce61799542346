//! Training objectives: the marginal log-likelihood over gold antecedents
//! and the sampled binary cross-entropy on mention scores.

use rand::seq::index::sample;
use rand::Rng;

use crate::doc_model::{ClusterSet, Span};
use crate::error::{CorefError, Result};
use crate::score_table::{Antecedent, ScoreTable};

/// d(loss) / d(score), laid out like the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrad {
    pub mention: Vec<f64>,
    pub antecedent: Vec<Vec<f64>>,
}

impl ScoreGrad {
    pub fn zeros(table: &ScoreTable) -> Self {
        ScoreGrad {
            mention: vec![0.0; table.len()],
            antecedent: table.antecedent_scores.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    pub fn scale(&mut self, by: f64) {
        self.mention.iter_mut().chain(self.antecedent.iter_mut().flatten()).for_each(|v| *v *= by);
    }

    pub fn add(&mut self, other: &ScoreGrad) {
        for (a, b) in self.mention.iter_mut().zip(&other.mention) {
            *a += b;
        }
        for (a, b) in self.antecedent.iter_mut().flatten().zip(other.antecedent.iter().flatten()) {
            *a += b;
        }
    }
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Scores of candidate `i` over the dummy followed by its window.
fn pair_scores(table: &ScoreTable, i: usize) -> Vec<f64> {
    let sm = &table.mention_scores;
    std::iter::once(0.0)
        .chain(table.window(i).zip(&table.antecedent_scores[i]).map(|(j, sa)| sm[i] + sm[j] + sa))
        .collect()
}

/// P(y) over the dummy followed by the window of candidate `i`.
pub fn antecedent_distribution(table: &ScoreTable, i: usize) -> Vec<f64> {
    let scores = pair_scores(table, i);
    let z = logsumexp(scores.iter().copied());
    scores.iter().map(|s| (s - z).exp()).collect()
}

/// In-window gold antecedents per candidate, or just the dummy when the
/// candidate is not a gold mention or none of its antecedents is in range.
pub fn gold_antecedents(table: &ScoreTable, gold: &ClusterSet) -> Vec<Vec<Antecedent>> {
    let cluster_of: std::collections::BTreeMap<Span, usize> =
        gold.clusters().iter().enumerate().flat_map(|(c, m)| m.iter().map(move |s| (*s, c))).collect();
    (0..table.len())
        .map(|i| {
            let linked: Vec<Antecedent> = match cluster_of.get(&table.candidates[i]) {
                Some(c) => table
                    .window(i)
                    .filter(|&j| cluster_of.get(&table.candidates[j]) == Some(c))
                    .map(Antecedent::Candidate)
                    .collect(),
                None => Vec::new(),
            };
            if linked.is_empty() {
                vec![Antecedent::Dummy]
            } else {
                linked
            }
        })
        .collect()
}

fn slot(table: &ScoreTable, i: usize, y: Antecedent) -> Result<usize> {
    match y {
        Antecedent::Dummy => Ok(0),
        Antecedent::Candidate(j) if j < i && j >= table.window_start(i) => Ok(1 + j - table.window_start(i)),
        Antecedent::Candidate(j) => Err(CorefError::InvalidAntecedent { candidate: i, antecedent: j }),
    }
}

/// −Σ_i log Σ_{ŷ ∈ gold_i} P(ŷ).
pub fn coref_loss(table: &ScoreTable, gold: &[Vec<Antecedent>]) -> Result<f64> {
    Ok(coref_loss_grad(table, gold)?.0)
}

pub fn coref_loss_grad(table: &ScoreTable, gold: &[Vec<Antecedent>]) -> Result<(f64, ScoreGrad)> {
    if gold.len() != table.len() {
        return Err(CorefError::InvalidClusters(format!(
            "{} gold antecedent sets for {} candidates",
            gold.len(),
            table.len()
        )));
    }
    let mut grad = ScoreGrad::zeros(table);
    let mut loss = 0.0;
    for (i, gold_i) in gold.iter().enumerate() {
        if gold_i.is_empty() {
            return Err(CorefError::EmptyGoldAntecedents(i));
        }
        let scores = pair_scores(table, i);
        let mut is_gold = vec![false; scores.len()];
        for &y in gold_i {
            is_gold[slot(table, i, y)?] = true;
        }
        let all = logsumexp(scores.iter().copied());
        let good = logsumexp(scores.iter().zip(&is_gold).filter(|(_, g)| **g).map(|(s, _)| *s));
        loss += all - good;
        let start = table.window_start(i);
        for (k, s) in scores.iter().enumerate().skip(1) {
            let d = (s - all).exp() - if is_gold[k] { (s - good).exp() } else { 0.0 };
            let j = start + k - 1;
            grad.mention[i] += d;
            grad.mention[j] += d;
            grad.antecedent[i][k - 1] += d;
        }
    }
    Ok((loss, grad))
}

/// Candidates that are gold mentions.
pub fn gold_mention_indices(table: &ScoreTable, gold: &ClusterSet) -> Vec<usize> {
    let mentions: std::collections::BTreeSet<Span> = gold.mentions().collect();
    (0..table.len()).filter(|&i| mentions.contains(&table.candidates[i])).collect()
}

/// min(|rest|, |positives|) candidates drawn uniformly without replacement
/// from the non-positives, returned in ascending order.
pub fn sample_negatives<R: Rng>(candidates: usize, positives: &[usize], rng: &mut R) -> Vec<usize> {
    let pos: std::collections::BTreeSet<usize> = positives.iter().copied().collect();
    let rest: Vec<usize> = (0..candidates).filter(|i| !pos.contains(i)).collect();
    let amount = rest.len().min(positives.len());
    let mut picked: Vec<usize> = sample(rng, rest.len(), amount).into_iter().map(|k| rest[k]).collect();
    picked.sort_unstable();
    picked
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// −Σ_{Ψ⁺} log σ(s_m) − Σ_{Ψ⁻} log(1 − σ(s_m)).
pub fn mention_loss(table: &ScoreTable, positives: &[usize], negatives: &[usize]) -> f64 {
    mention_loss_grad(table, positives, negatives).0
}

pub fn mention_loss_grad(table: &ScoreTable, positives: &[usize], negatives: &[usize]) -> (f64, ScoreGrad) {
    let mut grad = ScoreGrad::zeros(table);
    let mut loss = 0.0;
    for &i in positives {
        let s = table.mention_scores[i];
        loss += softplus(-s);
        grad.mention[i] += sigmoid(s) - 1.0;
    }
    for &i in negatives {
        let s = table.mention_scores[i];
        loss += softplus(s);
        grad.mention[i] += sigmoid(s);
    }
    (loss, grad)
}

pub fn total_loss(coref: f64, mention: f64, alpha_m: f64) -> f64 {
    coref + alpha_m * mention
}
