//! Antecedent selection and cluster construction.
//!
//! Each candidate takes the highest-scoring antecedent, the dummy scoring 0.
//! Linked candidates are merged transitively regardless of their mention
//! scores. A candidate that picked the dummy and received no link becomes a
//! singleton only when its mention score is strictly positive.

use serde::{Deserialize, Serialize};

use crate::doc_model::{ClusterSet, Span};
use crate::error::{CorefError, Result};
use crate::score_table::{Antecedent, ScoreTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntecedentSelection {
    pub choices: Vec<Antecedent>,
}

/// Whether unlinked candidates may form singleton clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingletonPolicy {
    /// Unlinked candidates with s_m > 0 become singletons.
    #[default]
    MentionScore,
    /// Only linked candidates are kept (plain mention ranking).
    Never,
}

/// Argmax over the dummy (score 0) and the window. Ties with the dummy go to
/// the dummy; ties between candidates go to the nearest one.
pub fn select_antecedents(table: &ScoreTable) -> AntecedentSelection {
    let choices = (0..table.len())
        .map(|i| {
            let mut best = Antecedent::Dummy;
            let mut best_score = 0.0;
            for j in table.window(i) {
                let s = table.pair_score(i, Antecedent::Candidate(j)).expect("window index is valid");
                let better = match best {
                    Antecedent::Dummy => s > best_score,
                    Antecedent::Candidate(_) => s >= best_score,
                };
                if better {
                    best = Antecedent::Candidate(j);
                    best_score = s;
                }
            }
            best
        })
        .collect();
    AntecedentSelection { choices }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // the smaller index stays root so results do not depend on link order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn build_clusters(table: &ScoreTable, selection: &AntecedentSelection) -> Result<ClusterSet> {
    build_clusters_with(table, selection, SingletonPolicy::MentionScore)
}

pub fn build_clusters_with(
    table: &ScoreTable,
    selection: &AntecedentSelection,
    policy: SingletonPolicy,
) -> Result<ClusterSet> {
    let n = table.len();
    if selection.choices.len() != n {
        return Err(CorefError::InvalidClusters(format!(
            "selection has {} entries for {n} candidates",
            selection.choices.len()
        )));
    }
    let mut uf = UnionFind::new(n);
    for (i, choice) in selection.choices.iter().enumerate() {
        if let Antecedent::Candidate(j) = *choice {
            if j >= i {
                return Err(CorefError::InvalidAntecedent { candidate: i, antecedent: j });
            }
            uf.union(i, j);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = uf.find(i);
        groups[root].push(i);
    }
    let clusters: Vec<Vec<Span>> = groups
        .into_iter()
        .filter(|g| match g.len() {
            0 => false,
            1 => policy == SingletonPolicy::MentionScore && table.mention_scores[g[0]] > 0.0,
            _ => true,
        })
        .map(|g| g.into_iter().map(|i| table.candidates[i]).collect())
        .collect();
    ClusterSet::new(clusters)
}

/// Selection followed by cluster construction.
pub fn decode(table: &ScoreTable, policy: SingletonPolicy) -> ClusterSet {
    let selection = select_antecedents(table);
    build_clusters_with(table, &selection, policy).expect("selection from the same table is consistent")
}
