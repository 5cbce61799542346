mod common;

use common::{tiny_config, toy_document};
use dcoref_core::doc_model::{ClusterSet, Span};
use dcoref_core::pipeline::{training_schedule, PipelineConfig};
use dcoref_core::score_table::{Antecedent, ScoreTable};
use dcoref_core::scorer::{coref_loss, fit, gold_antecedents, mention_loss, total_loss, Parameters, TrainConfig};
use dcoref_core::synthetic::{generate_corpus, SyntheticConfig};

// values computed with mpmath at 40 digits
const CHAIN_LOSS: f64 = 3.010_850_608_631_736_4;
const MULTI_GOLD_LOSS: f64 = 1.566_453_948_558_165_5;
const MENTION_LOSS: f64 = 0.864_287_462_561_110_4;

fn table() -> ScoreTable {
    ScoreTable {
        doc_id: "t".into(),
        candidates: (0..4).map(|i| Span::new(i, i)).collect(),
        mention_scores: vec![0.5, -1.2, 2.0, -0.3],
        antecedent_scores: vec![vec![], vec![0.3], vec![-0.7, 1.1], vec![0.4, -2.5]],
        max_antecedents: 2,
    }
}

fn clusters(groups: &[&[usize]]) -> ClusterSet {
    ClusterSet::new(groups.iter().map(|g| g.iter().map(|&i| Span::new(i, i)).collect()).collect()).unwrap()
}

#[test]
fn coref_loss_matches_high_precision_oracle() {
    let t = table();
    let gold = gold_antecedents(&t, &clusters(&[&[0, 2], &[1, 3]]));
    assert_eq!(gold[2], vec![Antecedent::Candidate(0)]);
    assert!((coref_loss(&t, &gold).unwrap() - CHAIN_LOSS).abs() < 1e-9);

    let gold = gold_antecedents(&t, &clusters(&[&[0, 1, 2]]));
    assert_eq!(gold[2].len(), 2);
    assert_eq!(gold[3], vec![Antecedent::Dummy]);
    assert!((coref_loss(&t, &gold).unwrap() - MULTI_GOLD_LOSS).abs() < 1e-9);
}

#[test]
fn mention_loss_matches_high_precision_oracle() {
    let l = mention_loss(&table(), &[0, 2], &[1]);
    assert!((l - MENTION_LOSS).abs() < 1e-9);
    assert!((total_loss(CHAIN_LOSS, l, 0.1) - (CHAIN_LOSS + 0.1 * MENTION_LOSS)).abs() < 1e-12);
}

#[test]
fn coref_loss_is_zero_when_gold_covers_everything() {
    let t = table();
    let all: Vec<Vec<Antecedent>> = (0..t.len())
        .map(|i| std::iter::once(Antecedent::Dummy).chain(t.window(i).map(Antecedent::Candidate)).collect())
        .collect();
    assert!(coref_loss(&t, &all).unwrap().abs() < 1e-12);
}

#[test]
fn zero_output_layers_give_uniform_scores() {
    let doc = toy_document();
    let mut p = Parameters::init(&tiny_config(), doc.tokens.iter().map(|t| t.text.clone()), 3);
    for ffnn in [&mut p.mention_ffnn, &mut p.antecedent_ffnn] {
        let last = ffnn.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }
    let t = p.score(&doc).unwrap();
    assert!(t.mention_scores.iter().all(|&s| s == 0.0));
    assert!(t.antecedent_scores.iter().flatten().all(|&s| s == 0.0));
    // every pair ties with the dummy, which wins
    let clusters = dcoref_core::decoder::decode(&t, dcoref_core::decoder::SingletonPolicy::MentionScore);
    assert_eq!(clusters.mention_count(), 0);
}

#[test]
fn training_reduces_the_loss() {
    let corpus = generate_corpus("syn", &SyntheticConfig { documents: 12, ..Default::default() }, 7);
    let cfg = PipelineConfig {
        model: tiny_config(),
        train: TrainConfig { epochs: 4, task_lr: 3e-3, ..TrainConfig::default() },
        ..PipelineConfig::default()
    };
    let schedule = training_schedule(&[corpus], &[], &cfg).unwrap();
    let params = dcoref_core::pipeline::initial_parameters(&schedule, &cfg);
    let outcome = fit(params, &schedule, &cfg.train, &mut |_, _| Ok(())).unwrap();
    assert!(outcome.diverged.is_none());
    let (first, last) = (&outcome.log[0], outcome.log.last().unwrap());
    assert_eq!(outcome.log.len(), 4);
    assert!(last.mean_loss < first.mean_loss, "{} !< {}", last.mean_loss, first.mean_loss);
}
