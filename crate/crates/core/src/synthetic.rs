//! Generator for small synthetic dialogue corpora with known coreference.
//!
//! Names and "the <noun>" phrases corefer by string identity. "I"/"me"
//! refer to the current speaker and "you" to a fixed addressee determined by
//! the speaker's order of first appearance (1st → 2nd, every other speaker →
//! 1st), so with three speakers only speaker identity resolves "you".
//! Adverbs and fillers are never mentions; an expletive "it" is annotated as
//! non-referring.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::doc_model::{ClusterSet, Corpus, Document, FormatTag, Span};
use crate::seed::rng_for;

pub const NAMES: &[&str] = &[
    "mary", "john", "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy", "mallory",
    "oscar", "peggy", "rupert", "sybil", "trent", "victor", "wendy",
];
pub const NOUNS: &[&str] =
    &["dog", "car", "house", "book", "phone", "garden", "letter", "train", "cake", "lamp", "boat", "report"];
const VERBS: &[&str] = &["saw", "likes", "called", "met", "helped", "knows", "found", "missed"];
const ADVERBS: &[&str] = &["yesterday", "really", "again", "today", "quickly", "often"];
const FILLERS: &[&str] = &["well", "um", "so", "okay"];
const ADJECTIVES: &[&str] = &["late", "cold", "fine", "raining"];
const SPEAKER_LABELS: &[&str] = &["spk_ana", "spk_ben", "spk_cyd", "spk_dee", "spk_eli"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Probability that a document has three speakers rather than two.
    pub three_speakers: f64,
    /// Probability of an expletive sentence.
    pub expletive: f64,
    pub names_per_doc: usize,
    pub nouns_per_doc: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 200,
            min_sentences: 6,
            max_sentences: 8,
            three_speakers: 0.75,
            expletive: 0.1,
            names_per_doc: 3,
            nouns_per_doc: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Entity {
    Name(usize),
    Noun(usize),
    Speaker(usize),
}

struct Builder {
    sentences: Vec<(Option<String>, Vec<String>)>,
    len: usize,
    mentions: BTreeMap<Entity, Vec<Span>>,
    non_referring: Vec<Span>,
}

impl Builder {
    fn push(&mut self, words: &mut Vec<String>, text: &[&str], entity: Option<Entity>) {
        let start = self.len + words.len();
        words.extend(text.iter().map(|s| s.to_string()));
        if let Some(e) = entity {
            self.mentions.entry(e).or_default().push(Span::new(start, start + text.len() - 1));
        }
    }
}

/// Index (in order of first appearance) of the person addressed by `you`.
pub fn addressee(speaker: usize) -> usize {
    if speaker == 0 {
        1
    } else {
        0
    }
}

fn document<R: Rng>(id: String, cfg: &SyntheticConfig, rng: &mut R) -> Document {
    let speakers = if rng.random_bool(cfg.three_speakers) { 3 } else { 2 };
    let labels: Vec<&str> = SPEAKER_LABELS.choose_multiple(rng, speakers).copied().collect();
    let names: Vec<usize> = rand::seq::index::sample(rng, NAMES.len(), cfg.names_per_doc).into_vec();
    let nouns: Vec<usize> = rand::seq::index::sample(rng, NOUNS.len(), cfg.nouns_per_doc).into_vec();
    let n_sent = rng.random_range(cfg.min_sentences..=cfg.max_sentences);
    // every speaker talks, first appearances in index order
    let mut order: Vec<usize> = (0..speakers).collect();
    while order.len() < n_sent {
        let prev = *order.last().expect("non-empty");
        let next = (prev + rng.random_range(1..speakers)) % speakers;
        order.push(next);
    }

    let mut b = Builder { sentences: Vec::new(), len: 0, mentions: BTreeMap::new(), non_referring: Vec::new() };
    for &spk in &order {
        let mut words: Vec<String> = Vec::new();
        if rng.random_bool(cfg.expletive) {
            let start = b.len;
            words.extend(["it", "is", ADJECTIVES.choose(rng).expect("non-empty")].map(str::to_string));
            b.non_referring.push(Span::new(start, start));
        } else {
            if rng.random_bool(0.3) {
                b.push(&mut words, &[FILLERS.choose(rng).expect("non-empty")], None);
            }
            for slot in 0..2 {
                let roll: f64 = rng.random();
                if roll < 0.3 {
                    let n = *names.choose(rng).expect("non-empty");
                    b.push(&mut words, &[NAMES[n]], Some(Entity::Name(n)));
                } else if roll < 0.55 {
                    let n = *nouns.choose(rng).expect("non-empty");
                    b.push(&mut words, &["the", NOUNS[n]], Some(Entity::Noun(n)));
                } else if roll < 0.8 {
                    b.push(&mut words, &[if slot == 0 { "i" } else { "me" }], Some(Entity::Speaker(spk)));
                } else {
                    let who = addressee(spk).min(speakers - 1);
                    b.push(&mut words, &["you"], Some(Entity::Speaker(who)));
                }
                if slot == 0 {
                    b.push(&mut words, &[VERBS.choose(rng).expect("non-empty")], None);
                }
            }
            if rng.random_bool(0.5) {
                b.push(&mut words, &[ADVERBS.choose(rng).expect("non-empty")], None);
            }
        }
        words.push(".".into());
        b.len += words.len();
        b.sentences.push((Some(labels[spk].to_string()), words));
    }

    let sentences: Vec<(Option<&str>, Vec<&str>)> = b
        .sentences
        .iter()
        .map(|(s, w)| (s.as_deref(), w.iter().map(String::as_str).collect()))
        .collect();
    let mut doc = Document::from_sentences(id, &sentences, true);
    doc.gold_clusters =
        Some(ClusterSet::new(b.mentions.into_values().collect()).expect("generated mentions are disjoint"));
    doc.non_referring = Some(b.non_referring.into_iter().collect());
    doc
}

/// A UA-format corpus of `cfg.documents` dialogues.
pub fn generate_corpus(name: &str, cfg: &SyntheticConfig, seed: u64) -> Corpus {
    let mut rng = rng_for(seed, "synthetic", &[]);
    let mut corpus = Corpus::new(name, FormatTag::Ua);
    corpus.documents = (0..cfg.documents).map(|i| document(format!("{name}_{i:04}"), cfg, &mut rng)).collect();
    corpus
}
