//! Document transforms applied before training and inference: removal of
//! non-referring marks, speaker-token augmentation, segment splitting, and
//! assembly of transfer-learning schedules.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::doc_model::{ClusterSet, Corpus, Document, Sentence, Span, Token};
use crate::error::{CorefError, Result};
use crate::seed::rng_for;

pub const DEFAULT_MAX_SEGMENT_TOKENS: usize = 512;
pub const DEFAULT_MAX_SEGMENTS: usize = 3;
pub const DEFAULT_EPOCHS: usize = 20;

/// Drops the non-referring layer. The spans stay out of every cluster, so
/// downstream they are ordinary non-mentions.
pub fn strip_non_referring(doc: &Document) -> Document {
    let mut out = doc.clone();
    out.non_referring = doc.non_referring.as_ref().map(|_| BTreeSet::new());
    out
}

/// Speaker labels in order of first appearance; label `k` (0-based) maps to
/// the token `[SPK{k+1}]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerVocabulary {
    labels: Vec<String>,
}

impl SpeakerVocabulary {
    pub fn observe(&mut self, label: &str) -> String {
        let k = match self.labels.iter().position(|l| l == label) {
            Some(k) => k,
            None => {
                self.labels.push(label.to_string());
                self.labels.len() - 1
            }
        };
        speaker_token(k + 1)
    }

    pub fn token_for(&self, label: &str) -> Option<String> {
        self.labels.iter().position(|l| l == label).map(|k| speaker_token(k + 1))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn speaker_token(k: usize) -> String {
    format!("[SPK{k}]")
}

pub fn is_speaker_token(text: &str) -> bool {
    text.strip_prefix("[SPK")
        .and_then(|r| r.strip_suffix(']'))
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Prepends one speaker token to every sentence with a known speaker and
/// shifts all annotation so it stays on the original tokens.
pub fn augment_speakers(doc: &Document) -> (Document, SpeakerVocabulary) {
    let mut vocab = SpeakerVocabulary::default();
    if !doc.is_dialogue {
        return (doc.clone(), vocab);
    }
    let mut tokens = Vec::with_capacity(doc.tokens.len() + doc.sentences.len());
    let mut sentences = Vec::with_capacity(doc.sentences.len());
    let mut new_index = vec![0; doc.tokens.len()];
    for s in &doc.sentences {
        let start = tokens.len();
        if let Some(label) = &s.speaker {
            tokens.push(Token { text: vocab.observe(label), index: tokens.len() });
        }
        for (t, token) in doc.tokens.iter().enumerate().take(s.end).skip(s.start) {
            new_index[t] = tokens.len();
            tokens.push(Token { text: token.text.clone(), index: tokens.len() });
        }
        sentences.push(Sentence { start, end: tokens.len(), speaker: s.speaker.clone() });
    }
    let remap = |s: Span| Some(Span::new(new_index[s.start], new_index[s.end]));
    let out = Document {
        doc_id: doc.doc_id.clone(),
        tokens,
        sentences,
        is_dialogue: doc.is_dialogue,
        gold_clusters: doc
            .gold_clusters
            .as_ref()
            .map(|g| g.filter_map_spans(remap).expect("shifting keeps clusters disjoint")),
        non_referring: doc.non_referring.as_ref().map(|nr| nr.iter().filter_map(|s| remap(*s)).collect()),
    };
    (out, vocab)
}

/// For every token of an augmented document, its index in the original
/// document, or `None` for injected speaker tokens.
pub fn original_token_indices(doc: &Document) -> Vec<Option<usize>> {
    let mut next = 0;
    doc.tokens
        .iter()
        .map(|t| {
            if is_speaker_token(&t.text) {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect()
}

/// Maps a span of an augmented document back to original indices.
pub fn restore_span(map: &[Option<usize>], span: Span) -> Option<Span> {
    Some(Span::new(map[span.start]?, map[span.end]?))
}

/// Inverse of [`augment_speakers`].
pub fn remove_speaker_tokens(doc: &Document) -> Document {
    let map = original_token_indices(doc);
    let tokens: Vec<Token> = doc
        .tokens
        .iter()
        .zip(&map)
        .filter_map(|(t, m)| m.map(|i| Token { text: t.text.clone(), index: i }))
        .collect();
    let sentences = doc
        .sentences
        .iter()
        .filter_map(|s| {
            let kept: Vec<usize> = (s.start..s.end).filter_map(|t| map[t]).collect();
            Some(Sentence { start: *kept.first()?, end: kept.last()? + 1, speaker: s.speaker.clone() })
        })
        .collect();
    Document {
        doc_id: doc.doc_id.clone(),
        tokens,
        sentences,
        is_dialogue: doc.is_dialogue,
        gold_clusters: doc
            .gold_clusters
            .as_ref()
            .map(|g| g.filter_map_spans(|s| restore_span(&map, s)).expect("restoring keeps clusters disjoint")),
        non_referring: doc
            .non_referring
            .as_ref()
            .map(|nr| nr.iter().filter_map(|s| restore_span(&map, *s)).collect()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub documents: Vec<Document>,
    /// Coreference links lost because a cluster spans several children,
    /// counted as (number of child parts - 1) per cluster.
    pub dropped_links: usize,
}

/// Packs whole sentences greedily into segments of at most
/// `max_segment_tokens`, then groups `max_segments` consecutive segments per
/// child document.
pub fn split_document(doc: &Document, max_segment_tokens: usize, max_segments: usize) -> Result<SplitResult> {
    assert!(max_segments >= 1, "max_segments must be at least 1");
    let mentions: Vec<Span> = doc
        .gold_clusters
        .iter()
        .flat_map(|g| g.mentions())
        .chain(doc.non_referring_iter())
        .collect();
    let crosses = |boundary: usize| mentions.iter().find(|m| m.start < boundary && boundary <= m.end).copied();

    // segment boundaries as sentence indices [first, last)
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut first = 0;
    while first < doc.sentences.len() {
        let mut last = first;
        let mut size = 0;
        while last < doc.sentences.len() {
            let len = doc.sentences[last].len();
            if len > max_segment_tokens {
                return Err(CorefError::SentenceTooLong {
                    doc_id: doc.doc_id.clone(),
                    len,
                    limit: max_segment_tokens,
                });
            }
            if size + len > max_segment_tokens {
                break;
            }
            size += len;
            last += 1;
        }
        // keep mentions whole: move the cut back to a sentence start before them
        while last < doc.sentences.len() {
            let Some(m) = crosses(doc.sentences[last].start) else { break };
            let back = doc.sentences[first..last].iter().rposition(|s| s.start <= m.start).map(|p| first + p);
            match back {
                Some(b) if b > first => last = b,
                _ => return Err(CorefError::UnsplittableMention { doc_id: doc.doc_id.clone(), span: m }),
            }
        }
        segments.push((first, last));
        first = last;
    }
    if segments.len() <= max_segments {
        return Ok(SplitResult { documents: vec![doc.clone()], dropped_links: 0 });
    }

    let mut documents = Vec::new();
    let mut parts_per_cluster = vec![0usize; doc.gold_clusters.as_ref().map_or(0, ClusterSet::len)];
    for (child, group) in segments.chunks(max_segments).enumerate() {
        let s_first = group[0].0;
        let s_last = group[group.len() - 1].1;
        let t_start = doc.sentences[s_first].start;
        let t_end = doc.sentences[s_last - 1].end;
        let inside = |s: &Span| t_start <= s.start && s.end < t_end;
        let rebase = |s: Span| Span::new(s.start - t_start, s.end - t_start);
        let gold = doc.gold_clusters.as_ref().map(|g| {
            for (i, c) in g.clusters().iter().enumerate() {
                if c.iter().any(inside) {
                    parts_per_cluster[i] += 1;
                }
            }
            g.filter_map_spans(|s| inside(&s).then(|| rebase(s))).expect("restriction keeps clusters disjoint")
        });
        documents.push(Document {
            doc_id: format!("{}#{child}", doc.doc_id),
            tokens: doc.tokens[t_start..t_end]
                .iter()
                .map(|t| Token { text: t.text.clone(), index: t.index - t_start })
                .collect(),
            sentences: doc.sentences[s_first..s_last]
                .iter()
                .map(|s| Sentence { start: s.start - t_start, end: s.end - t_start, speaker: s.speaker.clone() })
                .collect(),
            is_dialogue: doc.is_dialogue,
            gold_clusters: gold,
            non_referring: doc
                .non_referring
                .as_ref()
                .map(|nr| nr.iter().filter(|s| inside(s)).map(|s| rebase(*s)).collect()),
        });
    }
    let dropped_links = parts_per_cluster.iter().map(|p| p.saturating_sub(1)).sum();
    if dropped_links > 0 {
        log::info!("{}: split into {} documents, {dropped_links} cross-document links dropped", doc.doc_id, documents.len());
    }
    Ok(SplitResult { documents, dropped_links })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Train on the UA-format corpora only.
    UadOnly,
    /// One phase over UA and other-format corpora together.
    Mix,
    /// Other-format corpora first, then UA corpora alone.
    PretrainAdapt,
}

impl std::str::FromStr for TransferMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uad" | "uad_only" => Ok(TransferMode::UadOnly),
            "mix" => Ok(TransferMode::Mix),
            "pretrain" | "pretrain_adapt" => Ok(TransferMode::PretrainAdapt),
            other => Err(format!("unknown transfer mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub label: String,
    pub corpora: Vec<String>,
    pub documents: Vec<Document>,
    pub epochs: usize,
}

impl Phase {
    /// Document visiting order for one epoch.
    pub fn epoch_order(&self, seed: u64, phase: usize, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.documents.len()).collect();
        order.shuffle(&mut rng_for(seed, "shuffle", &[phase as u64, epoch as u64]));
        order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule {
    pub mode: TransferMode,
    pub phases: Vec<Phase>,
    pub seed: u64,
}

fn phase(label: &str, sets: &[&[Corpus]], epochs: usize) -> Phase {
    let corpora = sets.iter().flat_map(|s| s.iter());
    Phase {
        label: label.to_string(),
        corpora: corpora.clone().map(|c| c.name.clone()).collect(),
        documents: corpora.flat_map(|c| c.documents.iter().cloned()).collect(),
        epochs,
    }
}

pub fn build_schedule(
    uad: &[Corpus],
    od: &[Corpus],
    mode: TransferMode,
    epochs: usize,
    seed: u64,
) -> Result<TrainingSchedule> {
    if uad.iter().all(|c| c.documents.is_empty()) {
        return Err(CorefError::EmptyUad);
    }
    let phases = match mode {
        TransferMode::UadOnly => vec![phase("uad", &[uad], epochs)],
        TransferMode::Mix => vec![phase("mix", &[uad, od], epochs)],
        TransferMode::PretrainAdapt => vec![phase("od", &[od], epochs), phase("uad", &[uad], epochs)],
    };
    Ok(TrainingSchedule { mode, phases, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::FormatTag;
    use proptest::prelude::*;

    fn sp(s: usize, e: usize) -> Span {
        Span::new(s, e)
    }

    fn table2_doc() -> Document {
        Document::from_sentences(
            "t2",
            &[
                (Some("John"), vec!["Do", "you", "know", "Mike", "?"]),
                (Some("Mary"), vec!["He", "is", "my", "best", "friend", "!"]),
                (Some("Paul"), vec!["I", "like", "him", "too", "!"]),
                (Some("Mary"), vec!["We", "should", "meet", "together", "!"]),
            ],
            true,
        )
    }

    #[test]
    fn speaker_tokens_follow_first_appearance() {
        let (aug, vocab) = augment_speakers(&table2_doc());
        let prefixes: Vec<&str> = aug.sentences.iter().map(|s| aug.tokens[s.start].text.as_str()).collect();
        assert_eq!(prefixes, vec!["[SPK1]", "[SPK2]", "[SPK3]", "[SPK2]"]);
        assert_eq!(vocab.labels(), &["John", "Mary", "Paul"]);
        let text: Vec<&str> = aug.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(
            text.join(" "),
            "[SPK1] Do you know Mike ? [SPK2] He is my best friend ! [SPK3] I like him too ! [SPK2] We should meet together !"
        );
        aug.validate().unwrap();
    }

    #[test]
    fn no_speakers_is_identity() {
        let doc = Document::from_sentences("x", &[(None, vec!["a", "b"])], true);
        let (aug, vocab) = augment_speakers(&doc);
        assert_eq!(aug, doc);
        assert!(vocab.is_empty());
    }

    #[test]
    fn mentions_shift_with_prepended_token() {
        let mut doc = table2_doc();
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(0, 1)]]).unwrap());
        let (aug, _) = augment_speakers(&doc);
        assert_eq!(aug.gold_clusters.unwrap().clusters(), &[vec![sp(1, 2)]]);
    }

    #[test]
    fn strip_keeps_clusters() {
        let mut doc = Document::from_sentences("x", &[(None, vec!["a", "b", "it"])], false);
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(0, 0)]]).unwrap());
        doc.non_referring = Some([sp(2, 2)].into_iter().collect());
        let out = strip_non_referring(&doc);
        assert_eq!(out.gold_clusters, doc.gold_clusters);
        assert!(out.non_referring.unwrap().is_empty());
        assert_eq!(out.tokens, doc.tokens);
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn three_long_sentences_fit_one_child() {
        let doc = Document::from_sentences("x", &[(None, words(400)), (None, words(400)), (None, words(400))], false);
        let out = split_document(&doc, 512, 3).unwrap();
        assert_eq!(out.documents, vec![doc]);
    }

    #[test]
    fn seven_segments_make_three_children() {
        let sents: Vec<(Option<&str>, Vec<String>)> = (0..7).map(|_| (None, words(10))).collect();
        let mut doc = Document::from_sentences("x", &sents, false);
        // one cluster across children 0 and 2, one inside child 1
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(0, 1), sp(61, 61)], vec![sp(31, 32), sp(40, 40)]]).unwrap());
        let out = split_document(&doc, 10, 3).unwrap();
        let sizes: Vec<usize> = out.documents.iter().map(|d| d.sentences.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert_eq!(out.dropped_links, 1);
        assert_eq!(out.documents[1].gold_clusters.as_ref().unwrap().clusters(), &[vec![sp(1, 2), sp(10, 10)]]);
        assert_eq!(out.documents[2].gold_clusters.as_ref().unwrap().clusters(), &[vec![sp(1, 1)]]);
        for d in &out.documents {
            d.validate().unwrap();
        }
    }

    #[test]
    fn short_document_is_untouched() {
        let doc = Document::from_sentences("x", &[(None, words(5))], false);
        assert_eq!(split_document(&doc, 512, 3).unwrap().documents, vec![doc]);
    }

    #[test]
    fn oversize_sentence_is_an_error() {
        let doc = Document::from_sentences("x", &[(None, words(20))], false);
        assert!(matches!(split_document(&doc, 10, 3), Err(CorefError::SentenceTooLong { .. })));
    }

    #[test]
    fn cross_sentence_mention_moves_the_cut() {
        let mut doc = Document::from_sentences("x", &[(None, words(4)), (None, words(4)), (None, words(4))], false);
        // a mention spanning sentences 1 and 2
        doc.gold_clusters = Some(ClusterSet::new(vec![vec![sp(6, 9)]]).unwrap());
        let out = split_document(&doc, 8, 1).unwrap();
        let lens: Vec<usize> = out.documents.iter().map(Document::len).collect();
        assert_eq!(lens, vec![4, 8]);
        assert_eq!(out.documents[1].gold_clusters.as_ref().unwrap().clusters(), &[vec![sp(2, 5)]]);
    }

    fn corpus(name: &str, n: usize) -> Corpus {
        let documents = (0..n)
            .map(|i| Document::from_sentences(format!("{name}{i}"), &[(None, vec!["a"])], false))
            .collect();
        Corpus { name: name.into(), documents, format_tag: FormatTag::Ua }
    }

    #[test]
    fn schedules() {
        let uad = [corpus("u", 2)];
        let od = [corpus("o", 3)];
        let mix = build_schedule(&uad, &od, TransferMode::Mix, 20, 1).unwrap();
        assert_eq!(mix.phases.len(), 1);
        assert_eq!(mix.phases[0].documents.len(), 5);
        let pre = build_schedule(&uad, &od, TransferMode::PretrainAdapt, 20, 1).unwrap();
        assert_eq!(pre.phases.iter().map(|p| p.label.as_str()).collect::<Vec<_>>(), vec!["od", "uad"]);
        assert_eq!(pre.phases[0].documents.len(), 3);
        assert_eq!(pre.phases[1].documents.len(), 2);
        let only = build_schedule(&uad, &od, TransferMode::UadOnly, 20, 1).unwrap();
        assert_eq!(only.phases.len(), 1);
        assert_eq!(only.phases[0].corpora, vec!["u"]);
        assert!(matches!(build_schedule(&[], &od, TransferMode::Mix, 20, 1), Err(CorefError::EmptyUad)));
        assert_eq!(only.phases[0].epoch_order(3, 0, 1), only.phases[0].epoch_order(3, 0, 1));
    }

    fn arb_doc() -> impl Strategy<Value = Document> {
        (
            proptest::collection::vec((proptest::option::of(0usize..3), 1usize..6), 1..6),
            any::<u64>(),
        )
            .prop_map(|(sents, seed)| {
                let labels = ["Ann", "Bo", "Cy"];
                let sents: Vec<(Option<&str>, Vec<String>)> =
                    sents.iter().map(|(spk, n)| (spk.map(|k| labels[k]), words(*n))).collect();
                let mut doc = Document::from_sentences("p", &sents, true);
                // mentions: each sentence's first token, grouped by seed parity
                let mut clusters = vec![Vec::new(), Vec::new()];
                let mut nr = BTreeSet::new();
                for (i, s) in doc.sentences.iter().enumerate() {
                    let span = sp(s.start, s.end - 1);
                    match (seed >> i) % 3 {
                        0 => clusters[0].push(span),
                        1 => clusters[1].push(span),
                        _ => {
                            nr.insert(span);
                        }
                    }
                }
                clusters.retain(|c| !c.is_empty());
                doc.gold_clusters = Some(ClusterSet::new(clusters).unwrap());
                doc.non_referring = Some(nr);
                doc
            })
    }

    proptest! {
        #[test]
        fn augmentation_is_invertible(doc in arb_doc()) {
            let (aug, _) = augment_speakers(&doc);
            aug.validate().unwrap();
            prop_assert_eq!(remove_speaker_tokens(&aug), doc.clone());
            let map = original_token_indices(&aug);
            for m in aug.gold_clusters.as_ref().unwrap().mentions() {
                prop_assert!(!is_speaker_token(&aug.tokens[m.start].text));
                prop_assert!(!is_speaker_token(&aug.tokens[m.end].text));
                prop_assert!(restore_span(&map, m).is_some());
            }
        }

        #[test]
        fn strip_preserves_mentions(doc in arb_doc()) {
            let out = strip_non_referring(&doc);
            prop_assert_eq!(out.gold_clusters.as_ref().unwrap().mention_count(), doc.gold_clusters.as_ref().unwrap().mention_count());
            prop_assert_eq!(out.non_referring.as_ref().map(BTreeSet::len), Some(0));
        }

        #[test]
        fn split_preserves_tokens(doc in arb_doc(), limit in 5usize..12, groups in 1usize..3) {
            let out = split_document(&doc, limit, groups).unwrap();
            let total: usize = out.documents.iter().map(Document::len).sum();
            prop_assert_eq!(total, doc.len());
            let joined: Vec<&str> = out.documents.iter().flat_map(|d| d.tokens.iter().map(|t| t.text.as_str())).collect();
            let orig: Vec<&str> = doc.tokens.iter().map(|t| t.text.as_str()).collect();
            prop_assert_eq!(joined, orig);
            let kept: usize = out.documents.iter().map(|d| d.gold_clusters.as_ref().unwrap().mention_count()).sum();
            prop_assert_eq!(kept, doc.gold_clusters.as_ref().unwrap().mention_count());
            for d in &out.documents {
                d.validate().unwrap();
            }
        }
    }
}
