//! Span enumeration and top-λT pruning.

use crate::doc_model::{Document, Span};
use crate::preprocess::is_speaker_token;

/// All spans of width ≤ `max_width` inside one sentence that neither start
/// nor end on an injected speaker token, in candidate order.
pub fn enumerate_spans(doc: &Document, max_width: usize) -> Vec<Span> {
    let speaker = |t: usize| is_speaker_token(&doc.tokens[t].text);
    let mut spans = Vec::new();
    for s in &doc.sentences {
        for start in s.start..s.end {
            if speaker(start) {
                continue;
            }
            for end in start..s.end.min(start + max_width) {
                if !speaker(end) {
                    spans.push(Span::new(start, end));
                }
            }
        }
    }
    spans
}

/// Number of candidates kept for a document of `tokens` tokens.
pub fn prune_size(ratio: f64, tokens: usize) -> usize {
    (ratio * tokens as f64).ceil() as usize
}

/// Greedily keeps the ⌈λT⌉ best spans by mention score (ties by candidate
/// order), skipping any span that crosses one already kept. Returns indices
/// into `spans`, in candidate order.
pub fn prune_candidates(spans: &[Span], scores: &[f64], ratio: f64, tokens: usize) -> Vec<usize> {
    debug_assert_eq!(spans.len(), scores.len());
    let limit = prune_size(ratio, tokens).min(spans.len());
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(spans[a].cmp(&spans[b])));
    let mut kept: Vec<usize> = Vec::with_capacity(limit);
    for idx in order {
        if kept.len() == limit {
            break;
        }
        if kept.iter().all(|&k| !spans[k].crosses(&spans[idx])) {
            kept.push(idx);
        }
    }
    kept.sort_by_key(|&k| spans[k]);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(sentences: &[&[&str]]) -> Document {
        let s: Vec<(Option<&str>, Vec<&str>)> = sentences.iter().map(|s| (None, s.to_vec())).collect();
        Document::from_sentences("d", &s, false)
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_spans(&doc(&[&["a", "b", "c"]]), 30).len(), 6);
        assert_eq!(enumerate_spans(&doc(&[&["a", "b", "c", "d"]]), 1).len(), 4);
        assert_eq!(enumerate_spans(&doc(&[&["a", "b"], &["c", "d"]]), 30).len(), 6);
    }

    #[test]
    fn speaker_tokens_are_not_boundaries() {
        let spans = enumerate_spans(&doc(&[&["[SPK1]", "a", "b"]]), 30);
        assert_eq!(spans, vec![Span::new(1, 1), Span::new(1, 2), Span::new(2, 2)]);
    }

    #[test]
    fn prune_keeps_ceiling_of_ratio() {
        let d = doc(&[&["a"; 10]]);
        let spans = enumerate_spans(&d, 3);
        let scores: Vec<f64> = (0..spans.len()).map(|i| (i * 7 % 11) as f64).collect();
        assert_eq!(prune_candidates(&spans, &scores, 0.5, 10).len(), 5);
        assert_eq!(prune_candidates(&spans, &scores, 0.45, 10).len(), 5);
    }

    #[test]
    fn equal_scores_keep_earliest() {
        let d = doc(&[&["a"; 6]]);
        let spans = enumerate_spans(&d, 1);
        let kept = prune_candidates(&spans, &[0.0; 6], 0.5, 6);
        assert_eq!(kept, vec![0, 1, 2]);
    }

    #[test]
    fn crossing_span_is_replaced() {
        let spans = vec![Span::new(0, 1), Span::new(1, 2), Span::new(2, 2), Span::new(0, 0)];
        let kept = prune_candidates(&spans, &[5.0, 4.0, 1.0, 0.5], 1.0, 2);
        assert_eq!(kept, vec![0, 2]);
    }
}
