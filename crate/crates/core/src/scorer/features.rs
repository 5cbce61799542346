//! Bucketed width and distance features and the pairwise meta-features φ.

use crate::doc_model::{Document, Span};

pub const WIDTH_BUCKETS: usize = 7;
pub const DISTANCE_BUCKETS: usize = 9;
pub const SPEAKER_RELATIONS: usize = 3;

/// {1,2,3,4,5–7,8–15,16+}
pub fn width_bucket(width: usize) -> usize {
    match width {
        0..=4 => width.saturating_sub(1),
        5..=7 => 4,
        8..=15 => 5,
        _ => 6,
    }
}

/// {1,2,3,4,5–7,8–15,16–31,32–63,64+}, in candidate-index units.
pub fn distance_bucket(distance: usize) -> usize {
    match distance {
        0..=4 => distance.saturating_sub(1),
        5..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=63 => 7,
        _ => 8,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeakerRelation {
    Same = 0,
    Different = 1,
    Unavailable = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaFeatures {
    pub dialogue: bool,
    pub speaker: SpeakerRelation,
    pub distance: usize,
}

/// Per-span speaker lookup, shared by all pairs of a document.
pub struct SpeakerIndex<'a> {
    doc: &'a Document,
    sentence_of: Vec<usize>,
}

impl<'a> SpeakerIndex<'a> {
    pub fn new(doc: &'a Document) -> Self {
        SpeakerIndex { doc, sentence_of: doc.sentence_of_token() }
    }

    pub fn speaker(&self, span: Span) -> Option<&'a str> {
        self.doc.sentences[self.sentence_of[span.start]].speaker.as_deref()
    }

    pub fn relation(&self, a: Span, b: Span) -> SpeakerRelation {
        match (self.speaker(a), self.speaker(b)) {
            (Some(x), Some(y)) if x == y => SpeakerRelation::Same,
            (Some(_), Some(_)) => SpeakerRelation::Different,
            _ => SpeakerRelation::Unavailable,
        }
    }
}

pub fn meta_features(doc: &Document, speakers: &SpeakerIndex, i: (usize, Span), j: (usize, Span)) -> MetaFeatures {
    MetaFeatures {
        dialogue: doc.is_dialogue,
        speaker: speakers.relation(i.1, j.1),
        distance: distance_bucket(i.0 - j.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_buckets() {
        let got: Vec<usize> = [1, 2, 3, 4, 5, 7, 8, 15, 16, 30].iter().map(|&w| width_bucket(w)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 4, 5, 5, 6, 6]);
    }

    #[test]
    fn distance_buckets() {
        let got: Vec<usize> = [1, 4, 5, 7, 8, 15, 16, 31, 32, 63, 64, 500].iter().map(|&d| distance_bucket(d)).collect();
        assert_eq!(got, vec![0, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8]);
    }

    #[test]
    fn speaker_relation_needs_both_speakers() {
        let doc = Document::from_sentences(
            "d",
            &[(Some("A"), vec!["x"]), (Some("B"), vec!["y"]), (None, vec!["z"]), (Some("A"), vec!["w"])],
            true,
        );
        let idx = SpeakerIndex::new(&doc);
        let s = |t| Span::new(t, t);
        assert_eq!(idx.relation(s(0), s(3)), SpeakerRelation::Same);
        assert_eq!(idx.relation(s(0), s(1)), SpeakerRelation::Different);
        assert_eq!(idx.relation(s(2), s(1)), SpeakerRelation::Unavailable);
    }
}
