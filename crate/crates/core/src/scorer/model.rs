//! Forward scoring of a document and the matching backward pass.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::features::{meta_features, width_bucket, SpeakerIndex};
use super::ffnn::FfnnCache;
use super::loss::ScoreGrad;
use super::params::Parameters;
use super::spans::{enumerate_spans, prune_candidates};
use crate::doc_model::{Document, Span};
use crate::error::{CorefError, Result};
use crate::score_table::ScoreTable;

/// A scored document plus everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub table: ScoreTable,
    rows: Vec<Option<usize>>,
    context: Array2<f64>,
    sentences: Vec<(usize, usize)>,
    attention: Vec<Vec<f64>>,
    widths: Vec<usize>,
    mention_cache: FfnnCache,
    pairs: Vec<(usize, usize)>,
    pair_features: Vec<[usize; 3]>,
    pair_cache: FfnnCache,
}

struct SpanReps {
    reps: Array2<f64>,
    attention: Vec<Vec<f64>>,
    widths: Vec<usize>,
}

impl Parameters {
    /// Scores a preprocessed document.
    pub fn score(&self, doc: &Document) -> Result<ScoreTable> {
        Ok(self.forward(doc, None)?.table)
    }

    /// With `candidates` given, pruning is skipped and exactly those spans
    /// are scored.
    pub fn forward(&self, doc: &Document, candidates: Option<&[Span]>) -> Result<ForwardPass> {
        let cfg = &self.config;
        let d = cfg.token_dim;
        let t_len = doc.len();
        let provider = self.embeddings();
        let mut rows = Vec::with_capacity(t_len);
        let mut emb = Array2::zeros((t_len, d));
        for (t, tok) in doc.tokens.iter().enumerate() {
            provider.embed(&tok.text, emb.row_mut(t).as_slice_mut().expect("row is contiguous"));
            rows.push(provider.trainable_row(&tok.text));
        }
        let sentences: Vec<(usize, usize)> = doc.sentences.iter().map(|s| (s.start, s.end)).collect();
        let mut context = Array2::zeros((t_len, 2 * d));
        context.slice_mut(s![.., ..d]).assign(&emb);
        for &(start, end) in &sentences {
            if end > start {
                let mean = emb.slice(s![start..end, ..]).mean_axis(Axis(0)).expect("non-empty sentence");
                for t in start..end {
                    context.slice_mut(s![t, d..]).assign(&mean);
                }
            }
        }

        let candidates: Vec<Span> = match candidates {
            Some(c) => c.to_vec(),
            None => {
                let spans = enumerate_spans(doc, cfg.max_span_width);
                let all = self.span_reps(&context, &spans);
                let (scores, _) = self.mention_ffnn.forward(all.reps);
                let kept = prune_candidates(&spans, scores.as_slice().expect("contiguous"), cfg.top_span_ratio, t_len);
                kept.into_iter().map(|k| spans[k]).collect()
            }
        };
        let SpanReps { reps, attention, widths } = self.span_reps(&context, &candidates);
        let (mention_scores, mention_cache) = self.mention_ffnn.forward(reps);
        let reps = mention_cache.input();

        let n = candidates.len();
        let max_ant = cfg.max_antecedents;
        let speakers = SpeakerIndex::new(doc);
        let mut pairs = Vec::new();
        let mut pair_features = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(max_ant)..i {
                let phi = meta_features(doc, &speakers, (i, candidates[i]), (j, candidates[j]));
                pairs.push((i, j));
                pair_features.push([phi.dialogue as usize, phi.speaker as usize, phi.distance]);
            }
        }
        let g = cfg.span_dim();
        let f = cfg.feature_dim;
        let mut x = Array2::zeros((pairs.len(), cfg.pair_dim()));
        for (p, (&(i, j), feats)) in pairs.iter().zip(&pair_features).enumerate() {
            let mut row = x.row_mut(p);
            row.slice_mut(s![..g]).assign(&reps.row(i));
            row.slice_mut(s![g..2 * g]).assign(&reps.row(j));
            row.slice_mut(s![2 * g..3 * g]).assign(&(&reps.row(i) * &reps.row(j)));
            row.slice_mut(s![3 * g..3 * g + f]).assign(&self.dialogue_embeddings.row(feats[0]));
            row.slice_mut(s![3 * g + f..3 * g + 2 * f]).assign(&self.speaker_embeddings.row(feats[1]));
            row.slice_mut(s![3 * g + 2 * f..]).assign(&self.distance_embeddings.row(feats[2]));
        }
        let (pair_scores, pair_cache) = self.antecedent_ffnn.forward(x);

        let mut antecedent_scores = Vec::with_capacity(n);
        let mut offset = 0;
        for i in 0..n {
            let len = i - i.saturating_sub(max_ant);
            antecedent_scores.push(pair_scores.slice(s![offset..offset + len]).to_vec());
            offset += len;
        }
        let table = ScoreTable {
            doc_id: doc.doc_id.clone(),
            candidates,
            mention_scores: mention_scores.to_vec(),
            antecedent_scores,
            max_antecedents: max_ant,
        };
        self.check_finite(&table)?;
        Ok(ForwardPass {
            table,
            rows,
            context,
            sentences,
            attention,
            widths,
            mention_cache,
            pairs,
            pair_features,
            pair_cache,
        })
    }

    fn check_finite(&self, table: &ScoreTable) -> Result<()> {
        let bad_m = table.mention_scores.iter().position(|v| !v.is_finite());
        let bad_a = table.antecedent_scores.iter().flatten().position(|v| !v.is_finite());
        let location = match (bad_m, bad_a) {
            (Some(k), _) => format!("{}: mention score of candidate {k}", table.doc_id),
            (None, Some(k)) => format!("{}: antecedent score #{k}", table.doc_id),
            (None, None) => return Ok(()),
        };
        Err(CorefError::NonFinite { location, detail: self.diagnostics() })
    }

    fn span_reps(&self, context: &Array2<f64>, spans: &[Span]) -> SpanReps {
        let c = context.ncols();
        let mut reps = Array2::zeros((spans.len(), self.config.span_dim()));
        let mut attention = Vec::with_capacity(spans.len());
        let mut widths = Vec::with_capacity(spans.len());
        for (k, span) in spans.iter().enumerate() {
            let inside = context.slice(s![span.start..=span.end, ..]);
            let alpha = softmax(inside.dot(&self.head_attention).view());
            let head = alpha.dot(&inside);
            let bucket = width_bucket(span.width());
            let mut row = reps.row_mut(k);
            row.slice_mut(s![..c]).assign(&context.row(span.start));
            row.slice_mut(s![c..2 * c]).assign(&context.row(span.end));
            row.slice_mut(s![2 * c..3 * c]).assign(&head);
            row.slice_mut(s![3 * c..]).assign(&self.width_embeddings.row(bucket));
            attention.push(alpha.to_vec());
            widths.push(bucket);
        }
        SpanReps { reps, attention, widths }
    }

    /// Gradient of the loss with respect to every parameter, given the
    /// loss gradient with respect to the table's scores.
    pub fn backward(&self, pass: &ForwardPass, d_scores: &ScoreGrad) -> Parameters {
        let cfg = &self.config;
        let (g, f, d) = (cfg.span_dim(), cfg.feature_dim, cfg.token_dim);
        let c = 2 * d;
        let mut grad = self.zeros_like();
        let reps = pass.mention_cache.input();
        let d_mention = Array1::from(d_scores.mention.clone());
        let mut d_reps = self.mention_ffnn.backward(&pass.mention_cache, &d_mention, &mut grad.mention_ffnn);

        if !pass.pairs.is_empty() {
            let d_pair: Array1<f64> = d_scores.antecedent.iter().flatten().copied().collect();
            let dx = self.antecedent_ffnn.backward(&pass.pair_cache, &d_pair, &mut grad.antecedent_ffnn);
            for (p, (&(i, j), feats)) in pass.pairs.iter().zip(&pass.pair_features).enumerate() {
                let row = dx.row(p);
                let d_prod = row.slice(s![2 * g..3 * g]);
                let d_i = &row.slice(s![..g]) + &(&d_prod * &reps.row(j));
                let d_j = &row.slice(s![g..2 * g]) + &(&d_prod * &reps.row(i));
                d_reps.row_mut(i).scaled_add(1.0, &d_i);
                d_reps.row_mut(j).scaled_add(1.0, &d_j);
                grad.dialogue_embeddings.row_mut(feats[0]).scaled_add(1.0, &row.slice(s![3 * g..3 * g + f]));
                grad.speaker_embeddings.row_mut(feats[1]).scaled_add(1.0, &row.slice(s![3 * g + f..3 * g + 2 * f]));
                grad.distance_embeddings.row_mut(feats[2]).scaled_add(1.0, &row.slice(s![3 * g + 2 * f..]));
            }
        }

        let mut d_context: Array2<f64> = Array2::zeros(pass.context.raw_dim());
        for (k, span) in pass.table.candidates.iter().enumerate() {
            let row = d_reps.row(k);
            d_context.row_mut(span.start).scaled_add(1.0, &row.slice(s![..c]));
            d_context.row_mut(span.end).scaled_add(1.0, &row.slice(s![c..2 * c]));
            grad.width_embeddings.row_mut(pass.widths[k]).scaled_add(1.0, &row.slice(s![3 * c..]));
            let d_head = row.slice(s![2 * c..3 * c]);
            let alpha = &pass.attention[k];
            let inside = pass.context.slice(s![span.start..=span.end, ..]);
            let d_alpha = inside.dot(&d_head);
            let mean: f64 = alpha.iter().zip(d_alpha.iter()).map(|(a, da)| a * da).sum();
            for (off, t) in (span.start..=span.end).enumerate() {
                let dz = alpha[off] * (d_alpha[off] - mean);
                let mut dh = d_context.row_mut(t);
                dh.scaled_add(alpha[off], &d_head);
                dh.scaled_add(dz, &self.head_attention);
                grad.head_attention.scaled_add(dz, &inside.row(off));
            }
        }

        if let Some(table) = &mut grad.token_table {
            let mut d_emb = d_context.slice(s![.., ..d]).to_owned();
            for &(start, end) in &pass.sentences {
                if end > start {
                    let share = d_context.slice(s![start..end, d..]).sum_axis(Axis(0)) / (end - start) as f64;
                    for t in start..end {
                        d_emb.row_mut(t).scaled_add(1.0, &share);
                    }
                }
            }
            for (t, row) in pass.rows.iter().enumerate() {
                if let Some(r) = row {
                    table.table.row_mut(*r).scaled_add(1.0, &d_emb.row(t));
                }
            }
        }
        grad
    }
}

fn softmax(z: ArrayView1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = z.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}
