use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingProvider, HashEmbeddings, TokenTable};
use super::features::{DISTANCE_BUCKETS, SPEAKER_RELATIONS, WIDTH_BUCKETS};
use super::ffnn::Ffnn;
use super::ModelConfig;
use crate::seed::{derive_seed, rng_for};

/// Learning-rate group of a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Task,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub config: ModelConfig,
    pub hash: HashEmbeddings,
    pub token_table: Option<TokenTable>,
    /// Soft-head attention weights over contextual token vectors.
    pub head_attention: Array1<f64>,
    pub width_embeddings: Array2<f64>,
    pub dialogue_embeddings: Array2<f64>,
    pub speaker_embeddings: Array2<f64>,
    pub distance_embeddings: Array2<f64>,
    pub mention_ffnn: Ffnn,
    pub antecedent_ffnn: Ffnn,
}

impl Parameters {
    /// `vocabulary` seeds the trainable token table when the config asks
    /// for learned embeddings.
    pub fn init<I: IntoIterator<Item = String>>(config: &ModelConfig, vocabulary: I, seed: u64) -> Self {
        let mut rng = rng_for(seed, "init", &[]);
        let hash = HashEmbeddings { dim: config.token_dim, seed: derive_seed(seed, "hash-embeddings", &[]) };
        let mut normal = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
        };
        let width_embeddings = normal(WIDTH_BUCKETS, config.width_dim);
        let dialogue_embeddings = normal(2, config.feature_dim);
        let speaker_embeddings = normal(SPEAKER_RELATIONS, config.feature_dim);
        let distance_embeddings = normal(DISTANCE_BUCKETS, config.feature_dim);
        let span_dim = config.span_dim();
        let mention_ffnn = Ffnn::new(span_dim, config.hidden_size, config.hidden_layers, &mut rng);
        let antecedent_ffnn = Ffnn::new(config.pair_dim(), config.hidden_size, config.hidden_layers, &mut rng);
        Parameters {
            config: config.clone(),
            hash,
            token_table: config.learned_embeddings.then(|| TokenTable::new(vocabulary, hash)),
            head_attention: Array1::zeros(config.context_dim()),
            width_embeddings,
            dialogue_embeddings,
            speaker_embeddings,
            distance_embeddings,
            mention_ffnn,
            antecedent_ffnn,
        }
    }

    pub fn embeddings(&self) -> &dyn EmbeddingProvider {
        match &self.token_table {
            Some(t) => t,
            None => &self.hash,
        }
    }

    /// Same shapes, all zeros; used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        Parameters {
            config: self.config.clone(),
            hash: self.hash,
            token_table: self.token_table.as_ref().map(TokenTable::zeros_like),
            head_attention: Array1::zeros(self.head_attention.len()),
            width_embeddings: Array2::zeros(self.width_embeddings.raw_dim()),
            dialogue_embeddings: Array2::zeros(self.dialogue_embeddings.raw_dim()),
            speaker_embeddings: Array2::zeros(self.speaker_embeddings.raw_dim()),
            distance_embeddings: Array2::zeros(self.distance_embeddings.raw_dim()),
            mention_ffnn: self.mention_ffnn.zeros_like(),
            antecedent_ffnn: self.antecedent_ffnn.zeros_like(),
        }
    }

    /// Every trainable tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, Group, &[f64])> {
        let mut out: Vec<(&'static str, Group, &[f64])> = Vec::new();
        if let Some(t) = &self.token_table {
            out.push(("token_table", Group::Embedding, t.table.as_slice().expect("contiguous")));
        }
        out.push(("head_attention", Group::Task, self.head_attention.as_slice().expect("contiguous")));
        out.push(("width_embeddings", Group::Task, self.width_embeddings.as_slice().expect("contiguous")));
        out.push(("dialogue_embeddings", Group::Task, self.dialogue_embeddings.as_slice().expect("contiguous")));
        out.push(("speaker_embeddings", Group::Task, self.speaker_embeddings.as_slice().expect("contiguous")));
        out.push(("distance_embeddings", Group::Task, self.distance_embeddings.as_slice().expect("contiguous")));
        for (name, net) in [("mention_ffnn", &self.mention_ffnn), ("antecedent_ffnn", &self.antecedent_ffnn)] {
            for layer in &net.layers {
                out.push((name, Group::Task, layer.weight.as_slice().expect("contiguous")));
                out.push((name, Group::Task, layer.bias.as_slice().expect("contiguous")));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, Group, &mut [f64])> {
        let mut out: Vec<(&'static str, Group, &mut [f64])> = Vec::new();
        if let Some(t) = &mut self.token_table {
            out.push(("token_table", Group::Embedding, t.table.as_slice_mut().expect("contiguous")));
        }
        out.push(("head_attention", Group::Task, self.head_attention.as_slice_mut().expect("contiguous")));
        out.push(("width_embeddings", Group::Task, self.width_embeddings.as_slice_mut().expect("contiguous")));
        out.push(("dialogue_embeddings", Group::Task, self.dialogue_embeddings.as_slice_mut().expect("contiguous")));
        out.push(("speaker_embeddings", Group::Task, self.speaker_embeddings.as_slice_mut().expect("contiguous")));
        out.push(("distance_embeddings", Group::Task, self.distance_embeddings.as_slice_mut().expect("contiguous")));
        for (name, net) in [("mention_ffnn", &mut self.mention_ffnn), ("antecedent_ffnn", &mut self.antecedent_ffnn)] {
            for layer in &mut net.layers {
                out.push((name, Group::Task, layer.weight.as_slice_mut().expect("contiguous")));
                out.push((name, Group::Task, layer.bias.as_slice_mut().expect("contiguous")));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Largest absolute value per tensor, for error reports.
    pub fn diagnostics(&self) -> String {
        self.tensors()
            .iter()
            .map(|(name, _, t)| format!("{name}: max|w|={:.3e}", t.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
            .collect::<Vec<_>>()
            .join(", ")
    }
}
