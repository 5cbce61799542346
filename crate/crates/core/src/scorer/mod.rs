//! The span scorer: span enumeration and pruning, mention and antecedent
//! scores, the joint training loss and the training loop.
//!
//! Without a pretrained encoder, contextual token vectors are the token
//! embedding concatenated with the mean embedding of its sentence. With
//! speaker augmentation the sentence mean includes the speaker token, so
//! speaker identity reaches every span of the turn.

pub mod embedding;
pub mod features;
pub mod ffnn;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod spans;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::decoder::SingletonPolicy;

pub use embedding::{EmbeddingProvider, HashEmbeddings, TokenTable};
pub use loss::{coref_loss, gold_antecedents, mention_loss, sample_negatives, total_loss, ScoreGrad};
pub use model::ForwardPass;
pub use params::Parameters;
pub use spans::{enumerate_spans, prune_candidates};
pub use train::{document_gradient, fit, Checkpoint, Divergence, EpochLog, FitOutcome, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub token_dim: usize,
    pub width_dim: usize,
    pub feature_dim: usize,
    pub hidden_size: usize,
    pub hidden_layers: usize,
    pub max_span_width: usize,
    /// λ: candidates kept per token.
    pub top_span_ratio: f64,
    pub max_antecedents: usize,
    pub learned_embeddings: bool,
    /// Train with the mention loss and let decoding emit singletons. Off
    /// gives plain mention ranking.
    pub singletons: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            token_dim: 32,
            width_dim: 20,
            feature_dim: 20,
            hidden_size: 150,
            hidden_layers: 2,
            max_span_width: 30,
            top_span_ratio: 0.5,
            max_antecedents: 50,
            learned_embeddings: true,
            singletons: true,
        }
    }
}

impl ModelConfig {
    /// Contextual token vector: token embedding plus sentence mean.
    pub fn context_dim(&self) -> usize {
        2 * self.token_dim
    }

    pub fn span_dim(&self) -> usize {
        3 * self.context_dim() + self.width_dim
    }

    pub fn pair_dim(&self) -> usize {
        3 * self.span_dim() + 3 * self.feature_dim
    }

    pub fn singleton_policy(&self) -> SingletonPolicy {
        if self.singletons {
            SingletonPolicy::MentionScore
        } else {
            SingletonPolicy::Never
        }
    }
}
