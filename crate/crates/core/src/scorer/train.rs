//! Training loop and checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::{coref_loss_grad, gold_antecedents, gold_mention_indices, mention_loss_grad, sample_negatives, total_loss};
use super::optim::AdamW;
use super::params::Parameters;
use crate::doc_model::{ClusterSet, Document};
use crate::error::{CorefError, Result};
use crate::preprocess::TrainingSchedule;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub task_lr: f64,
    pub embedding_lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    /// α_m
    pub mention_loss_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: crate::preprocess::DEFAULT_EPOCHS,
            task_lr: 3e-4,
            embedding_lr: 1e-5,
            weight_decay: 1e-2,
            clip_norm: 1.0,
            mention_loss_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: String,
    pub phase_index: usize,
    pub epoch: usize,
    pub documents: usize,
    pub mean_loss: f64,
    pub mean_coref_loss: f64,
    pub mean_mention_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub phase: String,
    pub epoch: usize,
    pub doc_id: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Final parameters, or the last end-of-epoch state when training diverged.
    pub params: Parameters,
    pub log: Vec<EpochLog>,
    pub diverged: Option<Divergence>,
}

/// Loss of one document and the resulting parameter gradient.
pub struct StepResult {
    pub loss: f64,
    pub coref_loss: f64,
    pub mention_loss: f64,
    pub grads: Parameters,
}

/// Loss and gradient of one document. Negatives for the mention loss are
/// drawn from `rng`.
pub fn document_gradient<R: rand::Rng>(
    params: &Parameters,
    doc: &Document,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<StepResult> {
    let pass = params.forward(doc, None)?;
    let empty = ClusterSet::empty();
    let gold = doc.gold_clusters.as_ref().unwrap_or(&empty);
    let table = &pass.table;
    let (coref, mut d_scores) = coref_loss_grad(table, &gold_antecedents(table, gold))?;
    let mut mention = 0.0;
    let mut loss = coref;
    if params.config.singletons {
        let positives = gold_mention_indices(table, gold);
        let negatives = sample_negatives(table.len(), &positives, rng);
        let (lm, mut d_m) = mention_loss_grad(table, &positives, &negatives);
        d_m.scale(config.mention_loss_weight);
        d_scores.add(&d_m);
        mention = lm;
        loss = total_loss(coref, lm, config.mention_loss_weight);
    }
    if !loss.is_finite() {
        return Err(CorefError::NonFinite { location: format!("{}: loss", doc.doc_id), detail: params.diagnostics() });
    }
    let grads = params.backward(&pass, &d_scores);
    Ok(StepResult { loss, coref_loss: coref, mention_loss: mention, grads })
}

/// Runs every phase of the schedule in order with one update per document.
/// `on_epoch` sees the parameters after each epoch (e.g. to checkpoint).
pub fn fit(
    mut params: Parameters,
    schedule: &TrainingSchedule,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&Parameters, &EpochLog) -> Result<()>,
) -> Result<FitOutcome> {
    if schedule.phases.iter().all(|p| p.documents.is_empty()) {
        return Err(CorefError::EmptyUad);
    }
    let mut opt = AdamW::new(&params, config.task_lr, config.embedding_lr, config.weight_decay, config.clip_norm);
    let mut last_good = params.clone();
    let mut log = Vec::new();
    for (pi, phase) in schedule.phases.iter().enumerate() {
        log::info!("phase {pi} ({}): {} documents, {} epochs", phase.label, phase.documents.len(), phase.epochs);
        for epoch in 0..phase.epochs {
            let (mut total, mut coref, mut mention) = (0.0, 0.0, 0.0);
            let order = phase.epoch_order(schedule.seed, pi, epoch);
            for (step, &d) in order.iter().enumerate() {
                let doc = &phase.documents[d];
                let mut rng = rng_for(schedule.seed, "negatives", &[pi as u64, epoch as u64, step as u64]);
                let result = document_gradient(&params, doc, config, &mut rng);
                let result = match result {
                    Ok(r) => r,
                    Err(CorefError::NonFinite { location, detail }) => {
                        log::error!("training diverged at {location}");
                        return Ok(FitOutcome {
                            params: last_good,
                            log,
                            diverged: Some(Divergence {
                                phase: phase.label.clone(),
                                epoch,
                                doc_id: doc.doc_id.clone(),
                                detail: format!("{location}; {detail}"),
                            }),
                        });
                    }
                    Err(e) => return Err(e),
                };
                opt.step(&mut params, &result.grads);
                total += result.loss;
                coref += result.coref_loss;
                mention += result.mention_loss;
            }
            let n = order.len().max(1) as f64;
            let entry = EpochLog {
                phase: phase.label.clone(),
                phase_index: pi,
                epoch,
                documents: order.len(),
                mean_loss: total / n,
                mean_coref_loss: coref / n,
                mean_mention_loss: mention / n,
            };
            log::info!("{} epoch {}: mean loss {:.4}", entry.phase, epoch + 1, entry.mean_loss);
            if !params.is_finite() {
                return Ok(FitOutcome {
                    params: last_good,
                    log,
                    diverged: Some(Divergence {
                        phase: phase.label.clone(),
                        epoch,
                        doc_id: String::new(),
                        detail: params.diagnostics(),
                    }),
                });
            }
            on_epoch(&params, &entry)?;
            last_good = params.clone();
            log.push(entry);
        }
    }
    Ok(FitOutcome { params, log, diverged: None })
}

pub const CHECKPOINT_FORMAT: &str = "dcoref-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters plus the settings and seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub train: TrainConfig,
    /// Free-form settings of the caller (e.g. the preprocessing config).
    #[serde(default)]
    pub settings: serde_json::Value,
    pub epochs_completed: usize,
    pub parameters: Parameters,
}

impl Checkpoint {
    pub fn new(parameters: Parameters, train: TrainConfig, seed: u64, settings: serde_json::Value, epochs_completed: usize) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed,
            train,
            settings,
            epochs_completed,
            parameters,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| CorefError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(CorefError::Checkpoint(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        if !ck.parameters.is_finite() {
            return Err(CorefError::Checkpoint("parameters are not finite".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CorefError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CorefError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
