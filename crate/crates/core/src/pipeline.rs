//! End-to-end glue: preprocessing for training, fitting, and prediction on
//! raw documents.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::decoder::{decode, SingletonPolicy};
use crate::doc_model::{Corpus, Document};
use crate::error::Result;
use crate::evaluator::Aggregation;
use crate::preprocess::{
    augment_speakers, build_schedule, original_token_indices, restore_span, split_document, strip_non_referring,
    TrainingSchedule, TransferMode, DEFAULT_MAX_SEGMENTS, DEFAULT_MAX_SEGMENT_TOKENS,
};
use crate::score_table::ScoreTable;
use crate::scorer::{fit, Checkpoint, EpochLog, FitOutcome, ModelConfig, Parameters, TrainConfig};

/// Corpus locations. Relative paths are resolved by the caller.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub uad_train: Vec<String>,
    pub od_train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    /// Train on the dev corpora too (final-submission setting).
    pub include_dev_in_train: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub speaker_augmentation: bool,
    pub transfer_mode: TransferMode,
    pub max_segment_tokens: usize,
    pub max_segments: usize,
    pub aggregation: Aggregation,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            speaker_augmentation: true,
            transfer_mode: TransferMode::UadOnly,
            max_segment_tokens: DEFAULT_MAX_SEGMENT_TOKENS,
            max_segments: DEFAULT_MAX_SEGMENTS,
            aggregation: Aggregation::Micro,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// The pipeline settings a checkpoint was trained with.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_value(ck.settings.clone())
            .map_err(|e| crate::error::CorefError::Checkpoint(format!("settings: {e}")))?;
        cfg.model = ck.parameters.config.clone();
        cfg.train = ck.train.clone();
        cfg.seed = ck.seed;
        Ok(cfg)
    }
}

/// Training-side preprocessing of one corpus: non-referring marks removed,
/// speakers injected when enabled, long documents split.
pub fn training_corpus(corpus: &Corpus, cfg: &PipelineConfig) -> Result<Corpus> {
    let mut out = Corpus { name: corpus.name.clone(), documents: Vec::new(), format_tag: corpus.format_tag };
    for doc in &corpus.documents {
        let mut d = strip_non_referring(doc);
        if cfg.speaker_augmentation {
            d = augment_speakers(&d).0;
        }
        out.documents.extend(split_document(&d, cfg.max_segment_tokens, cfg.max_segments)?.documents);
    }
    Ok(out)
}

pub fn training_schedule(uad: &[Corpus], od: &[Corpus], cfg: &PipelineConfig) -> Result<TrainingSchedule> {
    let prep = |cs: &[Corpus]| cs.iter().map(|c| training_corpus(c, cfg)).collect::<Result<Vec<_>>>();
    build_schedule(&prep(uad)?, &prep(od)?, cfg.transfer_mode, cfg.train.epochs, cfg.seed)
}

/// Every token string seen in training, the initial learned-table vocabulary.
pub fn vocabulary(schedule: &TrainingSchedule) -> BTreeSet<String> {
    schedule
        .phases
        .iter()
        .flat_map(|p| p.documents.iter())
        .flat_map(|d| d.tokens.iter().map(|t| t.text.clone()))
        .collect()
}

pub fn initial_parameters(schedule: &TrainingSchedule, cfg: &PipelineConfig) -> Parameters {
    Parameters::init(&cfg.model, vocabulary(schedule), cfg.seed)
}

/// Builds the schedule, initializes parameters and trains. `on_epoch`
/// receives a checkpoint after every epoch.
pub fn train(
    uad: &[Corpus],
    od: &[Corpus],
    cfg: &PipelineConfig,
    on_epoch: &mut dyn FnMut(&Checkpoint, &EpochLog) -> Result<()>,
) -> Result<FitOutcome> {
    let schedule = training_schedule(uad, od, cfg)?;
    let params = initial_parameters(&schedule, cfg);
    let settings = serde_json::to_value(cfg).expect("config serializes");
    let mut done = 0;
    fit(params, &schedule, &cfg.train, &mut |p, entry| {
        done += 1;
        on_epoch(&Checkpoint::new(p.clone(), cfg.train.clone(), cfg.seed, settings.clone(), done), entry)
    })
}

pub fn checkpoint_for(params: Parameters, cfg: &PipelineConfig, epochs_completed: usize) -> Checkpoint {
    let settings = serde_json::to_value(cfg).expect("config serializes");
    Checkpoint::new(params, cfg.train.clone(), cfg.seed, settings, epochs_completed)
}

/// Scores a raw document. Candidate spans are reported in the document's
/// own token indices even when the model saw injected speaker tokens.
pub fn score_document(params: &Parameters, doc: &Document, speaker_augmentation: bool) -> Result<ScoreTable> {
    if !speaker_augmentation {
        return params.score(doc);
    }
    let view = augment_speakers(doc).0;
    let mut table = params.score(&view)?;
    let map = original_token_indices(&view);
    for span in &mut table.candidates {
        *span = restore_span(&map, *span).expect("candidates never touch speaker tokens");
    }
    Ok(table)
}

/// `doc` with its clusters replaced by the decoded prediction.
pub fn apply_table(doc: &Document, table: &ScoreTable, policy: SingletonPolicy) -> Document {
    let mut out = doc.clone();
    out.gold_clusters = Some(decode(table, policy));
    out.non_referring = None;
    out
}

pub fn predict_document(params: &Parameters, doc: &Document, speaker_augmentation: bool) -> Result<(Document, ScoreTable)> {
    let table = score_document(params, doc, speaker_augmentation)?;
    Ok((apply_table(doc, &table, params.config.singleton_policy()), table))
}

/// Predicted clusters for every document, plus the score tables.
pub fn predict_corpus(params: &Parameters, corpus: &Corpus, speaker_augmentation: bool) -> Result<(Corpus, Vec<ScoreTable>)> {
    let mut out = Corpus { name: corpus.name.clone(), documents: Vec::new(), format_tag: corpus.format_tag };
    let mut tables = Vec::new();
    for doc in &corpus.documents {
        let (pred, table) = predict_document(params, doc, speaker_augmentation)?;
        out.documents.push(pred);
        tables.push(table);
    }
    Ok((out, tables))
}
