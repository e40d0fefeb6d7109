//! Staged, resumable runs over an output directory.

mod artifacts;
mod assemble;
mod config;
mod stages;

pub use artifacts::{config_hash, hash_files, sha256_file, Manifest, RunLock, ARTIFACT_VERSION, LOCK_FILE, MANIFEST_FILE};
pub use assemble::{
    ae_corpus, collect_texts, embed_records, polarities_for, subsample, uses_augmented_profiles, uses_autoencoder,
    EmbeddingRow, RecordTexts, TextRow,
};
pub use config::{AnalyzeConfig, ExplainConfig, Experiment, IngestConfig, RunConfig, Source, TheoryConfig, TrainConfig};
pub use stages::{
    load_metrics, load_predictions, load_split, load_texts, read_jsonl, run_pipeline, run_stage, AeReport,
    PredictionRow, Stage, StageReport,
};
