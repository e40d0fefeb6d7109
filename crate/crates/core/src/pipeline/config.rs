//! Run configuration: one section per stage, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AeHyper;
use crate::dataset::{FieldMapping, SynthConfig, DEFAULT_HISTORY_LEN};
use crate::error::{Error, Result};
use crate::eval::AttentionAxis;
use crate::llm::{BackendConfig, Domain};
use crate::nn::Init;
use crate::recsys::{RecHyper, Task, Variant};
use crate::theory::{ConvergenceConfig, SelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub source: Source,
    pub records: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub fields: FieldMapping,
    pub history_len: usize,
    pub split_ratio: f64,
    pub synth: SynthConfig,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            source: Source::Synthetic,
            records: None,
            profiles: None,
            fields: FieldMapping::default(),
            history_len: DEFAULT_HISTORY_LEN,
            split_ratio: 0.8,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub domain: Domain,
    /// Shared completion cache; defaults to `<out>/cache/llm.jsonl`.
    pub cache: Option<PathBuf>,
    /// Finish with partial output when some backend calls fail instead of
    /// exiting with a backend error. Completed calls are cached either way.
    pub resume: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            domain: Domain::Product,
            cache: None,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub task: Task,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub history_len: usize,
    pub use_context: bool,
    /// Regression only: an unbounded output on raw 1-5 ratings instead of a
    /// sigmoid on scaled ratings.
    pub linear_head: bool,
    pub init: Init,
    /// Models trained with seeds `seed, seed+1, ...`.
    pub repeats: usize,
    /// Fraction of training records used, subsampled per user-independent
    /// shuffle with the training seed.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let h = RecHyper::default();
        TrainConfig {
            variant: h.variant,
            task: h.task,
            lr: h.lr,
            batch: h.batch,
            epochs: h.epochs,
            seed: h.seed,
            history_len: h.history_len,
            use_context: h.use_context,
            linear_head: h.linear_head,
            init: h.init,
            repeats: 1,
            train_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self, repeat: usize) -> RecHyper {
        RecHyper {
            task: self.task,
            variant: self.variant,
            lr: self.lr,
            batch: self.batch,
            epochs: self.epochs,
            seed: self.seed + repeat as u64,
            history_len: self.history_len,
            init: self.init,
            use_context: self.use_context,
            linear_head: self.linear_head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::validation("repeats must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::validation("train_fraction must be in (0, 1]"));
        }
        self.hyper(0).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub axis: AttentionAxis,
    /// Prediction cut between the high and low groups. For regression with
    /// a linear head this is on the rating scale.
    pub threshold: f64,
    pub top_k: usize,
    /// Extra words dropped from keyword counts on top of the template list.
    pub blocklist: Vec<String>,
    /// Output directory of a baseline run whose per-record errors are
    /// compared against this run's uncertainty.
    pub baseline: Option<PathBuf>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            axis: AttentionAxis::Column,
            threshold: 0.5,
            top_k: 20,
            blocklist: Vec::new(),
            baseline: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Rates,
    NonlinearRates,
    Selection,
    Eills,
    Lemma2,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(Experiment::Rates),
            "nonlinear-rates" => Ok(Experiment::NonlinearRates),
            "selection" => Ok(Experiment::Selection),
            "eills" => Ok(Experiment::Eills),
            "lemma2" => Ok(Experiment::Lemma2),
            _ => Err(Error::validation(format!("unknown experiment `{s}`"))),
        }
    }
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Rates => "rates",
            Experiment::NonlinearRates => "nonlinear-rates",
            Experiment::Selection => "selection",
            Experiment::Eills => "eills",
            Experiment::Lemma2 => "lemma2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub experiment: Experiment,
    pub rates: ConvergenceConfig,
    pub selection: SelectionConfig,
    /// `γ` grid for the `eills` sweep.
    pub gammas: Vec<f64>,
    /// Nonlinear rate curves: sample sizes, support size and dimensions.
    pub nonlinear_n: Vec<usize>,
    pub nonlinear_s: usize,
    pub nonlinear_p: Vec<usize>,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            experiment: Experiment::Rates,
            rates: ConvergenceConfig::default(),
            selection: SelectionConfig::default(),
            gammas: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            nonlinear_n: vec![1000, 2000, 5000, 10_000, 20_000, 50_000],
            nonlinear_s: 20,
            nonlinear_p: vec![20, 50, 100, 200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub ingest: IngestConfig,
    pub backend: BackendConfig,
    pub explain: ExplainConfig,
    pub ae: AeHyper,
    pub train: TrainConfig,
    pub analyze: AnalyzeConfig,
    pub theory: TheoryConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn cache_path(&self) -> PathBuf {
        self.explain
            .cache
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache").join("llm.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let mut c = RunConfig::default();
        c.out_dir = "runs/a".into();
        c.train.variant = Variant::NcfHead;
        c.theory.experiment = Experiment::Lemma2;
        c.explain.cache = Some("shared.jsonl".into());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert!(RunConfig::from_toml("[train]\nlearning_rate = 0.1\n").is_err());
        assert!(RunConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = RunConfig::from_toml("[train]\nvariant = \"no_explanations\"\nepochs = 3\n").unwrap();
        assert_eq!(c.train.variant, Variant::NoExplanations);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.lr, 0.01);
        assert_eq!(c.cache_path(), PathBuf::from("cache/llm.jsonl"));
    }

    #[test]
    fn experiment_names() {
        for e in ["rates", "nonlinear-rates", "selection", "eills", "lemma2"] {
            assert_eq!(e.parse::<Experiment>().unwrap().as_str(), e);
        }
        assert!("fig5".parse::<Experiment>().is_err());
    }
}
