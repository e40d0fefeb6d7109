//! Command-line flags. Each flag overrides its twin in the TOML config.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lrrec_core::eval::AttentionAxis;
use lrrec_core::llm::{BackendKind, Domain};
use lrrec_core::pipeline::{Experiment, RunConfig, Source, Stage};
use lrrec_core::recsys::{Task, Variant};
use lrrec_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "lrrec", version, about = "Explanation-augmented recommender pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; stage artifacts go to `<out>/<stage>/`.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite artifacts written under a different configuration.
    #[arg(long, global = true)]
    pub force: bool,
    /// Print stage reports as JSON lines.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// `stub` or `http`.
    #[arg(long, global = true)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long = "model", global = true)]
    pub model_name: Option<String>,
    #[arg(long, global = true)]
    pub max_concurrency: Option<usize>,
    #[arg(long, global = true)]
    pub domain: Option<Domain>,
    /// Completion cache file shared across runs.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Keep partial explanation output when some backend calls fail.
    #[arg(long, global = true)]
    pub resume: bool,
}

/// Variant and task decide which stages apply, so every stage accepts them.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    #[arg(long, global = true)]
    pub task: Option<Task>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or synthesize interactions and split them per user by time.
    Ingest(IngestArgs),
    /// Fill missing item descriptions through the backend.
    Augment,
    /// Generate explanation texts for every record.
    Explain,
    /// Train the explanation AutoEncoder.
    TrainAe(AeArgs),
    /// Train the recommender.
    Train(TrainArgs),
    /// Score the test split.
    Eval,
    /// Attention, keyword and uncertainty analyses.
    Analyze(AnalyzeArgs),
    /// Multi-environment regression experiments.
    Theory(TheoryArgs),
    /// Every recommender stage the variant needs, in order.
    Run(RunArgs),
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

#[derive(Debug, Args, Default)]
pub struct IngestArgs {
    /// Interaction file (JSONL or CSV); switches the source to files.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub history_len: Option<usize>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub n_items: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct AeArgs {
    #[arg(long)]
    pub maxlen: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub history_len: Option<usize>,
    /// Models trained with consecutive seeds.
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct AnalyzeArgs {
    /// `column` or `row` reading of the 6x6 attention matrix.
    #[arg(long)]
    pub axis: Option<AttentionAxis>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Run directory of a baseline for the uncertainty comparison.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct TheoryArgs {
    /// rates, nonlinear-rates, selection, eills or lemma2.
    #[arg(long)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub n_items: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed of the synthetic data generator.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Sets both the ingest and the training history length.
    #[arg(long)]
    pub history_len: Option<usize>,
    #[command(flatten)]
    pub train: RunTrainArgs,
}

#[derive(Debug, Args, Default)]
pub struct RunTrainArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

fn set<T>(slot: &mut T, v: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = v {
        *slot = v.clone();
    }
}

impl Command {
    pub fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Ingest(_) => Stage::Ingest,
            Command::Augment => Stage::Augment,
            Command::Explain => Stage::Explain,
            Command::TrainAe(_) => Stage::TrainAe,
            Command::Train(_) => Stage::Train,
            Command::Eval => Stage::Eval,
            Command::Analyze(_) => Stage::Analyze,
            Command::Theory(_) => Stage::Theory,
            Command::Run(_) | Command::ShowConfig => return None,
        })
    }
}

fn apply_ingest(cfg: &mut RunConfig, a: &IngestArgs) {
    let ic = &mut cfg.ingest;
    if a.records.is_some() || a.profiles.is_some() {
        ic.source = Source::Files;
    }
    if a.records.is_some() {
        ic.records = a.records.clone();
    }
    if a.profiles.is_some() {
        ic.profiles = a.profiles.clone();
    }
    set(&mut ic.history_len, &a.history_len);
    set(&mut ic.split_ratio, &a.split_ratio);
    set(&mut ic.synth.n_users, &a.n_users);
    set(&mut ic.synth.n_items, &a.n_items);
    set(&mut ic.synth.noise, &a.noise);
    set(&mut ic.synth.seed, &a.seed);
}

fn apply_train(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.train;
    set(&mut t.lr, &a.lr);
    set(&mut t.batch, &a.batch);
    set(&mut t.epochs, &a.epochs);
    set(&mut t.seed, &a.seed);
    set(&mut t.history_len, &a.history_len);
    set(&mut t.repeats, &a.repeats);
    set(&mut t.train_fraction, &a.train_fraction);
}

impl Cli {
    /// Config file (or defaults) with flags applied on top.
    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| match e {
                Error::Io(io) => Error::validation(format!("cannot read {}: {io}", p.display())),
                e => e,
            })?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if cfg.out_dir.as_os_str().is_empty() {
            cfg.out_dir = PathBuf::from("runs/default");
        }

        let b = &self.backend;
        set(&mut cfg.backend.kind, &b.backend);
        if b.endpoint.is_some() {
            cfg.backend.endpoint = b.endpoint.clone();
        }
        if b.model_name.is_some() {
            cfg.backend.model_name = b.model_name.clone();
        }
        set(&mut cfg.backend.max_concurrency, &b.max_concurrency);
        set(&mut cfg.explain.domain, &b.domain);
        if b.cache.is_some() {
            cfg.explain.cache = b.cache.clone();
        }
        cfg.explain.resume |= b.resume;
        set(&mut cfg.train.variant, &self.model.variant);
        set(&mut cfg.train.task, &self.model.task);

        match &self.command {
            Command::Ingest(a) => apply_ingest(&mut cfg, a),
            Command::TrainAe(a) => {
                let ae = &mut cfg.ae;
                set(&mut ae.maxlen, &a.maxlen);
                set(&mut ae.dim, &a.dim);
                set(&mut ae.lr, &a.lr);
                set(&mut ae.batch, &a.batch);
                set(&mut ae.epochs, &a.epochs);
                set(&mut ae.seed, &a.seed);
            }
            Command::Train(a) => apply_train(&mut cfg, a),
            Command::Analyze(a) => {
                let an = &mut cfg.analyze;
                set(&mut an.axis, &a.axis);
                set(&mut an.threshold, &a.threshold);
                set(&mut an.top_k, &a.top_k);
                if a.baseline.is_some() {
                    an.baseline = a.baseline.clone();
                }
            }
            Command::Theory(a) => {
                let th = &mut cfg.theory;
                set(&mut th.experiment, &a.experiment);
                set(&mut th.rates.trials, &a.trials);
                set(&mut th.selection.trials, &a.trials);
                set(&mut th.rates.seed, &a.seed);
                set(&mut th.selection.env.seed, &a.seed);
                set(&mut th.selection.gamma, &a.gamma);
            }
            Command::Run(a) => {
                let ingest = IngestArgs {
                    records: a.records.clone(),
                    profiles: a.profiles.clone(),
                    history_len: a.history_len,
                    split_ratio: None,
                    n_users: a.n_users,
                    n_items: a.n_items,
                    noise: a.noise,
                    seed: a.data_seed,
                };
                apply_ingest(&mut cfg, &ingest);
                let t = &a.train;
                let train = TrainArgs {
                    lr: t.lr,
                    batch: t.batch,
                    epochs: t.epochs,
                    seed: t.seed,
                    history_len: a.history_len,
                    repeats: t.repeats,
                    train_fraction: t.train_fraction,
                };
                apply_train(&mut cfg, &train);
            }
            Command::Augment | Command::Explain | Command::Eval | Command::ShowConfig => {}
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "out_dir = \"a\"\n[train]\nepochs = 7\nlr = 0.5\n").unwrap();
        let cli = Cli::parse_from(["lrrec", "--config", path.to_str().unwrap(), "train", "--lr", "0.1", "--variant", "pos_only"]);
        let cfg = cli.config().unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.lr, 0.1);
        assert_eq!(cfg.train.variant, Variant::PosOnly);
        assert_eq!(cfg.out_dir, PathBuf::from("a"));
    }
}
