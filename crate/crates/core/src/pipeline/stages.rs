//! Resumable stages. Each stage reads earlier stages' artifacts, writes its
//! own under `<out>/<stage>/` and records a manifest. A rerun with the same
//! configuration and unchanged inputs, whose outputs are intact, does
//! nothing.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::artifacts::{config_hash, hash_files, Manifest, RunLock, ARTIFACT_VERSION, MANIFEST_FILE};
use super::assemble::{
    ae_corpus, collect_texts, embed_records, polarities_for, subsample, uses_augmented_profiles,
    uses_autoencoder, EmbeddingRow, RecordTexts, TextRow,
};
use super::config::{Experiment, RunConfig, Source};
use crate::autoencoder::{encode_corpus, reconstruction_accuracy, train_autoencoder};
use crate::checkpoint::{self, AeCheckpoint, Kind, RecCheckpoint};
use crate::dataset::{
    gen_synthetic_recsys, load_dataset, split_user_temporal, write_jsonl, DatasetSplit,
    InteractionRecord, ItemProfile, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    attention_summary, compute_metrics, histogram, histogram_csv, improvement_vs_uncertainty,
    keyword_frequencies, shares_csv, template_blocklist, uncertainty_scores, MetricReport,
};
use crate::llm::{augment_profiles, build_backend, ExplanationCache, ExplanationGenerator};
use crate::recsys::{predict_batch, train, Prediction, RecordExplanation};
use crate::theory::{
    convergence_experiment, gamma_sweep, nonlinear_csv, rate_curves_nonlinear, selection_experiment,
    spurious_experiment, SpuriousReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Augment,
    Explain,
    TrainAe,
    Train,
    Eval,
    Analyze,
    Theory,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Augment,
        Stage::Explain,
        Stage::TrainAe,
        Stage::Train,
        Stage::Eval,
        Stage::Analyze,
        Stage::Theory,
    ];

    /// Command name.
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Augment => "augment",
            Stage::Explain => "explain",
            Stage::TrainAe => "train-ae",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Analyze => "analyze",
            Stage::Theory => "theory",
        }
    }

    /// Artifact directory name.
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::TrainAe => "train_ae",
            s => s.as_str(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    /// True when the stage was already up to date.
    pub skipped: bool,
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------- file io

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| {
        Error::validation(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Collects output paths relative to the run directory.
struct Outputs<'a> {
    run_dir: &'a Path,
    stage_dir: PathBuf,
    rels: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        let rel = format!(
            "{}/{name}",
            self.stage_dir.strip_prefix(self.run_dir).expect("stage dir under run dir").display()
        );
        self.rels.push(rel);
        self.stage_dir.join(name)
    }
}

// ---------------------------------------------------------------- plan

struct Plan {
    dir: PathBuf,
    prereqs: Vec<Stage>,
    /// Input files outside the run directory.
    external: Vec<PathBuf>,
    config_hash: String,
}

fn theory_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from("theory").join(cfg.theory.experiment.as_str())
}

fn stage_dir_rel(stage: Stage, cfg: &RunConfig) -> PathBuf {
    match stage {
        Stage::Theory => theory_dir(cfg),
        s => PathBuf::from(s.dir_name()),
    }
}

fn plan(stage: Stage, cfg: &RunConfig) -> Result<Plan> {
    let variant = cfg.train.variant;
    let pols = polarities_for(variant);
    let (prereqs, external, hash) = match stage {
        Stage::Ingest => {
            let ext = match cfg.ingest.source {
                Source::Synthetic => Vec::new(),
                Source::Files => vec![
                    cfg.ingest.records.clone().ok_or_else(|| Error::validation("ingest.records is not set"))?,
                    cfg.ingest.profiles.clone().ok_or_else(|| Error::validation("ingest.profiles is not set"))?,
                ],
            };
            (vec![], ext, config_hash(&cfg.ingest)?)
        }
        Stage::Augment => (
            vec![Stage::Ingest],
            vec![],
            config_hash(&(&cfg.backend, cfg.explain.domain))?,
        ),
        Stage::Explain => {
            if pols.is_empty() {
                return Err(Error::validation(format!(
                    "variant {variant} reads no explanations; run `train` directly"
                )));
            }
            let augmented = uses_augmented_profiles(variant);
            let pre = if augmented {
                vec![Stage::Ingest, Stage::Augment]
            } else {
                vec![Stage::Ingest]
            };
            (
                pre,
                vec![],
                config_hash(&(&cfg.backend, cfg.explain.domain, &pols, augmented))?,
            )
        }
        Stage::TrainAe => {
            if !uses_autoencoder(variant) {
                return Err(Error::validation(format!(
                    "variant {variant} does not use the AutoEncoder"
                )));
            }
            (vec![Stage::Ingest, Stage::Explain], vec![], config_hash(&(&cfg.ae, &pols))?)
        }
        Stage::Train => {
            let mut pre = vec![Stage::Ingest];
            if variant.uses_explanations() {
                pre.push(Stage::Explain);
            }
            if uses_autoencoder(variant) {
                pre.push(Stage::TrainAe);
            }
            (pre, vec![], config_hash(&cfg.train)?)
        }
        Stage::Eval => (
            vec![Stage::Ingest, Stage::Train],
            vec![],
            config_hash(&("eval", ARTIFACT_VERSION))?,
        ),
        Stage::Analyze => {
            let mut pre = vec![Stage::Eval];
            if variant.uses_explanations() {
                pre.push(Stage::Explain);
            }
            let ext = cfg
                .analyze
                .baseline
                .iter()
                .map(|b| b.join("eval").join("predictions.jsonl"))
                .collect();
            (pre, ext, config_hash(&cfg.analyze)?)
        }
        Stage::Theory => (vec![], vec![], config_hash(&cfg.theory)?),
    };
    Ok(Plan {
        dir: cfg.out_dir.join(stage_dir_rel(stage, cfg)),
        prereqs,
        external,
        config_hash: hash,
    })
}

fn gather_inputs(cfg: &RunConfig, plan: &Plan) -> Result<BTreeMap<String, String>> {
    let mut rels = Vec::new();
    for &p in &plan.prereqs {
        let dir = cfg.out_dir.join(p.dir_name());
        let m = Manifest::read(&dir)?.ok_or_else(|| {
            Error::validation(format!("stage `{p}` has not been run in {}; run `lrrec {p}` first", cfg.out_dir.display()))
        })?;
        rels.extend(m.outputs.into_keys());
    }
    let mut inputs = hash_files(&cfg.out_dir, &rels).map_err(|e| {
        Error::validation(format!("an upstream artifact is missing or unreadable ({e}); rerun the earlier stages"))
    })?;
    for ext in &plan.external {
        let h = super::artifacts::sha256_file(ext)
            .map_err(|e| Error::validation(format!("cannot read {}: {e}", ext.display())))?;
        inputs.insert(ext.display().to_string(), h);
    }
    Ok(inputs)
}

/// Runs one stage with the run-directory lock held.
pub fn run_stage(stage: Stage, cfg: &RunConfig, force: bool) -> Result<StageReport> {
    let _lock = RunLock::acquire(&cfg.out_dir)?;
    let plan = plan(stage, cfg)?;
    let inputs = gather_inputs(cfg, &plan)?;
    let mut report = StageReport {
        stage: stage.as_str().into(),
        ..StageReport::default()
    };
    if let Some(m) = Manifest::read(&plan.dir)? {
        if m.config_hash != plan.config_hash && !force {
            return Err(Error::validation(format!(
                "configuration for `{stage}` changed since its artifacts in {} were written; pass --force to overwrite",
                plan.dir.display()
            )));
        }
        if m.config_hash == plan.config_hash && m.inputs == inputs && m.outputs_intact(&cfg.out_dir) && !force {
            report.skipped = true;
            report.outputs = m.outputs.into_keys().collect();
            report.notes.push("up to date".into());
            return Ok(report);
        }
    }
    fs::create_dir_all(&plan.dir)?;
    let _ = fs::remove_file(plan.dir.join(MANIFEST_FILE));
    let mut out = Outputs {
        run_dir: &cfg.out_dir,
        stage_dir: plan.dir.clone(),
        rels: Vec::new(),
    };
    match stage {
        Stage::Ingest => ingest(cfg, &mut out, &mut report)?,
        Stage::Augment => augment(cfg, &mut out, &mut report)?,
        Stage::Explain => explain(cfg, &mut out, &mut report)?,
        Stage::TrainAe => train_ae(cfg, &mut out, &mut report)?,
        Stage::Train => train_stage(cfg, &mut out, &mut report)?,
        Stage::Eval => eval_stage(cfg, &mut out, &mut report)?,
        Stage::Analyze => analyze(cfg, &mut out, &mut report)?,
        Stage::Theory => theory(cfg, &mut out, &mut report)?,
    }
    let manifest = Manifest {
        stage: stage.as_str().into(),
        version: ARTIFACT_VERSION,
        config_hash: plan.config_hash,
        inputs,
        outputs: hash_files(&cfg.out_dir, &out.rels)?,
    };
    manifest.write(&plan.dir)?;
    report.outputs = out.rels;
    Ok(report)
}

/// Runs every recommender stage in order (theory excluded).
pub fn run_pipeline(cfg: &RunConfig, force: bool) -> Result<Vec<StageReport>> {
    let v = cfg.train.variant;
    let mut stages = vec![Stage::Ingest];
    if uses_augmented_profiles(v) {
        stages.push(Stage::Augment);
    }
    if v.uses_explanations() {
        stages.push(Stage::Explain);
    }
    if uses_autoencoder(v) {
        stages.push(Stage::TrainAe);
    }
    stages.extend([Stage::Train, Stage::Eval, Stage::Analyze]);
    stages.into_iter().map(|s| run_stage(s, cfg, force)).collect()
}

// ---------------------------------------------------------------- loaders

fn ingest_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(Stage::Ingest.dir_name())
}

pub fn load_split(cfg: &RunConfig) -> Result<DatasetSplit> {
    let d = ingest_dir(cfg);
    Ok(DatasetSplit {
        train: read_jsonl(&d.join("train.jsonl"))?,
        test: read_jsonl(&d.join("test.jsonl"))?,
        ratio: cfg.ingest.split_ratio,
        warnings: Vec::new(),
    })
}

fn load_reason_table(cfg: &RunConfig) -> Result<Option<BTreeMap<String, String>>> {
    let p = ingest_dir(cfg).join("reason_table.json");
    if p.exists() {
        Ok(Some(serde_json::from_slice(&fs::read(p)?)?))
    } else {
        Ok(None)
    }
}

fn generator(cfg: &RunConfig) -> Result<ExplanationGenerator> {
    let backend = build_backend(&cfg.backend, load_reason_table(cfg)?)?;
    Ok(ExplanationGenerator::new(backend, cfg.explain.domain, cfg.backend.max_concurrency))
}

fn open_cache(cfg: &RunConfig) -> Result<ExplanationCache> {
    let path = cfg.cache_path();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    ExplanationCache::open(&path)
}

pub fn load_texts(cfg: &RunConfig) -> Result<RecordTexts> {
    let rows: Vec<TextRow> = read_jsonl(&cfg.out_dir.join("explain").join("explanations.jsonl"))?;
    Ok(rows.into_iter().map(|r| (r.key, r.texts)).collect())
}

fn load_embeddings(cfg: &RunConfig) -> Result<BTreeMap<String, RecordExplanation>> {
    let rows: Vec<EmbeddingRow> = read_jsonl(&cfg.out_dir.join("train").join("embeddings.jsonl"))?;
    Ok(rows.into_iter().map(|r| (r.key, r.explanation)).collect())
}

/// One prediction of one trained repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub repeat: usize,
    #[serde(flatten)]
    pub prediction: Prediction,
}

pub fn load_predictions(run_dir: &Path) -> Result<Vec<PredictionRow>> {
    read_jsonl(&run_dir.join("eval").join("predictions.jsonl"))
}

pub fn load_metrics(run_dir: &Path) -> Result<Vec<MetricReport>> {
    read_jsonl(&run_dir.join("eval").join("metrics.jsonl"))
}

// ---------------------------------------------------------------- stages

fn ingest(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let ic = &cfg.ingest;
    let (records, profiles, reasons) = match ic.source {
        Source::Synthetic => {
            let synth = SynthConfig {
                history_len: ic.history_len,
                ..ic.synth.clone()
            };
            let d = gen_synthetic_recsys(&synth)?;
            (d.records, d.profiles, Some(d.reason_table))
        }
        Source::Files => {
            let (r, p) = load_dataset(
                ic.records.as_deref().expect("checked in plan"),
                ic.profiles.as_deref().expect("checked in plan"),
                &ic.fields,
                ic.history_len,
            )?;
            (r, p, None)
        }
    };
    let split = split_user_temporal(&records, ic.split_ratio)?;
    report.notes.extend(split.warnings.iter().cloned());
    report.notes.push(format!("{} train / {} test records", split.train.len(), split.test.len()));
    write_jsonl(&out.path("train.jsonl"), &split.train)?;
    write_jsonl(&out.path("test.jsonl"), &split.test)?;
    write_jsonl(&out.path("profiles.jsonl"), &profiles)?;
    if let Some(r) = reasons {
        write_json(&out.path("reason_table.json"), &r)?;
    }
    Ok(())
}

fn augment(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let items: Vec<ItemProfile> = read_jsonl(&ingest_dir(cfg).join("profiles.jsonl"))?;
    let gen = generator(cfg)?;
    let mut cache = open_cache(cfg)?;
    let filled = augment_profiles(&items, &gen, &mut cache, true)?;
    report.backend_calls = gen.backend_calls();
    write_jsonl(&out.path("profiles.jsonl"), &filled)?;
    Ok(())
}

fn explain(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let variant = cfg.train.variant;
    let pols = polarities_for(variant);
    let profile_dir = if uses_augmented_profiles(variant) { "augment" } else { "ingest" };
    let profiles: Vec<ItemProfile> = read_jsonl(&cfg.out_dir.join(profile_dir).join("profiles.jsonl"))?;
    let split = load_split(cfg)?;
    let records: Vec<InteractionRecord> = split.train.into_iter().chain(split.test).collect();
    let gen = generator(cfg)?;
    let mut cache = open_cache(cfg)?;
    let outcome = gen.explain_records(&records, &profiles, &pols, &mut cache)?;
    report.backend_calls = outcome.backend_calls;
    report.cache_hits = outcome.cache_hits;
    if let Some(p) = outcome.pending.first() {
        let msg = format!("{} generation(s) failed, first {} ({}): {}", outcome.pending.len(), p.key, p.polarity, p.error);
        if !cfg.explain.resume {
            return Err(Error::Backend {
                fingerprint: p.key.clone(),
                message: format!("{msg}; completed calls are cached, rerun to resume"),
            });
        }
        report.notes.push(msg);
    }
    let texts = collect_texts(&records, &outcome);
    let rows: Vec<TextRow> = texts
        .into_iter()
        .filter(|(_, t)| pols.iter().all(|p| t.contains_key(p)))
        .map(|(key, texts)| TextRow { key, texts })
        .collect();
    report.notes.push(format!("{} of {} records explained", rows.len(), records.len()));
    write_jsonl(&out.path("explanations.jsonl"), &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeReport {
    pub corpus_size: usize,
    pub vocab_size: usize,
    pub bottleneck: usize,
    pub param_count: usize,
    pub layer_weight_count: usize,
    /// Token accuracy over non-pad positions and over all positions.
    pub accuracy_non_pad: f64,
    pub accuracy_all: f64,
    pub final_loss: Option<f64>,
}

fn train_ae(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let split = load_split(cfg)?;
    let texts = load_texts(cfg)?;
    let corpus = ae_corpus(&split.train, &texts, &polarities_for(cfg.train.variant));
    if corpus.is_empty() {
        return Err(Error::validation("no explanation texts for training records"));
    }
    let trained = train_autoencoder(&corpus, &cfg.ae)?;
    let seqs = encode_corpus(&corpus, &trained.params.vocab, trained.params.maxlen);
    let (acc, acc_all) = reconstruction_accuracy(&trained.params, &seqs)?;
    let r = AeReport {
        corpus_size: corpus.len(),
        vocab_size: trained.params.vocab.len(),
        bottleneck: trained.params.enc_out.b.len(),
        param_count: trained.params.param_count(),
        layer_weight_count: trained.params.layer_weight_count(),
        accuracy_non_pad: acc,
        accuracy_all: acc_all,
        final_loss: trained.loss_trace.last().copied(),
    };
    report.notes.push(format!("reconstruction accuracy {acc:.4} (non-pad)"));
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in trained.loss_trace.iter().enumerate() {
        loss.push_str(&format!("{},{l:.9e}\n", e + 1));
    }
    fs::write(out.path("loss.csv"), loss)?;
    write_json(&out.path("report.json"), &r)?;
    checkpoint::save(
        &out.path("autoencoder.ckpt"),
        Kind::AutoEncoder,
        &AeCheckpoint {
            hyper: cfg.ae.clone(),
            params: trained.params,
        },
    )?;
    Ok(())
}

fn train_stage(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    cfg.train.validate()?;
    let variant = cfg.train.variant;
    let mut split = load_split(cfg)?;
    split.train = subsample(&split.train, cfg.train.train_fraction, cfg.train.seed)?;
    let explanations = if variant.uses_explanations() {
        let texts = load_texts(cfg)?;
        let ae = if uses_autoencoder(variant) {
            let c: AeCheckpoint =
                checkpoint::load(&cfg.out_dir.join("train_ae").join("autoencoder.ckpt"), Kind::AutoEncoder)?;
            Some(c.params)
        } else {
            None
        };
        embed_records(&texts, variant, ae.as_ref())?
    } else {
        BTreeMap::new()
    };
    let rows: Vec<EmbeddingRow> = explanations
        .iter()
        .map(|(k, e)| EmbeddingRow {
            key: k.clone(),
            explanation: e.clone(),
        })
        .collect();
    write_jsonl(&out.path("embeddings.jsonl"), &rows)?;
    let mut loss = String::from("repeat,epoch,loss\n");
    for r in 0..cfg.train.repeats {
        let hyper = cfg.train.hyper(r);
        let t = train(&split, &explanations, &hyper)?;
        loss.push_str(&format!("{r},0,{:.9e}\n", t.initial_loss));
        for (e, l) in t.loss_trace.iter().enumerate() {
            loss.push_str(&format!("{r},{},{l:.9e}\n", e + 1));
        }
        report.notes.push(format!(
            "repeat {r}: loss {:.4} -> {:.4}",
            t.initial_loss,
            t.loss_trace.last().copied().unwrap_or(t.initial_loss)
        ));
        checkpoint::save(
            &out.path(&format!("model_{r}.ckpt")),
            Kind::Recommender,
            &RecCheckpoint { hyper, params: t.params },
        )?;
    }
    fs::write(out.path("loss.csv"), loss)?;
    Ok(())
}

fn metrics_csv(rows: &[MetricReport]) -> String {
    let mut s = String::from("label,task,n,rmse,mae,auc\n");
    for r in rows {
        let auc = r.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
        s.push_str(&format!("{},{},{},{:.6},{:.6},{auc}\n", r.label, r.task, r.n, r.rmse, r.mae));
    }
    s
}

fn eval_stage(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let split = load_split(cfg)?;
    let explanations = load_embeddings(cfg)?;
    let train_dir = cfg.out_dir.join("train");
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    let mut r = 0;
    while train_dir.join(format!("model_{r}.ckpt")).exists() {
        let c: RecCheckpoint = checkpoint::load(&train_dir.join(format!("model_{r}.ckpt")), Kind::Recommender)?;
        let preds = predict_batch(&split.test, &explanations, &c.params)?;
        let y: Vec<f64> = preds.iter().map(|p| p.target).collect();
        let yhat: Vec<f64> = preds.iter().map(|p| p.yhat).collect();
        let m = compute_metrics(&format!("{}#{r}", c.params.variant), &y, &yhat, c.params.task)?;
        report.notes.push(format!(
            "{}: rmse {:.4} mae {:.4} auc {}",
            m.label,
            m.rmse,
            m.mae,
            m.auc.map_or("undefined".into(), |a| format!("{a:.4}"))
        ));
        metrics.push(m);
        rows.extend(preds.into_iter().map(|prediction| PredictionRow { repeat: r, prediction }));
        r += 1;
    }
    if metrics.is_empty() {
        return Err(Error::validation("no trained models found; run `lrrec train` first"));
    }
    if metrics.len() > 1 {
        let k = metrics.len() as f64;
        let aucs: Vec<f64> = metrics.iter().filter_map(|m| m.auc).collect();
        metrics.push(MetricReport {
            label: format!("{}#mean", cfg.train.variant),
            task: metrics[0].task,
            n: metrics[0].n,
            rmse: metrics.iter().map(|m| m.rmse).sum::<f64>() / k,
            mae: metrics.iter().map(|m| m.mae).sum::<f64>() / k,
            auc: (aucs.len() == metrics.len()).then(|| aucs.iter().sum::<f64>() / k),
        });
    }
    write_jsonl(&out.path("predictions.jsonl"), &rows)?;
    write_jsonl(&out.path("metrics.jsonl"), &metrics)?;
    fs::write(out.path("metrics.csv"), metrics_csv(&metrics))?;
    Ok(())
}

fn keyword_csv(rows: &[(String, usize)]) -> String {
    let mut s = String::from("word,count\n");
    for (w, c) in rows {
        s.push_str(&format!("{w},{c}\n"));
    }
    s
}

fn analyze(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let ac = &cfg.analyze;
    let preds = load_predictions(&cfg.out_dir)?;
    let first: Vec<&Prediction> = preds.iter().filter(|p| p.repeat == 0).map(|p| &p.prediction).collect();

    let with_attn: Vec<(&Vec<f64>, f64)> = first
        .iter()
        .filter_map(|p| p.attention.as_ref().map(|a| (a, p.yhat)))
        .collect();
    if with_attn.is_empty() {
        report.notes.push(format!("variant {} has no input attention; attention outputs skipped", cfg.train.variant));
    } else {
        let alphas: Vec<Vec<f64>> = with_attn.iter().map(|(a, _)| (*a).clone()).collect();
        let yhat: Vec<f64> = with_attn.iter().map(|(_, y)| *y).collect();
        let s = attention_summary(&alphas, &yhat, ac.threshold, ac.axis)?;
        if let (Some(h), Some(l)) = (s.high.means(), s.low.means()) {
            report.notes.push(format!(
                "mean alpha_pos high/low {:.4}/{:.4}, alpha_neg high/low {:.4}/{:.4}",
                h.0, l.0, h.1, l.1
            ));
        }
        fs::write(out.path("hist_high.csv"), histogram_csv(&histogram(&s.high)))?;
        fs::write(out.path("hist_low.csv"), histogram_csv(&histogram(&s.low)))?;
        fs::write(out.path("shares.csv"), shares_csv(&s.slot_shares))?;
        write_json(&out.path("attention.json"), &s)?;
    }

    if cfg.train.variant.uses_explanations() {
        let texts = load_texts(cfg)?;
        let mut block = template_blocklist();
        block.extend(ac.blocklist.iter().map(|w| w.to_lowercase()));
        for pol in polarities_for(cfg.train.variant) {
            let corpus: Vec<&str> = texts.values().filter_map(|t| t.get(&pol).map(String::as_str)).collect();
            let k = keyword_frequencies(&corpus, &block, ac.top_k);
            fs::write(out.path(&format!("keywords_{pol}.csv")), keyword_csv(&k))?;
        }
    }

    let repeats = preds.iter().map(|p| p.repeat).max().map_or(0, |m| m + 1);
    if repeats >= 2 {
        let n = first.len();
        let matrix: Vec<Vec<f64>> = (0..repeats)
            .map(|r| preds.iter().filter(|p| p.repeat == r).map(|p| p.prediction.yhat).collect())
            .collect();
        if matrix.iter().any(|m| m.len() != n) {
            return Err(Error::validation("repeats disagree on the number of predictions"));
        }
        let scores = uncertainty_scores(&matrix)?;
        let mut csv = String::from("key,uncertainty\n");
        for (p, s) in first.iter().zip(&scores) {
            csv.push_str(&format!("{},{s:.6}\n", p.key));
        }
        fs::write(out.path("uncertainty.csv"), csv)?;
        if let Some(base) = &ac.baseline {
            let base_preds = load_predictions(base)?;
            let base_err: BTreeMap<&str, f64> = base_preds
                .iter()
                .filter(|p| p.repeat == 0)
                .map(|p| (p.prediction.key.as_str(), (p.prediction.yhat - p.prediction.target).abs()))
                .collect();
            let (mut b, mut m, mut u) = (Vec::new(), Vec::new(), Vec::new());
            for (p, s) in first.iter().zip(&scores) {
                if let Some(e) = base_err.get(p.key.as_str()) {
                    b.push(*e);
                    m.push((p.yhat - p.target).abs());
                    u.push(*s);
                }
            }
            let fit = improvement_vs_uncertainty(&b, &m, &u)?;
            report.notes.push(format!("improvement vs uncertainty slope {:.4}", fit.slope));
            write_json(&out.path("improvement.json"), &fit)?;
        }
    } else if ac.baseline.is_some() {
        report.notes.push("uncertainty needs train.repeats ≥ 2; baseline comparison skipped".into());
    }
    Ok(())
}

fn spurious_csv(rows: &[SpuriousReport]) -> String {
    let mut s = String::from("gamma,lambda,trials,ols_rate,eills_rate,eills_exact_rate\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.6},{},{:.4},{:.4},{:.4}\n",
            r.gamma, r.lambda, r.trials, r.ols_rate, r.eills_rate, r.eills_exact_rate
        ));
    }
    s
}

fn theory(cfg: &RunConfig, out: &mut Outputs, report: &mut StageReport) -> Result<()> {
    let tc = &cfg.theory;
    let name = format!("{}.csv", tc.experiment.as_str());
    let csv = match tc.experiment {
        Experiment::Rates => {
            let t = convergence_experiment(&tc.rates)?;
            report.notes.push(format!("lasso constant c = {}", t.lasso_c));
            t.to_csv()
        }
        Experiment::NonlinearRates => nonlinear_csv(&rate_curves_nonlinear(
            &tc.nonlinear_n,
            tc.nonlinear_s,
            &tc.nonlinear_p,
        )),
        Experiment::Selection => {
            let r = selection_experiment(&tc.selection)?;
            report.notes.push(format!("exact support recovery {}/{}", r.exact, r.trials));
            format!(
                "method,trials,gamma,lambda,exact,rate\neills,{},{},{:.6},{},{:.4}\n",
                r.trials, r.gamma, r.lambda, r.exact, r.rate
            )
        }
        Experiment::Eills => spurious_csv(&gamma_sweep(&tc.selection, &tc.gammas)?),
        Experiment::Lemma2 => {
            let r = spurious_experiment(&tc.selection)?;
            report.notes.push(format!(
                "spurious column selected: single-env OLS {:.2}, EILLS {:.2}",
                r.ols_rate, r.eills_rate
            ));
            spurious_csv(&[r])
        }
    };
    fs::write(out.path(&name), csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recsys::Variant;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert_eq!(Stage::TrainAe.dir_name(), "train_ae");
    }

    #[test]
    fn explain_rejected_for_variants_without_text() {
        let mut cfg = RunConfig::default();
        cfg.train.variant = Variant::NoExplanations;
        assert!(plan(Stage::Explain, &cfg).is_err());
        assert!(plan(Stage::TrainAe, &cfg).is_err());
        assert_eq!(plan(Stage::Train, &cfg).unwrap().prereqs, vec![Stage::Ingest]);
    }
}
