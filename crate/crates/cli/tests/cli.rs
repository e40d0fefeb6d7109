use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[ae]
epochs = 20

[train]
epochs = 3
"#;

fn lrrec(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        fs::write(&cfg, CONFIG).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_lrrec"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}\n{}\n{}", o.status.code(), stdout(&o), stderr(&o));
    stdout(&o)
}

#[test]
fn stub_pipeline_end_to_end_is_resumable_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for stage in ["ingest", "augment", "explain", "train-ae", "train", "eval", "analyze"] {
        ok(lrrec(dir, &[stage]));
    }
    let out = dir.join("out");
    let metrics = fs::read_to_string(out.join("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("label,task,n,rmse,mae,auc\nfull#0,classification,"), "{metrics}");
    assert!(out.join("eval/manifest.json").exists());

    // warm cache: explain regenerated from scratch makes no backend calls
    let text = fs::read(out.join("explain/explanations.jsonl")).unwrap();
    fs::remove_dir_all(out.join("explain")).unwrap();
    let s = ok(lrrec(dir, &["explain"]));
    assert!(s.contains("backend calls 0,"), "{s}");
    assert_eq!(fs::read(out.join("explain/explanations.jsonl")).unwrap(), text);
    let s = ok(lrrec(dir, &["explain"]));
    assert!(s.contains("up to date"), "{s}");

    // deleting the final artifact and rerunning gives the same bytes
    let preds = fs::read(out.join("eval/predictions.jsonl")).unwrap();
    let manifest = fs::read(out.join("eval/manifest.json")).unwrap();
    fs::remove_file(out.join("eval/predictions.jsonl")).unwrap();
    ok(lrrec(dir, &["eval"]));
    assert_eq!(fs::read(out.join("eval/predictions.jsonl")).unwrap(), preds);
    assert_eq!(fs::read(out.join("eval/manifest.json")).unwrap(), manifest);

    // changed configuration is refused without --force
    let o = lrrec(dir, &["train", "--epochs", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"), "{}", stderr(&o));
    ok(lrrec(dir, &["train", "--epochs", "4", "--force"]));
}

#[test]
fn train_before_train_ae_names_the_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for stage in ["ingest", "augment", "explain"] {
        ok(lrrec(dir, &[stage]));
    }
    let o = lrrec(dir, &["train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lrrec train-ae"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lrrec(tmp.path(), &["train", "--variant", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lrrec(tmp.path(), &["explain", "--variant", "no_explanations"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(tmp.path().join("bad.toml"), "[train]\nlearning_rate = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lrrec"))
        .args(["--config", tmp.path().join("bad.toml").to_str().unwrap(), "show-config"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn http_backend_failure_exits_with_backend_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(lrrec(dir, &["ingest", "--n-users", "3"]));
    // nothing listens on port 9 of localhost
    let o = lrrec(dir, &["augment", "--backend", "http", "--endpoint", "http://127.0.0.1:9/v1/chat/completions"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn theory_selection_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(lrrec(dir, &["theory", "--experiment", "selection", "--trials", "5"]));
    let csv = fs::read_to_string(dir.join("out/theory/selection/selection.csv")).unwrap();
    assert!(csv.starts_with("method,trials,gamma,lambda,exact,rate\neills,5,"), "{csv}");
}
