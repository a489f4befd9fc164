use std::path::Path;
use std::process::{Command, Output};

use soupgnn::report::load_report;

fn soupgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soupgnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = soupgnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn prepare_sbm(dir: &Path, noise: &str) {
    ok(&[
        "prepare",
        "--out",
        s(dir),
        "--sbm",
        "n=300",
        "k=3",
        "p_in=0.06",
        "p_out=0.01",
        &format!("noise={noise}"),
        "--seed",
        "4",
    ]);
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim().parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

const SMALL: &str = r#"
ingredient_count = 4
worker_count = 2

[model]
hidden_dim = 8

[hyper]
epochs = 5
batch_size = 32

[grid]
learning_rate = [0.01, 0.03]
"#;

fn write_config(dir: &Path, mode: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{mode}.toml"));
    std::fs::write(&path, format!("mode = \"{mode}\"\n{SMALL}")).unwrap();
    path
}

#[test]
fn prepare_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    prepare_sbm(&a, "1.0");
    prepare_sbm(&b, "1.0");
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn prepare_reports_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("edges.tsv"), "0\t1\n").unwrap();
    std::fs::write(tmp.path().join("labels.tsv"), "0\n1\n").unwrap();
    let out = soupgnn(&[
        "prepare",
        "--out",
        s(&tmp.path().join("d")),
        "--edges",
        s(&tmp.path().join("edges.tsv")),
        "--features",
        s(&tmp.path().join("features.tsv")),
        "--labels",
        s(&tmp.path().join("labels.tsv")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("features.tsv"), "{err}");
}

#[test]
fn pipeline_outputs_reevaluate_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_sbm(&data, "1.5");
    let run = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "full-batch");
    let table = ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&run),
    ]);
    assert!(table.contains("soup"), "{table}");
    let report = load_report(&run.join("report.json")).unwrap();
    assert_eq!(report.trained(), 4);

    let soup = ok(&["eval", "--dataset", s(&data), s(&run.join("soup.ckpt"))]);
    assert_eq!(value(&soup, "val_acc"), report.soup.accuracy.val);
    assert_eq!(value(&soup, "test_acc"), report.soup.accuracy.test);
    for r in &report.ingredients {
        let ckpt = run.join(format!("ingredient_{}.ckpt", r.index));
        let e = ok(&["eval", "--dataset", s(&data), s(&ckpt)]);
        assert_eq!(value(&e, "val_acc"), r.accuracy.unwrap().val);
    }

    // The pipeline merges round by round; a one-shot soup of the saved
    // ingredients still dominates every one of them.
    let ckpts: Vec<String> = (0..4)
        .map(|i| s(&run.join(format!("ingredient_{i}.ckpt"))).to_string())
        .collect();
    let resoup = tmp.path().join("resoup");
    let mut args = vec!["soup", "--dataset", s(&data), "--out", s(&resoup)];
    args.extend(ckpts.iter().map(String::as_str));
    let text = ok(&args);
    assert_eq!(
        value(&text, "best single val_acc"),
        report.best_single.accuracy.val
    );
    assert!(value(&text, "soup val_acc") >= report.best_single.accuracy.val);
    let e = ok(&["eval", "--dataset", s(&data), s(&resoup.join("soup.ckpt"))]);
    assert_eq!(value(&e, "val_acc"), value(&text, "soup val_acc"));
    assert!(resoup.join("lineage.json").exists());

    let mut args = vec!["ensemble", "--dataset", s(&data)];
    args.extend(ckpts.iter().map(String::as_str));
    let text = ok(&args);
    assert_eq!(value(&text, "test_acc"), report.ensemble.test);

    // Same config, fresh directory: identical report apart from timing.
    let again = tmp.path().join("again");
    ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&again),
    ]);
    let second = load_report(&again.join("report.json")).unwrap();
    assert_eq!(report.content_hash(), second.content_hash());
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_sbm(&data, "1.0");
    let run = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "full-batch");
    ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&run),
    ]);
    let params = run.join("ingredient_0.ckpt/params.bin");
    let mut bytes = std::fs::read(&params).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&params, bytes).unwrap();
    let out = soupgnn(&[
        "eval",
        "--dataset",
        s(&data),
        s(&run.join("ingredient_0.ckpt")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));

    let out = soupgnn(&["eval", "--dataset", s(&data), s(&run.join("nope.ckpt"))]);
    assert!(!out.status.success());
}

#[test]
fn sampled_and_partition_modes_report_their_extras() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_sbm(&data, "1.0");

    let run = tmp.path().join("node");
    let cfg = write_config(tmp.path(), "node-sample");
    let table = ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&run),
        "--comm-interval",
        "2",
    ]);
    assert!(table.contains("mean input nodes"), "{table}");
    assert!(table.contains("communication every 2 epochs"), "{table}");
    let report = load_report(&run.join("report.json")).unwrap();
    assert!(report.sampler_stats.is_some() && report.communication.is_some());

    let part = tmp.path().join("parts");
    let text = ok(&[
        "partition",
        "--dataset",
        s(&data),
        "--k",
        "8",
        "--out",
        s(&part),
    ]);
    assert!(text.starts_with("8 clusters"), "{text}");
    let run = tmp.path().join("cluster");
    let cfg = write_config(tmp.path(), "partition");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[partition]\nnum_clusters = 8\n");
    std::fs::write(&cfg, text).unwrap();
    let table = ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&run),
        "--partition-dir",
        s(&part),
    ]);
    assert!(table.contains("partition K=8"), "{table}");
}

#[test]
fn unknown_config_key_fails_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "mode = \"full-batch\"\nworkers = 3\n").unwrap();
    let out = soupgnn(&["pipeline", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:2"), "{err}");
}
