use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esl-typology"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Small synthetic corpus and WALS table in `dir`.
fn synth(dir: &Path) {
    ok(&run(
        &["synth", "--out-dir", "data", "--documents", "20", "--sentences", "8", "--wals-features", "40"],
        dir,
    ));
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--corpus", "nope.conll", "--out", "m"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.conll"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["cluster", "--bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn train_reruns_are_byte_identical_and_similarities_have_unit_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for out in ["m1", "m2"] {
        ok(&run(&["train", "--corpus", "data/corpus.conll", "--out", out], dir.path()));
    }
    let a = std::fs::read(dir.path().join("m1/manifest.txt")).unwrap();
    let b = std::fs::read(dir.path().join("m2/manifest.txt")).unwrap();
    assert_eq!(a, b);
    let model = std::fs::read(dir.path().join("m1/model.txt")).unwrap();
    assert_eq!(model, std::fs::read(dir.path().join("m2/model.txt")).unwrap());

    ok(&run(
        &["esl-sim", "--model", "m1/model.txt", "--corpus", "data/corpus.conll", "--output", "esl.csv"],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("esl.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect();
    for (i, row) in rows.iter().enumerate().skip(1) {
        let x: f64 = row[i].parse().unwrap();
        assert_eq!(x, 1.0, "diagonal entry {i}");
    }
    assert!(dir.path().join("esl.csv.config.txt").exists());

    let out = ok(&run(&["correlate", "esl.csv", "data/planted_similarity.csv"], dir.path()));
    let r: f64 = out.trim().parse().expect("scalar on stdout");
    assert!((-1.0..=1.0).contains(&r));
}

#[test]
fn cluster_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&run(
        &["cluster", "--matrix", "data/planted_similarity.csv", "--out", "svg", "--output", "tree.svg"],
        dir.path(),
    ));
    let svg = std::fs::read_to_string(dir.path().join("tree.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("A1") && svg.contains("B4"));
    let nwk = ok(&run(&["cluster", "--matrix", "data/planted_similarity.csv"], dir.path()));
    assert!(nwk.trim_end().ends_with(';'));
}

#[test]
fn evaluate_reports_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let stdout = ok(&run(
        &[
            "evaluate",
            "--wals",
            "data/wals.csv",
            "--similarity",
            "shared-pairwise",
            "--method",
            "3nn",
            "--folds",
            "7",
            "--output",
            "eval.json",
        ],
        dir.path(),
    ));
    assert!(stdout.contains("WALS-shared-pairwise/3NN"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(json["folds"].as_array().unwrap().len(), 7);
    assert_eq!(json["fold_accuracies"].as_array().unwrap().len(), 7);
}

#[test]
fn predict_lists_voters() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let csv = ok(&run(
        &[
            "predict",
            "--wals",
            "data/wals.csv",
            "--matrix",
            "data/planted_similarity.csv",
            "--target",
            "A1",
            "--method",
            "tree",
        ],
        dir.path(),
    ));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("target,feature_id,predicted_value,voters,backoff_depth"));
    assert!(lines.all(|l| l.starts_with("A1,")));
}

#[test]
fn empty_shared_inventory_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("w.csv"),
        "language,feature_id,feature_name,category,value\n\
         X,1A,f1,Word Order,a\nX,2A,f2,Word Order,a\nY,2A,f2,Word Order,b\nZ,1A,f1,Word Order,b\n",
    )
    .unwrap();
    let out = run(&["wals-sim", "--wals", "w.csv", "--mode", "shared-all"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
