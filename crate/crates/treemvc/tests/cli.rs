use std::path::Path;
use std::process::Command;

use tempfile::tempdir;
use treemvc::cli::run;
use treemvc::data::read_labels;
use treemvc::Error;

fn run_ok(args: &[&str]) -> String {
    let mut out = Vec::new();
    run(
        std::iter::once("treemvc").chain(args.iter().copied()),
        &mut out,
    )
    .unwrap_or_else(|e| panic!("{args:?} failed: {e}"));
    String::from_utf8(out).unwrap()
}

fn run_err(args: &[&str]) -> Error {
    let mut out = Vec::new();
    run(
        std::iter::once("treemvc").chain(args.iter().copied()),
        &mut out,
    )
    .expect_err("command should fail")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn synth_fit_predict_eval_explain_export() {
    let dir = tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let data = p("data");
    run_ok(&[
        "synth", "--k", "3", "--views", "2", "--n", "15", "--noise", "0.3", "--seed", "2",
        "--dims", "4,3", "--out", &data,
    ]);
    let manifest = format!("{data}/manifest.json");

    let model = p("model.bin");
    let fitted = run_ok(&[
        "fit",
        &manifest,
        "--e1",
        "40",
        "--e2",
        "20",
        "--cycles",
        "2",
        "--min-num",
        "2",
        "--seed",
        "5",
        "--out",
        &model,
    ]);
    assert!(fitted.contains("k=3"), "{fitted}");
    assert!(fitted.contains("purity="));

    let before = listing(dir.path());
    let printed = run_ok(&["predict", &model, &manifest]);
    assert_eq!(
        listing(dir.path()),
        before,
        "predict without --out must not write files"
    );
    assert_eq!(printed.lines().count(), 45);

    let pred = p("pred.csv");
    run_ok(&["predict", &model, &manifest, "--out", &pred]);
    let labels = read_labels(Path::new(&pred)).unwrap();
    assert_eq!(
        labels,
        printed
            .lines()
            .map(|l| l.parse().unwrap())
            .collect::<Vec<usize>>()
    );

    let scores = run_ok(&[
        "eval",
        "--pred",
        &pred,
        "--truth",
        &format!("{data}/labels.csv"),
    ]);
    assert!(scores.starts_with("purity="), "{scores}");

    let explained = run_ok(&["explain", &model, &manifest, "--instance", "7"]);
    let last = explained.lines().last().unwrap();
    assert_eq!(last, format!("cluster {}", labels[7]));
    for step in explained.lines().rev().skip(1) {
        assert!(
            step.starts_with('V') && (step.contains(" ≤ ") || step.contains(" > ")),
            "{step}"
        );
    }

    let dot = run_ok(&["export-tree", &model]);
    assert!(dot.starts_with("digraph"));
    let json = run_ok(&["export-tree", &model, "--format", "json"]);
    let tree = treemvc::export::tree_from_json(&json).unwrap();
    assert_eq!(tree.leaf_count(), dot.matches("cluster ").count());
}

#[test]
fn eval_on_identical_files_is_perfect() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("l.csv");
    std::fs::write(&path, "0\n1\n1\n2\n").unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(
        run_ok(&["eval", "--pred", p, "--truth", p]),
        "purity=1.000 acc=1.000 f1=1.000\n"
    );
}

#[test]
fn errors_are_reported() {
    assert!(matches!(
        run_err(&[
            "eval",
            "--pred",
            "/nonexistent/a",
            "--truth",
            "/nonexistent/b"
        ]),
        Error::Io { .. }
    ));
    assert!(matches!(run_err(&["fit"]), Error::Usage(_)));
    assert!(matches!(run_err(&["frobnicate"]), Error::Usage(_)));

    let dir = tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "0\n1\n").unwrap();
    std::fs::write(&b, "0\n").unwrap();
    let err = run_err(&[
        "eval",
        "--pred",
        a.to_str().unwrap(),
        "--truth",
        b.to_str().unwrap(),
    ]);
    assert!(matches!(err, Error::Core(_)), "{err}");
}

#[test]
fn explain_rejects_out_of_range_instance() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("d");
    let data = data.to_str().unwrap();
    run_ok(&["synth", "--k", "2", "--n", "5", "--out", data]);
    let manifest = format!("{data}/manifest.json");
    let model = dir.path().join("m.bin");
    let model = model.to_str().unwrap();
    run_ok(&[
        "fit", &manifest, "--e1", "2", "--e2", "2", "--cycles", "1", "--out", model,
    ]);
    assert!(matches!(
        run_err(&["explain", model, &manifest, "--instance", "10"]),
        Error::Dataset(_)
    ));
}

#[test]
fn binary_exit_status_reflects_errors() {
    let bin = env!("CARGO_BIN_EXE_treemvc");
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert!(ok.status.success());
    let bad = Command::new(bin)
        .args(["eval", "--pred", "/nonexistent", "--truth", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
    let usage = Command::new(bin).arg("fit").output().unwrap();
    assert!(!usage.status.success());
}
