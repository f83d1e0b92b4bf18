//! Runs the `otcause` binary.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otcause::synth::{generate, GeneratorSpec, Mechanism};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otcause"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_pair(path: &Path, mechanism: Mechanism, n: usize, seed: u64) {
    let d = generate(&GeneratorSpec::anm(mechanism, n, seed)).unwrap();
    let text: String = d.xs().iter().zip(d.ys()).map(|(x, y)| format!("{x} {y}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn infer_reports_the_forward_direction() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pair.txt");
    write_pair(&file, Mechanism::Linear, 500, 1);
    let out_path = dir.path().join("verdict.json");
    let text = stdout(&run(&[
        "infer",
        file.to_str().unwrap(),
        "--noise",
        "uniform",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["decision"], "x->y");
    assert_eq!(json["n"].as_u64().unwrap() as usize <= 500, true);
    assert!(json["x_to_y"]["loss"].as_f64().unwrap() < json["y_to_x"]["loss"].as_f64().unwrap());
    assert_eq!(fs::read_to_string(&out_path).unwrap(), text);
}

#[test]
fn infer_with_bootstrap_reports_a_p_value() {
    let text = stdout(&run(&[
        "infer",
        fixture("pair_cubic.txt").to_str().unwrap(),
        "--noise",
        "uniform",
        "--bootstrap",
        "8",
    ]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let p = json["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(json["bootstrap_replicates"], 8);
}

#[test]
fn config_file_is_honoured_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# settings\nmode = pnl\nnoise = beta\nseed = 4\n").unwrap();
    let file = fixture("pair_cubic.txt");
    let text = stdout(&run(&[
        "infer",
        file.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--noise",
        "uniform",
    ]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["mode"], "pnl");
    assert_eq!(json["noise"], "uniform");
    assert_eq!(json["seed"], 4);
    assert!(json["x_to_y"]["omega"].is_array());
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("verdict.json");
    let out = run(&[
        "infer",
        dir.path().join("nope.txt").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
    assert!(!out_path.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_option_fails() {
    let out = run(&["infer", fixture("pair_cubic.txt").to_str().unwrap(), "--noise", "cauchy"]);
    assert!(!out.status.success());
    let out = run(&["infer", fixture("pair_cubic.txt").to_str().unwrap(), "--bootstrap", "1"]);
    assert!(!out.status.success());
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let file = fixture("pair_sine_rev.txt");
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let p = dir.path().join(format!("v{i}.json"));
            stdout(&run(&["infer", file.to_str().unwrap(), "--mode", "pnl", "--out", p.to_str().unwrap()]));
            fs::read(p).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn corpus_suite_scores_listed_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("corpus.csv");
    stdout(&run(&[
        "bench",
        "--suite",
        "tuebingen",
        "--data-dir",
        fixture("").to_str().unwrap(),
        "--meta",
        fixture("meta.csv").to_str().unwrap(),
        "--noise",
        "uniform",
        "--seeds",
        "0,1",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for r in &rows {
        let truth = &r[col("truth")];
        assert!(truth == "x->y" || truth == "y->x");
        assert_eq!(&r[col("correct")] == "true", &r[col("decision")] == truth);
    }
    let summary = dir.path().join("corpus.summary.csv");
    assert!(summary.exists());
}

#[test]
fn corpus_suite_rejects_an_empty_meta_file() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.csv");
    fs::write(&meta, "filename,direction\n").unwrap();
    let out = run(&[
        "bench",
        "--suite",
        "tuebingen",
        "--data-dir",
        fixture("").to_str().unwrap(),
        "--meta",
        meta.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn synthetic_suite_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("syn.csv");
    let text = stdout(&run(&[
        "bench",
        "--suite",
        "synthetic",
        "--reps",
        "2",
        "--sizes",
        "100",
        "--noise",
        "uniform",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    assert!(!text.is_empty());
    let rows = csv::Reader::from_path(&out_path).unwrap().records().count();
    assert_eq!(rows, 8);
    let summary = csv::Reader::from_path(dir.path().join("syn.summary.csv")).unwrap().records().count();
    assert_eq!(summary, 4);
}

#[test]
fn orient_recovers_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("chain.txt");
    let cols = common::chain_data(800, 3);
    let text: String = (0..800).map(|i| format!("{} {} {}\n", cols[0][i], cols[1][i], cols[2][i])).collect();
    fs::write(&data, text).unwrap();
    let text = stdout(&run(&[
        "orient",
        data.to_str().unwrap(),
        "--skeleton",
        fixture("skeleton.txt").to_str().unwrap(),
        "--noise",
        "uniform",
        "--seed",
        "3",
    ]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["edges"], serde_json::json!([[0, 1], [1, 2]]));

    let out = run(&[
        "orient",
        data.to_str().unwrap(),
        "--skeleton",
        fixture("skeleton.txt").to_str().unwrap(),
        "--max-edges",
        "1",
    ]);
    assert!(!out.status.success());
}
