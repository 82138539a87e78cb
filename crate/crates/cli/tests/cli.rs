use std::path::Path;
use std::process::{Command, Output};

use ranksel::harness::{synthetic_benchmark, SyntheticConfig};
use ranksel::io::{write_dataset, DataFormat};
use ranksel::RngSeed;

fn ranksel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ranksel"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_benchmark(dir: &Path) -> String {
    let data = synthetic_benchmark(&SyntheticConfig {
        n_series: 4,
        length: 240,
        seed: RngSeed(9),
        ..SyntheticConfig::default()
    })
    .unwrap();
    let path = dir.join("bench");
    write_dataset(&data, &path, DataFormat::Csv).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn detect_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_benchmark(dir.path());
    let scores = dir.path().join("scores");
    let scores = scores.to_str().unwrap();
    let out = ranksel(&[
        "detect",
        "--dataset",
        &data,
        "--kind",
        "ma",
        "--window",
        "4",
        "--out",
        scores,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("scores/ma_h4__syn_0.csv").exists());

    let out = ranksel(&["evaluate", "--scores-dir", scores, "--dataset", &data]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "level,model_id,series_id,f1,precision,recall,threshold"
    );
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[5].starts_with("dataset,ma_h4,bench,"));
}

#[test]
fn inject_emits_annotated_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_benchmark(dir.path());
    let args = [
        "inject",
        "--dataset",
        &data,
        "--kind",
        "scale",
        "--copies",
        "2",
        "--seed",
        "3",
    ];
    let out = ranksel(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 8);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["kind"], "scale");
        let span = v["anomaly_span"].as_array().unwrap();
        let labels = v["labels"].as_array().unwrap();
        let (a, b) = (
            span[0].as_u64().unwrap() as usize,
            span[1].as_u64().unwrap() as usize,
        );
        assert!(labels
            .iter()
            .enumerate()
            .all(|(i, l)| (l == 1) == (a..b).contains(&i)));
    }
    assert_eq!(stdout(&ranksel(&args)), text);
}

#[test]
fn metrics_feed_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_benchmark(dir.path());
    let out_dir = dir.path().join("m");
    let out_dir = out_dir.to_str().unwrap();
    let out = ranksel(&[
        "metrics",
        "--dataset",
        &data,
        "--which",
        "noise,scale,mae",
        "--copies",
        "2",
        "--out",
        out_dir,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("m/metrics.csv")).unwrap();
    assert!(csv.starts_with("metric_id,model_id,value,direction\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 7);

    let rankings = dir.path().join("m/rankings.json");
    for method in ["borda", "partial", "trimmed", "mim", "robust", "kemeny"] {
        let out = ranksel(&[
            "aggregate",
            "--rankings",
            rankings.to_str().unwrap(),
            "--method",
            method,
        ]);
        assert!(
            out.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(v["order"].as_array().unwrap().len(), 7);
        assert_eq!(v["selected"], v["order"][0]);
    }
}

#[test]
fn aggregate_plain_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    std::fs::write(&path, r#"{"rankings": [[1,2,3],[1,3,2],[2,1,3]]}"#).unwrap();
    let out = ranksel(&[
        "aggregate",
        "--rankings",
        path.to_str().unwrap(),
        "--method",
        "borda",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["ranks"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["selected"], "0");
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_benchmark(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        format!(r#"{{"schema": 1, "dataset": "{data}", "copies": 2, "repetitions": 2, "selection_fraction": 0.5}}"#),
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let out = ranksel(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["bench.json", "rollup.csv", "pairwise.csv"] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
}

#[test]
fn simulate_and_theory_emit_csv() {
    let out = ranksel(&[
        "simulate",
        "--n",
        "6",
        "--m",
        "5",
        "--theta",
        "0.5",
        "--outliers",
        "0,0.4",
        "--trials",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with(
        "n,theta,trial,fraction_noise,d_median_center,ranking,is_outlier,influence,d_center\n"
    ));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 5);

    let out = ranksel(&["theory", "--m", "1,3", "--trials", "100"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // validation: unknown dataset
    let missing = dir.path().join("none");
    let out = ranksel(&[
        "evaluate",
        "--scores-dir",
        ".",
        "--dataset",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // validation: bad config field
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"schema": 1, "bogus": true}"#).unwrap();
    assert_eq!(
        ranksel(&["run", "--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    // usage error
    assert_eq!(ranksel(&["aggregate"]).status.code(), Some(2));
    // runtime: output directory cannot be created under a file
    let data = write_benchmark(dir.path());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out_dir = blocker.join("scores");
    let out = ranksel(&[
        "detect",
        "--dataset",
        &data,
        "--kind",
        "ma",
        "--window",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
