use std::path::Path;
use std::process::Command;

use ocmt::campaign::Pipeline;
use ocmt::dgp::DgpSpec;
use ocmt_cli::config::{Mode, RunConfig, ScreeningOptions, SelectOptions, SimulateOptions};
use ocmt_cli::ingest::IngestOptions;
use ocmt_cli::run::write_generated_csv;
use ocmt_cli::run;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ocmt"))
}

fn simulate_config(out: &Path, workers: usize) -> RunConfig {
    RunConfig {
        mode: Mode::Simulate(SimulateOptions {
            dgp: DgpSpec::new(4, 200, 30, 0).unwrap().with_forecast_n(50).unwrap(),
            replications: 2,
        }),
        pipelines: Pipeline::ALL.to_vec(),
        screening: ScreeningOptions::default(),
        workers,
        output: Some(out.to_path_buf()),
        seed: 77,
    }
}

#[test]
fn simulate_document_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    run(&simulate_config(&a, 1)).unwrap();
    run(&simulate_config(&b, 3)).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["seed"], 77);
    assert_eq!(doc["summary"].as_array().unwrap().len(), 4);
    assert_eq!(doc["replications"].as_array().unwrap().len(), 8);
    assert!(doc["warnings"].is_array() && doc["failures"].is_array());
}

#[test]
fn exact_binary_signal_selected_at_stage_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let mut text = String::from("y,a,b,flag\n");
    for i in 0..80 {
        let flag = i % 2;
        let a = (i * 37 % 80) as f64;
        let b = (i * 11 % 80) as f64;
        text.push_str(&format!("{},{a},{b},{flag}\n", 2.0 + 5.0 * flag as f64));
    }
    std::fs::write(&csv, text).unwrap();
    let config = RunConfig {
        mode: Mode::Select(SelectOptions {
            input: csv,
            ingest: IngestOptions {
                binary: vec!["flag".into()],
                ..Default::default()
            },
            holdout: None,
            splits: 0,
        }),
        pipelines: vec![Pipeline::Ocmt],
        screening: ScreeningOptions::default(),
        workers: 1,
        output: None,
        seed: 1,
    };
    let out = run(&config).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&out.document).unwrap();
    let sel = &doc["selections"][0];
    assert_eq!(sel["stages"][0], serde_json::json!(["flag"]));
    assert_eq!(sel["selected"], serde_json::json!(["flag"]));
    assert!(out.table.contains("selected: flag"));
}

#[test]
fn generated_csv_round_trips_through_select() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = dir.path().join("r.json");
    let status = binary()
        .args(["generate", "--dgp", "1", "--n", "300", "--p", "12", "--seed", "4", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let output = binary()
        .arg("select")
        .arg(&csv)
        .args(["--pipeline", "post-ocmt", "--holdout", "60", "--splits", "4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["config"]["n"], 300);
    assert_eq!(doc["holdout"]["rows"][0]["scored"], 4);
    let selected = doc["selections"][0]["selected"].as_array().unwrap();
    for name in ["X1", "X2", "X3", "X4"] {
        assert!(selected.contains(&serde_json::json!(name)), "{name} missing");
    }

    let mut direct = Vec::new();
    write_generated_csv(&DgpSpec::new(1, 300, 12, 4).unwrap(), 0, &mut direct).unwrap();
    assert_eq!(std::fs::read(&csv).unwrap(), direct);
}

#[test]
fn error_exits_are_categorized() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,flag\n1,0\n2,2\n").unwrap();
    let cases: Vec<(Vec<String>, i32, &str)> = vec![
        (vec!["simulate".into(), "--dgp".into(), "0".into()], 2, "config"),
        (vec!["select".into(), dir.path().join("none.csv").display().to_string()], 3, "io"),
        (
            vec!["select".into(), bad.display().to_string(), "--binary".into(), "flag".into()],
            4,
            "parse",
        ),
        (
            vec!["simulate".into(), "--dgp".into(), "1".into(), "--c-grid".into(), "1:2".into()],
            2,
            "config",
        ),
    ];
    for (args, code, category) in cases {
        let out = binary().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.starts_with(&format!("error[{category}]")), "{stderr}");
    }
}

#[test]
fn overparameterized_design_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tiny.csv");
    let mut text = String::from("y,a,b,c\n");
    for i in 0..9 {
        text.push_str(&format!("{},{},{},{}\n", i * i % 7, i, (i * 5) % 9, (i * 4) % 9));
    }
    std::fs::write(&csv, text).unwrap();
    let out = binary()
        .arg("select")
        .arg(&csv)
        .args(["--pipeline", "ocmt", "--m-n", "4", "--c-grid", "0.001:1:0.001"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}
