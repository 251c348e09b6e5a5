//! End-to-end tests of the `dqa` binary: full pipelines, exit codes,
//! resumability, and rerun determinism.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dqa(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dqa"));
    cmd.args(args);
    for key in ["DQA_LM_ENDPOINT", "DQA_LM_MODEL", "DQA_LM_API_KEY"] {
        cmd.env_remove(key);
    }
    for (key, value) in envs {
        cmd.env(key, value);
    }
    cmd.output().expect("dqa binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Write a script that retrieves the critical quantities and answers with
/// the gold decision for every instance in the dataset.
fn write_perfect_script(dataset: &Path, script: &Path) {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dataset.join("manifest.json")).unwrap())
            .unwrap();
    let mut instances = serde_json::Map::new();
    for entry in manifest["instances"].as_array().unwrap() {
        let file = entry["file"].as_str().unwrap();
        let inst: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dataset.join(file)).unwrap()).unwrap();
        let gold = inst["gold"].as_str().expect("annotated dataset");
        let steps = match inst["scenario"].as_str().unwrap() {
            "Locating" => vec![
                "Thought: flows\nAction: query\nAction Input: SELECT dest, SUM(flow) FROM TradingFlow GROUP BY dest".to_string(),
                "Thought: power\nAction: query\nAction Input: SELECT node, SUM(power) FROM NodeCountry GROUP BY node".to_string(),
                format!("Final Answer: {gold}"),
            ],
            _ => vec![
                "Thought: supply\nAction: query\nAction Input: SELECT goods, SUM(current_output) FROM Supply GROUP BY goods".to_string(),
                "Thought: demand\nAction: query\nAction Input: SELECT code, pop_demand FROM Goods".to_string(),
                format!("Final Answer: {gold}"),
            ],
        };
        instances.insert(
            inst["id"].as_str().unwrap().to_string(),
            serde_json::json!(steps),
        );
    }
    let body = serde_json::json!({ "instances": instances });
    std::fs::write(script, serde_json::to_string_pretty(&body).unwrap()).unwrap();
}

#[test]
fn full_pipeline_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = dqa(
        &[
            "gen",
            "--scenario",
            "both",
            "--count",
            "3",
            "--seed",
            "7",
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("manifest.json").exists());

    let out = dqa(&["annotate", "--in", data.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let script = tmp.path().join("script.json");
    write_perfect_script(&data, &script);
    let transcripts = tmp.path().join("transcripts");
    let out = dqa(
        &[
            "run",
            "--in",
            data.to_str().unwrap(),
            "--agent",
            "iter",
            "--dialect",
            "table",
            "--backend",
            &format!("scripted:{}", script.display()),
            "--out",
            transcripts.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report = tmp.path().join("report");
    let out = dqa(
        &[
            "eval",
            "--dataset",
            data.to_str().unwrap(),
            "--transcripts",
            transcripts.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("Locating/iter/table: 3/3 correct (100.0%)"),
        "{stdout}"
    );
    assert!(
        stdout.contains("Building/iter/table: 3/3 correct (100.0%)"),
        "{stdout}"
    );
    assert!(report.join("report.json").exists());
    assert!(report.join("report.md").exists());
}

#[test]
fn gen_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<PathBuf> = ["a", "b"].iter().map(|d| tmp.path().join(d)).collect();
    for dir in &dirs {
        let out = dqa(
            &[
                "gen",
                "--scenario",
                "locating",
                "--count",
                "2",
                "--seed",
                "99",
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code(&out), 0);
    }
    assert_eq!(read_dir_bytes(&dirs[0]), read_dir_bytes(&dirs[1]));
}

#[test]
fn count_zero_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dqa(
        &[
            "gen",
            "--scenario",
            "locating",
            "--count",
            "0",
            "--seed",
            "1",
            "--out",
            tmp.path().join("x").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn http_backend_without_key_is_config_error_before_any_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = dqa(
        &[
            "gen",
            "--scenario",
            "locating",
            "--count",
            "1",
            "--seed",
            "4",
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let transcripts = tmp.path().join("t");
    let out = dqa(
        &[
            "run",
            "--in",
            data.to_str().unwrap(),
            "--agent",
            "single",
            "--dialect",
            "table",
            "--backend",
            "http",
            "--out",
            transcripts.to_str().unwrap(),
        ],
        &[
            ("DQA_LM_ENDPOINT", "https://example.invalid/v1/chat"),
            ("DQA_LM_MODEL", "test-model"),
            // DQA_LM_API_KEY deliberately missing.
        ],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DQA_LM_API_KEY"));
    assert!(!transcripts.exists());
}

#[test]
fn corrupted_instance_fails_annotate_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = dqa(
        &[
            "gen",
            "--scenario",
            "building",
            "--count",
            "1",
            "--seed",
            "5",
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();
    let file = manifest["instances"][0]["file"].as_str().unwrap();
    std::fs::write(data.join(file), b"{ broken").unwrap();
    let out = dqa(&["annotate", "--in", data.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains(file));
}

#[test]
fn run_resumes_and_eval_reports_missing_transcripts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    dqa(
        &[
            "gen",
            "--scenario",
            "locating",
            "--count",
            "2",
            "--seed",
            "21",
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    dqa(&["annotate", "--in", data.to_str().unwrap()], &[]);
    let script = tmp.path().join("script.json");
    write_perfect_script(&data, &script);
    let transcripts = tmp.path().join("t");
    let run_args = [
        "run",
        "--in",
        data.to_str().unwrap(),
        "--agent",
        "plan",
        "--dialect",
        "graph",
        "--backend",
    ];
    // Plan strategy over a script with no Plan step terminates as a backend
    // error but still writes transcripts; resumption must skip them.
    let backend = format!("scripted:{}", script.display());
    let mut args: Vec<&str> = run_args.to_vec();
    args.push(&backend);
    args.extend(["--out", transcripts.to_str().unwrap()]);
    let out = dqa(&args, &[]);
    assert_eq!(code(&out), 0);
    let first = read_dir_bytes(&transcripts);
    assert_eq!(first.len(), 2);
    let out = dqa(&args, &[]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(2 already present)"));
    assert_eq!(read_dir_bytes(&transcripts), first);

    // Remove one transcript: eval must fail with the uncovered id.
    let victim = first.keys().next().unwrap().clone();
    std::fs::remove_file(transcripts.join(&victim)).unwrap();
    let report = tmp.path().join("r");
    let out = dqa(
        &[
            "eval",
            "--dataset",
            data.to_str().unwrap(),
            "--transcripts",
            transcripts.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing transcripts"));
}

#[test]
fn dialect_split_runs_produce_a_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    dqa(
        &[
            "gen",
            "--scenario",
            "locating",
            "--count",
            "2",
            "--seed",
            "31",
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    dqa(&["annotate", "--in", data.to_str().unwrap()], &[]);
    let script = tmp.path().join("script.json");
    write_perfect_script(&data, &script);
    let backend = format!("scripted:{}", script.display());
    let transcripts = tmp.path().join("t");
    for dialect in ["table", "graph"] {
        let out = dqa(
            &[
                "run",
                "--in",
                data.to_str().unwrap(),
                "--agent",
                "iter",
                "--dialect",
                dialect,
                "--backend",
                &backend,
                "--out",
                transcripts.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code(&out), 0);
    }
    let report_dir = tmp.path().join("r");
    let out = dqa(
        &[
            "eval",
            "--dataset",
            data.to_str().unwrap(),
            "--transcripts",
            transcripts.to_str().unwrap(),
            "--out",
            report_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("report.json")).unwrap())
            .unwrap();
    let accuracy = report["accuracy"].as_object().unwrap();
    assert!(accuracy.contains_key("Locating/iter/table"));
    assert!(accuracy.contains_key("Locating/iter/graph"));
    // The table-dialect queries fail under the graph dialect, so the graph
    // cell scores below the table cell, and the average sits between.
    let avg = report["accuracy_avg_dialects"]["Locating/iter"]
        .as_f64()
        .unwrap();
    let t = accuracy["Locating/iter/table"]["accuracy"]
        .as_f64()
        .unwrap();
    let g = accuracy["Locating/iter/graph"]["accuracy"]
        .as_f64()
        .unwrap();
    assert!((avg - (t + g) / 2.0).abs() < 1e-12);
}
