//! End-to-end tests of the `claimcheck` binary: exit codes, artifacts,
//! benchmark resume, and bootstrap determinism. Everything runs against
//! scripted backends written to disk as JSON.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use claimcheck_core::gateway::{ModelRole, ScriptRule, ScriptedBackend};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_claimcheck"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_corpus(dir: &Path, lines: &[(&str, &str, &str)]) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let text: String = lines
        .iter()
        .map(|(id, title, body)| {
            format!(
                "{}\n",
                serde_json::json!({"id": id, "title": title, "text": body})
            )
        })
        .collect();
    std::fs::write(&path, text).unwrap();
    path
}

// ── index ───────────────────────────────────────────────────────────

#[test]
fn index_builds_summarizes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(
        dir.path(),
        &[
            ("a", "Alpha", "alpha body text"),
            ("b", "Beta", "beta body text"),
            ("c", "Gamma", "gamma body text"),
        ],
    );
    let out = run(
        &["index", "--corpus", "corpus.jsonl", "--out", "idx.bin"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("indexed 3 documents"));

    let first = std::fs::read(dir.path().join("idx.bin")).unwrap();
    let rerun = run(
        &["index", "--corpus", "corpus.jsonl", "--out", "idx2.bin"],
        dir.path(),
    );
    assert!(rerun.status.success());
    let second = std::fs::read(dir.path().join("idx2.bin")).unwrap();
    assert_eq!(first, second, "rebuild must be byte-identical");
}

#[test]
fn index_duplicate_id_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(
        dir.path(),
        &[("dup", "A", "text one"), ("dup", "B", "text two")],
    );
    let out = run(
        &["index", "--corpus", "corpus.jsonl", "--out", "idx.bin"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dup"), "message must name the id");
}

// ── verify ──────────────────────────────────────────────────────────

fn verify_fixture(dir: &Path) {
    write_corpus(
        dir,
        &[
            ("d1", "Editor", "april bernard was a senior editor"),
            ("d2", "Fox", "the quick brown fox"),
        ],
    );
    let backend = ScriptedBackend::new("Reasoning: no.\nVerification Result: False")
        .role_rule(
            ModelRole::Generator,
            "# Input Claim:",
            "```python\ne1 = retrieve(\"april bernard\")\nfinal_prediction = verify(\"the claim\", e1)\n```",
        )
        .role_rule(ModelRole::FunctionLlm, "Claim: the claim", "Reasoning: yes.\nVerification Result: True");
    std::fs::write(
        dir.join("script.json"),
        serde_json::to_string_pretty(&backend).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.join("cfg.toml"),
        "[corpus]\npath = \"corpus.jsonl\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.json\"\n",
    )
    .unwrap();
}

#[test]
fn verify_prints_label_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    verify_fixture(dir.path());
    let out = run(
        &["verify", "--config", "cfg.toml", "--claim", "the claim"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().next(), Some("True"));

    let traced = run(
        &["verify", "--config", "cfg.toml", "--claim", "the claim", "--trace"],
        dir.path(),
    );
    assert!(traced.status.success());
    let text = stdout(&traced);
    let json_start = text.find('{').unwrap();
    let trace: serde_json::Value = serde_json::from_str(text[json_start..].trim()).unwrap();
    assert_eq!(trace["entries"].as_array().unwrap().len(), 2);
    assert_eq!(trace["final_prediction"], true);
}

#[test]
fn verify_with_missing_index_fails_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    verify_fixture(dir.path());
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[corpus]\nindex = \"missing.bin\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.json\"\n",
    )
    .unwrap();
    let out = run(
        &["verify", "--config", "cfg.toml", "--claim", "anything"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_exit_one_and_dead_endpoint_is_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "not valid toml [[[").unwrap();
    let out = run(
        &["verify", "--config", "cfg.toml", "--claim", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    verify_fixture(dir.path());
    // Port 9 on localhost is discard/closed: connection fails fast.
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[corpus]\npath = \"corpus.jsonl\"\n\n[models]\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nretry_budget = 0\n",
    )
    .unwrap();
    let out = run(
        &["verify", "--config", "cfg.toml", "--claim", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

// ── bench ───────────────────────────────────────────────────────────

/// Builds a 40-document corpus, a 20-claim hover-format dataset, and an
/// oracle-consistent scripted backend.
fn bench_fixture(dir: &Path) {
    let docs: Vec<(String, String, String)> = (0..40)
        .map(|i| {
            (
                format!("T{i:02}"),
                format!("T{i:02}"),
                format!("subject{i:02} relation{i:02} object{i:02} shared filler"),
            )
        })
        .collect();
    let corpus: String = docs
        .iter()
        .map(|(id, title, text)| {
            format!(
                "{}\n",
                serde_json::json!({"id": id, "title": title, "text": text})
            )
        })
        .collect();
    std::fs::write(dir.join("corpus.jsonl"), corpus).unwrap();

    let mut dataset = String::new();
    let mut backend = ScriptedBackend::new("Reasoning: no.\nVerification Result: False");
    for i in 0..20usize {
        let partner = i + 20;
        let claim = format!("toy claim {i:02} links subject{i:02} and subject{partner:02}");
        let label = i % 2 == 0;
        dataset.push_str(&format!(
            "{}\n",
            serde_json::json!({
                "claim": claim,
                "label": if label { "SUPPORTED" } else { "NOT_SUPPORTED" },
                "num_hops": 2 + (i % 3),
                "supporting_facts": [[format!("T{i:02}"), 0], [format!("T{partner:02}"), 1]],
            })
        ));
        backend.rules.push(ScriptRule {
            role: Some(ModelRole::Generator),
            contains_all: vec![format!("# Input Claim:\n```\n{claim}")],
            response: format!(
                "```python\ne1 = retrieve(\"subject{i:02} relation{i:02}\")\ne2 = retrieve(\"subject{partner:02} relation{partner:02}\")\nv1 = verify(\"part one of {i:02}\", e1)\nv2 = verify(\"part two of {i:02}\", e2)\nfinal_prediction = v1 and v2\n```"
            ),
        });
        backend.rules.push(ScriptRule {
            role: Some(ModelRole::FunctionLlm),
            contains_all: vec![format!("Claim: part one of {i:02}")],
            response: "Reasoning: yes.\nVerification Result: True".into(),
        });
        backend.rules.push(ScriptRule {
            role: Some(ModelRole::FunctionLlm),
            contains_all: vec![format!("Claim: part two of {i:02}")],
            response: format!(
                "Reasoning: scripted.\nVerification Result: {}",
                if label { "True" } else { "False" }
            ),
        });
    }
    std::fs::write(dir.join("claims.jsonl"), dataset).unwrap();
    std::fs::write(
        dir.join("script.json"),
        serde_json::to_string_pretty(&backend).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.join("cfg.toml"),
        "[corpus]\npath = \"corpus.jsonl\"\n\n[dataset]\npath = \"claims.jsonl\"\nformat = \"hover\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.json\"\n",
    )
    .unwrap();
}

#[test]
fn bench_toy_dataset_reports_perfect_metrics() {
    let dir = tempfile::tempdir().unwrap();
    bench_fixture(dir.path());
    let out = run(
        &["bench", "--config", "cfg.toml", "--run-id", "toy"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs/toy/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["macro_f1"], 1.0);
    assert_eq!(report["bacc"], 1.0);
    assert_eq!(report["recall"], 1.0);
    assert_eq!(report["n"], 20);
    for hop in ["2", "3", "4"] {
        assert_eq!(report["per_hop"][hop]["macro_f1"], 1.0, "hop {hop}");
    }
    // Per-hop rows visible in the printed table.
    let table = stdout(&out);
    assert!(table.contains("2-hop"));
    assert!(table.contains("4-hop"));

    let csv = std::fs::read_to_string(dir.path().join("runs/toy/per_claim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21, "header plus 20 rows");
    assert!(csv.lines().nth(1).unwrap().ends_with(",1"));

    // Trace files exist and `trace show` prints one.
    let shown = run(&["trace", "show", "toy", "7", "--dir", "runs"], dir.path());
    assert!(shown.status.success(), "{}", stderr(&shown));
    let trace: serde_json::Value = serde_json::from_str(stdout(&shown).trim()).unwrap();
    assert_eq!(trace["entries"].as_array().unwrap().len(), 4);
}

#[test]
fn bench_resumes_from_journal_with_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    bench_fixture(dir.path());
    let full = run(
        &["bench", "--config", "cfg.toml", "--run-id", "full"],
        dir.path(),
    );
    assert!(full.status.success(), "{}", stderr(&full));
    let full_report = std::fs::read(dir.path().join("runs/full/report.json")).unwrap();

    // Simulate an interrupted run: only the first 10 journal lines survive.
    let journal = std::fs::read_to_string(dir.path().join("runs/full/journal.jsonl")).unwrap();
    let partial: String = journal.lines().take(10).map(|l| format!("{l}\n")).collect();
    let resumed_dir = dir.path().join("runs/resumed");
    std::fs::create_dir_all(resumed_dir.join("traces")).unwrap();
    std::fs::write(resumed_dir.join("journal.jsonl"), partial).unwrap();

    let resumed = run(
        &["bench", "--config", "cfg.toml", "--run-id", "resumed"],
        dir.path(),
    );
    assert!(resumed.status.success(), "{}", stderr(&resumed));
    assert!(stdout(&resumed).contains("resuming: 10 of 20"));
    let resumed_report = std::fs::read(dir.path().join("runs/resumed/report.json")).unwrap();
    assert_eq!(full_report, resumed_report);
}

// ── bootstrap ───────────────────────────────────────────────────────

fn bootstrap_fixture(dir: &Path) {
    write_corpus(dir, &[("d", "Doc", "some document text")]);

    let claims = [
        ("alpha city founding year", true),
        ("beta mountain height", false),
        ("gamma river length", true),
        ("delta lake depth", false),
    ];
    let dataset: String = claims
        .iter()
        .map(|(claim, label)| {
            format!(
                "{}\n",
                serde_json::json!({"claim": claim, "label": label, "gold_doc_ids": ["G1"]})
            )
        })
        .collect();
    std::fs::write(dir.join("train.jsonl"), dataset).unwrap();

    let mut backend = ScriptedBackend::new("Reasoning: no.\nVerification Result: False");
    for (claim, label) in claims {
        backend.rules.push(ScriptRule {
            role: Some(ModelRole::Generator),
            contains_all: vec![
                "# Demonstrations:".into(),
                "DEMO_GOLD".into(),
                format!("# Input Claim:\n```\n{claim}"),
            ],
            response: format!(
                "```python\nfinal_prediction = verify(\"{}\", \"static evidence\")\n```",
                if label { "VR_TRUE" } else { "VR_FALSE" }
            ),
        });
    }
    backend = backend
        .role_rule(
            ModelRole::Generator,
            "# Demonstrations:",
            "```python\nfinal_prediction = verify(\"VR_FALSE\", \"static evidence\")\n```",
        );
    backend.rules.push(ScriptRule {
        role: Some(ModelRole::Generator),
        contains_all: vec!["# Input Claim:\n```\nalpha city founding year".into()],
        response:
            "```python\n# DEMO_GOLD\nfinal_prediction = verify(\"VR_TRUE\", \"static evidence\")\n```"
                .into(),
    });
    backend = backend
        .role_rule(
            ModelRole::Generator,
            "# Input Claim:",
            "```python\nfinal_prediction = verify(\"VR_FALSE\", \"static evidence\")\n```",
        )
        .role_rule(ModelRole::FunctionLlm, "Claim: VR_TRUE", "Reasoning: yes.\nVerification Result: True")
        .role_rule(
            ModelRole::Optimizer,
            "Critique Output Format",
            "<suggestions><decomposition>no suggestions</decomposition><information_gathering>no suggestions</information_gathering></suggestions>",
        )
        .role_rule(
            ModelRole::Optimizer,
            "Integrate Refinements Dynamically",
            "<refined_prompt><decomposition>remain unchanged</decomposition><information_gathering>remain unchanged</information_gathering></refined_prompt>",
        );
    std::fs::write(
        dir.join("script.json"),
        serde_json::to_string_pretty(&backend).unwrap(),
    )
    .unwrap();

    std::fs::write(
        dir.join("cfg.toml"),
        "[corpus]\npath = \"corpus.jsonl\"\n\n[dataset]\npath = \"train.jsonl\"\nformat = \"generic\"\n\n[backend]\nkind = \"scripted\"\nscript = \"script.json\"\n\n[run]\niterations = 3\npool_size = 4\nbatch_size = 2\ncandidate_sets = 3\ndemo_set_size = 2\n",
    )
    .unwrap();
}

#[test]
fn bootstrap_writes_artifacts_and_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap_fixture(dir.path());

    let first = run(
        &["bootstrap", "run", "--config", "cfg.toml", "--seed", "13", "--run-id", "runA", "--out-dir", "outA"],
        dir.path(),
    );
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("best score"));

    let run_dir = dir.path().join("outA/runA");
    let scores = std::fs::read_to_string(run_dir.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 4, "header plus one row per iteration");
    assert!(run_dir.join("strategies/v0/manifest.json").exists());
    assert!(run_dir.join("best/demos.jsonl").exists());
    assert!(run_dir.join("summary.json").exists());
    assert!(run_dir.join("demos/iter_001_selected.jsonl").exists());
    assert!(run_dir.join("transcripts/iter_001_critique.txt").exists());

    // Same seed and run id into a fresh root: identical artifacts.
    let second = run(
        &["bootstrap", "run", "--config", "cfg.toml", "--seed", "13", "--run-id", "runA", "--out-dir", "outB"],
        dir.path(),
    );
    assert!(second.status.success(), "{}", stderr(&second));
    for file in ["scores.csv", "summary.json", "best/demos.jsonl", "demos/iter_001_selected.jsonl"] {
        let a = std::fs::read(dir.path().join("outA/runA").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("outB/runA").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between same-seed runs");
    }
}
