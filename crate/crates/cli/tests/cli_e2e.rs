//! End-to-end runs of the `grounded` binary over small fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_grounded")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn assert_success(output: &std::process::Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn corpus_jsonl() -> String {
    let docs = [serde_json::json!({
            "id": "doc-a",
            "text": "# Radar Basics\n\n1Introduction to radar. <WARNING> Radar systems emit pulses. \
                     The wavelength $\\lambda = c / f$ controls resolution. Contact us at team@example.org for data.\n\n\
                     |band|freq|\n|-|-|\n|C|5GHz|\n\n# Optics\n\nOptical sensors need daylight and clear skies. \
                     Cloud cover blocks optical imaging entirely. Cloud cover blocks optical imaging entirely.",
            "source": "fixture",
            "metadata": {"year": "2021"}
        }),
        serde_json::json!({
            "id": "doc-b",
            "text": "Altimetry measures sea surface height.\n\n\n\nRepeated line pending removal:\n=========\nEnd of document.",
            "source": "fixture",
            "metadata": {"year": "2020"}
        }),
        serde_json::json!({
            "id": "doc-b-copy",
            "text": "Altimetry measures sea surface height.\n\n\n\nRepeated line pending removal:\n=========\nEnd of document.",
            "source": "fixture",
            "metadata": {"year": "2020"}
        })];
    docs.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn base_config(dir: &Path, kb_dir: Option<&Path>) -> PathBuf {
    let kbs = match kb_dir {
        Some(kb) => format!("[kbs]\nmain = {:?}\n", kb.display().to_string()),
        None => String::new(),
    };
    let config = format!(
        "[gateway]\nmode = \"mock\"\nembed_dim = 32\n\n[retrieval]\nk = 3\nkbs = [\"main\"]\n\n{kbs}"
    );
    let path = dir.join("config.toml");
    write(&path, &config);
    path
}

/// clean -> chunk -> index build -> query -> answer -> halluc-check.
#[test]
fn full_pipeline_over_fixture_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    write(&raw, &corpus_jsonl());

    let clean = dir.path().join("clean.jsonl");
    let report = dir.path().join("dedup.json");
    assert_success(&run(&[
        "clean",
        "--in",
        raw.to_str().unwrap(),
        "--out",
        clean.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]));
    let cleaned = std::fs::read_to_string(&clean).unwrap();
    assert!(cleaned.contains("1 Introduction"));
    assert!(!cleaned.contains("<WARNING>"));
    assert!(cleaned.contains("[EMAIL]"));
    // doc-b-copy is an exact duplicate of doc-b: dropped from the output
    assert_eq!(cleaned.lines().count(), 2);
    assert!(!cleaned.contains("doc-b-copy"));
    let dedup: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(dedup["algorithm"], "sha-256");
    assert_eq!(dedup["exact_duplicate_groups"].as_array().unwrap().len(), 1);
    assert_eq!(dedup["exact_duplicate_groups"][0]["kept"], "doc-b");

    let chunks = dir.path().join("chunks.jsonl");
    assert_success(&run(&[
        "chunk",
        "--in",
        clean.to_str().unwrap(),
        "--out",
        chunks.to_str().unwrap(),
        "--target-words",
        "64",
    ]));
    let chunk_lines = std::fs::read_to_string(&chunks).unwrap();
    assert!(!chunk_lines.trim().is_empty());

    let kb_dir = dir.path().join("kb");
    let config = base_config(dir.path(), None);
    assert_success(&run(&[
        "index",
        "build",
        "--chunks",
        chunks.to_str().unwrap(),
        "--kb",
        "main",
        "--out",
        kb_dir.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]));
    assert!(kb_dir.join("index.bin").is_file());
    assert!(kb_dir.join("meta.jsonl").is_file());

    let config = base_config(dir.path(), Some(&kb_dir));
    let out = dir.path().join("query.json");
    assert_success(&run(&[
        "query",
        "--q",
        "radar wavelength resolution",
        "--kbs",
        "main",
        "--k",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let candidates = result["candidates"].as_array().unwrap();
    assert!(!candidates.is_empty() && candidates.len() <= 2);
    assert!(candidates[0]["embed_score"].is_number());
    assert!(candidates[0]["kb_id"].is_string());

    let answer_out = dir.path().join("answer.json");
    assert_success(&run(&[
        "answer",
        "--q",
        "how does radar resolution relate to wavelength?",
        "--out",
        answer_out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]));
    let answer: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&answer_out).unwrap()).unwrap();
    assert_eq!(answer["v"], 1);
    assert!(answer["answer"].is_string());
    assert!(answer["timing"]["rewrite_ms"].is_number());
    assert!(answer["timing"]["hallucination_ms"].is_number());
    assert!(!answer["citations"].as_array().unwrap().is_empty());

    let trace_out = dir.path().join("trace.json");
    assert_success(&run(&[
        "halluc-check",
        "--question",
        "can optical sensors see through clouds?",
        "--answer",
        "optical sensors see through clouds easily",
        "--kbs",
        "main",
        "--out",
        trace_out.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]));
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace_out).unwrap()).unwrap();
    assert!(trace["step_log"].as_array().unwrap().len() >= 2);
    assert_eq!(trace["step_log"][0], "detect");
}

#[test]
fn replay_emits_sections_with_token_counts() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("dialog.jsonl");
    let lines = [serde_json::json!({"query": "first question", "answer": "first answer"}),
        serde_json::json!({"query": "second question", "answer": "second answer",
            "chunks": [{"chunk_id": "c1", "text": "context text body", "similarity": 0.8}]}),
        serde_json::json!({"query": "third question", "answer": "third answer"})];
    write(
        &script,
        &(lines
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"),
    );
    let out = dir.path().join("traces.jsonl");
    assert_success(&run(&[
        "replay",
        "--script",
        script.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    // first turn: only query
    assert!(lines[0]["sections"]["previous_turn"].is_null());
    // second turn: previous turn verbatim, no summary
    assert_eq!(
        lines[1]["sections"]["previous_turn"],
        "User: first question\nAssistant: first answer"
    );
    assert!(lines[1]["sections"]["summary"].is_null());
    // third turn: summary present (echo mock), previous turn = turn 2
    assert!(lines[2]["sections"]["summary"].is_string());
    assert_eq!(lines[2]["summarizer_calls"], 1);
    assert!(lines[2]["sections"]["token_counts"]["query"].is_number());
}

#[test]
fn eval_ocr_reports_nls() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.jsonl");
    let gold = dir.path().join("gold.jsonl");
    write(
        &pred,
        "{\"id\": \"1\", \"text\": \"kitten\"}\n{\"id\": \"2\", \"text\": \"same\"}\n",
    );
    write(
        &gold,
        "{\"id\": \"1\", \"text\": \"sitting\"}\n{\"id\": \"2\", \"text\": \"same\"}\n",
    );
    let out = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    assert_success(&run(&[
        "eval",
        "ocr",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let expected = (1.0 - 3.0 / 7.0 + 1.0) / 2.0;
    assert!((report["metrics"]["nls"].as_f64().unwrap() - expected).abs() < 1e-12);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("metric,value"));
    assert!(csv_text.contains("nls,"));
}

#[test]
fn eval_retrieval_reports_token_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    // ten words "w0 .. w9", token i at bytes [3i, 3i+2)
    let text: String = (0..10).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    write(
        &corpus,
        &(serde_json::json!({"id": "d", "text": text}).to_string() + "\n"),
    );
    let samples = dir.path().join("samples.jsonl");
    write(
        &samples,
        &(serde_json::json!({
            "query_id": "q1", "query": "q",
            "gold_excerpts": [{"doc_id": "d", "start": 9, "end": 17}]
        })
        .to_string()
            + "\n"),
    );
    let runs = dir.path().join("runs.jsonl");
    write(
        &runs,
        &(serde_json::json!({
            "query_id": "q1",
            "retrieved": [{"doc_id": "d", "start": 3, "end": 14}]
        })
        .to_string()
            + "\n"),
    );
    let out = dir.path().join("report.json");
    assert_success(&run(&[
        "eval",
        "retrieval",
        "--samples",
        samples.to_str().unwrap(),
        "--runs",
        runs.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--at",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // gold tokens {3,4,5}, retrieved tokens {1,2,3,4}
    assert!((report["metrics"]["iou"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!((report["metrics"]["precision"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((report["metrics"]["recall"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(report["metrics"]["rrr_at_n"], 1.0);
}

#[test]
fn eval_judge_and_pairwise_run_on_mocks() {
    let dir = tempfile::tempdir().unwrap();
    let answers = dir.path().join("answers.jsonl");
    write(
        &answers,
        &(serde_json::json!({
            "id": "1", "question": "q", "answer": "the answer", "reference": "the answer"
        })
        .to_string()
            + "\n"),
    );
    let out = dir.path().join("judge.json");
    assert_success(&run(&[
        "eval",
        "judge",
        "--answers",
        answers.to_str().unwrap(),
        "--judges",
        "mock:5,mock:3",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["metrics"]["judge_score"], 80.0);

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    write(
        &a,
        &(serde_json::json!({"id": "1", "question": "q", "answer": "exact match", "reference": "exact match"}).to_string() + "\n"),
    );
    write(
        &b,
        &(serde_json::json!({"id": "1", "question": "q", "answer": "way off", "reference": "exact match"}).to_string() + "\n"),
    );
    let out = dir.path().join("pairwise.json");
    assert_success(&run(&[
        "eval",
        "pairwise",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--judges",
        "mock:nls",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["metrics"]["win_rate_a"], 1.0);
}

#[test]
fn exit_codes_follow_the_contract() {
    // --help: success
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    // unknown subcommand: usage error
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    // runtime error (missing file): 1
    let out = run(&[
        "chunk",
        "--in",
        "/nonexistent/input.jsonl",
        "--out",
        "/nonexistent/out.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn index_query_with_embedding_file() {
    let dir = tempfile::tempdir().unwrap();
    let chunks = dir.path().join("chunks.jsonl");
    let chunk_records = [serde_json::json!({
            "chunk_id": "c0", "doc_id": "d", "text": "alpha beta gamma",
            "word_count": 3, "section_path": [], "metadata": {"year": "2020"},
            "start": 0, "end": 16
        }),
        serde_json::json!({
            "chunk_id": "c1", "doc_id": "d", "text": "delta epsilon zeta",
            "word_count": 3, "section_path": [], "metadata": {"year": "2021"},
            "start": 17, "end": 35
        })];
    write(
        &chunks,
        &(chunk_records
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"),
    );
    let embeddings = dir.path().join("embeddings.jsonl");
    write(
        &embeddings,
        "{\"chunk_id\": \"c0\", \"vector\": [1.0, -1.0, 1.0, -1.0]}\n{\"chunk_id\": \"c1\", \"vector\": [-1.0, 1.0, -1.0, 1.0]}\n",
    );
    let kb_dir = dir.path().join("kb");
    assert_success(&run(&[
        "index",
        "build",
        "--chunks",
        chunks.to_str().unwrap(),
        "--kb",
        "toy",
        "--out",
        kb_dir.to_str().unwrap(),
        "--embeddings",
        embeddings.to_str().unwrap(),
    ]));

    let query_embedding = dir.path().join("query.json");
    write(&query_embedding, "{\"vector\": [1.0, -1.0, 1.0, -1.0]}");
    let out = dir.path().join("result.json");
    assert_success(&run(&[
        "index",
        "query",
        "--kb",
        "toy",
        "--index-dir",
        kb_dir.to_str().unwrap(),
        "--embedding-file",
        query_embedding.to_str().unwrap(),
        "--n",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let results = result["results"].as_array().unwrap();
    assert_eq!(results[0]["chunk_id"], "c0");
    assert_eq!(results[0]["hamming"], 0);
    assert!((results[0]["cosine"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    // metadata filter narrows to the 2021 chunk
    assert_success(&run(&[
        "index",
        "query",
        "--kb",
        "toy",
        "--index-dir",
        kb_dir.to_str().unwrap(),
        "--embedding-file",
        query_embedding.to_str().unwrap(),
        "--n",
        "2",
        "--filter",
        "year=2021",
        "--out",
        out.to_str().unwrap(),
    ]));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let results = result["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["chunk_id"], "c1");
}
