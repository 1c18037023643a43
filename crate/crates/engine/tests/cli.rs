mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::write_jsonl;
use serde_json::{json, Value};

fn engine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_engine")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = engine(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn toy(root: &Path) -> String {
    let input = root.join("toy.jsonl");
    write_jsonl(
        &input,
        &[json!({"tokens": [1, 2, 3, 1, 2], "metadata": {"id": "a"}}), json!({"tokens": [2, 3, 4], "metadata": "b"})],
    );
    let dir = root.join("toy");
    let (i, d) = (input.to_str().unwrap(), dir.to_str().unwrap());
    ok(&["ingest", "--input", i, "--tokenizer", "pretokenized", "--out", d]);
    let built = ok(&["build-sa", "--index", d]);
    assert_eq!(built["shards"][0]["P"], 1);
    d.to_string()
}

#[test]
fn toy_queries() {
    let tmp = tempfile::tempdir().unwrap();
    let d = toy(tmp.path());
    let s = ok(&["stats", "--index", &d]);
    assert_eq!((s["N"].as_i64(), s["D"].as_i64()), (Some(10), Some(2)));
    assert_eq!(ok(&["count", "--index", &d, "--query", "2 3"])["count"], 2);
    assert_eq!(ok(&["count", "--index", &d, "--query", "9"])["count"], 0);

    let p = ok(&["infgram-prob", "--index", &d, "--context", "1 2", "--token", "3"]);
    assert_eq!((p["prob"]["numerator"].as_str(), p["prob"]["denominator"].as_str()), (Some("1"), Some("2")));
    assert_eq!(p["effective_n"], 3);
    let p = ok(&["infgram-prob", "--index", &d, "--context", "1 2", "--token", "EOD"]);
    assert_eq!(p["prob"]["decimal"], 0.5);
    let p = ok(&["prob", "--index", &d, "--context", "2 3", "--n", "2"]);
    assert_eq!((p["prob"]["numerator"].as_str(), p["prob"]["denominator"].as_str()), (Some("2"), Some("3")));

    let dist = ok(&["infgram-dist", "--index", &d, "--context", "2"]);
    let entries = dist["entries"].as_array().unwrap();
    assert_eq!(dist["total"], 3);
    assert_eq!(entries.iter().map(|e| e["count"].as_u64().unwrap()).sum::<u64>(), 3);

    let pos = ok(&["positions", "--index", &d, "--query", "2 3"]);
    assert_eq!(pos["total"], 2);
    let found = ok(&["search", "--index", &d, "--query", "(1) AND (4)"]);
    assert_eq!(found["total"], 0);
    let found = ok(&["search", "--index", &d, "--query", "(1 OR 4) AND 3"]);
    assert_eq!(found["total"], 2);
    let meta: Vec<&str> = found["documents"].as_array().unwrap().iter().map(|d| d["metadata"].as_str().unwrap()).collect();
    assert!(meta.contains(&"id=a") && meta.contains(&"b"), "{meta:?}");

    let v = engine(&["verify", "--index", &d]);
    assert!(v.status.success());
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = toy(tmp.path());
    let missing = tmp.path().join("missing");
    for args in [
        vec!["count", "--index", missing.to_str().unwrap(), "--query", "1"],
        vec!["count", "--index", &d, "--query", "70000"],
        vec!["infgram-prob", "--index", &d, "--context", ""],
        vec!["prob", "--index", &d, "--context", "1 2", "--n", "0"],
    ] {
        let out = engine(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.starts_with("error: ") && err.trim_end().lines().count() == 1, "{args:?}: {err}");
    }
}

#[test]
fn reference_word_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("text.jsonl");
    write_jsonl(
        &input,
        &[
            json!({"text": "the cat sat on the mat ."}),
            json!({"text": "the dog sat on the log ."}),
            json!({"text": "a cat and a dog ."}),
        ],
    );
    let dir = tmp.path().join("words");
    let d = dir.to_str().unwrap();
    let m = ok(&["ingest", "--input", input.to_str().unwrap(), "--out", d]);
    assert!(m["tokenizer"].as_str().unwrap().starts_with("reference-word:"));
    ok(&["build-sa", "--index", d]);
    assert_eq!(ok(&["count", "--index", d, "--query", "sat on the"])["count"], 2);
    let p = ok(&["infgram-prob", "--index", d, "--context", "sat on the", "--token", "mat"]);
    assert_eq!(p["prob"]["decimal"], 0.5);
    let hits = ok(&["search", "--index", d, "--query", "(\"cat\" OR \"log\") AND \"dog\""]);
    assert_eq!(hits["total"], 2);
    assert!(hits["documents"][0]["snippet_text"].is_string());
}

#[test]
fn evaluation_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = toy(tmp.path());
    let docs = tmp.path().join("eval.jsonl");
    write_jsonl(&docs, &[json!({"tokens": [1, 2, 3, 1]}), json!({"tokens": [2, 3, 4]})]);
    let neural = tmp.path().join("neural.jsonl");
    write_jsonl(
        &neural,
        &[
            json!({"doc_id": 0, "token_ids": [1, 2, 3, 1], "probs": [0.1, 0.2, 0.3, 0.4]}),
            json!({"doc_id": 1, "token_ids": [2, 3, 4], "probs": [0.2, 0.5, 0.5]}),
        ],
    );
    let (dd, nn) = (docs.to_str().unwrap(), neural.to_str().unwrap());
    let r = ok(&["ppl", "--index", &d, "--docs", dd, "--neural", nn, "--lambda1", "0", "--lambda2", "0"]);
    assert_eq!(r["report"]["token_count"], 7);
    assert_eq!(r["report"]["ppl"], r["report"]["baseline_ppl"]);
    let t = ok(&["ppl", "--index", &d, "--docs", dd, "--neural", nn, "--tune-docs", dd, "--tune-neural", nn]);
    assert!(t["tuned"]["validation_ppl"].as_f64() <= t["tuned"]["validation_baseline_ppl"].as_f64());

    let report = tmp.path().join("agree.json");
    let a = ok(&["agree", "--index", &d, "--docs", dd, "--fixed-n", "2", "--report", report.to_str().unwrap()]);
    assert_eq!(a["total_tokens"], 7);
    assert!(report.with_extension("effective_n.tsv").exists());
    assert!(report.with_extension("grid.tsv").exists());

    write_jsonl(&neural, &[json!({"doc_id": 0, "token_ids": [1, 2, 3, 9], "probs": [0.1, 0.2, 0.3, 0.4]})]);
    let out = engine(&["ppl", "--index", &d, "--docs", dd, "--neural", nn, "--lambda1", "0", "--lambda2", "0"]);
    assert!(!out.status.success());
}

#[test]
fn decontamination_splits_records() {
    let tmp = tempfile::tempdir().unwrap();
    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let eval = tmp.path().join("eval.jsonl");
    write_jsonl(&eval, &[json!({"text": words[..30].join(" ")})]);
    let corpus = tmp.path().join("corpus.jsonl");
    write_jsonl(
        &corpus,
        &[
            json!({"text": words[..20].join(" "), "metadata": "dirty"}),
            json!({"text": words[20..40].join(" "), "metadata": "clean"}),
        ],
    );
    let (k, r, s) = (tmp.path().join("kept"), tmp.path().join("removed"), tmp.path().join("stats.json"));
    let stats = ok(&[
        "decontam",
        "--corpus",
        corpus.to_str().unwrap(),
        "--eval",
        eval.to_str().unwrap(),
        "--kept",
        k.to_str().unwrap(),
        "--removed",
        r.to_str().unwrap(),
        "--stats",
        s.to_str().unwrap(),
        "--exact",
    ]);
    assert_eq!((stats["total_docs"].as_u64(), stats["filtered_docs"].as_u64()), (Some(2), Some(1)));
    assert!(std::fs::read_to_string(&r).unwrap().contains("dirty"));
    assert!(std::fs::read_to_string(&k).unwrap().contains("clean"));
}
