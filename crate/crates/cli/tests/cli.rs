mod common;

use common::{check, fixture, solrec, Prepared};
use serde_json::Value;

fn resolve(prep: &Prepared, case: &str) -> std::process::Output {
    let mut args = vec![
        "resolve".to_string(),
        "--case".into(),
        fixture(case).display().to_string(),
    ];
    args.extend(prep.pipeline_args());
    solrec(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn resolve_exit_codes() {
    let prep = Prepared::new();
    let ok = resolve(&prep, "case_tls.json");
    assert_eq!(ok.status.code(), Some(0));
    let gated = resolve(&prep, "case_multi.json");
    assert_eq!(gated.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&gated.stdout).unwrap();
    assert_eq!(rec["status"], "not_single_turn");
}

#[test]
fn resolve_failure_names_the_stage() {
    let prep = Prepared::new();
    let bad = prep.dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"case_id":"x","subject":"\u0007"}"#).unwrap();
    let mut args = vec![
        "resolve".to_string(),
        "--case".into(),
        bad.display().to_string(),
    ];
    args.extend(prep.pipeline_args());
    let out = solrec(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocess stage failed"));
}

#[test]
fn training_is_reproducible() {
    let prep = Prepared::new();
    let again = prep.dir.path().join("again.json");
    check(&solrec(&[
        "train-classifier",
        "--data",
        fixture("classifier_train.jsonl").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(&prep.classifier).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn config_errors_are_reported_together() {
    let prep = Prepared::new();
    let cfg = prep.dir.path().join("bad.conf");
    std::fs::write(
        &cfg,
        "chunk_size_tokens = 100\nchunk_overlap_tokens = 100\nfinal_k = 0\nmystery = 1\n",
    )
    .unwrap();
    let mut args = vec![
        "--config".to_string(),
        cfg.display().to_string(),
        "resolve".into(),
        "--case".into(),
    ];
    args.push(fixture("case_tls.json").display().to_string());
    args.extend(prep.pipeline_args());
    let out = solrec(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("overlap must be < size"), "{err}");
    assert!(err.contains("final_k"), "{err}");
    assert!(err.contains("mystery"), "{err}");
}

#[test]
fn index_from_another_embedder_is_rejected() {
    let prep = Prepared::new();
    let cfg = prep.dir.path().join("dim.conf");
    std::fs::write(&cfg, "embedding_dim = 32\n").unwrap();
    let mut args = vec![
        "--config".to_string(),
        cfg.display().to_string(),
        "resolve".into(),
        "--case".into(),
    ];
    args.push(fixture("case_tls.json").display().to_string());
    args.extend(prep.pipeline_args());
    let out = solrec(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_with_rubric() {
    let prep = Prepared::new();
    let report = prep.dir.path().join("r.json");
    let mut args: Vec<String> = [
        "evaluate",
        "--dataset",
        fixture("eval_cases.jsonl").to_str().unwrap(),
        "--n",
        "1,3",
        "--report",
        report.to_str().unwrap(),
        "--rubric",
        fixture("rubric.json").to_str().unwrap(),
        "--workers",
        "1",
    ]
    .map(String::from)
    .to_vec();
    args.extend(prep.pipeline_args());
    check(&solrec(
        &args.iter().map(String::as_str).collect::<Vec<_>>(),
    ));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["rubric_mean"], 0.6875);
    assert_eq!(r["recall_at"].as_object().unwrap().len(), 2);
    assert_eq!(
        r["tokenization"],
        "lowercase+whitespace+strip_ascii_punctuation"
    );
    assert_eq!(r["agreement"], serde_json::json!({}));
}

#[test]
fn unknown_backend_lists_available() {
    let prep = Prepared::new();
    let mut args = vec![
        "--backend".to_string(),
        "quantum".into(),
        "resolve".into(),
        "--case".into(),
    ];
    args.push(fixture("case_tls.json").display().to_string());
    args.extend(prep.pipeline_args());
    let out = solrec(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("http") && err.contains("mock"), "{err}");
}
