use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn planspace(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planspace"))
        .args(args)
        .env("PLANSPACE_WORKSPACE", ws)
        .output()
        .expect("binary runs")
}

fn ok(ws: &Path, args: &[&str]) -> Value {
    let out = planspace(ws, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "one summary line: {stdout}");
    serde_json::from_str(&stdout).unwrap()
}

fn read(ws: &Path, file: &str) -> Vec<u8> {
    std::fs::read(ws.join(file)).unwrap()
}

#[test]
fn pipeline_runs_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--n", "80", "--seed", "3"]);

    let files = ["distances.tsv", "embedding.tsv", "clusters.tsv", "redundant.tsv"];
    let run = || {
        ok(ws, &["encode", "--per-anchor", "4", "--seed", "2"]);
        let solved = ok(ws, &["solve", "--dim", "3", "--seed", "7", "--restarts", "2"]);
        assert!(solved["final_stress"].as_f64().unwrap() <= solved["initial_stress"].as_f64().unwrap());
        ok(ws, &["cluster", "--k", "5", "--seed", "1"]);
        ok(ws, &["prune", "--threshold", "50"]);
        files.map(|f| read(ws, f))
    };
    let first = run();
    let second = run();
    for (name, (a, b)) in files.iter().zip(first.iter().zip(&second)) {
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn query_without_embedding_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = planspace(dir.path(), &["query", "--id", "a", "--k", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("embedding.tsv not found"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bogus"][..], &["solve", "--nope"], &["query"], &["cluster"]] {
        assert_eq!(planspace(dir.path(), args).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(planspace(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn prune_counts_corpus_copies() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--kind", "duplicates", "--bases", "100", "--copies", "20"]);
    let summary = ok(ws, &["prune", "--threshold", "50"]);
    assert_eq!(summary["redundant_count"], 20);
    let report = String::from_utf8(read(ws, "redundant.tsv")).unwrap();
    assert_eq!(report.lines().count(), 20);
    for line in report.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f[0].trim_start_matches("base"), f[1].trim_start_matches("copy"));
    }
}

#[test]
fn convergence_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--n", "60"]);
    ok(ws, &["encode"]);
    let out = planspace(ws, &["solve", "--max-iters", "1", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn all_pairs_needs_confirmation_above_limit() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--n", "5001"]);
    let out = planspace(ws, &["encode", "--pairs", "all"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--yes"));
}

#[test]
fn insert_copy_lands_on_original() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--n", "3", "--seed", "5"]);
    ok(ws, &["encode", "--pairs", "all"]);
    let solved = ok(ws, &["solve", "--dim", "3"]);
    assert!(solved["final_stress"].as_f64().unwrap() < 1e-16);

    let plans: Value = serde_json::from_slice(&read(ws, "plans.json")).unwrap();
    let mut copy = plans[0].clone();
    copy["id"] = "dup".into();
    std::fs::write(ws.join("copy.json"), copy.to_string()).unwrap();
    let copy_path = ws.join("copy.json");
    let inserted = ok(ws, &["insert", "--plan", copy_path.to_str().unwrap(), "--save"]);

    let query = ok(ws, &["query", "--id", "dup", "--k", "1"]);
    assert_eq!(query["results"][0]["id"], plans[0]["id"]);
    assert!(query["results"][0]["distance"].as_f64().unwrap() <= 1e-6);
    assert_eq!(inserted["anchors"], 3);
    let embedding = String::from_utf8(read(ws, "embedding.tsv")).unwrap();
    assert_eq!(embedding.lines().count(), 5);

    let again = planspace(ws, &["insert", "--plan", copy_path.to_str().unwrap(), "--save"]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn insert_from_distance_file() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    std::fs::write(ws.join("embedding.tsv"), "# dim=1 seed=0\na\t0\nb\t2\n").unwrap();
    std::fs::write(ws.join("new.tsv"), "a\t1\nb\t1\n").unwrap();
    let new = ws.join("new.tsv");
    let out = ok(ws, &["insert", "--distances", new.to_str().unwrap()]);
    assert!((out["coordinate"][0].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(out["saved"], false);

    let q = ok(ws, &["query", "--coord", "1.9", "--k", "2", "--order", "farthest"]);
    assert_eq!(q["results"][0]["id"], "a");
}

#[test]
fn api_similar_matches_cli_query() {
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["generate", "--n", "120", "--seed", "8"]);
    ok(ws, &["encode"]);
    ok(ws, &["solve", "--restarts", "2"]);

    let state = planspace_server::AppState::load(planspace::Workspace::new(ws)).unwrap();
    let app = planspace_server::router(state, None);
    let runtime = tokio::runtime::Runtime::new().unwrap();
    for (id, order) in [("p007", "nearest"), ("p042", "farthest"), ("p100", "nearest")] {
        let cli = ok(ws, &["query", "--id", id, "--k", "7", "--order", order]);
        let uri = format!("/api/plans/{id}/similar?k=7&order={order}");
        let body = runtime.block_on(async {
            let resp = app
                .clone()
                .oneshot(Request::get(uri).body(Body::empty()).unwrap())
                .await
                .unwrap();
            resp.into_body().collect().await.unwrap().to_bytes()
        });
        let api: Value = serde_json::from_slice(&body).unwrap();
        let strip = |v: &Value| -> Vec<(String, f64)> {
            v.as_array()
                .unwrap()
                .iter()
                .map(|r| (r["id"].as_str().unwrap().to_string(), r["distance"].as_f64().unwrap()))
                .collect()
        };
        assert_eq!(strip(&api["results"]), strip(&cli["results"]), "{id} {order}");
    }
}
