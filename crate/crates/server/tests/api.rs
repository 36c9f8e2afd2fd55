use std::collections::HashMap;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sts_core::synth::synth_scene;
use sts_core::verifier::Store;
use sts_core::{default_catalog, mine_scene, MinerConfig};
use sts_server::{router, AppState};
use tower::ServiceExt;

struct Fixture {
    app: axum::Router,
    ids: Vec<String>,
}

fn fixture(unblind: bool) -> Fixture {
    let scene = synth_scene("agent_overtake_agent", 1).unwrap().scene;
    let insts = mine_scene(&scene, &default_catalog(), &MinerConfig::default());
    assert!(!insts.is_empty());
    let ids = insts.iter().map(|i| i.scenario_id.clone()).collect();
    let mut store = Store::in_memory();
    store.ingest(insts).unwrap();
    let scenes = HashMap::from([(scene.scene_id.clone(), scene)]);
    Fixture { app: router(AppState::new(store, scenes, unblind)), ids }
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn review(app: &axum::Router, id: &str, who: &str, positive: bool, invalid: &[&str]) -> (StatusCode, Value) {
    let body = json!({"reviewer": who, "positive": positive, "invalid_negatives": invalid, "elapsed_ms": 14500});
    call(app, "POST", &format!("/scenarios/{id}/review"), Some(body)).await
}

#[tokio::test]
async fn full_review_round() {
    let f = fixture(false);
    for who in ["ana", "ben", "cho"] {
        let (s, v) = call(&f.app, "POST", "/sessions", Some(json!({"reviewer": who}))).await;
        assert_eq!(s, StatusCode::CREATED);
        assert_eq!(v["assigned"].as_array().unwrap().len(), f.ids.len());
    }
    let (s, _) = call(&f.app, "POST", "/sessions", Some(json!({"reviewer": "ana"}))).await;
    assert_eq!(s, StatusCode::OK, "second session call reuses the open one");

    let id = &f.ids[0];
    let (_, detail) = call(&f.app, "GET", &format!("/scenarios/{id}"), None).await;
    let negs: Vec<String> = serde_json::from_value(detail["instance"]["negatives"].clone()).unwrap();
    assert!(detail["excerpt"]["subjects"].as_array().unwrap().len() >= 2);

    assert_eq!(review(&f.app, id, "ana", true, &[negs[0].as_str()]).await.0, StatusCode::OK);
    assert_eq!(review(&f.app, id, "ben", true, &[]).await.0, StatusCode::OK);
    assert_eq!(review(&f.app, id, "cho", false, &[]).await.0, StatusCode::OK);
    // a retry overwrites rather than duplicating
    assert_eq!(review(&f.app, id, "cho", false, &[]).await.0, StatusCode::OK);

    let (_, page) = call(&f.app, "GET", "/scenarios?reviewer=ana", None).await;
    assert_eq!(page["total"], json!(f.ids.len() - 1));

    let (s, out) = call(&f.app, "POST", "/merge", Some(json!({"policy": {"quorum": 3}}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(out["verified"].as_array().unwrap().len(), 1);
    let kept: Vec<String> = serde_json::from_value(out["verified"][0]["negatives"].clone()).unwrap();
    assert_eq!(kept, negs[1..]);
    assert_eq!(out["under_quorum"].as_array().unwrap().len(), f.ids.len() - 1);

    let (_, page) = call(&f.app, "GET", "/scenarios?status=accepted", None).await;
    assert_eq!(page["total"], json!(1));

    let (_, stats) = call(&f.app, "GET", "/stats", None).await;
    assert_eq!(stats["reviews"], json!(3));
    assert_eq!(stats["reviewers"].as_array().unwrap().len(), 3);
    assert!((stats["seconds_per_sample"].as_f64().unwrap() - 14.5).abs() < 1e-9);
}

#[tokio::test]
async fn reviews_are_blind_unless_enabled() {
    for unblind in [false, true] {
        let f = fixture(unblind);
        let id = &f.ids[0];
        for who in ["ana", "ben"] {
            call(&f.app, "POST", "/sessions", Some(json!({"reviewer": who}))).await;
            review(&f.app, id, who, true, &[]).await;
        }
        let (_, anon) = call(&f.app, "GET", &format!("/scenarios/{id}"), None).await;
        let (_, own) = call(&f.app, "GET", &format!("/scenarios/{id}?reviewer=ana"), None).await;
        let n = |v: &Value| v["reviews"].as_array().unwrap().len();
        if unblind {
            assert_eq!((n(&anon), n(&own)), (2, 2));
        } else {
            assert_eq!((n(&anon), n(&own)), (0, 1));
            assert_eq!(own["reviews"][0]["reviewer"], "ana");
        }
    }
}

#[tokio::test]
async fn errors_carry_code_and_field() {
    let f = fixture(false);
    let id = &f.ids[0];

    let (s, e) = call(&f.app, "GET", "/scenarios/nope", None).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let (s, e) = review(&f.app, id, "ghost", true, &[]).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["field"], "reviewer");

    call(&f.app, "POST", "/sessions", Some(json!({"reviewer": "ana"}))).await;
    let (s, e) = review(&f.app, id, "ana", true, &["not_a_negative"]).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["field"], "invalid_negatives");

    let (s, e) = review(&f.app, "nope", "ana", true, &[]).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let body = json!({"reviewer": "ana", "positive": "yes"});
    let (s, e) = call(&f.app, "POST", &format!("/scenarios/{id}/review"), Some(body)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["field"], "positive");

    let (s, e) = call(&f.app, "POST", "/merge", Some(json!({"policy": {"quorum": 0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["field"], "quorum");

    let (s, e) = call(&f.app, "GET", "/scenarios?status=pending", None).await;
    assert_eq!((s, e["field"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("status")));

    let (s, _) = call(&f.app, "POST", "/sessions", Some(json!({"reviewer": "  "}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn empty_store_reports_zeroes() {
    let app = router(AppState::new(Store::in_memory(), HashMap::new(), false));
    let (s, stats) = call(&app, "GET", "/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stats["instances"], json!(0));
    assert_eq!(stats["reviews"], json!(0));
    assert_eq!(stats["total_hours"], json!(0.0));
    let (_, out) = call(&app, "POST", "/merge", None).await;
    assert_eq!(out["verified"], json!([]));
}

#[tokio::test]
async fn reviews_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let scene = synth_scene("agent_stop", 2).unwrap().scene;
    let insts = mine_scene(&scene, &default_catalog(), &MinerConfig::default());
    let id = insts[0].scenario_id.clone();
    {
        let mut store = Store::open(&path).unwrap();
        store.ingest(insts).unwrap();
        let app = router(AppState::new(store, HashMap::new(), true));
        call(&app, "POST", "/sessions", Some(json!({"reviewer": "ana"}))).await;
        review(&app, &id, "ana", true, &[]).await;
    }
    let app = router(AppState::new(Store::open(&path).unwrap(), HashMap::new(), true));
    let (_, detail) = call(&app, "GET", &format!("/scenarios/{id}"), None).await;
    assert_eq!(detail["reviews"].as_array().unwrap().len(), 1);
    assert!(detail.get("excerpt").is_none());
}
