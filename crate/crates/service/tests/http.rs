mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use engagement_core::classify::ProbVector;
use engagement_core::config::{CorpusConfig, CorpusKind, EmbeddingConfig, RunConfig};
use engagement_core::corpus::{Corpus, Document, Split};
use engagement_core::engine::{Engine, Session};
use engagement_core::score::{EventScore, PromptEvent, SourceMode};
use engagement_service::http::{router, AppState};

async fn call(state: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn event(id: &str, prompt: &str) -> Value {
    json!({ "event_id": id, "prompt": prompt, "timestamp": "2024-01-01T00:00:00Z" })
}

#[tokio::test]
async fn every_endpoint_is_unavailable_before_load() {
    let state = AppState::unloaded();
    for (m, uri, body) in [
        ("GET", "/v1/healthz", None),
        ("GET", "/v1/report", None),
        ("GET", "/v1/allocation?total=10", None),
        ("POST", "/v1/events", Some(event("e", "p"))),
        ("POST", "/v1/waitlist/score", Some(json!({ "providers": [] }))),
    ] {
        let (status, body) = call(&state, m, uri, body).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert_eq!(body["error"]["kind"], "not_loaded");
    }
}

#[tokio::test]
async fn duplicate_post_is_counted_once() {
    let dir = tempfile::tempdir().unwrap();
    let home = common::trained_home(dir.path());
    let state = AppState::load(&home, None).unwrap();
    let e = event("dup", "the rocket reached orbit");
    let (s1, b1) = call(&state, "POST", "/v1/events", Some(e.clone())).await;
    let (s2, b2) = call(&state, "POST", "/v1/events", Some(e)).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(b1, b2);
    let (_, report) = call(&state, "GET", "/v1/report", None).await;
    assert_eq!(report["total_events"], 1);
    let (_, health) = call(&state, "GET", "/v1/healthz", None).await;
    assert_eq!(health["events"], 1);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let home = common::trained_home(dir.path());
    let state = AppState::load(&home, None).unwrap();

    let (s, _) = call(&state, "GET", "/v1/report", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, b) = call(&state, "POST", "/v1/events", Some(json!({ "prompt": "no id" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(b["error"]["kind"], "malformed_request");
    let (s, _) = call(&state, "POST", "/v1/events", Some(event("blank", "   "))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let mut wrong = event("fp", "orbit");
    wrong["fingerprint"] = json!("0000");
    let (s, b) = call(&state, "POST", "/v1/events", Some(wrong)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["error"]["kind"], "fingerprint_mismatch");

    call(&state, "POST", "/v1/events", Some(event("ok", "orbit"))).await;
    let (s, _) = call(&state, "GET", "/v1/allocation?total=abc", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&state, "GET", "/v1/allocation?total=10&basis=blend", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, b) = call(&state, "GET", "/v1/allocation?total=10&basis=blend&alpha=0.5", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["shares"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 10);
}

fn two_class_state(dir: &std::path::Path) -> AppState {
    let docs = vec![
        Document::text("a/0", "a", "a", "alpha apples apricots"),
        Document::text("a/1", "a", "a", "apples and apricots"),
        Document::text("b/0", "b", "b", "bananas and blueberries"),
        Document::text("b/1", "b", "b", "blueberries bananas"),
    ];
    let corpus = Corpus::new(docs, Split::Train).unwrap();
    let mut config = RunConfig::new(CorpusConfig {
        kind: CorpusKind::Manifest,
        path: "unused".into(),
        truncate_tokens: None,
    });
    config.embedding = EmbeddingConfig::Internal {
        k: 2,
        oversample: 2,
        power_iterations: 1,
        seed: 0,
    };
    let (engine, _) = Engine::train(config, &corpus, None).unwrap();
    engine.save(dir).unwrap();
    let mut session = Session::open(dir, &engine).unwrap();
    let t = Utc.timestamp_opt(0, 0).unwrap();
    let probs = ProbVector([("a".to_string(), 0.75), ("b".to_string(), 0.25)].into_iter().collect());
    let score = EventScore {
        event_id: "x".into(),
        prob_scores: probs,
        sim_scores: None,
        source_mode: SourceMode::Prompt,
        weight: 1.0,
    };
    session.commit(PromptEvent::new("x", "apples", t), score).unwrap();
    drop(session);
    AppState::load(dir, None).unwrap()
}

#[tokio::test]
async fn allocation_follows_shares() {
    let dir = tempfile::tempdir().unwrap();
    let state = two_class_state(dir.path());
    let (s, b) = call(&state, "GET", "/v1/allocation?total=10000", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["shares"], json!({ "a": 7500, "b": 2500 }));
    let (s, b) = call(&state, "GET", "/v1/allocation?total=10000&basis=sim", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(b["error"]["kind"], "similarity_undefined");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_posts_match_sequential_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let home = common::trained_home(dir.path());
    let seq_dir = tempfile::tempdir().unwrap();
    for f in ["config.toml", "model.bin", "embedding.bin", "centroids.bin", "engine.json"] {
        std::fs::copy(home.join(f), seq_dir.path().join(f)).unwrap();
    }
    let events: Vec<Value> = (0..100)
        .map(|i| event(&format!("ev{i:03}"), common::PROMPTS[i % common::PROMPTS.len()]))
        .collect();

    let concurrent = AppState::load(&home, None).unwrap();
    let handles: Vec<_> = events
        .iter()
        .cloned()
        .map(|e| {
            let s = concurrent.clone();
            tokio::spawn(async move { call(&s, "POST", "/v1/events", Some(e)).await.0 })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let sequential = AppState::load(seq_dir.path(), None).unwrap();
    for e in events {
        assert_eq!(call(&sequential, "POST", "/v1/events", Some(e)).await.0, StatusCode::OK);
    }
    let (_, a) = call(&concurrent, "GET", "/v1/report", None).await;
    let (_, b) = call(&sequential, "GET", "/v1/report", None).await;
    assert_eq!(a["total_events"], 100);
    assert_eq!(a["total_events"], b["total_events"]);
    let (ca, cb) = (a["classes"].as_object().unwrap(), b["classes"].as_object().unwrap());
    for (k, ra) in ca {
        for field in ["prob_sum", "sim_sum", "probability_share"] {
            let (x, y) = (ra[field].as_f64().unwrap(), cb[k][field].as_f64().unwrap());
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "{k}.{field}: {x} vs {y}");
        }
    }
}

#[tokio::test]
async fn waitlist_endpoint_scores_providers() {
    let dir = tempfile::tempdir().unwrap();
    let home = common::trained_home(dir.path());
    let state = AppState::load(&home, None).unwrap();
    for (i, p) in common::PROMPTS.iter().enumerate() {
        call(&state, "POST", "/v1/events", Some(event(&format!("w{i}"), p))).await;
    }
    let req = json!({
        "providers": [
            { "provider_id": "astro", "texts": ["the rocket launch reached orbit", "astronauts on the station"] },
            { "provider_id": "chef", "texts": ["simmer the sauce with garlic"] }
        ],
        "total": 1000
    });
    let (s, b) = call(&state, "POST", "/v1/waitlist/score", Some(req)).await;
    assert_eq!(s, StatusCode::OK, "{b}");
    let entries = b["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    let alloc = &b["allocation"];
    let pool = alloc["pool"].as_u64().unwrap();
    assert_eq!(pool, 50);
    let waitlisted: u64 = alloc["waitlist"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(waitlisted, pool);
    assert_eq!(alloc["trained"]["total"].as_u64().unwrap() + pool, 1000);
}
