use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::extract::ConnectInfo;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use dvrisk_core::forest::{train_ensemble, EnsembleConfig, EnsembleModel};
use dvrisk_core::geo::{aggregate, AggregateBundle, AggregateContext, Boundaries, CaseTypeMapping, Tally};
use dvrisk_core::preprocess::{build_frame, FrameConfig};
use dvrisk_core::synthgen::{generate, GeneratorConfig};
use dvrisk_service::{router, AppState, ServiceConfig, Snapshot};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn small_model(seed: u64) -> EnsembleModel {
    let records = generate(&GeneratorConfig {
        n_cases: 1500,
        seed,
        ..GeneratorConfig::model_mode()
    })
    .unwrap();
    let frame = build_frame(&records, &FrameConfig::default(), None).unwrap().frame;
    let config = EnsembleConfig {
        outer_rounds: 3,
        inner_repeats: 2,
        trees_per_forest: 10,
        per_class_sample: 60,
        master_seed: seed,
        ..EnsembleConfig::desk_scale()
    };
    train_ensemble(&frame, &config).unwrap()
}

fn bundle() -> AggregateBundle {
    let records = generate(&GeneratorConfig {
        n_cases: 2000,
        ..GeneratorConfig::map_mode()
    })
    .unwrap();
    let b = Boundaries::synthetic();
    let m = CaseTypeMapping::builtin();
    aggregate(
        &records,
        &AggregateContext {
            boundaries: &b,
            mapping: &m,
            geocoder: None,
            addresses: None,
            model: None,
        },
    )
}

fn app(model: Option<EnsembleModel>, aggregates: Option<AggregateBundle>) -> Router {
    let snap = Snapshot::new(model, aggregates, &Boundaries::synthetic()).unwrap();
    router(AppState::new(ServiceConfig::default(), snap))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

fn post_json(uri: &str, v: &Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(v.to_string()))
        .unwrap()
}

fn case() -> Value {
    json!({
        "tipvda_score": 4,
        "dv_duration_months": 40,
        "maimed": "fracture",
        "occupation": "service",
        "education": "college",
        "district": "D01",
        "victim_gender": "female",
        "victim_age": 35,
        "reporter_occupation": "hospital_staff",
    })
}

fn json_of(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}

#[tokio::test]
async fn score_without_model_is_unavailable() {
    let app = app(None, None);
    let (status, _, _) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn score_round_trip_and_validation() {
    let model = small_model(3);
    let version = model.version();
    let app = app(Some(model.clone()), None);

    let (status, _, body) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    let p = v["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["model_version"], version.as_str());
    let expected = model.classify(p);
    assert_eq!(v["label"], expected.label);
    assert_eq!(v["risk_level"], expected.risk_level.as_str());

    // identical request, identical response
    let (_, _, again) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(body, again);

    // unseen level replays to OTHER and still scores
    let mut odd = case();
    odd["education"] = json!("doctorate");
    let (status, _, body) = send(&app, post_json("/api/score", &odd)).await;
    assert_eq!(status, StatusCode::OK);
    let mut other = case();
    other["education"] = json!("OTHER");
    let (_, _, other_body) = send(&app, post_json("/api/score", &other)).await;
    assert_eq!(json_of(&body)["probability"], json_of(&other_body)["probability"]);

    let mut missing = case();
    missing.as_object_mut().unwrap().remove("tipvda_score");
    let (status, _, body) = send(&app, post_json("/api/score", &missing)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(json_of(&body)["fields"]["tipvda_score"].is_string());

    let (status, _, _) = send(
        &app,
        Request::post("/api/score").body(Body::from("not json")).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn score_latency_p50_under_50ms() {
    let app = app(Some(small_model(5)), None);
    let mut times = Vec::new();
    for _ in 0..41 {
        let t = Instant::now();
        let (status, _, _) = send(&app, post_json("/api/score", &case())).await;
        times.push(t.elapsed());
        assert_eq!(status, StatusCode::OK);
    }
    times.sort();
    assert!(times[20].as_millis() < 50, "p50 {:?}", times[20]);
}

#[tokio::test]
async fn map_views_and_etag() {
    let app = app(None, Some(bundle()));
    let get = |uri: &str| Request::get(uri).body(Body::empty()).unwrap();

    let (status, headers, body) = send(&app, get("/api/map")).await;
    assert_eq!(status, StatusCode::OK);
    let etag = headers[header::ETAG].clone();
    let doc = json_of(&body);
    assert_eq!(doc["features"].as_array().unwrap().len(), 456);
    assert_eq!(doc["features"][0]["properties"]["category"], "all");

    let (_, headers2, body2) = send(&app, get("/api/map")).await;
    assert_eq!(headers2[header::ETAG], etag);
    assert_eq!(body, body2);

    let (status, _, _) = send(
        &app,
        Request::get("/api/map").header(header::IF_NONE_MATCH, etag.clone()).body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_MODIFIED);

    let (status, headers, body) = send(&app, get("/api/map?type=IPV")).await;
    assert_eq!(status, StatusCode::OK);
    assert_ne!(headers[header::ETAG], etag);
    let ipv = json_of(&body);
    for f in ipv["features"].as_array().unwrap() {
        let p = &f["properties"];
        assert_eq!(p["category"], "IPV");
        assert_eq!(p["total"], p["ipv"]);
    }

    let (status, _, body) = send(&app, get("/api/map?type=spouse")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v = json_of(&body);
    assert!(v["valid_categories"].as_array().unwrap().contains(&json!("elderly")));
}

#[tokio::test]
async fn districts_sum_to_citywide() {
    let bundle = bundle();
    let app = app(None, Some(bundle.clone()));
    let mut sum = Tally::default();
    for v in &bundle.all.villages {
        sum.merge(&v.tally);
    }
    let mut total = 0;
    let mut ipv = 0;
    for d in Boundaries::synthetic().districts() {
        let (status, _, body) = send(&app, Request::get(format!("/api/district/{d}")).body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&body);
        total += v["total"].as_u64().unwrap();
        ipv += v["case_types"]["IPV"].as_u64().unwrap();
    }
    assert_eq!(total, sum.total);
    assert_eq!(ipv, sum.ipv);

    let (status, _, _) = send(&app, Request::get("/api/district/D99").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

fn reload_from(ip: [u8; 4]) -> Request<Body> {
    let mut req = Request::post("/api/reload").body(Body::empty()).unwrap();
    req.extensions_mut()
        .insert(ConnectInfo(SocketAddr::from((ip, 40000))));
    req
}

#[tokio::test]
async fn reload_swaps_model_and_is_local_only() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let first = small_model(11);
    std::fs::write(&model_path, first.to_json()).unwrap();
    let config = ServiceConfig {
        model_path: Some(model_path.clone()),
        ..ServiceConfig::default()
    };
    let state = AppState::new(config.clone(), Snapshot::load(&config).unwrap());
    let app = router(Arc::clone(&state));

    let version = |body: &[u8]| json_of(body)["model_version"].as_str().unwrap().to_string();
    let (_, _, body) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(version(&body), first.version());

    let second = small_model(12);
    assert_ne!(first.version(), second.version());
    std::fs::write(&model_path, second.to_json()).unwrap();

    // remote callers and requests without peer info are refused
    let (status, _, _) = send(&app, reload_from([10, 0, 0, 7])).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _, _) = send(&app, Request::post("/api/reload").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (_, _, body) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(version(&body), first.version());

    let (status, _, _) = send(&app, reload_from([127, 0, 0, 1])).await;
    assert_eq!(status, StatusCode::OK);
    let (_, _, body) = send(&app, post_json("/api/score", &case())).await;
    assert_eq!(version(&body), second.version());

    // a broken file leaves the loaded model in place
    std::fs::write(&model_path, b"{").unwrap();
    let (status, _, _) = send(&app, reload_from([127, 0, 0, 1])).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(state.snapshot().model_version(), Some(second.version().as_str()));
}

#[tokio::test]
async fn concurrent_readers_see_whole_models() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let models = [small_model(21), small_model(22)];
    let versions: Vec<String> = models.iter().map(|m| m.version()).collect();
    std::fs::write(&model_path, models[0].to_json()).unwrap();
    let config = ServiceConfig {
        model_path: Some(model_path.clone()),
        ..ServiceConfig::default()
    };
    let state = AppState::new(config.clone(), Snapshot::load(&config).unwrap());
    let app = router(Arc::clone(&state));

    let mut readers = Vec::new();
    for _ in 0..4 {
        let app = app.clone();
        let versions = versions.clone();
        readers.push(tokio::spawn(async move {
            for _ in 0..25 {
                let (status, _, body) = send(&app, post_json("/api/score", &case())).await;
                assert_eq!(status, StatusCode::OK);
                let v = json_of(&body)["model_version"].as_str().unwrap().to_string();
                assert!(versions.contains(&v));
            }
        }));
    }
    for i in 0..6 {
        std::fs::write(&model_path, models[i % 2].to_json()).unwrap();
        state.reload().unwrap();
        tokio::task::yield_now().await;
    }
    for r in readers {
        r.await.unwrap();
    }
}

#[tokio::test]
async fn health_reports_state() {
    let app = app(None, Some(bundle()));
    let (status, _, body) = send(&app, Request::get("/api/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["model_loaded"], false);
    assert_eq!(v["aggregates_loaded"], true);
}
