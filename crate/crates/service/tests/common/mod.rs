#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use intermedia_core::corpus::{Corpus, Tokenizer};
use intermedia_core::synth::{generate, SynthSpec, UserLabel};
use intermedia_core::topicgraph::{
    build_graph, intermediary_topics, CentralityMethod, GraphReport,
};
use intermedia_core::topics::{train, ModelConfig, TopicModel};
use intermedia_service::{AppState, ManualClock, ServiceConfig};
use tower::ServiceExt;

pub struct Fixture {
    pub corpus: Corpus,
    pub model: TopicModel,
    pub graph: GraphReport,
    pub labels: Vec<UserLabel>,
}

pub fn fixture() -> Fixture {
    let spec = SynthSpec {
        users_per_community: 20,
        tweets_per_user: 50,
        rng_seed: 5,
        ..SynthSpec::default()
    };
    let synth = generate(&spec).unwrap();
    let corpus = Corpus::from_tweets(synth.tweets, Tokenizer::default(), 0);
    let mut cfg = ModelConfig::with_topics(20);
    cfg.iterations = 150;
    cfg.burn_in = 50;
    cfg.rng_seed = 5;
    let model = train(&corpus, &cfg).unwrap();
    let g = build_graph(&model.user_vectors(), cfg.epsilon).unwrap();
    let itset = intermediary_topics(&g, CentralityMethod::WeightedCloseness);
    let graph = GraphReport::new(&g, &itset);
    Fixture {
        corpus,
        model,
        graph,
        labels: synth.labels,
    }
}

pub fn t0() -> DateTime<Utc> {
    "2014-10-03T12:00:00Z".parse().unwrap()
}

pub fn state_with(fx: Fixture, config: ServiceConfig, clock: Arc<ManualClock>) -> AppState {
    AppState::with_clock(fx.corpus, fx.model, &fx.graph, config, clock).unwrap()
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b)),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

pub async fn call_json(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, serde_json::Value) {
    let (s, b) = call(app, method, uri, body).await;
    (
        s,
        serde_json::from_slice(&b).unwrap_or(serde_json::Value::Null),
    )
}

pub fn event(user: &str, session: &str, kind: &str, target: Option<&str>) -> serde_json::Value {
    let mut v = serde_json::json!({
        "user_id": user,
        "session_id": session,
        "kind": kind,
        "client_ts": "2014-10-03T12:00:00Z",
    });
    if let Some(t) = target {
        v["target"] = t.into();
    }
    v
}
