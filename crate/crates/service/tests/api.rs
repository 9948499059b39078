mod common;

use std::collections::HashSet;
use std::sync::Arc;

use axum::http::StatusCode;
use chrono::Duration;
use common::*;
use intermedia_core::portrait::{sturges_bins, Portrait};
use intermedia_core::recsys::Algorithm;
use intermedia_service::{
    router, EngagementSummary, ExportRow, ManualClock, RecommendationsResponse, ServiceConfig,
};

fn app() -> (axum::Router, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(t0()));
    let state = state_with(fixture(), ServiceConfig::default(), clock.clone());
    (router(state), clock)
}

fn raw_palette(body: &[u8]) -> String {
    let v: serde_json::Value = serde_json::from_slice(body).unwrap();
    v["palette"]["hashtag"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn portrait_round_trips() {
    let (app, _) = app();
    let (status, body) = call(&app, "GET", "/portrait/a003", None).await;
    assert_eq!(status, StatusCode::OK);
    let p: Portrait = serde_json::from_slice(&body).unwrap();
    assert_eq!(p.user_id, "a003");
    assert_eq!(p.bins.len(), sturges_bins(50));
    assert_eq!(
        p.bins.iter().map(|b| b.count).sum::<u32>() as usize,
        p.tweets.len()
    );
    assert_eq!(p.rotation_degrees, -7);
    assert_eq!(raw_palette(&body), "#7570b3");
    let raw: serde_json::Value = serde_json::from_slice(&body).unwrap();
    for field in [
        "display_name",
        "avatar_url",
        "bio",
        "interests",
        "links",
        "political_content",
        "generated_at",
    ] {
        assert!(raw.get(field).is_some(), "missing {field}");
    }
}

#[tokio::test]
async fn unknown_user_is_404_everywhere() {
    let (app, _) = app();
    for uri in ["/portrait/zzz", "/recommendations/zzz", "/metrics/zzz"] {
        let (status, body) = call_json(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["code"], "unknown_user");
        assert!(body["message"].is_string());
    }
    let (status, _) = call_json(&app, "POST", "/users", Some(r#"{"user_id":"zzz"}"#.into())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call_json(&app, "GET", "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
}

#[tokio::test]
async fn sign_up_is_idempotent() {
    let (app, clock) = app();
    let (s1, first) = call_json(&app, "POST", "/users", Some(r#"{"user_id":"b002"}"#.into())).await;
    clock.advance(Duration::hours(2));
    let (s2, second) =
        call_json(&app, "POST", "/users", Some(r#"{"user_id":"b002"}"#.into())).await;
    assert_eq!(s1, StatusCode::ACCEPTED);
    assert_eq!(s2, StatusCode::ACCEPTED);
    assert_eq!(first["condition"], second["condition"]);
    let (s3, bad) = call_json(&app, "POST", "/users", Some("{".into())).await;
    assert_eq!(s3, StatusCode::BAD_REQUEST);
    assert_eq!(bad["code"], "malformed_request");
}

#[tokio::test]
async fn recommendations_follow_condition() {
    let (app, _) = app();
    for user in ["a000", "a001", "b000", "b001", "b005"] {
        let (status, body) = call(&app, "GET", &format!("/recommendations/{user}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let r: RecommendationsResponse = serde_json::from_slice(&body).unwrap();
        assert_eq!(r.algorithm, r.condition.rec);
        assert_eq!(r.ui, r.condition.ui);
        assert_eq!(r.user_id, user);
        assert!(r.recommendations.len() <= 20);
        assert!(r.recommendations.iter().all(|x| x.candidate_id != user));
        let members: usize = r.clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(members, r.recommendations.len());
        assert_eq!(r.accounts.len(), r.recommendations.len());
        let (_, again) = call(&app, "GET", &format!("/recommendations/{user}"), None).await;
        assert_eq!(body, again);
    }
}

#[tokio::test]
async fn algorithms_rank_differently_on_planted_fixture() {
    let clock = Arc::new(ManualClock::new(t0()));
    let state = state_with(fixture(), ServiceConfig::default(), clock);
    let differs = ["a000", "a007", "b003", "b011"].iter().any(|u| {
        let it: Vec<_> = state
            .recommend(u, Algorithm::It)
            .unwrap()
            .0
            .into_iter()
            .map(|r| r.candidate_id)
            .collect();
        let kld: Vec<_> = state
            .recommend(u, Algorithm::Kld)
            .unwrap()
            .0
            .into_iter()
            .map(|r| r.candidate_id)
            .collect();
        it != kld
    });
    assert!(differs);
}

#[tokio::test]
async fn rec_accept_without_target_is_rejected() {
    let (app, _) = app();
    let bad = event("a001", "s", "rec_accept", None).to_string();
    let (status, body) = call_json(&app, "POST", "/events", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed_event");
    assert!(body["message"].as_str().unwrap().contains("target"));

    let unknown_kind = event("a001", "s", "double_click", None).to_string();
    let (status, _) = call_json(&app, "POST", "/events", Some(unknown_kind)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // a bad event anywhere in a batch rejects the whole batch
    let batch = serde_json::json!([
        event("a001", "s", "page_view", None),
        event("a001", "s", "rec_accept", None)
    ]);
    let (status, _) = call_json(&app, "POST", "/events", Some(batch.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, m) = call_json(&app, "GET", "/metrics/a001", None).await;
    assert_eq!(m["event_count"], 0);
}

#[tokio::test]
async fn accept_sets_flag() {
    let (app, _) = app();
    let (_, m) = call_json(&app, "GET", "/metrics/a001", None).await;
    assert_eq!(m["accepted_any"], false);
    let ev = event("a001", "s", "rec_accept", Some("b004")).to_string();
    let (status, body) = call_json(&app, "POST", "/events", Some(ev)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(body["accepted"], 1);
    let (_, m) = call_json(&app, "GET", "/metrics/a001", None).await;
    assert_eq!(m["accepted_any"], true);
}

#[tokio::test]
async fn dwell_from_three_events() {
    let (app, clock) = app();
    for _ in 0..3 {
        let ev = event("b001", "sess", "heartbeat", None).to_string();
        assert_eq!(
            call(&app, "POST", "/events", Some(ev)).await.0,
            StatusCode::ACCEPTED
        );
        clock.advance(Duration::seconds(10));
    }
    let (_, body) = call(&app, "GET", "/metrics/b001", None).await;
    let m: EngagementSummary = serde_json::from_slice(&body).unwrap();
    assert_eq!(m.dwell_seconds, 20.0);
    assert_eq!(m.n_days, 1);
    assert_eq!(m.event_count, 3);
    let c = m.covariates.unwrap();
    assert!(c.tweet_ratio > 0.0);
    assert!(c.hub_ratio.is_some());
}

#[tokio::test]
async fn exploration_count_ignores_other_kinds() {
    let (app, _) = app();
    let kinds = [
        "rec_explore_click",
        "page_view",
        "rec_explore_click",
        "portrait_word_click",
        "portrait_bin_click",
        "portrait_reset",
        "heartbeat",
    ];
    let batch: Vec<_> = kinds.iter().map(|k| event("a002", "s", k, None)).collect();
    let (status, _) = call(
        &app,
        "POST",
        "/events",
        Some(serde_json::to_string(&batch).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (_, m) = call_json(&app, "GET", "/metrics/a002", None).await;
    assert_eq!(m["exploration_count"], 2);
    assert_eq!(m["event_count"], 7);
}

#[tokio::test]
async fn replay_reproduces_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        state_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let clock = Arc::new(ManualClock::new(t0()));
    let state = state_with(fixture(), config.clone(), clock.clone());
    let app = router(state.clone());
    let users = ["a000", "a004", "b009"];
    for (i, u) in users.iter().enumerate() {
        call(
            &app,
            "POST",
            "/users",
            Some(format!(r#"{{"user_id":"{u}"}}"#)),
        )
        .await;
        for j in 0..4 {
            let kind = if j == 2 {
                "rec_explore_click"
            } else {
                "heartbeat"
            };
            call(
                &app,
                "POST",
                "/events",
                Some(event(u, "s", kind, None).to_string()),
            )
            .await;
            clock.advance(Duration::seconds(7 + i as i64));
        }
        clock.advance(Duration::hours(20));
    }
    let before: Vec<EngagementSummary> =
        users.iter().map(|u| state.engagement(u).unwrap()).collect();
    let export_before = state.export_ndjson();
    drop(app);
    drop(state);

    let reopened = state_with(fixture(), config, Arc::new(ManualClock::new(t0())));
    let after: Vec<EngagementSummary> = users
        .iter()
        .map(|u| reopened.engagement(u).unwrap())
        .collect();
    assert_eq!(before, after);
    assert_eq!(export_before, reopened.export_ndjson());
    for u in users {
        assert_eq!(reopened.conditions().get(u).unwrap().user_id, u);
    }
}

#[tokio::test]
async fn export_is_ndjson_with_flags() {
    let (app, clock) = app();
    call(&app, "POST", "/users", Some(r#"{"user_id":"a010"}"#.into())).await;
    for _ in 0..2 {
        call(
            &app,
            "POST",
            "/events",
            Some(event("b010", "s", "heartbeat", None).to_string()),
        )
        .await;
        clock.advance(Duration::seconds(6));
    }
    let (status, body) = call(&app, "GET", "/metrics/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let rows: Vec<ExportRow> = std::str::from_utf8(&body)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: HashSet<_> = rows.iter().map(|r| r.summary.user_id.as_str()).collect();
    assert_eq!(ids, HashSet::from(["a010", "b010"]));
    let b = rows.iter().find(|r| r.summary.user_id == "b010").unwrap();
    assert!(b.flags.dwell_at_least_5s);
    assert!(b.condition.is_none());
    let a = rows.iter().find(|r| r.summary.user_id == "a010").unwrap();
    assert!(!a.flags.dwell_at_least_5s);
    assert!(a.condition.is_some());
}
