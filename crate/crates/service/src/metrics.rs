//! Engagement summaries and the analysis export.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use intermedia_core::corpus::Corpus;
use serde::{Deserialize, Serialize};

use crate::condition::ExperimentCondition;
use crate::events::{EventKind, InteractionEvent};

/// Inactivity longer than this starts a new session.
pub const SESSION_GAP_MINUTES: i64 = 30;
/// Export flag thresholds used by the original analysis.
pub const MIN_DWELL_SECONDS: f64 = 5.0;
pub const MIN_TWEET_RATIO: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    /// Tweets per day of account age.
    pub tweet_ratio: f64,
    /// Following divided by followers; `None` when the user has no followers.
    pub hub_ratio: Option<f64>,
    pub rt_fraction: f64,
    pub url_fraction: f64,
    pub mention_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementSummary {
    pub user_id: String,
    pub exploration_count: u64,
    pub accepted_any: bool,
    pub n_days: u32,
    pub dwell_seconds: f64,
    pub event_count: u64,
    pub covariates: Option<Covariates>,
}

pub fn covariates(corpus: &Corpus, user_id: &str) -> Option<Covariates> {
    let doc = corpus.document(user_id)?;
    let tweets: Vec<_> = corpus.user_tweets(user_id).collect();
    if tweets.is_empty() {
        return None;
    }
    let total = tweets.len() as f64;
    let retweets = tweets.iter().filter(|t| t.is_retweet).count();
    let original: Vec<_> = tweets.iter().filter(|t| !t.is_retweet).collect();
    let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    Some(Covariates {
        tweet_ratio: total / doc.account_age_days,
        hub_ratio: (doc.follower_count > 0)
            .then(|| doc.following_count as f64 / doc.follower_count as f64),
        rt_fraction: retweets as f64 / total,
        url_fraction: frac(
            original.iter().filter(|t| !t.urls.is_empty()).count(),
            original.len(),
        ),
        mention_fraction: frac(
            original.iter().filter(|t| !t.mentions.is_empty()).count(),
            original.len(),
        ),
    })
}

/// Sum over sessions of (last − first) server time. Events are grouped by
/// session id and each group is further split wherever two consecutive
/// events are more than [`SESSION_GAP_MINUTES`] apart.
pub fn dwell_seconds(events: &[&InteractionEvent]) -> f64 {
    let mut by_session: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for e in events {
        by_session
            .entry(e.session_id.as_str())
            .or_default()
            .push(e.server_ts);
    }
    let gap = Duration::minutes(SESSION_GAP_MINUTES);
    let mut total = Duration::zero();
    for times in by_session.values_mut() {
        times.sort_unstable();
        let mut start = times[0];
        for pair in times.windows(2) {
            if pair[1] - pair[0] > gap {
                total += pair[0] - start;
                start = pair[1];
            }
        }
        total += *times.last().unwrap() - start;
    }
    total
        .num_microseconds()
        .map_or(total.num_seconds() as f64, |us| us as f64 / 1e6)
}

/// Summary of `user_id` over `events`; events of other users are ignored.
pub fn summarize(
    user_id: &str,
    events: &[InteractionEvent],
    covariates: Option<Covariates>,
) -> EngagementSummary {
    let mine: Vec<&InteractionEvent> = events.iter().filter(|e| e.user_id == user_id).collect();
    let days: BTreeSet<_> = mine.iter().map(|e| e.server_ts.date_naive()).collect();
    EngagementSummary {
        user_id: user_id.to_string(),
        exploration_count: mine
            .iter()
            .filter(|e| e.kind == EventKind::RecExploreClick)
            .count() as u64,
        accepted_any: mine.iter().any(|e| e.kind == EventKind::RecAccept),
        n_days: days.len() as u32,
        dwell_seconds: if mine.is_empty() {
            0.0
        } else {
            dwell_seconds(&mine)
        },
        event_count: mine.len() as u64,
        covariates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportFlags {
    /// Dwell above the 90th percentile (nearest rank) of exported users.
    pub top_decile_dwell: bool,
    pub dwell_at_least_5s: bool,
    /// `None` when covariates are unavailable.
    pub tweet_ratio_at_least_1: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    #[serde(flatten)]
    pub summary: EngagementSummary,
    pub condition: Option<ExperimentCondition>,
    pub flags: ExportFlags,
}

/// Nearest-rank 90th percentile of `values`; `None` when empty.
pub fn p90(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (sorted.len() * 9).div_ceil(10);
    Some(sorted[rank.max(1) - 1])
}

pub fn export_rows(
    summaries: Vec<EngagementSummary>,
    conditions: &BTreeMap<String, ExperimentCondition>,
) -> Vec<ExportRow> {
    let dwell: Vec<f64> = summaries.iter().map(|s| s.dwell_seconds).collect();
    let cutoff = p90(&dwell).unwrap_or(f64::INFINITY);
    summaries
        .into_iter()
        .map(|s| ExportRow {
            condition: conditions.get(&s.user_id).cloned(),
            flags: ExportFlags {
                top_decile_dwell: s.dwell_seconds > cutoff,
                dwell_at_least_5s: s.dwell_seconds >= MIN_DWELL_SECONDS,
                tweet_ratio_at_least_1: s
                    .covariates
                    .as_ref()
                    .map(|c| c.tweet_ratio >= MIN_TWEET_RATIO),
            },
            summary: s,
        })
        .collect()
}
