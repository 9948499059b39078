//! Shared state and HTTP routes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use intermedia_core::corpus::Corpus;
use intermedia_core::portrait::{build_portrait, PoliticalKeywords, Portrait};
use intermedia_core::recsys::{
    cluster_with_model, Algorithm, RecConfig, Recommendation, RecommendationCluster, Recommender,
};
use intermedia_core::topicgraph::{GraphReport, IntermediaryTopicSet};
use intermedia_core::topics::{TopicModel, TopicVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::condition::{ConditionStore, ExperimentCondition, UiCondition};
use crate::error::{ApiError, ServiceError};
use crate::events::{EventInput, EventLog};
use crate::metrics::{covariates, export_rows, summarize, EngagementSummary};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub seed: u64,
    /// Directory for `conditions.json` and `events.ndjson`; in memory if `None`.
    pub state_dir: Option<PathBuf>,
    pub rec: RecConfig,
    pub keywords: PoliticalKeywords,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            seed: 0,
            state_dir: None,
            rec: RecConfig::default(),
            keywords: PoliticalKeywords::starter(),
        }
    }
}

/// Public profile fields shown next to a recommended account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountCard {
    pub user_id: String,
    pub name: Option<String>,
    pub description: Option<String>,
    pub profile_image_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationsResponse {
    pub user_id: String,
    pub condition: ExperimentCondition,
    pub algorithm: Algorithm,
    pub ui: UiCondition,
    pub candidate_count: usize,
    pub recommendations: Vec<Recommendation>,
    pub clusters: Vec<RecommendationCluster>,
    pub accounts: BTreeMap<String, AccountCard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignUpRequest {
    pub user_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignUpResponse {
    pub user_id: String,
    pub condition: ExperimentCondition,
    pub portrait: String,
    pub recommendations: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsAccepted {
    pub accepted: usize,
}

struct Inner {
    corpus: Corpus,
    model: TopicModel,
    itset: IntermediaryTopicSet,
    epsilon: f64,
    vectors: Vec<TopicVector>,
    config: ServiceConfig,
    conditions: ConditionStore,
    events: EventLog,
    clock: Arc<dyn Clock>,
    portraits: RwLock<HashMap<String, Arc<Portrait>>>,
    recs: RwLock<HashMap<(String, Algorithm), Arc<(Vec<Recommendation>, usize)>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(
        corpus: Corpus,
        model: TopicModel,
        graph: &GraphReport,
        config: ServiceConfig,
    ) -> Result<Self, ServiceError> {
        Self::with_clock(corpus, model, graph, config, Arc::new(SystemClock))
    }

    /// Users the model was trained on keep their fitted vectors; any other
    /// corpus user is folded in against the trained topics.
    pub fn with_clock(
        corpus: Corpus,
        model: TopicModel,
        graph: &GraphReport,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        if graph.k != model.k() {
            return Err(ServiceError::Config(format!(
                "graph has {} topics but the model has {}",
                graph.k,
                model.k()
            )));
        }
        config.rec.validate()?;
        let vectors: Vec<TopicVector> = corpus
            .documents()
            .map(|doc| {
                model
                    .user_vector(&doc.user_id)
                    .unwrap_or_else(|| model.infer(doc, corpus.vocabulary()).vector)
            })
            .collect();
        let (conditions, events) = match &config.state_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| {
                    ServiceError::Store(crate::error::StoreError::Io(dir.clone(), e))
                })?;
                (
                    ConditionStore::open(dir, config.seed)?,
                    EventLog::open(dir)?,
                )
            }
            None => (
                ConditionStore::in_memory(config.seed),
                EventLog::in_memory(),
            ),
        };
        Ok(AppState(Arc::new(Inner {
            itset: graph.intermediary_set(),
            epsilon: graph.epsilon,
            corpus,
            model,
            vectors,
            config,
            conditions,
            events,
            clock,
            portraits: RwLock::new(HashMap::new()),
            recs: RwLock::new(HashMap::new()),
        })))
    }

    pub fn corpus(&self) -> &Corpus {
        &self.0.corpus
    }

    pub fn conditions(&self) -> &ConditionStore {
        &self.0.conditions
    }

    pub fn events(&self) -> &EventLog {
        &self.0.events
    }

    fn known(&self, user_id: &str) -> Result<(), ApiError> {
        if self.0.corpus.document(user_id).is_some() {
            Ok(())
        } else {
            Err(ApiError::unknown_user(user_id))
        }
    }

    pub fn condition(&self, user_id: &str) -> Result<ExperimentCondition, ApiError> {
        self.known(user_id)?;
        Ok(self
            .0
            .conditions
            .get_or_assign(user_id, self.0.clock.now())?)
    }

    pub fn portrait(&self, user_id: &str) -> Result<Arc<Portrait>, ApiError> {
        self.known(user_id)?;
        if let Some(p) = self.0.portraits.read().unwrap().get(user_id) {
            return Ok(p.clone());
        }
        let built = build_portrait(
            &self.0.corpus,
            user_id,
            &self.0.config.keywords,
            self.0.clock.now(),
        )
        .map_err(|e| ApiError::internal(e.to_string()))?;
        let mut cache = self.0.portraits.write().unwrap();
        Ok(cache
            .entry(user_id.to_string())
            .or_insert_with(|| Arc::new(built))
            .clone())
    }

    /// Candidates are corpus users active within the configured window of
    /// the corpus's most recent tweet.
    pub fn candidates(&self) -> Vec<String> {
        let corpus = &self.0.corpus;
        match corpus.latest_activity() {
            Some(latest) => corpus.active_users(latest, self.0.config.rec.candidate_window_hours),
            None => Vec::new(),
        }
    }

    /// Ranked recommendations for `user_id` under `algorithm`, regardless of
    /// the user's assigned condition.
    pub fn recommend(
        &self,
        user_id: &str,
        algorithm: Algorithm,
    ) -> Result<(Vec<Recommendation>, usize), ApiError> {
        self.known(user_id)?;
        let key = (user_id.to_string(), algorithm);
        if let Some(hit) = self.0.recs.read().unwrap().get(&key) {
            return Ok((hit.0.clone(), hit.1));
        }
        let candidates = self.candidates();
        let cfg = RecConfig {
            algorithm,
            ..self.0.config.rec.clone()
        };
        let recommender = Recommender::new(&self.0.vectors, &self.0.itset, self.0.epsilon);
        let recs = recommender
            .recommend(user_id, &candidates, &cfg, &HashSet::new())
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let n = candidates.iter().filter(|c| c.as_str() != user_id).count();
        self.0
            .recs
            .write()
            .unwrap()
            .insert(key, Arc::new((recs.clone(), n)));
        Ok((recs, n))
    }

    pub fn recommendations(&self, user_id: &str) -> Result<RecommendationsResponse, ApiError> {
        let condition = self.condition(user_id)?;
        let (recommendations, candidate_count) = self.recommend(user_id, condition.rec)?;
        let clusters = cluster_with_model(&recommendations, &self.0.model);
        let accounts = recommendations
            .iter()
            .map(|r| {
                let p = self.0.corpus.profile(&r.candidate_id);
                let card = AccountCard {
                    user_id: r.candidate_id.clone(),
                    name: p.and_then(|p| p.name.clone()),
                    description: p.and_then(|p| p.description.clone()),
                    profile_image_url: p.and_then(|p| p.profile_image_url.clone()),
                };
                (r.candidate_id.clone(), card)
            })
            .collect();
        Ok(RecommendationsResponse {
            user_id: user_id.to_string(),
            algorithm: condition.rec,
            ui: condition.ui,
            condition,
            candidate_count,
            recommendations,
            clusters,
            accounts,
        })
    }

    /// Validates every event first; the batch is appended only if all pass.
    pub fn record_events(&self, inputs: Vec<EventInput>) -> Result<usize, ApiError> {
        for (i, e) in inputs.iter().enumerate() {
            e.validate()
                .map_err(|m| ApiError::bad_request("malformed_event", format!("event {i}: {m}")))?;
            self.known(&e.user_id)?;
        }
        let n = inputs.len();
        self.0.events.append(inputs, self.0.clock.as_ref())?;
        Ok(n)
    }

    pub fn engagement(&self, user_id: &str) -> Result<EngagementSummary, ApiError> {
        self.known(user_id)?;
        Ok(summarize(
            user_id,
            &self.0.events.events_for(user_id),
            covariates(&self.0.corpus, user_id),
        ))
    }

    /// NDJSON export: one row per user with a condition or any event.
    pub fn export_ndjson(&self) -> String {
        let events = self.0.events.snapshot();
        let conditions: BTreeMap<String, ExperimentCondition> = self
            .0
            .conditions
            .all()
            .into_iter()
            .map(|c| (c.user_id.clone(), c))
            .collect();
        let users: BTreeSet<&str> = conditions
            .keys()
            .map(String::as_str)
            .chain(events.iter().map(|e| e.user_id.as_str()))
            .collect();
        let summaries = users
            .into_iter()
            .map(|u| summarize(u, &events, covariates(&self.0.corpus, u)))
            .collect();
        let mut out = String::new();
        for row in export_rows(summaries, &conditions) {
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
        out
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8], code: &str) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(code, e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn sign_up(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: SignUpRequest = parse_body(&body, "malformed_request")?;
    let condition = state.condition(&req.user_id)?;
    let warm = state.clone();
    let user = req.user_id.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = warm.portrait(&user) {
            tracing::warn!(user = %user, error = %e.body.message, "portrait build failed");
        }
    });
    let resp = SignUpResponse {
        portrait: format!("/portrait/{}", req.user_id),
        recommendations: format!("/recommendations/{}", req.user_id),
        user_id: req.user_id,
        condition,
    };
    Ok((StatusCode::ACCEPTED, Json(resp)).into_response())
}

async fn get_portrait(
    State(state): State<AppState>,
    Path(user_id): Path<String>,
) -> Result<Json<Portrait>, ApiError> {
    let p = blocking(move || state.portrait(&user_id)).await?;
    Ok(Json((*p).clone()))
}

async fn get_recommendations(
    State(state): State<AppState>,
    Path(user_id): Path<String>,
) -> Result<Json<RecommendationsResponse>, ApiError> {
    Ok(Json(
        blocking(move || state.recommendations(&user_id)).await?,
    ))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<serde_json::Value>),
    One(serde_json::Value),
}

async fn post_events(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let raw: OneOrMany = parse_body(&body, "malformed_event")?;
    let values = match raw {
        OneOrMany::Many(v) => v,
        OneOrMany::One(v) => vec![v],
    };
    if values.is_empty() {
        return Err(ApiError::bad_request("malformed_event", "empty batch"));
    }
    let inputs = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value::<EventInput>(v)
                .map_err(|e| ApiError::bad_request("malformed_event", format!("event {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let accepted = state.record_events(inputs)?;
    Ok((StatusCode::ACCEPTED, Json(EventsAccepted { accepted })).into_response())
}

async fn get_metrics(
    State(state): State<AppState>,
    Path(user_id): Path<String>,
) -> Result<Json<EngagementSummary>, ApiError> {
    Ok(Json(state.engagement(&user_id)?))
}

async fn export_metrics(State(state): State<AppState>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        state.export_ndjson(),
    )
        .into_response()
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/users", post(sign_up))
        .route("/portrait/{user_id}", get(get_portrait))
        .route("/recommendations/{user_id}", get(get_recommendations))
        .route("/events", post(post_events))
        .route("/metrics/export", get(export_metrics))
        .route("/metrics/{user_id}", get(get_metrics))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
