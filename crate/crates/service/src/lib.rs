//! HTTP service for data portraits and people recommendations, with
//! per-user experimental conditions and engagement logging.

pub mod app;
pub mod clock;
pub mod condition;
pub mod error;
pub mod events;
pub mod metrics;

pub use app::{router, serve, AppState, RecommendationsResponse, ServiceConfig};
pub use clock::{Clock, ManualClock, SystemClock};
pub use condition::{assign_condition, ConditionStore, ExperimentCondition, UiCondition};
pub use error::{ApiError, ErrorBody, ServiceError};
pub use events::{EventInput, EventKind, EventLog, InteractionEvent};
pub use metrics::{EngagementSummary, ExportRow};
