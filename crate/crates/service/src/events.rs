//! Interaction events and the append-only event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::StoreError;

pub const EVENTS_FILE: &str = "events.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RecExploreClick,
    RecAccept,
    PortraitWordClick,
    PortraitBinClick,
    PortraitReset,
    PageView,
    Heartbeat,
}

/// An event as posted by a client, before the server stamps it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventInput {
    pub user_id: String,
    pub session_id: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub client_ts: DateTime<Utc>,
}

impl EventInput {
    /// Checks the per-kind contract. The message is suitable for a 400 reply.
    pub fn validate(&self) -> Result<(), String> {
        if self.user_id.is_empty() {
            return Err("user_id must not be empty".into());
        }
        if self.session_id.is_empty() {
            return Err("session_id must not be empty".into());
        }
        let has_target = self.target.as_deref().is_some_and(|t| !t.is_empty());
        if self.kind == EventKind::RecAccept && !has_target {
            return Err("rec_accept requires target (the accepted candidate_id)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub user_id: String,
    pub session_id: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub client_ts: DateTime<Utc>,
    pub server_ts: DateTime<Utc>,
}

struct LogInner {
    file: Option<File>,
    events: Vec<InteractionEvent>,
    last_ts: Option<DateTime<Utc>>,
}

/// Events are only ever appended. Appends are serialized; `server_ts` never
/// decreases along the log even if the wall clock steps backwards.
pub struct EventLog {
    path: Option<PathBuf>,
    inner: Mutex<LogInner>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("path", &self.path)
            .finish_non_exhaustive()
    }
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            path: None,
            inner: Mutex::new(LogInner {
                file: None,
                events: Vec::new(),
                last_ts: None,
            }),
        }
    }

    /// Opens `dir/events.ndjson` for appending after replaying its contents.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(EVENTS_FILE);
        let events = if path.exists() {
            replay(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::Io(path.clone(), e))?;
        let last_ts = events.iter().map(|e| e.server_ts).max();
        Ok(EventLog {
            path: Some(path),
            inner: Mutex::new(LogInner {
                file: Some(file),
                events,
                last_ts,
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Stamps and appends a batch atomically with respect to other appends.
    pub fn append(
        &self,
        inputs: Vec<EventInput>,
        clock: &dyn Clock,
    ) -> Result<Vec<InteractionEvent>, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        let mut ts = clock.now();
        if let Some(last) = inner.last_ts {
            ts = ts.max(last);
        }
        let stamped: Vec<InteractionEvent> = inputs
            .into_iter()
            .map(|e| InteractionEvent {
                user_id: e.user_id,
                session_id: e.session_id,
                kind: e.kind,
                target: e.target,
                client_ts: e.client_ts,
                server_ts: ts,
            })
            .collect();
        if let Some(file) = inner.file.as_mut() {
            let mut buf = Vec::new();
            for e in &stamped {
                serde_json::to_writer(&mut buf, e).expect("event serializes");
                buf.push(b'\n');
            }
            let path = self.path.clone().unwrap_or_default();
            file.write_all(&buf)
                .and_then(|_| file.flush())
                .map_err(|e| StoreError::Io(path, e))?;
        }
        inner.last_ts = Some(ts);
        inner.events.extend(stamped.iter().cloned());
        Ok(stamped)
    }

    /// A consistent copy of the log.
    pub fn snapshot(&self) -> Vec<InteractionEvent> {
        self.inner.lock().unwrap().events.clone()
    }

    pub fn events_for(&self, user_id: &str) -> Vec<InteractionEvent> {
        self.inner
            .lock()
            .unwrap()
            .events
            .iter()
            .filter(|e| e.user_id == user_id)
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads a log file back. Any malformed line is an error: the log is
/// written only by [`EventLog`], so damage should not pass silently.
pub fn replay(path: &Path) -> Result<Vec<InteractionEvent>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::Io(path.to_path_buf(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::Io(path.to_path_buf(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| StoreError::Corrupt(path.to_path_buf(), format!("line {}: {e}", i + 1)))?;
        out.push(event);
    }
    Ok(out)
}
