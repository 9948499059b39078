//! Between-groups condition assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use intermedia_core::recsys::Algorithm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::StoreError;

pub const CONDITIONS_FILE: &str = "conditions.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiCondition {
    Baseline,
    CirclePack,
}

impl fmt::Display for UiCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UiCondition::Baseline => "baseline",
            UiCondition::CirclePack => "circle_pack",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCondition {
    pub user_id: String,
    pub ui: UiCondition,
    pub rec: Algorithm,
    pub assigned_at: DateTime<Utc>,
}

/// The four ⟨UI, RecSys⟩ cells in a fixed order.
pub const CELLS: [(UiCondition, Algorithm); 4] = [
    (UiCondition::Baseline, Algorithm::Kld),
    (UiCondition::Baseline, Algorithm::It),
    (UiCondition::CirclePack, Algorithm::Kld),
    (UiCondition::CirclePack, Algorithm::It),
];

/// Index into [`CELLS`] for a user. Depends only on `(user_id, seed)`.
pub fn assign_cell(user_id: &str, seed: u64) -> usize {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(user_id.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest).random_range(0..CELLS.len())
}

pub fn assign_condition(user_id: &str, seed: u64, at: DateTime<Utc>) -> ExperimentCondition {
    let (ui, rec) = CELLS[assign_cell(user_id, seed)];
    ExperimentCondition {
        user_id: user_id.to_string(),
        ui,
        rec,
        assigned_at: at,
    }
}

/// Assignments are made once and persisted as a JSON snapshot.
#[derive(Debug)]
pub struct ConditionStore {
    seed: u64,
    path: Option<PathBuf>,
    assigned: Mutex<BTreeMap<String, ExperimentCondition>>,
}

impl ConditionStore {
    pub fn in_memory(seed: u64) -> Self {
        ConditionStore {
            seed,
            path: None,
            assigned: Mutex::new(BTreeMap::new()),
        }
    }

    /// Opens `dir/conditions.json`, loading earlier assignments if present.
    pub fn open(dir: &Path, seed: u64) -> Result<Self, StoreError> {
        let path = dir.join(CONDITIONS_FILE);
        let assigned = match std::fs::read(&path) {
            Ok(bytes) => {
                let list: Vec<ExperimentCondition> = serde_json::from_slice(&bytes)
                    .map_err(|e| StoreError::Corrupt(path.clone(), e.to_string()))?;
                list.into_iter().map(|c| (c.user_id.clone(), c)).collect()
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(StoreError::Io(path, e)),
        };
        Ok(ConditionStore {
            seed,
            path: Some(path),
            assigned: Mutex::new(assigned),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, user_id: &str) -> Option<ExperimentCondition> {
        self.assigned.lock().unwrap().get(user_id).cloned()
    }

    pub fn all(&self) -> Vec<ExperimentCondition> {
        self.assigned.lock().unwrap().values().cloned().collect()
    }

    /// Returns the stored assignment, or assigns and persists a new one.
    /// On a storage failure nothing is recorded and the call may be retried.
    pub fn get_or_assign(
        &self,
        user_id: &str,
        now: DateTime<Utc>,
    ) -> Result<ExperimentCondition, StoreError> {
        let mut assigned = self.assigned.lock().unwrap();
        if let Some(c) = assigned.get(user_id) {
            return Ok(c.clone());
        }
        let condition = assign_condition(user_id, self.seed, now);
        assigned.insert(user_id.to_string(), condition.clone());
        if let Err(e) = self.persist(&assigned) {
            assigned.remove(user_id);
            return Err(e);
        }
        Ok(condition)
    }

    fn persist(&self, assigned: &BTreeMap<String, ExperimentCondition>) -> Result<(), StoreError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let list: Vec<&ExperimentCondition> = assigned.values().collect();
        let bytes = serde_json::to_vec_pretty(&list).expect("conditions serialize");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, bytes).map_err(|e| StoreError::Io(tmp.clone(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| StoreError::Io(path.clone(), e))
    }
}
