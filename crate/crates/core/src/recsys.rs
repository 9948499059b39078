//! People recommendation: the homophilic KLD baseline and the
//! intermediary-topic (IT) recommender, plus dominant-topic clustering.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topicgraph::IntermediaryTopicSet;
use crate::topics::{TopicModel, TopicVector};

/// Words used to label a cluster.
pub const CLUSTER_LABEL_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "KLD")]
    Kld,
    #[serde(rename = "IT")]
    It,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Kld => "KLD",
            Algorithm::It => "IT",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "KLD" => Ok(Algorithm::Kld),
            "IT" => Ok(Algorithm::It),
            _ => Err(format!("unknown algorithm {s:?} (expected IT or KLD)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecConfig {
    pub gamma: f64,
    pub top_n: usize,
    pub candidate_window_hours: u32,
    pub algorithm: Algorithm,
}

impl Default for RecConfig {
    fn default() -> Self {
        RecConfig {
            gamma: 1.0,
            top_n: 20,
            candidate_window_hours: 48,
            algorithm: Algorithm::It,
        }
    }
}

impl RecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.top_n == 0 {
            return Err(Error::InvalidConfig("top_n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub candidate_id: String,
    pub score: f64,
    /// Raw symmetric KL distance to the target.
    pub distance: f64,
    pub distance_norm: f64,
    pub jit: f64,
    pub dominant_topic: usize,
    pub shared_intermediary_topics: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationCluster {
    pub cluster_topic: usize,
    pub label: Vec<String>,
    pub members: Vec<Recommendation>,
}

/// Symmetric Kullback–Leibler distance `Σ (p_i − q_i) ln(p_i / q_i)`.
pub fn kld_symmetric(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b) * (a / b).ln()).sum())
}

/// Divides every distance by the largest one; all zeros if the largest is 0.
pub fn normalize_distances(distances: &[f64]) -> Vec<f64> {
    let max = distances.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; distances.len()];
    }
    distances.iter().map(|&d| d / max).collect()
}

/// Jaccard similarity `|A ∩ B| / |A ∪ B|`; 0 when both are empty.
pub fn jit(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// F-score of a similarity and a normalized distance, balanced by `gamma`.
pub fn fscore(similarity: f64, distance: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&similarity) {
        return Err(Error::OutOfRange(format!("similarity {similarity}")));
    }
    if !(0.0..=1.0).contains(&distance) {
        return Err(Error::OutOfRange(format!("distance {distance}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::OutOfRange(format!("gamma {gamma}")));
    }
    let g2 = gamma * gamma;
    let closeness = 1.0 - distance;
    let denom = g2 * closeness + similarity;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + g2) * similarity * closeness / denom)
}

/// The user's significant topics that are also intermediary topics.
pub fn user_intermediary_topics(
    v: &TopicVector,
    epsilon: f64,
    itset: &IntermediaryTopicSet,
) -> BTreeSet<usize> {
    v.significant_topics(epsilon)
        .into_iter()
        .filter(|t| itset.contains(*t))
        .collect()
}

/// Scores candidates against a target using trained topic vectors and the
/// intermediary topic set.
pub struct Recommender<'a> {
    vectors: HashMap<&'a str, &'a TopicVector>,
    itset: &'a IntermediaryTopicSet,
    epsilon: f64,
}

impl<'a> Recommender<'a> {
    pub fn new(vectors: &'a [TopicVector], itset: &'a IntermediaryTopicSet, epsilon: f64) -> Self {
        Recommender {
            vectors: vectors.iter().map(|v| (v.user_id.as_str(), v)).collect(),
            itset,
            epsilon,
        }
    }

    pub fn vector(&self, user_id: &str) -> Option<&'a TopicVector> {
        self.vectors.get(user_id).copied()
    }

    pub fn intermediary_of(&self, user_id: &str) -> Option<BTreeSet<usize>> {
        self.vector(user_id)
            .map(|v| user_intermediary_topics(v, self.epsilon, self.itset))
    }

    /// Ranks `candidates` for `target`. The target itself, ids in `exclude`,
    /// duplicates and candidates without a topic vector are dropped.
    /// Distances are normalized over the remaining candidate set.
    pub fn recommend(
        &self,
        target: &str,
        candidates: &[String],
        cfg: &RecConfig,
        exclude: &HashSet<String>,
    ) -> Result<Vec<Recommendation>> {
        cfg.validate()?;
        let target_vec = self
            .vector(target)
            .ok_or_else(|| Error::UnknownUser(target.to_string()))?;
        let target_it = user_intermediary_topics(target_vec, self.epsilon, self.itset);

        let mut seen = HashSet::new();
        let pool: Vec<&TopicVector> = candidates
            .iter()
            .filter(|c| c.as_str() != target && !exclude.contains(*c))
            .filter(|c| seen.insert(c.as_str()))
            .filter_map(|c| self.vector(c))
            .collect();
        if pool.is_empty() {
            return Ok(Vec::new());
        }
        let distances = pool
            .iter()
            .map(|v| kld_symmetric(&target_vec.probs, &v.probs))
            .collect::<Result<Vec<f64>>>()?;
        let normalized = normalize_distances(&distances);

        let mut recs = Vec::with_capacity(pool.len());
        for ((v, &distance), &distance_norm) in pool.iter().zip(&distances).zip(&normalized) {
            let cand_it = user_intermediary_topics(v, self.epsilon, self.itset);
            let similarity = jit(&target_it, &cand_it);
            let score = match cfg.algorithm {
                Algorithm::It => fscore(similarity, distance_norm, cfg.gamma)?,
                Algorithm::Kld => 1.0 - distance_norm,
            };
            recs.push(Recommendation {
                candidate_id: v.user_id.clone(),
                score,
                distance,
                distance_norm,
                jit: similarity,
                dominant_topic: v.dominant_topic(),
                shared_intermediary_topics: target_it.intersection(&cand_it).copied().collect(),
            });
        }
        rank(&mut recs);
        recs.truncate(cfg.top_n);
        Ok(recs)
    }
}

/// Sorts by score descending, then candidate id ascending.
pub fn rank(recs: &mut [Recommendation]) {
    recs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
}

/// Groups recommendations by dominant topic. Clusters are ordered by size
/// (largest first, then topic id); members keep their ranked order.
pub fn cluster<F>(recs: &[Recommendation], label: F) -> Vec<RecommendationCluster>
where
    F: Fn(usize) -> Vec<String>,
{
    let mut groups: BTreeMap<usize, Vec<Recommendation>> = BTreeMap::new();
    for r in recs {
        groups.entry(r.dominant_topic).or_default().push(r.clone());
    }
    let mut clusters: Vec<RecommendationCluster> = groups
        .into_iter()
        .map(|(topic, members)| RecommendationCluster {
            cluster_topic: topic,
            label: label(topic),
            members,
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.cluster_topic.cmp(&b.cluster_topic))
    });
    clusters
}

/// Clusters labeled with the model's top words.
pub fn cluster_with_model(
    recs: &[Recommendation],
    model: &TopicModel,
) -> Vec<RecommendationCluster> {
    cluster(recs, |t| model.top_words(t, CLUSTER_LABEL_WORDS))
}
