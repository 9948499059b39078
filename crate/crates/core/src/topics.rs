//! LDA user modeling with a collapsed Gibbs sampler.
//!
//! Each user is one document. The trained model keeps integer topic-word and
//! document-topic counts from the final sample; probabilities are derived
//! from them, which makes save/load bit-exact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use tracing::warn;

use crate::corpus::{read_json, write_json, Corpus, UserDocument, Vocabulary};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Gensim's default topical-significance threshold.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Sweeps used when folding an unseen document into a trained model.
pub const DEFAULT_INFER_SWEEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Topical-significance threshold. It is not required to be below `1/k`.
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::with_topics(100)
    }
}

impl ModelConfig {
    /// Classical defaults for `k` topics: alpha = 50/k, beta = 0.01.
    pub fn with_topics(k: usize) -> Self {
        ModelConfig {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 500,
            burn_in: 100,
            epsilon: DEFAULT_EPSILON,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.k == 0 || self.k > u16::MAX as usize {
            return bad("k must be in 1..=65535");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}

/// P(t|u) for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicVector {
    pub user_id: String,
    pub probs: Vec<f64>,
}

impl TopicVector {
    /// Posterior-mean estimate `(n_t + alpha) / (N + k alpha)`.
    pub fn from_counts(user_id: impl Into<String>, counts: &[u32], alpha: f64) -> Self {
        let k = counts.len() as f64;
        let total: f64 = counts.iter().map(|&c| c as f64).sum();
        let denom = total + k * alpha;
        TopicVector {
            user_id: user_id.into(),
            probs: counts.iter().map(|&c| (c as f64 + alpha) / denom).collect(),
        }
    }

    pub fn uniform(user_id: impl Into<String>, k: usize) -> Self {
        TopicVector {
            user_id: user_id.into(),
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Most probable topic; the lowest id wins ties.
    pub fn dominant_topic(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Topics with probability at least `epsilon`.
    pub fn significant_topics(&self, epsilon: f64) -> BTreeSet<usize> {
        significant_topics(self, epsilon)
    }
}

pub fn significant_topics(v: &TopicVector, epsilon: f64) -> BTreeSet<usize> {
    v.probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= epsilon)
        .map(|(i, _)| i)
        .collect()
}

/// Collapsed Gibbs sampler state.
pub struct GibbsSampler {
    config: ModelConfig,
    vocab_size: usize,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u16>>,
    doc_topic: Vec<Vec<u32>>,
    /// Word-major: `topic_word[w * k + t]`.
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
    rng: ChaCha8Rng,
    sweeps: usize,
}

impl GibbsSampler {
    /// Initializes with uniformly random topic assignments.
    pub fn new(docs: Vec<Vec<u32>>, vocab_size: usize, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = config.k;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut doc_topic = vec![vec![0u32; k]; docs.len()];
        let mut topic_word = vec![0u32; vocab_size * k];
        let mut topic_totals = vec![0u64; k];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                if w as usize >= vocab_size {
                    return Err(Error::OutOfRange(format!(
                        "token id {w} outside vocabulary of {vocab_size}"
                    )));
                }
                let t = rng.random_range(0..k);
                z.push(t as u16);
                doc_topic[d][t] += 1;
                topic_word[w as usize * k + t] += 1;
                topic_totals[t] += 1;
            }
            assignments.push(z);
        }
        Ok(GibbsSampler {
            config,
            vocab_size,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            sweeps: 0,
        })
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let k = self.config.k;
        let alpha = self.config.alpha;
        let beta = self.config.beta;
        let vbeta = self.vocab_size as f64 * beta;
        let mut weights = vec![0.0f64; k];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.assignments[d][i] as usize;
                let row = w * k;
                self.doc_topic[d][old] -= 1;
                self.topic_word[row + old] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (self.doc_topic[d][t] as f64 + alpha)
                        * (self.topic_word[row + t] as f64 + beta)
                        / (self.topic_totals[t] as f64 + vbeta);
                    weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = weights.partition_point(|&c| c <= u).min(k - 1);

                self.assignments[d][i] = new as u16;
                self.doc_topic[d][new] += 1;
                self.topic_word[row + new] += 1;
                self.topic_totals[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn token_count(&self) -> u64 {
        self.docs.iter().map(|d| d.len() as u64).sum()
    }

    /// Total assignments as seen from the topic side.
    pub fn topic_assignment_total(&self) -> u64 {
        self.topic_totals.iter().sum()
    }

    /// Total assignments as seen from the document side.
    pub fn doc_assignment_total(&self) -> u64 {
        self.doc_topic
            .iter()
            .flat_map(|row| row.iter().map(|&c| c as u64))
            .sum()
    }

    pub fn topic_word_total(&self) -> u64 {
        self.topic_word.iter().map(|&c| c as u64).sum()
    }

    pub fn doc_topic_counts(&self, d: usize) -> &[u32] {
        &self.doc_topic[d]
    }

    /// Collapsed joint log-likelihood `log p(w, z)`.
    pub fn log_likelihood(&self) -> f64 {
        let k = self.config.k;
        let v = self.vocab_size as f64;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let lg_vbeta = ln_gamma(v * beta);
        let lg_beta = ln_gamma(beta);
        let mut ll = 0.0;
        for t in 0..k {
            ll += lg_vbeta - ln_gamma(self.topic_totals[t] as f64 + v * beta);
            for w in 0..self.vocab_size {
                let c = self.topic_word[w * k + t];
                if c > 0 {
                    ll += ln_gamma(c as f64 + beta) - lg_beta;
                }
            }
        }
        let lg_alpha = ln_gamma(alpha);
        for (d, row) in self.doc_topic.iter().enumerate() {
            ll += ln_gamma(k as f64 * alpha) - k as f64 * lg_alpha;
            for &c in row {
                ll += ln_gamma(c as f64 + alpha);
            }
            ll -= ln_gamma(self.docs[d].len() as f64 + k as f64 * alpha);
        }
        ll
    }

    fn topic_word_sparse(&self) -> Vec<Vec<(u32, u32)>> {
        let k = self.config.k;
        let mut rows = vec![Vec::new(); k];
        for w in 0..self.vocab_size {
            for (t, row) in rows.iter_mut().enumerate() {
                let c = self.topic_word[w * k + t];
                if c > 0 {
                    row.push((w as u32, c));
                }
            }
        }
        rows
    }
}

/// A trained, immutable topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    config: ModelConfig,
    vocabulary: Vocabulary,
    /// Per topic: (word id, count), ascending word id.
    topic_word_counts: Vec<Vec<(u32, u32)>>,
    topic_totals: Vec<u64>,
    doc_topic: BTreeMap<String, Vec<u32>>,
    /// Word-major P(w|t): `phi[w * k + t]`.
    phi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ModelConfig,
    vocabulary: Vocabulary,
    topic_word: Vec<Vec<(u32, u32)>>,
    doc_topic: BTreeMap<String, Vec<u32>>,
}

/// Result of folding a document into a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub vector: TopicVector,
    /// In-vocabulary tokens used.
    pub tokens_used: u64,
    /// True when no token was in the vocabulary and the vector is uniform.
    pub fallback: bool,
}

impl TopicModel {
    fn assemble(
        config: ModelConfig,
        vocabulary: Vocabulary,
        topic_word_counts: Vec<Vec<(u32, u32)>>,
        doc_topic: BTreeMap<String, Vec<u32>>,
    ) -> Result<Self> {
        let k = config.k;
        let v = vocabulary.len();
        if topic_word_counts.len() != k {
            return Err(Error::InvalidConfig(format!(
                "model has {} topic rows, config says k={k}",
                topic_word_counts.len()
            )));
        }
        let mut dense = vec![0u32; v * k];
        let mut topic_totals = vec![0u64; k];
        for (t, row) in topic_word_counts.iter().enumerate() {
            for &(w, c) in row {
                if w as usize >= v {
                    return Err(Error::OutOfRange(format!("word id {w} in topic {t}")));
                }
                dense[w as usize * k + t] = c;
                topic_totals[t] += c as u64;
            }
        }
        if let Some(row) = doc_topic.values().find(|row| row.len() != k) {
            return Err(Error::DimensionMismatch {
                left: row.len(),
                right: k,
            });
        }
        let vbeta = v as f64 * config.beta;
        let phi = dense
            .iter()
            .enumerate()
            .map(|(i, &c)| (c as f64 + config.beta) / (topic_totals[i % k] as f64 + vbeta))
            .collect();
        Ok(TopicModel {
            config,
            vocabulary,
            topic_word_counts,
            topic_totals,
            doc_topic,
            phi,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// P(w|t).
    pub fn topic_word(&self, topic: usize, word: u32) -> f64 {
        self.phi[word as usize * self.config.k + topic]
    }

    /// Full P(·|t) row over the vocabulary.
    pub fn topic_distribution(&self, topic: usize) -> Vec<f64> {
        (0..self.vocabulary.len())
            .map(|w| self.phi[w * self.config.k + topic])
            .collect()
    }

    /// The `n` most probable surfaces of a topic (ties broken by surface).
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<String> {
        let mut row: Vec<(u32, u32)> = self.topic_word_counts[topic].clone();
        row.sort_by(|a, b| {
            b.1.cmp(&a.1).then_with(|| {
                self.vocabulary
                    .surface(a.0)
                    .cmp(&self.vocabulary.surface(b.0))
            })
        });
        row.into_iter()
            .take(n)
            .filter_map(|(w, _)| self.vocabulary.surface(w).map(str::to_string))
            .collect()
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_topic.keys().map(String::as_str)
    }

    pub fn doc_topic_counts(&self, user_id: &str) -> Option<&[u32]> {
        self.doc_topic.get(user_id).map(Vec::as_slice)
    }

    /// Smoothed topic vector of a training user.
    pub fn user_vector(&self, user_id: &str) -> Option<TopicVector> {
        self.doc_topic
            .get(user_id)
            .map(|c| TopicVector::from_counts(user_id, c, self.config.alpha))
    }

    /// Topic vectors of every training user, ordered by user id.
    pub fn user_vectors(&self) -> Vec<TopicVector> {
        self.doc_topic
            .iter()
            .map(|(u, c)| TopicVector::from_counts(u.as_str(), c, self.config.alpha))
            .collect()
    }

    /// Folds a document into the model with a fixed topic-word distribution.
    /// Token ids refer to `vocabulary`, which may differ from the model's;
    /// tokens the model has never seen are dropped.
    pub fn infer(&self, doc: &UserDocument, vocabulary: &Vocabulary) -> Inference {
        let tokens: Vec<u32> = doc
            .tokens
            .iter()
            .filter_map(|(&id, &n)| {
                let surface = vocabulary.surface(id)?;
                let model_id = self.vocabulary.id(surface)?;
                Some(std::iter::repeat_n(model_id, n as usize))
            })
            .flatten()
            .collect();
        self.infer_tokens(&doc.user_id, &tokens, DEFAULT_INFER_SWEEPS)
    }

    /// Fold-in Gibbs sampling over model token ids.
    pub fn infer_tokens(&self, user_id: &str, tokens: &[u32], sweeps: usize) -> Inference {
        let k = self.config.k;
        let tokens: Vec<u32> = tokens
            .iter()
            .copied()
            .filter(|&w| (w as usize) < self.vocabulary.len())
            .collect();
        if tokens.is_empty() {
            return Inference {
                vector: TopicVector::uniform(user_id, k),
                tokens_used: 0,
                fallback: true,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = tokens
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let mut weights = vec![0.0; k];
        for _ in 0..sweeps.max(1) {
            for (i, &w) in tokens.iter().enumerate() {
                counts[z[i]] -= 1;
                let row = w as usize * k;
                let mut total = 0.0;
                for t in 0..k {
                    total += (counts[t] as f64 + self.config.alpha) * self.phi[row + t];
                    weights[t] = total;
                }
                let u = rng.random::<f64>() * total;
                z[i] = weights.partition_point(|&c| c <= u).min(k - 1);
                counts[z[i]] += 1;
            }
        }
        Inference {
            vector: TopicVector::from_counts(user_id, &counts, self.config.alpha),
            tokens_used: tokens.len() as u64,
            fallback: false,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            vocabulary: self.vocabulary.clone(),
            topic_word: self.topic_word_counts.clone(),
            doc_topic: self.doc_topic.clone(),
        };
        write_json(path, &file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(file.format_version));
        }
        file.config.validate()?;
        TopicModel::assemble(
            file.config,
            file.vocabulary,
            file.topic_word,
            file.doc_topic,
        )
    }
}

/// Trains on every non-empty user document of a corpus.
pub fn train(corpus: &Corpus, config: &ModelConfig) -> Result<TopicModel> {
    let docs: Vec<(String, Vec<u32>)> = corpus
        .documents()
        .map(|d| (d.user_id.clone(), d.token_list()))
        .collect();
    train_documents(docs, corpus.vocabulary().clone(), config)
}

/// Trains on (user id, token ids) documents. Documents without tokens are
/// skipped with a warning.
pub fn train_documents(
    docs: Vec<(String, Vec<u32>)>,
    vocabulary: Vocabulary,
    config: &ModelConfig,
) -> Result<TopicModel> {
    train_observed(docs, vocabulary, config, |_| {})
}

/// Like [`train_documents`], calling `observe` after every sweep.
pub fn train_observed<F>(
    docs: Vec<(String, Vec<u32>)>,
    vocabulary: Vocabulary,
    config: &ModelConfig,
    mut observe: F,
) -> Result<TopicModel>
where
    F: FnMut(&GibbsSampler),
{
    config.validate()?;
    let (users, tokens): (Vec<String>, Vec<Vec<u32>>) = docs
        .into_iter()
        .filter(|(user, toks)| {
            if toks.is_empty() {
                warn!(user = %user, "skipping document without tokens");
            }
            !toks.is_empty()
        })
        .unzip();
    if users.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let distinct: BTreeSet<u32> = tokens.iter().flatten().copied().collect();
    if config.k > distinct.len() {
        warn!(
            k = config.k,
            distinct = distinct.len(),
            "more topics than distinct tokens"
        );
    }
    let mut sampler = GibbsSampler::new(tokens, vocabulary.len(), config.clone())?;
    for _ in 0..config.iterations {
        sampler.sweep();
        observe(&sampler);
    }
    let topic_word = sampler.topic_word_sparse();
    let doc_topic = users
        .into_iter()
        .zip(sampler.doc_topic)
        .collect::<BTreeMap<_, _>>();
    TopicModel::assemble(config.clone(), vocabulary, topic_word, doc_topic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_surfaces(words.iter().map(|s| s.to_string()))
    }

    fn separable(seed: u64, iterations: usize) -> TopicModel {
        // vocabulary ids: a=0, b=1, x=2, y=3
        let docs = vec![
            ("d0".to_string(), [vec![0u32; 20], vec![1; 20]].concat()),
            ("d1".to_string(), [vec![2u32; 20], vec![3; 20]].concat()),
        ];
        let mut cfg = ModelConfig::with_topics(2);
        cfg.alpha = 0.1;
        cfg.iterations = iterations;
        cfg.burn_in = 0;
        cfg.rng_seed = seed;
        train_documents(docs, vocab(&["a", "b", "x", "y"]), &cfg).unwrap()
    }

    #[test]
    fn single_document_single_topic() {
        let mut cfg = ModelConfig::with_topics(1);
        cfg.iterations = 5;
        cfg.burn_in = 0;
        let m =
            train_documents(vec![("u".into(), vec![0, 1, 1])], vocab(&["a", "b"]), &cfg).unwrap();
        assert_eq!(m.user_vector("u").unwrap().probs, vec![1.0]);
    }

    #[test]
    fn separable_documents_get_distinct_topics() {
        for seed in 0..5 {
            let m = separable(seed, 200);
            let a = m.user_vector("d0").unwrap().dominant_topic();
            let b = m.user_vector("d1").unwrap().dominant_topic();
            assert_ne!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn counts_are_conserved_every_sweep() {
        let docs = vec![
            ("d0".to_string(), vec![0, 1, 1, 2]),
            ("d1".to_string(), vec![2, 3, 3]),
        ];
        let mut cfg = ModelConfig::with_topics(3);
        cfg.iterations = 30;
        cfg.burn_in = 0;
        let mut sweeps = 0;
        train_observed(docs, vocab(&["a", "b", "c", "d"]), &cfg, |s| {
            sweeps += 1;
            assert_eq!(s.topic_assignment_total(), 7);
            assert_eq!(s.doc_assignment_total(), 7);
            assert_eq!(s.topic_word_total(), 7);
        })
        .unwrap();
        assert_eq!(sweeps, 30);
    }

    #[test]
    fn log_likelihood_trends_upward_during_burn_in() {
        let docs = vec![
            ("d0".to_string(), [vec![0u32; 20], vec![1; 20]].concat()),
            ("d1".to_string(), [vec![2u32; 20], vec![3; 20]].concat()),
        ];
        let mut cfg = ModelConfig::with_topics(2);
        cfg.alpha = 0.1;
        cfg.iterations = 200;
        cfg.burn_in = 100;
        for seed in 0..5 {
            cfg.rng_seed = seed;
            let mut trace = Vec::new();
            train_observed(docs.clone(), vocab(&["a", "b", "x", "y"]), &cfg, |s| {
                if s.sweeps() <= cfg.burn_in {
                    trace.push(s.log_likelihood());
                }
            })
            .unwrap();
            let first: f64 = trace[..10].iter().sum::<f64>() / 10.0;
            let last: f64 = trace[trace.len() - 10..].iter().sum::<f64>() / 10.0;
            assert!(last >= first, "seed {seed}: {first} -> {last}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible_and_round_trips() {
        let a = separable(7, 50);
        let b = separable(7, 50);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        a.save(&path).unwrap();
        let loaded = TopicModel::load(&path).unwrap();
        assert_eq!(a, loaded);
        for (x, y) in a.phi.iter().zip(&loaded.phi) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rows_are_probability_vectors() {
        let m = separable(3, 20);
        for t in 0..m.k() {
            let s: f64 = m.topic_distribution(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        for v in m.user_vectors() {
            assert!(v.probs.iter().all(|&p| p > 0.0));
            assert!((v.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let cfg = ModelConfig::with_topics(2);
        assert!(matches!(
            train_documents(vec![], vocab(&["a"]), &cfg),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            train_documents(vec![("u".into(), vec![])], vocab(&["a"]), &cfg),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ModelConfig::with_topics(2);
        cfg.burn_in = cfg.iterations;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::with_topics(2);
        cfg.epsilon = 1.0;
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::with_topics(0).validate().is_err());
        assert_eq!(ModelConfig::default().alpha, 0.5);
    }

    #[test]
    fn smoothed_vector_formula() {
        let n = 37u32;
        let v = TopicVector::from_counts("u", &[n, 0], 0.1);
        let n = n as f64;
        assert_eq!(v.probs, vec![(n + 0.1) / (n + 0.2), 0.1 / (n + 0.2)]);
    }

    #[test]
    fn inference_uniform_fallback_for_oov() {
        let m = separable(1, 20);
        let other = vocab(&["zzz"]);
        let doc = UserDocument {
            user_id: "new".into(),
            tokens: [(0u32, 3u32)].into_iter().collect(),
            tweet_ids: vec![],
            interests: vec![],
            follower_count: 0,
            following_count: 0,
            account_age_days: 1.0,
        };
        let inf = m.infer(&doc, &other);
        assert!(inf.fallback);
        assert_eq!(inf.vector.probs, vec![0.5, 0.5]);

        let mut cfg4 = ModelConfig::with_topics(4);
        cfg4.iterations = 2;
        cfg4.burn_in = 0;
        let m4 = train_documents(vec![("u".into(), vec![0])], vocab(&["a"]), &cfg4).unwrap();
        assert_eq!(m4.infer_tokens("x", &[], 10).vector.probs, vec![0.25; 4]);
    }

    #[test]
    fn inference_follows_the_topic_of_known_words() {
        let m = separable(2, 200);
        let topic_of_a = m.user_vector("d0").unwrap().dominant_topic();
        let doc = UserDocument {
            user_id: "new".into(),
            tokens: [(0u32, 10u32), (1, 10)].into_iter().collect(),
            tweet_ids: vec![],
            interests: vec![],
            follower_count: 0,
            following_count: 0,
            account_age_days: 1.0,
        };
        let inf = m.infer(&doc, m.vocabulary());
        assert!(!inf.fallback);
        assert_eq!(inf.tokens_used, 20);
        assert_eq!(inf.vector.dominant_topic(), topic_of_a);
        assert!((inf.vector.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn significant_topic_thresholds() {
        let uniform = TopicVector::uniform("u", 4);
        assert_eq!(uniform.significant_topics(0.01), (0..4).collect());
        let v = TopicVector {
            user_id: "u".into(),
            probs: vec![0.99, 0.005, 0.005],
        };
        assert_eq!(v.significant_topics(0.01), [0].into_iter().collect());
        assert!(v.significant_topics(1.0).is_empty());
        let degenerate = TopicVector {
            user_id: "u".into(),
            probs: vec![1.0, 0.0],
        };
        assert_eq!(
            degenerate.significant_topics(1.0),
            [0].into_iter().collect()
        );
    }

    #[test]
    fn top_words_follow_counts() {
        let m = separable(4, 100);
        let t = m.user_vector("d1").unwrap().dominant_topic();
        let mut words = m.top_words(t, 5);
        words.sort();
        assert_eq!(words, vec!["x", "y"]);
    }
}
