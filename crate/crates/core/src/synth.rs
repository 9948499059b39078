//! Planted two-community corpora and the KLD-vs-IT diversity harness.
//!
//! Each community talks about its own political issues; every user also
//! follows a few shared themes (sports, music, ...) that both communities
//! have in common. A tweet draws all its words either from the author's
//! issue vocabulary or from one of the author's themes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::time::Instant;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    read_json, write_json, write_ndjson, Corpus, Tokenizer, TweetRecord, UserProfile,
};
use crate::error::{Error, Result};
use crate::recsys::{Algorithm, RecConfig, Recommender};
use crate::topicgraph::{build_graph, intermediary_topics, CentralityMethod};
use crate::topics::{train, ModelConfig};

pub const TWEETS_FILE: &str = "tweets.ndjson";
pub const LABELS_FILE: &str = "labels.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub users_per_community: usize,
    /// Distinct political issues per community; each user follows one.
    pub issues_per_community: usize,
    /// Political vocabulary of community A, split evenly across its issues.
    pub political_vocab_a: usize,
    pub political_vocab_b: usize,
    pub shared_themes: usize,
    /// Words per shared theme.
    pub theme_vocab: usize,
    pub themes_per_user: usize,
    pub tweets_per_user: usize,
    pub words_per_tweet: usize,
    /// Probability that a tweet is about the author's community issue.
    pub community_weight: f64,
    /// Probability that a tweet is about one of the author's shared themes.
    pub shared_weight: f64,
    pub rng_seed: u64,
    pub start: DateTime<Utc>,
    /// Tweets are spread uniformly over this many hours after `start`.
    pub span_hours: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            users_per_community: 100,
            issues_per_community: 5,
            political_vocab_a: 60,
            political_vocab_b: 60,
            shared_themes: 5,
            theme_vocab: 12,
            themes_per_user: 1,
            tweets_per_user: 50,
            words_per_tweet: 5,
            community_weight: 0.6,
            shared_weight: 0.4,
            rng_seed: 0,
            start: Utc.with_ymd_and_hms(2014, 10, 1, 0, 0, 0).unwrap(),
            span_hours: 47,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.users_per_community == 0 {
            return bad("users_per_community must be positive");
        }
        if self.tweets_per_user == 0 || self.words_per_tweet == 0 {
            return bad("tweets_per_user and words_per_tweet must be positive");
        }
        if self.issues_per_community == 0 {
            return bad("issues_per_community must be positive");
        }
        if self.political_vocab_a < self.issues_per_community
            || self.political_vocab_b < self.issues_per_community
        {
            return bad("each issue needs at least one word");
        }
        if self.shared_themes == 0 || self.theme_vocab == 0 {
            return bad("at least one shared theme with one word is required");
        }
        if self.themes_per_user == 0 || self.themes_per_user > self.shared_themes {
            return bad("themes_per_user must be in 1..=shared_themes");
        }
        let (c, s) = (self.community_weight, self.shared_weight);
        if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&s) || (c + s - 1.0).abs() > 1e-9 {
            return bad("community_weight and shared_weight must be probabilities summing to 1");
        }
        Ok(())
    }

    fn issue_words(&self, community: Community, issue: usize) -> Vec<String> {
        let (total, prefix) = match community {
            Community::A => (self.political_vocab_a, "izq"),
            Community::B => (self.political_vocab_b, "der"),
        };
        let per = total / self.issues_per_community;
        let extra = total % self.issues_per_community;
        let size = per + usize::from(issue < extra);
        (0..size)
            .map(|j| format!("{prefix}{issue:02}x{j:02}"))
            .collect()
    }

    fn theme_words(&self, theme: usize) -> Vec<String> {
        (0..self.theme_vocab)
            .map(|j| format!("tema{theme:02}x{j:02}"))
            .collect()
    }

    /// Every word the generator can emit for a community (issues only).
    pub fn community_vocabulary(&self, community: Community) -> BTreeSet<String> {
        (0..self.issues_per_community)
            .flat_map(|i| self.issue_words(community, i))
            .collect()
    }

    pub fn theme_vocabulary(&self) -> BTreeSet<String> {
        (0..self.shared_themes)
            .flat_map(|t| self.theme_words(t))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Community {
    A,
    B,
}

impl Community {
    pub fn other(self) -> Community {
        match self {
            Community::A => Community::B,
            Community::B => Community::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLabel {
    pub user_id: String,
    pub community: Community,
    pub issue: usize,
    pub themes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub tweets: Vec<TweetRecord>,
    pub labels: Vec<UserLabel>,
}

impl SynthCorpus {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_ndjson(&dir.join(TWEETS_FILE), self.tweets.iter())?;
        write_json(&dir.join(LABELS_FILE), &self.labels)
    }

    pub fn label_map(&self) -> HashMap<String, Community> {
        label_map(&self.labels)
    }
}

pub fn label_map(labels: &[UserLabel]) -> HashMap<String, Community> {
    labels
        .iter()
        .map(|l| (l.user_id.clone(), l.community))
        .collect()
}

pub fn load_labels(path: &Path) -> Result<Vec<UserLabel>> {
    read_json(path)
}

/// Generates a reproducible planted corpus.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let span_secs = spec.span_hours as i64 * 3600;
    let mut tweets = Vec::new();
    let mut labels = Vec::new();
    for community in [Community::A, Community::B] {
        let prefix = match community {
            Community::A => "a",
            Community::B => "b",
        };
        for u in 0..spec.users_per_community {
            let user_id = format!("{prefix}{u:03}");
            let issue = rng.random_range(0..spec.issues_per_community);
            let mut all_themes: Vec<usize> = (0..spec.shared_themes).collect();
            all_themes.shuffle(&mut rng);
            let mut themes = all_themes[..spec.themes_per_user].to_vec();
            themes.sort_unstable();

            let issue_vocab = spec.issue_words(community, issue);
            let theme_vocabs: Vec<Vec<String>> =
                themes.iter().map(|&t| spec.theme_words(t)).collect();
            let profile = UserProfile {
                followers_count: rng.random_range(10..2000),
                following_count: rng.random_range(10..2000),
                created_at: Some(spec.start - Duration::days(rng.random_range(30..2000))),
                name: Some(format!("Usuario {}", user_id.to_uppercase())),
                profile_image_url: None,
                description: None,
            };

            let mut sources: Vec<Option<usize>> = (0..spec.tweets_per_user)
                .map(|_| {
                    if rng.random::<f64>() < spec.community_weight {
                        None
                    } else {
                        Some(rng.random_range(0..themes.len()))
                    }
                })
                .collect();
            if spec.shared_weight > 0.0 && sources.iter().all(Option::is_none) {
                *sources.last_mut().expect("tweets_per_user > 0") = Some(0);
            }

            for (i, source) in sources.into_iter().enumerate() {
                let vocab = match source {
                    None => &issue_vocab,
                    Some(t) => &theme_vocabs[t],
                };
                let words: Vec<&str> = (0..spec.words_per_tweet)
                    .map(|_| {
                        vocab
                            .choose(&mut rng)
                            .expect("non-empty vocabulary")
                            .as_str()
                    })
                    .collect();
                let retweets = rng.random_range(0..20u64);
                tweets.push(TweetRecord {
                    tweet_id: format!("{user_id}-{i:04}"),
                    user_id: user_id.clone(),
                    text: words.join(" "),
                    created_at: spec.start + Duration::seconds(rng.random_range(0..=span_secs)),
                    retweet_count: retweets,
                    favorite_count: rng.random_range(0..20u64),
                    is_retweet: rng.random::<f64>() < 0.1,
                    mentions: vec![],
                    hashtags: vec![],
                    urls: vec![],
                    user: Some(profile.clone()),
                });
            }
            labels.push(UserLabel {
                user_id,
                community,
                issue,
                themes,
            });
        }
    }
    Ok(SynthCorpus { tweets, labels })
}

/// Mean over users of the fraction of their recommendations that belong to
/// the opposite community. Users without recommendations count as 0.
pub fn cross_community_fraction(
    recs: &BTreeMap<String, Vec<String>>,
    labels: &HashMap<String, Community>,
) -> f64 {
    if recs.is_empty() {
        return 0.0;
    }
    let total: f64 = recs
        .iter()
        .map(|(user, list)| {
            let Some(&own) = labels.get(user) else {
                return 0.0;
            };
            if list.is_empty() {
                return 0.0;
            }
            let cross = list
                .iter()
                .filter(|c| labels.get(*c) == Some(&own.other()))
                .count();
            cross as f64 / list.len() as f64
        })
        .sum();
    total / recs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub gamma: f64,
    pub top_n: usize,
    pub epsilon: f64,
    pub method: CentralityMethod,
    pub seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 20,
            iterations: 500,
            burn_in: 100,
            gamma: 1.0,
            top_n: 10,
            epsilon: crate::topics::DEFAULT_EPSILON,
            method: CentralityMethod::WeightedCloseness,
            seeds: (0..10).collect(),
        }
    }
}

impl EvalConfig {
    pub fn model_config(&self, seed: u64) -> ModelConfig {
        let mut cfg = ModelConfig::with_topics(self.k);
        cfg.iterations = self.iterations;
        cfg.burn_in = self.burn_in;
        cfg.epsilon = self.epsilon;
        cfg.rng_seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub it_fraction: f64,
    pub kld_fraction: f64,
    pub intermediary_topics: Vec<usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub per_seed: Vec<SeedResult>,
    pub mean_it_fraction: f64,
    pub mean_kld_fraction: f64,
    pub separation: f64,
}

impl EvalReport {
    fn from_results(config: EvalConfig, per_seed: Vec<SeedResult>) -> Self {
        let n = per_seed.len().max(1) as f64;
        let mean_it_fraction = per_seed.iter().map(|r| r.it_fraction).sum::<f64>() / n;
        let mean_kld_fraction = per_seed.iter().map(|r| r.kld_fraction).sum::<f64>() / n;
        EvalReport {
            config,
            per_seed,
            mean_it_fraction,
            mean_kld_fraction,
            separation: mean_it_fraction - mean_kld_fraction,
        }
    }
}

/// Trains with `seed`, builds the topic graph and recommends for every
/// labeled user under both algorithms; every other user is a candidate.
pub fn evaluate_once(
    corpus: &Corpus,
    labels: &HashMap<String, Community>,
    config: &EvalConfig,
    seed: u64,
) -> Result<SeedResult> {
    let started = Instant::now();
    let model_cfg = config.model_config(seed);
    let model = train(corpus, &model_cfg)?;
    let vectors = model.user_vectors();
    let graph = build_graph(&vectors, config.epsilon)?;
    let itset = intermediary_topics(&graph, config.method);
    let recommender = Recommender::new(&vectors, &itset, config.epsilon);
    let users: Vec<String> = vectors
        .iter()
        .map(|v| v.user_id.clone())
        .filter(|u| labels.contains_key(u))
        .collect();

    let mut fractions = [0.0; 2];
    for (slot, algorithm) in [Algorithm::It, Algorithm::Kld].into_iter().enumerate() {
        let cfg = RecConfig {
            gamma: config.gamma,
            top_n: config.top_n,
            algorithm,
            ..RecConfig::default()
        };
        let mut recs = BTreeMap::new();
        for user in &users {
            let list = recommender.recommend(user, &users, &cfg, &Default::default())?;
            recs.insert(
                user.clone(),
                list.into_iter().map(|r| r.candidate_id).collect::<Vec<_>>(),
            );
        }
        fractions[slot] = cross_community_fraction(&recs, labels);
    }
    Ok(SeedResult {
        seed,
        it_fraction: fractions[0],
        kld_fraction: fractions[1],
        intermediary_topics: itset.topic_ids.iter().copied().collect(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Evaluates one corpus under every LDA seed of `config`.
pub fn evaluate_corpus(
    corpus: &Corpus,
    labels: &[UserLabel],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let labels = label_map(labels);
    let per_seed = per_seed(&config.seeds, |seed| {
        evaluate_once(corpus, &labels, config, seed)
    })?;
    Ok(EvalReport::from_results(config.clone(), per_seed))
}

/// For every seed: generate the planted corpus with that seed, ingest it
/// through the regular tokenizer, and evaluate with the same LDA seed.
pub fn evaluate_planted(spec: &SynthSpec, config: &EvalConfig) -> Result<EvalReport> {
    let per_seed = per_seed(&config.seeds, |seed| {
        let spec = SynthSpec {
            rng_seed: seed,
            ..spec.clone()
        };
        let synth = generate(&spec)?;
        let labels = synth.label_map();
        let corpus = Corpus::from_tweets(synth.tweets, Tokenizer::default(), 0);
        evaluate_once(&corpus, &labels, config, seed)
    })?;
    Ok(EvalReport::from_results(config.clone(), per_seed))
}

/// Runs `f` for every seed on scoped threads, keeping seed order.
fn per_seed<F>(seeds: &[u64], f: F) -> Result<Vec<SeedResult>>
where
    F: Fn(u64) -> Result<SeedResult> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(workers) {
        let results: Vec<Result<SeedResult>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| {
                    let f = &f;
                    s.spawn(move || f(seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation thread panicked"))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}
