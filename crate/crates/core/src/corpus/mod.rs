//! Micro-post corpora: NDJSON ingestion, per-user documents and interest
//! extraction.

mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

pub use tokenize::{normalize, parse_stopwords, reduce_url, Tokenizer, MAX_NGRAM};

use crate::error::{Error, Result};

/// Number of interests kept per user.
pub const DEFAULT_INTEREST_LIMIT: usize = 300;

/// Longest tweet text accepted, in code points.
pub const MAX_TEXT_CHARS: usize = 280;

pub const TWEETS_FILE: &str = "tweets.ndjson";
pub const DOCUMENTS_FILE: &str = "documents.ndjson";
pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Serde helpers for second-precision ISO-8601 UTC timestamps.
pub mod timestamp {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&ts.format(FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
        DateTime::parse_from_rfc3339(raw).map(|t| t.with_timezone(&Utc))
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(
            ts: &Option<DateTime<Utc>>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            match ts {
                Some(ts) => s.collect_str(&ts.format(FORMAT)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DateTime<Utc>>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|raw| parse(&raw).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

/// Author metadata optionally embedded in a tweet line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    #[serde(default)]
    pub followers_count: u64,
    #[serde(default)]
    pub following_count: u64,
    #[serde(
        default,
        with = "timestamp::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_image_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    pub text: String,
    #[serde(with = "timestamp")]
    pub created_at: DateTime<Utc>,
    pub retweet_count: u64,
    pub favorite_count: u64,
    pub is_retweet: bool,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<UserProfile>,
}

/// Wire shape: entity lists may be absent and are then derived from text.
#[derive(Deserialize)]
struct RawTweet {
    tweet_id: String,
    user_id: String,
    text: String,
    #[serde(with = "timestamp")]
    created_at: DateTime<Utc>,
    retweet_count: u64,
    favorite_count: u64,
    is_retweet: bool,
    mentions: Option<Vec<String>>,
    hashtags: Option<Vec<String>>,
    urls: Option<Vec<String>>,
    user: Option<UserProfile>,
}

impl TweetRecord {
    /// Popularity of a tweet: retweets plus favorites.
    pub fn popularity(&self) -> u64 {
        self.retweet_count.saturating_add(self.favorite_count)
    }

    /// Parses one NDJSON line, filling in entity lists from the text when
    /// they are not supplied.
    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let raw: RawTweet = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.tweet_id.is_empty() || raw.user_id.is_empty() {
            return Err("empty tweet_id or user_id".into());
        }
        if raw.text.chars().count() > MAX_TEXT_CHARS {
            return Err(format!("text longer than {MAX_TEXT_CHARS} code points"));
        }
        let (mentions, hashtags, urls) = extract_entities(&raw.text);
        Ok(TweetRecord {
            tweet_id: raw.tweet_id,
            user_id: raw.user_id,
            created_at: raw.created_at.trunc_subsecs(0),
            retweet_count: raw.retweet_count,
            favorite_count: raw.favorite_count,
            is_retweet: raw.is_retweet,
            mentions: raw.mentions.unwrap_or(mentions),
            hashtags: raw.hashtags.unwrap_or(hashtags),
            urls: raw.urls.unwrap_or(urls),
            user: raw.user,
            text: raw.text,
        })
    }
}

/// Extracts (mentions, hashtags, urls) from raw text, without sigils.
pub fn extract_entities(text: &str) -> (Vec<String>, Vec<String>, Vec<String>) {
    let (mut mentions, mut hashtags, mut urls) = (Vec::new(), Vec::new(), Vec::new());
    for piece in text.split_whitespace() {
        let is_url = piece.starts_with("http://") || piece.starts_with("https://");
        if is_url {
            urls.push(piece.to_string());
            continue;
        }
        let mut rest = piece;
        while let Some(pos) = rest.find(['#', '@']) {
            let sigil = rest.as_bytes()[pos];
            let tail = &rest[pos + 1..];
            let end = tail
                .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                .unwrap_or(tail.len());
            if end > 0 {
                let name = tail[..end].to_string();
                if sigil == b'#' {
                    hashtags.push(name);
                } else {
                    mentions.push(name);
                }
            }
            rest = &tail[end..];
        }
    }
    (mentions, hashtags, urls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterestKind {
    Hashtag,
    Mention,
    Word,
}

impl InterestKind {
    pub fn of(surface: &str) -> Self {
        if surface.starts_with('#') {
            InterestKind::Hashtag
        } else if surface.starts_with('@') {
            InterestKind::Mention
        } else {
            InterestKind::Word
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterestToken {
    pub surface: String,
    pub kind: InterestKind,
    pub frequency: u32,
}

/// Ranks token frequencies: frequency descending, then surface ascending,
/// truncated to `limit`.
pub fn extract_interests<'a, I>(counts: I, limit: usize) -> Vec<InterestToken>
where
    I: IntoIterator<Item = (&'a str, u32)>,
{
    let mut all: Vec<(&str, u32)> = counts.into_iter().filter(|(_, n)| *n > 0).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.truncate(limit);
    all.into_iter()
        .map(|(surface, frequency)| InterestToken {
            surface: surface.to_string(),
            kind: InterestKind::of(surface),
            frequency,
        })
        .collect()
}

/// Bidirectional token id ↔ surface map. Ids follow lexicographic order of
/// surfaces, so a vocabulary built from the same tokens is always identical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    surfaces: Vec<String>,
    #[serde(skip)]
    ids: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(surfaces: Vec<String>) -> Self {
        let ids = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Vocabulary { surfaces, ids }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.surfaces
    }
}

impl Vocabulary {
    pub fn from_surfaces<I: IntoIterator<Item = String>>(surfaces: I) -> Self {
        let set: BTreeSet<String> = surfaces.into_iter().collect();
        Vocabulary::from(set.into_iter().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.ids.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDocument {
    pub user_id: String,
    /// Token id → count over all of the user's tweets.
    pub tokens: BTreeMap<u32, u32>,
    /// Tweet ids in chronological order.
    pub tweet_ids: Vec<String>,
    pub interests: Vec<InterestToken>,
    pub follower_count: u64,
    pub following_count: u64,
    pub account_age_days: f64,
}

impl UserDocument {
    pub fn token_count(&self) -> u64 {
        self.tokens.values().map(|&n| n as u64).sum()
    }

    /// Expands the bag into a flat list of token ids (ascending id order).
    pub fn token_list(&self) -> Vec<u32> {
        self.tokens
            .iter()
            .flat_map(|(&id, &n)| std::iter::repeat_n(id, n as usize))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub users: usize,
    pub tweets: usize,
    pub skipped: usize,
    pub vocabulary: usize,
    pub interest_limit: usize,
}

/// An ingested, immutable corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    tweets: Vec<TweetRecord>,
    tweet_index: BTreeMap<String, usize>,
    /// Per user: indices into `tweets`, chronological.
    by_user: BTreeMap<String, Vec<usize>>,
    profiles: BTreeMap<String, UserProfile>,
    documents: BTreeMap<String, UserDocument>,
    vocabulary: Vocabulary,
    tokenizer: Tokenizer,
    skipped: usize,
    interest_limit: usize,
}

impl Corpus {
    /// Reads an NDJSON tweet file. Malformed lines and duplicate tweet ids are
    /// skipped and counted.
    pub fn ingest(path: &Path, tokenizer: Tokenizer) -> Result<Corpus> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tweets = Vec::new();
        let mut seen = HashSet::new();
        let mut skipped = 0;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match TweetRecord::parse_line(&line) {
                Ok(tweet) if seen.insert(tweet.tweet_id.clone()) => tweets.push(tweet),
                Ok(tweet) => {
                    warn!(line = lineno + 1, tweet_id = %tweet.tweet_id, "duplicate tweet id");
                    skipped += 1;
                }
                Err(reason) => {
                    warn!(line = lineno + 1, %reason, "skipping malformed tweet");
                    skipped += 1;
                }
            }
        }
        Ok(Corpus::from_tweets(tweets, tokenizer, skipped))
    }

    /// Builds a corpus from already-validated tweets. Tweets with duplicate
    /// ids after the first are dropped.
    pub fn from_tweets(tweets: Vec<TweetRecord>, tokenizer: Tokenizer, skipped: usize) -> Corpus {
        Corpus::build(tweets, tokenizer, skipped, DEFAULT_INTEREST_LIMIT)
    }

    pub fn with_interest_limit(self, limit: usize) -> Corpus {
        let Corpus {
            tweets,
            tokenizer,
            skipped,
            ..
        } = self;
        Corpus::build(tweets, tokenizer, skipped, limit.max(1))
    }

    fn build(
        mut tweets: Vec<TweetRecord>,
        tokenizer: Tokenizer,
        skipped: usize,
        interest_limit: usize,
    ) -> Corpus {
        let mut seen = HashSet::new();
        tweets.retain(|t| seen.insert(t.tweet_id.clone()));
        tweets.sort_by(|a, b| {
            (&a.user_id, a.created_at, &a.tweet_id).cmp(&(&b.user_id, b.created_at, &b.tweet_id))
        });

        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut tweet_index = BTreeMap::new();
        let mut profiles: BTreeMap<String, UserProfile> = BTreeMap::new();
        for (i, t) in tweets.iter().enumerate() {
            by_user.entry(t.user_id.clone()).or_default().push(i);
            tweet_index.insert(t.tweet_id.clone(), i);
            // latest embedded profile wins
            if let Some(p) = &t.user {
                profiles.insert(t.user_id.clone(), p.clone());
            }
        }

        let mut user_counts: BTreeMap<&str, BTreeMap<String, u32>> = BTreeMap::new();
        for t in &tweets {
            let counts = user_counts.entry(t.user_id.as_str()).or_default();
            for token in tokenizer.tokenize(&t.text) {
                *counts.entry(token).or_default() += 1;
            }
        }
        let vocabulary = Vocabulary::from_surfaces(
            user_counts
                .values()
                .flat_map(|c| c.keys().cloned())
                .collect::<BTreeSet<_>>(),
        );

        let mut documents = BTreeMap::new();
        for (user_id, indices) in &by_user {
            let counts = user_counts.remove(user_id.as_str()).unwrap_or_default();
            let tokens = counts
                .iter()
                .map(|(s, &n)| (vocabulary.id(s).expect("token in vocabulary"), n))
                .collect();
            let interests =
                extract_interests(counts.iter().map(|(s, &n)| (s.as_str(), n)), interest_limit);
            let profile = profiles.get(user_id).cloned().unwrap_or_default();
            let first = tweets[indices[0]].created_at;
            let last = tweets[*indices.last().expect("non-empty")].created_at;
            let age_from = profile.created_at.unwrap_or(first).min(first);
            let account_age_days = ((last - age_from).num_seconds() as f64 / 86_400.0).max(1.0);
            documents.insert(
                user_id.clone(),
                UserDocument {
                    user_id: user_id.clone(),
                    tokens,
                    tweet_ids: indices
                        .iter()
                        .map(|&i| tweets[i].tweet_id.clone())
                        .collect(),
                    interests,
                    follower_count: profile.followers_count,
                    following_count: profile.following_count,
                    account_age_days,
                },
            );
        }

        Corpus {
            tweets,
            tweet_index,
            by_user,
            profiles,
            documents,
            vocabulary,
            tokenizer,
            skipped,
            interest_limit,
        }
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn tweet(&self, tweet_id: &str) -> Option<&TweetRecord> {
        self.tweet_index.get(tweet_id).map(|&i| &self.tweets[i])
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    pub fn user_count(&self) -> usize {
        self.by_user.len()
    }

    pub fn tweet_count(&self) -> usize {
        self.tweets.len()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn interest_limit(&self) -> usize {
        self.interest_limit
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn documents(&self) -> impl Iterator<Item = &UserDocument> {
        self.documents.values()
    }

    pub fn document(&self, user_id: &str) -> Option<&UserDocument> {
        self.documents.get(user_id)
    }

    pub fn profile(&self, user_id: &str) -> Option<&UserProfile> {
        self.profiles.get(user_id)
    }

    /// The user's tweets in chronological order.
    pub fn user_tweets(&self, user_id: &str) -> impl Iterator<Item = &TweetRecord> {
        self.by_user
            .get(user_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.tweets[i])
    }

    pub fn last_activity(&self, user_id: &str) -> Option<DateTime<Utc>> {
        self.by_user
            .get(user_id)
            .and_then(|ix| ix.last())
            .map(|&i| self.tweets[i].created_at)
    }

    /// Timestamp of the newest tweet in the corpus.
    pub fn latest_activity(&self) -> Option<DateTime<Utc>> {
        self.tweets.iter().map(|t| t.created_at).max()
    }

    /// Users whose last tweet falls within `window_hours` before `as_of`
    /// (inclusive on both ends).
    pub fn active_users(&self, as_of: DateTime<Utc>, window_hours: u32) -> Vec<String> {
        let from = as_of - chrono::Duration::hours(window_hours as i64);
        self.by_user
            .keys()
            .filter(|u| {
                self.last_activity(u)
                    .is_some_and(|t| t >= from && t <= as_of)
            })
            .cloned()
            .collect()
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            users: self.user_count(),
            tweets: self.tweet_count(),
            skipped: self.skipped,
            vocabulary: self.vocabulary.len(),
            interest_limit: self.interest_limit,
        }
    }

    /// Writes the corpus directory: normalized tweets, per-user documents,
    /// vocabulary, stopwords and a manifest.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_ndjson(&dir.join(TWEETS_FILE), self.tweets.iter())?;
        write_ndjson(&dir.join(DOCUMENTS_FILE), self.documents.values())?;
        write_json(&dir.join(VOCABULARY_FILE), &self.vocabulary)?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest())?;
        let stop = self.tokenizer.sorted_stopwords().join("\n") + "\n";
        let path = dir.join(STOPWORDS_FILE);
        fs::write(&path, stop).map_err(|e| Error::io(&path, e))
    }

    /// Loads a directory written by [`Corpus::save_dir`].
    pub fn load_dir(dir: &Path) -> Result<Corpus> {
        let tokenizer = Tokenizer::from_stopword_file(&dir.join(STOPWORDS_FILE))?;
        let manifest: CorpusManifest = read_json(&dir.join(MANIFEST_FILE))?;
        let path = dir.join(TWEETS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let tweets = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| Error::json(path.display().to_string(), e))
            })
            .collect::<Result<Vec<TweetRecord>>>()?;
        Ok(Corpus::build(
            tweets,
            tokenizer,
            manifest.skipped,
            manifest.interest_limit.max(1),
        ))
    }
}

pub(crate) fn write_ndjson<'a, T, I>(path: &Path, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path.display().to_string(), e))
}
