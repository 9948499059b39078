//! Data portraits: interests for the word cloud, the activity histogram,
//! interest ↔ bin links, per-bin popular tweets, and the political flag.
//!
//! Layout (font sizes, word placement) belongs to the UI; a portrait only
//! carries weights, kinds and colors.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, Corpus, InterestKind, TweetRecord};
use crate::error::{Error, Result};

/// Interests checked against the political keyword list.
pub const POLITICAL_TOP_INTERESTS: usize = 50;

/// Rotation applied to every word in the cloud.
pub const WORD_ROTATION_DEGREES: i32 = -7;

pub const HASHTAG_COLOR: &str = "#7570b3";
pub const MENTION_COLOR: &str = "#d95f02";
pub const WORD_COLOR: &str = "#1b9e77";

const DEFAULT_POLITICAL_KEYWORDS: &str = include_str!("../data/political_keywords_cl.txt");

pub fn kind_color(kind: InterestKind) -> &'static str {
    match kind {
        InterestKind::Hashtag => HASHTAG_COLOR,
        InterestKind::Mention => MENTION_COLOR,
        InterestKind::Word => WORD_COLOR,
    }
}

/// Sturges' rule `⌈log₂ n + 1⌉`, computed in integers. Zero for `n = 0`.
pub fn sturges_bins(n: usize) -> usize {
    match n {
        0 => 0,
        1 => 1,
        _ => (usize::BITS - (n - 1).leading_zeros()) as usize + 1,
    }
}

/// Case-insensitive keyword list; a leading `#` is ignored on both sides.
#[derive(Debug, Clone, Default)]
pub struct PoliticalKeywords {
    words: HashSet<String>,
}

impl PoliticalKeywords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        PoliticalKeywords {
            words: words
                .into_iter()
                .map(|w| Self::key(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// The bundled illustrative Chilean-politics list.
    pub fn starter() -> Self {
        Self::parse(DEFAULT_POLITICAL_KEYWORDS)
    }

    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("# ") && *l != "#"),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    fn key(word: &str) -> String {
        let n = normalize(word.trim());
        n.strip_prefix('#').map(str::to_string).unwrap_or(n)
    }

    pub fn matches(&self, surface: &str) -> bool {
        self.words.contains(&Self::key(surface))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitInterest {
    pub surface: String,
    pub kind: InterestKind,
    pub frequency: u32,
    /// Frequency relative to the most frequent interest, in (0, 1].
    pub weight: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub count: u32,
    pub top_tweet_id: Option<String>,
    pub top_popularity: u64,
    pub circle_radius_hint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortraitLink {
    pub interest: usize,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitTweet {
    pub tweet_id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub popularity: u64,
    pub is_retweet: bool,
    pub bin: usize,
    /// Indices of the portrait interests this tweet contains.
    pub interests: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub user_id: String,
    pub display_name: String,
    pub avatar_url: Option<String>,
    pub bio: Option<String>,
    pub interests: Vec<PortraitInterest>,
    pub bins: Vec<HistogramBin>,
    pub links: Vec<PortraitLink>,
    pub tweets: Vec<PortraitTweet>,
    pub political_content: bool,
    pub generated_at: DateTime<Utc>,
    pub palette: BTreeMap<InterestKind, String>,
    pub rotation_degrees: i32,
}

fn palette() -> BTreeMap<InterestKind, String> {
    [
        InterestKind::Hashtag,
        InterestKind::Mention,
        InterestKind::Word,
    ]
    .into_iter()
    .map(|k| (k, kind_color(k).to_string()))
    .collect()
}

/// Whether any of the first [`POLITICAL_TOP_INTERESTS`] surfaces is a
/// political keyword.
pub fn has_political_content<'a, I>(interests: I, keywords: &PoliticalKeywords) -> bool
where
    I: IntoIterator<Item = &'a str>,
{
    interests
        .into_iter()
        .take(POLITICAL_TOP_INTERESTS)
        .any(|s| keywords.matches(s))
}

/// Splits `[first, last]` into `k` equal-width bins and returns each
/// timestamp's bin index. Bin `i` holds `t` with
/// `first + i·span/k ≤ t < first + (i+1)·span/k`; the last bin also holds
/// `last`. Also returns the bin boundaries, rounded up to the nanosecond.
fn assign_bins(
    times: &[DateTime<Utc>],
    k: usize,
) -> (Vec<usize>, Vec<(DateTime<Utc>, DateTime<Utc>)>) {
    let first = *times.iter().min().expect("non-empty");
    let last = *times.iter().max().expect("non-empty");
    let span = (last - first).num_seconds() as i128;
    let kk = k as i128;
    let boundary = |i: i128| {
        let nanos = span * 1_000_000_000 * i;
        let ceil = (nanos + kk - 1).div_euclid(kk);
        first + Duration::nanoseconds(ceil as i64)
    };
    let bounds = (0..kk).map(|i| (boundary(i), boundary(i + 1))).collect();
    let index = times
        .iter()
        .map(|t| {
            if span == 0 {
                return 0;
            }
            let offset = (*t - first).num_seconds() as i128;
            ((offset * kk / span) as usize).min(k - 1)
        })
        .collect();
    (index, bounds)
}

/// Builds the portrait of `user_id` from the corpus.
pub fn build_portrait(
    corpus: &Corpus,
    user_id: &str,
    keywords: &PoliticalKeywords,
    generated_at: DateTime<Utc>,
) -> Result<Portrait> {
    let doc = corpus
        .document(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    let tweets: Vec<&TweetRecord> = corpus.user_tweets(user_id).collect();
    if tweets.is_empty() {
        return Err(Error::NoTweets(user_id.to_string()));
    }

    let max_freq = doc.interests.first().map_or(1, |i| i.frequency).max(1) as f64;
    let interests: Vec<PortraitInterest> = doc
        .interests
        .iter()
        .map(|i| PortraitInterest {
            surface: i.surface.clone(),
            kind: i.kind,
            frequency: i.frequency,
            weight: i.frequency as f64 / max_freq,
            color: kind_color(i.kind).to_string(),
        })
        .collect();
    let interest_index: BTreeMap<&str, usize> = interests
        .iter()
        .enumerate()
        .map(|(i, x)| (x.surface.as_str(), i))
        .collect();

    let k = sturges_bins(tweets.len());
    let times: Vec<DateTime<Utc>> = tweets.iter().map(|t| t.created_at).collect();
    let (bin_of, bounds) = assign_bins(&times, k);

    let tokenizer = corpus.tokenizer();
    let mut portrait_tweets = Vec::with_capacity(tweets.len());
    let mut links = BTreeSet::new();
    for (t, &bin) in tweets.iter().zip(&bin_of) {
        let contained: BTreeSet<usize> = tokenizer
            .tokenize(&t.text)
            .iter()
            .filter_map(|s| interest_index.get(s.as_str()).copied())
            .collect();
        for &i in &contained {
            links.insert(PortraitLink { interest: i, bin });
        }
        portrait_tweets.push(PortraitTweet {
            tweet_id: t.tweet_id.clone(),
            text: t.text.clone(),
            created_at: t.created_at,
            popularity: t.popularity(),
            is_retweet: t.is_retweet,
            bin,
            interests: contained.into_iter().collect(),
        });
    }

    let mut bins: Vec<HistogramBin> = bounds
        .into_iter()
        .map(|(start, end)| HistogramBin {
            start,
            end,
            count: 0,
            top_tweet_id: None,
            top_popularity: 0,
            circle_radius_hint: 1.0,
        })
        .collect();
    for t in &portrait_tweets {
        let b = &mut bins[t.bin];
        b.count += 1;
        let better = match &b.top_tweet_id {
            None => true,
            Some(id) => {
                t.popularity > b.top_popularity
                    || (t.popularity == b.top_popularity && t.tweet_id < *id)
            }
        };
        if better {
            b.top_tweet_id = Some(t.tweet_id.clone());
            b.top_popularity = t.popularity;
        }
    }
    let max_pop = bins.iter().map(|b| b.top_popularity).max().unwrap_or(0);
    for b in &mut bins {
        b.circle_radius_hint = if max_pop == 0 {
            1.0
        } else {
            0.5 + 0.5 * (b.top_popularity as f64 / max_pop as f64)
        };
    }

    let profile = corpus.profile(user_id).cloned().unwrap_or_default();
    Ok(Portrait {
        user_id: user_id.to_string(),
        display_name: profile.name.clone().unwrap_or_else(|| user_id.to_string()),
        avatar_url: profile.profile_image_url.clone(),
        bio: profile.description.clone(),
        political_content: has_political_content(
            interests.iter().map(|i| i.surface.as_str()),
            keywords,
        ),
        interests,
        bins,
        links: links.into_iter().collect(),
        tweets: portrait_tweets,
        generated_at,
        palette: palette(),
        rotation_degrees: WORD_ROTATION_DEGREES,
    })
}

impl Portrait {
    /// Most popular tweet in a bin, optionally restricted to tweets that
    /// contain the interest at `keyword`. Ties go to the smaller tweet id.
    pub fn bin_top_tweet(&self, bin: usize, keyword: Option<usize>) -> Option<&str> {
        self.tweets
            .iter()
            .filter(|t| t.bin == bin)
            .filter(|t| keyword.is_none_or(|k| t.interests.contains(&k)))
            .max_by(|a, b| {
                a.popularity
                    .cmp(&b.popularity)
                    .then_with(|| b.tweet_id.cmp(&a.tweet_id))
            })
            .map(|t| t.tweet_id.as_str())
    }

    /// Bins linked to an interest.
    pub fn bins_of_interest(&self, interest: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|l| l.interest == interest)
            .map(|l| l.bin)
            .collect()
    }

    /// Interests linked to a bin.
    pub fn interests_of_bin(&self, bin: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|l| l.bin == bin)
            .map(|l| l.interest)
            .collect()
    }

    pub fn interest_index(&self, surface: &str) -> Option<usize> {
        self.interests.iter().position(|i| i.surface == surface)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Tokenizer, TweetRecord};
    use chrono::TimeZone;

    fn tweet(id: &str, text: &str, secs: i64, pop: u64) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            user_id: "u".into(),
            text: text.into(),
            created_at: Utc.timestamp_opt(1_400_000_000 + secs, 0).unwrap(),
            retweet_count: pop,
            favorite_count: 0,
            is_retweet: false,
            mentions: vec![],
            hashtags: vec![],
            urls: vec![],
            user: None,
        }
    }

    fn portrait_of(tweets: Vec<TweetRecord>, keywords: &PoliticalKeywords) -> Portrait {
        let corpus = Corpus::from_tweets(tweets, Tokenizer::default(), 0);
        build_portrait(&corpus, "u", keywords, Utc.timestamp_opt(0, 0).unwrap()).unwrap()
    }

    #[test]
    fn sturges_values() {
        let expected = [
            (1, 1),
            (2, 2),
            (3, 3),
            (4, 3),
            (5, 4),
            (10, 5),
            (100, 8),
            (1000, 11),
        ];
        for (n, k) in expected {
            assert_eq!(sturges_bins(n), k, "n={n}");
            assert_eq!(k, ((n as f64).log2() + 1.0).ceil() as usize);
        }
    }

    #[test]
    fn single_tweet_portrait() {
        let p = portrait_of(
            vec![tweet("1", "hola mundo", 0, 3)],
            &PoliticalKeywords::default(),
        );
        assert_eq!(p.bins.len(), 1);
        assert_eq!(p.bins[0].count, 1);
        assert_eq!(p.bins[0].top_tweet_id.as_deref(), Some("1"));
        assert_eq!(p.bins[0].circle_radius_hint, 1.0);
        assert_eq!(p.rotation_degrees, -7);
        assert_eq!(p.palette[&InterestKind::Hashtag], "#7570b3");
    }

    #[test]
    fn hundred_tweets_eight_bins() {
        let tweets = (0..100)
            .map(|i| tweet(&format!("{i:03}"), "x", i * 3600, i as u64))
            .collect();
        let p = portrait_of(tweets, &PoliticalKeywords::default());
        assert_eq!(p.bins.len(), 8);
        assert_eq!(p.bins.iter().map(|b| b.count).sum::<u32>(), 100);
        for w in p.bins.windows(2) {
            assert_eq!(w[0].end, w[1].start);
            assert!(w[0].start < w[0].end);
        }
        // the latest tweet falls in the last bin
        assert_eq!(p.tweets.last().unwrap().bin, 7);
        for b in &p.bins {
            assert_eq!(b.top_tweet_id.is_some(), b.count > 0);
            assert!(b.circle_radius_hint > 0.0 && b.circle_radius_hint <= 1.0);
        }
    }

    #[test]
    fn bin_membership_respects_boundaries() {
        let tweets = (0..37)
            .map(|i| tweet(&format!("{i:02}"), "x", i * i * 17, 0))
            .collect();
        let p = portrait_of(tweets, &PoliticalKeywords::default());
        let last = p.bins.len() - 1;
        for t in &p.tweets {
            let b = &p.bins[t.bin];
            assert!(b.start <= t.created_at);
            assert!(t.created_at < b.end || (t.bin == last && t.created_at == b.end));
        }
    }

    #[test]
    fn identical_timestamps_share_a_bin() {
        let tweets = (0..4).map(|i| tweet(&i.to_string(), "x", 0, 0)).collect();
        let p = portrait_of(tweets, &PoliticalKeywords::default());
        assert_eq!(p.bins.len(), 3);
        assert_eq!(p.bins[0].count, 4);
    }

    #[test]
    fn links_and_keyword_top_tweet() {
        // a far-away third tweet keeps the first two in the same bin
        let tweets = vec![
            tweet("a", "futbol hoy", 0, 5),
            tweet("b", "musica hoy", 1, 9),
            tweet("c", "otra cosa", 1000, 0),
        ];
        let p = portrait_of(tweets, &PoliticalKeywords::default());
        let bin = p.tweets[0].bin;
        assert_eq!(p.tweets[1].bin, bin);
        let futbol = p.interest_index("futbol").unwrap();
        let nada = p.interests.len();
        assert_eq!(p.bin_top_tweet(bin, None), Some("b"));
        assert_eq!(p.bin_top_tweet(bin, Some(futbol)), Some("a"));
        assert_eq!(p.bin_top_tweet(bin, Some(nada)), None);
        assert!(p.bins_of_interest(futbol).contains(&bin));
        for link in &p.links {
            let surface = &p.interests[link.interest].surface;
            assert!(p
                .tweets
                .iter()
                .any(|t| t.bin == link.bin
                    && Tokenizer::default().tokenize(&t.text).contains(surface)));
        }
    }

    #[test]
    fn empty_bin_has_no_top_tweet() {
        let tweets = vec![
            tweet("a", "x", 0, 1),
            tweet("b", "y", 1, 1),
            tweet("c", "z", 1000, 1),
        ];
        let p = portrait_of(tweets, &PoliticalKeywords::default());
        let empty = p.bins.iter().position(|b| b.count == 0).unwrap();
        assert_eq!(p.bin_top_tweet(empty, None), None);
        assert_eq!(p.bins[empty].top_tweet_id, None);
    }

    #[test]
    fn political_flag() {
        let kw = PoliticalKeywords::new(["elecciones"]);
        let p = portrait_of(vec![tweet("1", "#Elecciones ya", 0, 0)], &kw);
        assert!(p.political_content);
        let p = portrait_of(vec![tweet("1", "#futbol ya", 0, 0)], &kw);
        assert!(!p.political_content);
        assert!(PoliticalKeywords::starter().matches("#Elecciones"));
    }

    #[test]
    fn political_flag_only_looks_at_top_fifty() {
        let kw = PoliticalKeywords::new(["#voto"]);
        let mut surfaces: Vec<String> = (0..60).map(|i| format!("w{i:02}")).collect();
        surfaces.push("voto".into());
        assert!(!has_political_content(
            surfaces.iter().map(String::as_str),
            &kw
        ));
        surfaces.rotate_right(1);
        assert!(has_political_content(
            surfaces.iter().map(String::as_str),
            &kw
        ));
        // order inside the top fifty does not matter
        surfaces[..50].reverse();
        assert!(has_political_content(
            surfaces.iter().map(String::as_str),
            &kw
        ));
    }

    #[test]
    fn unknown_user() {
        let corpus = Corpus::from_tweets(vec![], Tokenizer::default(), 0);
        let err = build_portrait(&corpus, "x", &PoliticalKeywords::default(), Utc::now());
        assert!(matches!(err, Err(Error::UnknownUser(_))));
    }
}
