//! Micro-post tokenizer.
//!
//! Text is NFC-normalized and lowercased, then split on whitespace. Hashtags,
//! mentions and URLs become single tokens. Plain words are grouped into runs
//! and every run yields its unigrams, bigrams and trigrams (joined with `_`).
//! Runs are broken by stopwords, clause punctuation and any hashtag, mention
//! or URL, so n-grams never mix token kinds.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS_ES: &str = include_str!("../../data/stopwords_es.txt");
const DEFAULT_STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// Longest n-gram produced from a word run.
pub const MAX_NGRAM: usize = 3;

/// Characters that end a clause and therefore break an n-gram run.
const CLAUSE_BREAKS: &[char] = &['.', ',', ';', ':', '!', '?', '¡', '¿', '(', ')', '"', '…'];

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^(?:(?:https?://)(?P<a>[^/\s?#]+)|(?:www\.)?(?P<b>[\w-]+(?:\.[\w-]+)*\.[[:alpha:]]{2,}))(?P<rest>[/?#]\S*)?$",
        )
        .expect("valid url regex")
    })
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Parses a stopword list: one word per line, `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize)
        .collect()
}

/// NFC normalization followed by lowercasing.
pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

/// Reduces a URL to its domain plus first path segment, e.g.
/// `https://www.example.com/news/2014/x` becomes `example.com/news`.
pub fn reduce_url(piece: &str) -> Option<String> {
    let caps = url_regex().captures(piece)?;
    let domain = caps
        .name("a")
        .or_else(|| caps.name("b"))
        .map(|m| m.as_str())?;
    let domain = domain.rsplit('@').next().unwrap_or(domain);
    let domain = domain.split(':').next().unwrap_or(domain);
    let domain = domain.strip_prefix("www.").unwrap_or(domain);
    let domain = domain.trim_end_matches(|c: char| !is_word_char(c));
    if domain.is_empty() {
        return None;
    }
    let segment = caps
        .name("rest")
        .and_then(|rest| rest.as_str().strip_prefix('/'))
        .map(|path| {
            path.split(['/', '?', '#'])
                .next()
                .unwrap_or("")
                .trim_end_matches(|c: char| !(is_word_char(c) || c == '-' || c == '.'))
                .trim_end_matches('.')
        })
        .filter(|s| !s.is_empty());
    Some(match segment {
        Some(seg) => format!("{domain}/{seg}"),
        None => domain.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        let mut stopwords = parse_stopwords(DEFAULT_STOPWORDS_ES);
        stopwords.extend(parse_stopwords(DEFAULT_STOPWORDS_EN));
        Tokenizer { stopwords }
    }
}

impl Tokenizer {
    pub fn new(stopwords: HashSet<String>) -> Self {
        Tokenizer { stopwords }
    }

    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Tokenizer::new(parse_stopwords(&text)))
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    /// Sorted stopword list, for persisting alongside a corpus.
    pub fn sorted_stopwords(&self) -> Vec<String> {
        let mut words: Vec<String> = self.stopwords.iter().cloned().collect();
        words.sort();
        words
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let text = normalize(text);
        let mut out = Vec::new();
        let mut run: Vec<&str> = Vec::new();
        for piece in text.split_whitespace() {
            self.piece(piece, &mut run, &mut out);
        }
        flush_run(&mut run, &mut out);
        out
    }

    fn piece<'a>(&self, piece: &'a str, run: &mut Vec<&'a str>, out: &mut Vec<String>) {
        if piece.is_empty() {
            return;
        }
        if let Some(rest) = piece.strip_prefix(['#', '@']) {
            let sigil = &piece[..1];
            let end = rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len());
            flush_run(run, out);
            if end > 0 {
                out.push(format!("{sigil}{}", &rest[..end]));
            }
            self.piece(&rest[end..], run, out);
            return;
        }
        if let Some(url) = reduce_url(piece.trim_end_matches(CLAUSE_BREAKS)) {
            flush_run(run, out);
            out.push(url);
            return;
        }
        let mut start = None;
        for (i, c) in piece.char_indices() {
            if is_word_char(c) {
                if start.is_none() {
                    start = Some(i);
                }
                continue;
            }
            if let Some(s) = start.take() {
                self.word(&piece[s..i], run, out);
            }
            if CLAUSE_BREAKS.contains(&c) {
                flush_run(run, out);
            } else if c == '#' || c == '@' {
                // an embedded sigil starts a new piece
                self.piece(&piece[i..], run, out);
                return;
            }
        }
        if let Some(s) = start {
            self.word(&piece[s..], run, out);
        }
    }

    fn word<'a>(&self, word: &'a str, run: &mut Vec<&'a str>, out: &mut Vec<String>) {
        if self.is_stopword(word) {
            flush_run(run, out);
        } else {
            run.push(word);
        }
    }
}

fn flush_run(run: &mut Vec<&str>, out: &mut Vec<String>) {
    for n in 1..=MAX_NGRAM.min(run.len()) {
        for window in run.windows(n) {
            out.push(window.join("_"));
        }
    }
    run.clear();
}
