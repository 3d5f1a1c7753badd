//! Ingestion, tokenization and partitioning of timestamped posts.
//!
//! Records arrive as newline-delimited JSON objects with the fields `id`,
//! `created_at` (RFC 3339 / ISO-8601 with a zone), `user_id` and `text`.
//! Malformed lines are collected into a rejection list rather than aborting
//! the stream.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, TimeDelta, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde_json::Value;

use crate::error::{Error, Result};

/// One ingested post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub user_id: String,
    pub text: String,
}

impl Tweet {
    pub fn new(
        id: impl Into<String>,
        timestamp: DateTime<Utc>,
        user_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Tweet {
            id: id.into(),
            timestamp,
            user_id: user_id.into(),
            text: text.into(),
        }
    }

    /// Lowercased hashtags in occurrence order, duplicates kept.
    pub fn hashtags(&self) -> Vec<String> {
        extract_hashtags(&self.text)
    }

    pub fn has_hashtag(&self, tag: &str) -> bool {
        self.hashtags().iter().any(|t| t == tag)
    }
}

/// A line of input that could not be turned into a [`Tweet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRecord {
    /// Index of the shard the line came from (0 for a single stream).
    pub shard: usize,
    /// 1-based line number within the shard.
    pub line: usize,
    pub reason: String,
}

/// Result of parsing one or more record streams.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedStream {
    pub tweets: Vec<Tweet>,
    pub rejected: Vec<RejectedRecord>,
}

fn string_field(obj: &serde_json::Map<String, Value>, name: &str) -> std::result::Result<String, String> {
    match obj.get(name) {
        None | Some(Value::Null) => Err(format!("missing field `{name}`")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) if name != "text" && name != "created_at" => Ok(n.to_string()),
        Some(_) => Err(format!("field `{name}` is not a string")),
    }
}

fn parse_record(line: &str) -> std::result::Result<Tweet, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let id = string_field(obj, "id")?;
    if id.is_empty() {
        return Err("empty `id`".into());
    }
    let created_at = string_field(obj, "created_at")?;
    let timestamp = DateTime::parse_from_rfc3339(created_at.trim())
        .map_err(|e| format!("unparseable `created_at` {created_at:?}: {e}"))?
        .with_timezone(&Utc);
    // second precision
    let timestamp = DateTime::from_timestamp(timestamp.timestamp(), 0).ok_or("timestamp out of range")?;
    let user_id = string_field(obj, "user_id")?;
    let text = string_field(obj, "text")?;
    Ok(Tweet {
        id,
        timestamp,
        user_id,
        text,
    })
}

/// Writes tweets in the newline-delimited form read by [`parse_tweet_stream`].
pub fn write_tweet_stream<W: Write>(tweets: &[Tweet], mut out: W) -> Result<()> {
    for t in tweets {
        let record = serde_json::json!({
            "id": t.id,
            "created_at": format_instant(t.timestamp),
            "user_id": t.user_id,
            "text": t.text,
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}

/// Tweets whose id was already seen earlier in the merged stream are moved
/// to the rejection list.
fn reject_duplicates(parsed: Vec<ShardRecords>) -> ParsedStream {
    let mut seen = HashSet::new();
    let mut out = ParsedStream::default();
    for (shard, tweets, rejected) in parsed {
        let mut dups = Vec::new();
        for (line, t) in tweets {
            if seen.insert(t.id.clone()) {
                out.tweets.push(t);
            } else {
                dups.push(RejectedRecord {
                    shard,
                    line,
                    reason: format!("duplicate id {:?}", t.id),
                });
            }
        }
        let mut rejected = rejected;
        rejected.extend(dups);
        rejected.sort_by_key(|r| r.line);
        out.rejected.extend(rejected);
    }
    out
}

/// Parses a newline-delimited record stream.
///
/// Blank lines are skipped. Every other line either yields a [`Tweet`] or a
/// [`RejectedRecord`] carrying its line number; a bad line never aborts the
/// stream. Only a failing reader produces an `Err`.
pub fn parse_tweet_stream<R: BufRead>(input: R) -> Result<ParsedStream> {
    Ok(reject_duplicates(vec![track_lines(input, 0)?]))
}

/// Parses several files in parallel and merges them in the given order.
pub fn parse_tweet_files<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<ParsedStream> {
    let parsed: Vec<Result<_>> = paths
        .par_iter()
        .enumerate()
        .map(|(shard, p)| {
            let f = std::fs::File::open(p.as_ref())?;
            track_lines(std::io::BufReader::new(f), shard)
        })
        .collect();
    let parsed = parsed.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reject_duplicates(parsed))
}

type ShardRecords = (usize, Vec<(usize, Tweet)>, Vec<RejectedRecord>);

fn track_lines<R: BufRead>(mut input: R, shard: usize) -> Result<ShardRecords> {
    let mut tweets = Vec::new();
    let mut rejected = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim_end_matches(['\n', '\r']),
            Err(e) => {
                rejected.push(RejectedRecord {
                    shard,
                    line: line_no,
                    reason: format!("invalid UTF-8: {e}"),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(t) => tweets.push((line_no, t)),
            Err(reason) => rejected.push(RejectedRecord {
                shard,
                line: line_no,
                reason,
            }),
        }
    }
    Ok((shard, tweets, rejected))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits already-cleaned text into words and `#tag` tokens.
///
/// Any character that is neither a word character nor `#` separates tokens.
/// `#` starts a new hashtag token and is dropped when no word character
/// follows it.
fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() && cur != "#" {
            out.push(std::mem::take(cur));
        }
        cur.clear();
    };
    for c in text.chars() {
        if is_word_char(c) {
            cur.push(c);
        } else if c == '#' {
            flush(&mut cur, &mut out);
            cur.push('#');
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}

/// Every maximal `#` + word-character run, lowercased and without the `#`.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    split_words(text)
        .into_iter()
        .filter_map(|t| t.strip_prefix('#').map(str::to_lowercase))
        .collect()
}

static STRIP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"https?://\S*|www\.\S*|@[\p{Alphabetic}\p{N}_]+").expect("static regex"));

/// Lowercase stop words; an external input, one token per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    entries: BTreeSet<String>,
}

impl StopList {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = entries
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        StopList { entries }
    }

    /// Reads one token per line; blank lines and lines starting with `#` are ignored.
    pub fn from_reader<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = Vec::new();
        for line in input.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            lines.push(t.to_string());
        }
        Ok(StopList::new(lines))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reusable tokenizer bound to a set of anchors and a stop list.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    anchors: BTreeSet<String>,
    stoplist: StopList,
}

impl Tokenizer {
    pub fn new<I, S>(anchors: I, stoplist: StopList) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Tokenizer {
            anchors: anchors
                .into_iter()
                .map(|a| a.as_ref().trim_start_matches('#').to_lowercase())
                .collect(),
            stoplist,
        }
    }

    pub fn anchors(&self) -> &BTreeSet<String> {
        &self.anchors
    }

    /// Lowercases, strips handles and links, splits on punctuation and drops
    /// `rt`, stop words and anchor hashtags. Other hashtags stay as `#tag`.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        let cleaned = STRIP.replace_all(&lower, " ");
        split_words(&cleaned)
            .into_iter()
            .filter(|t| t != "rt")
            .filter(|t| !self.stoplist.contains(t))
            .filter(|t| match t.strip_prefix('#') {
                Some(tag) => !self.anchors.contains(tag),
                None => true,
            })
            .collect()
    }
}

/// One-shot form of [`Tokenizer::tokenize`].
pub fn tokenize(text: &str, anchors: &BTreeSet<String>, stoplist: &StopList) -> Vec<String> {
    Tokenizer::new(anchors, stoplist.clone()).tokenize(text)
}

/// Splits tweets into the corpora of two anchors. A tweet carrying both
/// anchors lands in both outputs.
pub fn partition_by_anchor(tweets: &[Tweet], anchor_a: &str, anchor_b: &str) -> (Vec<Tweet>, Vec<Tweet>) {
    let a = anchor_a.trim_start_matches('#').to_lowercase();
    let b = anchor_b.trim_start_matches('#').to_lowercase();
    let mut corpus_a = Vec::new();
    let mut corpus_b = Vec::new();
    for t in tweets {
        let tags = t.hashtags();
        if tags.contains(&a) {
            corpus_a.push(t.clone());
        }
        if tags.contains(&b) {
            corpus_b.push(t.clone());
        }
    }
    (corpus_a, corpus_b)
}

/// Tweets of one anchor restricted to a half-open UTC interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusWindow {
    pub anchor: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub tweets: Vec<Tweet>,
}

impl CorpusWindow {
    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

/// Keeps the tweets with `start <= timestamp < end` that carry `anchor`,
/// preserving order.
pub fn filter_window(tweets: &[Tweet], anchor: &str, start: DateTime<Utc>, end: DateTime<Utc>) -> Result<CorpusWindow> {
    if start >= end {
        return Err(Error::InvalidInterval {
            start: start.to_rfc3339(),
            end: end.to_rfc3339(),
        });
    }
    let anchor = anchor.trim_start_matches('#').to_lowercase();
    let tweets = tweets
        .iter()
        .filter(|t| t.timestamp >= start && t.timestamp < end)
        .filter(|t| t.has_hashtag(&anchor))
        .cloned()
        .collect();
    Ok(CorpusWindow {
        anchor,
        start,
        end,
        tweets,
    })
}

/// Tweet counts per bin. Bins are aligned to multiples of `bin` since the
/// Unix epoch, so daily bins start at UTC midnight. Empty bins between the
/// first and last observed bin are emitted with count 0.
pub fn frequency_timeseries(tweets: &[Tweet], bin: TimeDelta) -> Result<Vec<(DateTime<Utc>, u64)>> {
    let secs = bin.num_seconds();
    if secs <= 0 {
        return Err(Error::Domain(format!(
            "bin width must be at least one second, got {bin}"
        )));
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for t in tweets {
        *counts.entry(t.timestamp.timestamp().div_euclid(secs)).or_default() += 1;
    }
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Ok(Vec::new());
    };
    (first..=last)
        .map(|b| {
            let start =
                DateTime::from_timestamp(b * secs, 0).ok_or_else(|| Error::Domain("bin out of range".into()))?;
            Ok((start, counts.get(&b).copied().unwrap_or(0)))
        })
        .collect()
}

/// Writes a series as CSV with header `bin_start,count`.
pub fn write_timeseries_csv<W: Write>(series: &[(DateTime<Utc>, u64)], mut out: W) -> Result<()> {
    writeln!(out, "bin_start,count")?;
    for (start, count) in series {
        writeln!(out, "{},{}", format_instant(*start), count)?;
    }
    Ok(())
}

/// ISO-8601 UTC with a `Z` suffix and second precision.
pub fn format_instant(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn parse_instant(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Domain(format!("invalid timestamp {s:?}: {e}")))
}

/// Multiset of tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl TokenBag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one occurrence; empty tokens are ignored.
    pub fn add(&mut self, token: &str) {
        self.add_n(token, 1);
    }

    pub fn add_n(&mut self, token: &str, n: u64) {
        if token.is_empty() || n == 0 {
            return;
        }
        *self.counts.entry(token.to_string()).or_default() += n;
        self.total += n;
    }

    pub fn extend<I, S>(&mut self, tokens: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for t in tokens {
            self.add(t.as_ref());
        }
    }

    pub fn remove_all(&mut self, token: &str) {
        if let Some(c) = self.counts.remove(token) {
            self.total -= c;
        }
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenBag {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut bag = TokenBag::new();
        bag.extend(iter);
        bag
    }
}

/// Normalized token frequencies. All probabilities are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: BTreeMap<String, f64>,
    total_tokens: u64,
}

impl TokenDistribution {
    /// Builds a distribution from explicit probabilities, dropping zeros.
    /// Fails when the mass is not 1 within 1e-9 or any value is negative.
    pub fn from_probs<I, S>(probs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (k, p) in probs {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Domain(format!("invalid probability {p}")));
            }
            if p > 0.0 {
                *map.entry(k.into()).or_insert(0.0) += p;
            }
        }
        let mass = crate::infotheory::compensated_sum(map.values().copied());
        if map.is_empty() || (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {mass}, not 1")));
        }
        Ok(TokenDistribution {
            probs: map,
            total_tokens: 0,
        })
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.probs.contains_key(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }
}

/// `p_i = count_i / total`.
pub fn build_distribution(bag: &TokenBag) -> Result<TokenDistribution> {
    if bag.total() == 0 {
        return Err(Error::EmptyCorpus("token bag is empty".into()));
    }
    let total = bag.total() as f64;
    Ok(TokenDistribution {
        probs: bag.iter().map(|(k, c)| (k.to_string(), c as f64 / total)).collect(),
        total_tokens: bag.total(),
    })
}
