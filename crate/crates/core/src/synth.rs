//! Synthetic corpora with known structure, for tests, benchmarks and demos.

use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Tweet;

/// Two anchored corpora sharing a Zipf-distributed background vocabulary.
/// Each side has its own planted words, and one hijack word reaches the
/// second corpus only through a single tweet retweeted many times.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub anchor_a: String,
    pub anchor_b: String,
    pub tweets_per_anchor: usize,
    pub background_vocab: usize,
    pub words_per_tweet: usize,
    pub planted_a: Vec<String>,
    pub planted_b: Vec<String>,
    /// Probability that a tweet carries one of its side's planted words.
    pub planted_rate: f64,
    pub hijack_word: String,
    pub hijack_context: Vec<String>,
    pub hijack_copies: usize,
    /// Size of the topic hashtag pool, shared by both sides.
    pub topics: usize,
    pub max_topics_per_tweet: usize,
    /// Probability that a tweet also mentions the other anchor.
    pub cross_rate: f64,
    pub start: DateTime<Utc>,
    pub span_days: i64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            anchor_a: "rally".into(),
            anchor_b: "counter".into(),
            tweets_per_anchor: 10_000,
            background_vocab: 400,
            words_per_tweet: 8,
            planted_a: vec!["lantern".into(), "harbor".into()],
            planted_b: vec!["granite".into(), "meadow".into()],
            planted_rate: 0.25,
            hijack_word: "takeover".into(),
            hijack_context: vec!["totally".into(), "fake".into(), "outrage".into()],
            hijack_copies: 300,
            topics: 30,
            max_topics_per_tweet: 3,
            cross_rate: 0.02,
            start: Utc.with_ymd_and_hms(2015, 3, 1, 0, 0, 0).unwrap(),
            span_days: 61,
            seed: 7,
        }
    }
}

/// Background word `i`, spelled with letters only.
pub fn background_word(i: usize) -> String {
    let mut s = String::from("bg");
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("nonempty vocabulary")
}

struct Side<'a> {
    anchor: &'a str,
    other: &'a str,
    planted: &'a [String],
}

/// Generates `2 * tweets_per_anchor + hijack_copies` tweets in timestamp order.
pub fn planted_corpus(cfg: &PlantedConfig) -> Vec<Tweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let background = zipf(cfg.background_vocab);
    let topics: Vec<String> = (0..cfg.topics).map(|i| format!("topic{i}")).collect();
    let sides = [
        Side {
            anchor: &cfg.anchor_a,
            other: &cfg.anchor_b,
            planted: &cfg.planted_a,
        },
        Side {
            anchor: &cfg.anchor_b,
            other: &cfg.anchor_a,
            planted: &cfg.planted_b,
        },
    ];
    let span = cfg.span_days * 86_400;
    let mut drafts: Vec<(i64, String, String)> = Vec::new();
    let topic_dist = zipf(topics.len());
    for side in &sides {
        for _ in 0..cfg.tweets_per_anchor {
            let mut words: Vec<String> = (0..cfg.words_per_tweet)
                .map(|_| background_word(background.sample(&mut rng)))
                .collect();
            if !side.planted.is_empty() && rng.random_bool(cfg.planted_rate) {
                let w = &side.planted[rng.random_range(0..side.planted.len())];
                let at = rng.random_range(0..=words.len());
                words.insert(at, w.clone());
            }
            words.push(format!("#{}", side.anchor));
            if rng.random_bool(cfg.cross_rate) {
                words.push(format!("#{}", side.other));
            }
            for _ in 0..rng.random_range(0..=cfg.max_topics_per_tweet) {
                words.push(format!("#{}", topics[topic_dist.sample(&mut rng)]));
            }
            let user = format!("u{}", rng.random_range(0..5_000));
            drafts.push((rng.random_range(0..span), user, words.join(" ")));
        }
    }
    let burst = rng.random_range(0..span - 86_400);
    let original = format!("{} {} #{}", cfg.hijack_word, cfg.hijack_context.join(" "), cfg.anchor_b);
    for i in 0..cfg.hijack_copies {
        let user = format!("h{i}");
        let offset = rng.random_range(0..86_400);
        drafts.push((burst + offset, user, format!("RT @origin: {original}")));
    }
    drafts.sort_by_key(|d| d.0);
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, (secs, user, text))| Tweet::new(format!("{i}"), cfg.start + TimeDelta::seconds(secs), user, text))
        .collect()
}

/// `n_tweets` tweets carrying `#anchor`, a few random filler words and one
/// of `n_tags` hashtags, cycling through the tags so that usage is exactly
/// uniform when `n_tags` divides `n_tweets`. Timestamps are spread evenly
/// over `span_days` from `start`.
pub fn uniform_tag_corpus(
    anchor: &str,
    n_tags: usize,
    n_tweets: usize,
    start: DateTime<Utc>,
    span_days: i64,
    seed: u64,
) -> Vec<Tweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = span_days * 86_400 / n_tweets.max(1) as i64;
    (0..n_tweets)
        .map(|i| {
            let filler: Vec<String> = (0..4).map(|_| background_word(rng.random_range(0..200))).collect();
            Tweet::new(
                format!("{anchor}-{i}"),
                start + TimeDelta::seconds(step * i as i64),
                format!("u{}", rng.random_range(0..1000)),
                format!("{} #{anchor} #{anchor}tag{}", filler.join(" "), i % n_tags),
            )
        })
        .collect()
}
