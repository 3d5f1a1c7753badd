//! Ranked word-shift reports: which words drive the divergence between two
//! corpora, toward which side, and how diverse the surrounding language is.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_distribution, format_instant, parse_instant, CorpusWindow, StopList, TokenBag, Tokenizer};
use crate::error::{Error, Result};
use crate::infotheory::{jsd, jsd_contributions, word_context_diversity, Direction, JsdWeights};

/// What the mixture weights are proportional to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightBasis {
    /// Total token counts of each bag.
    #[default]
    Tokens,
    /// Number of tweets in each corpus.
    Tweets,
    /// `pi1 = pi2 = 0.5`.
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftConfig {
    /// Number of entries kept; `None` keeps every nonzero contribution.
    pub top_k: Option<usize>,
    /// Direction-side diversity below this marks an entry as retweet-driven.
    pub diversity_threshold_bits: f64,
    /// Tokens seen fewer times than this across both corpora are not reported.
    pub min_occurrences: u64,
    pub weight_basis: WeightBasis,
    /// Share of a word's occurrences coming from one tweet text above which
    /// the entry is marked `single_tweet_dominant`.
    pub dominance_fraction: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            top_k: Some(50),
            diversity_threshold_bits: 3.0,
            min_occurrences: 1,
            weight_basis: WeightBasis::Tokens,
            dominance_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub token: String,
    /// `100 * contribution / total_jsd`.
    pub percent: f64,
    pub direction: Direction,
    /// Context diversity within corpus P; absent when the token does not occur there.
    pub diversity_p_bits: Option<f64>,
    pub diversity_q_bits: Option<f64>,
    pub retweet_driven: bool,
    /// More than the dominance fraction of the word's occurrences on its
    /// direction side come from copies of one tweet. Advisory only.
    pub single_tweet_dominant: bool,
}

impl ShiftEntry {
    /// Diversity on the side the contribution comes from.
    pub fn direction_diversity(&self) -> Option<f64> {
        match self.direction {
            Direction::CorpusP => self.diversity_p_bits,
            Direction::CorpusQ => self.diversity_q_bits,
            Direction::Zero => None,
        }
    }
}

/// Retweet-driven iff the diversity is known and below the threshold.
pub fn is_retweet_driven(direction_side_diversity: Option<f64>, threshold_bits: f64) -> bool {
    direction_side_diversity.is_some_and(|d| d < threshold_bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordShiftReport {
    pub anchor_a: String,
    pub anchor_b: String,
    #[serde(with = "instant")]
    pub window_start: DateTime<Utc>,
    #[serde(with = "instant")]
    pub window_end: DateTime<Utc>,
    pub total_jsd_bits: f64,
    pub weights: JsdWeights,
    pub entries: Vec<ShiftEntry>,
}

pub(crate) mod instant {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_instant(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse_instant(&s).map_err(serde::de::Error::custom)
    }
}

struct TokenizedCorpus {
    tweets: Vec<Vec<String>>,
    bag: TokenBag,
    /// token -> indices of tweets containing it
    index: HashMap<String, Vec<usize>>,
}

impl TokenizedCorpus {
    fn new(window: &CorpusWindow, tokenizer: &Tokenizer) -> Self {
        let tweets: Vec<Vec<String>> = window.tweets.par_iter().map(|t| tokenizer.tokenize(&t.text)).collect();
        let mut bag = TokenBag::new();
        let mut index: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, toks) in tweets.iter().enumerate() {
            bag.extend(toks);
            for t in toks.iter().collect::<BTreeSet<_>>() {
                index.entry(t.clone()).or_default().push(i);
            }
        }
        TokenizedCorpus { tweets, bag, index }
    }

    fn containing(&self, token: &str) -> Vec<&Vec<String>> {
        self.index
            .get(token)
            .map(|ix| ix.iter().map(|&i| &self.tweets[i]).collect())
            .unwrap_or_default()
    }

    fn diversity(&self, token: &str, anchors: &BTreeSet<String>) -> Option<f64> {
        let tweets = self.containing(token);
        if tweets.is_empty() {
            return None;
        }
        Some(word_context_diversity(&tweets, token, anchors))
    }

    /// Whether one tweet text (as a token sequence) accounts for more than
    /// `fraction` of the token's occurrences.
    fn single_dominant(&self, token: &str, fraction: f64) -> bool {
        let tweets = self.containing(token);
        let mut by_text: HashMap<&[String], u64> = HashMap::new();
        let mut total = 0;
        for t in tweets {
            let n = t.iter().filter(|x| *x == token).count() as u64;
            *by_text.entry(t.as_slice()).or_default() += n;
            total += n;
        }
        let max = by_text.values().copied().max().unwrap_or(0);
        total > 0 && (max as f64) > fraction * total as f64
    }
}

/// Builds the ranked report for `corpus_p` (anchor A) against `corpus_q`
/// (anchor B). Both anchors are removed from the token bags.
pub fn build_word_shift(
    corpus_p: &CorpusWindow,
    corpus_q: &CorpusWindow,
    stoplist: &StopList,
    config: &ShiftConfig,
) -> Result<WordShiftReport> {
    let tokenizer = Tokenizer::new([&corpus_p.anchor, &corpus_q.anchor], stoplist.clone());
    let anchors = tokenizer.anchors().clone();
    let (tp, tq) = rayon::join(
        || TokenizedCorpus::new(corpus_p, &tokenizer),
        || TokenizedCorpus::new(corpus_q, &tokenizer),
    );
    let empty = |side: &str, w: &CorpusWindow| {
        Error::EmptyCorpus(format!("{side} (#{}) has no tokens after tokenization", w.anchor))
    };
    let p = build_distribution(&tp.bag).map_err(|_| empty("corpus_p", corpus_p))?;
    let q = build_distribution(&tq.bag).map_err(|_| empty("corpus_q", corpus_q))?;
    let weights = match config.weight_basis {
        WeightBasis::Tokens => JsdWeights::proportional(tp.bag.total(), tq.bag.total())?,
        WeightBasis::Tweets => JsdWeights::proportional(corpus_p.len() as u64, corpus_q.len() as u64)?,
        WeightBasis::Equal => JsdWeights::equal(),
    };
    let (total, _) = jsd(&p, &q, weights);

    let mut ranked: Vec<_> = jsd_contributions(&p, &q, weights)
        .into_iter()
        .filter(|c| c.direction != Direction::Zero && c.contribution > 0.0)
        .filter(|c| tp.bag.count(&c.token) + tq.bag.count(&c.token) >= config.min_occurrences)
        .collect();
    ranked.sort_by(|a, b| {
        b.contribution
            .total_cmp(&a.contribution)
            .then_with(|| a.token.cmp(&b.token))
    });
    if let Some(k) = config.top_k {
        ranked.truncate(k);
    }
    if total <= 0.0 {
        ranked.clear();
    }

    let entries = ranked
        .par_iter()
        .map(|c| {
            let diversity_p_bits = tp.diversity(&c.token, &anchors);
            let diversity_q_bits = tq.diversity(&c.token, &anchors);
            let side = if c.direction == Direction::CorpusP { &tp } else { &tq };
            let mut e = ShiftEntry {
                token: c.token.clone(),
                percent: 100.0 * c.contribution / total,
                direction: c.direction,
                diversity_p_bits,
                diversity_q_bits,
                retweet_driven: false,
                single_tweet_dominant: side.single_dominant(&c.token, config.dominance_fraction),
            };
            e.retweet_driven = is_retweet_driven(e.direction_diversity(), config.diversity_threshold_bits);
            e
        })
        .collect();

    Ok(WordShiftReport {
        anchor_a: corpus_p.anchor.clone(),
        anchor_b: corpus_q.anchor.clone(),
        window_start: corpus_p.start,
        window_end: corpus_p.end,
        total_jsd_bits: total,
        weights,
        entries,
    })
}

/// Pretty-printed JSON with a fixed field order.
pub fn export_word_shift_json<W: Write>(report: &WordShiftReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn import_word_shift_json<R: Read>(input: R) -> Result<WordShiftReport> {
    serde_json::from_reader(input).map_err(|e| Error::Format(e.to_string()))
}

/// Layout and colouring of the rendered chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    /// Entries with this direction are drawn to the left of the axis.
    pub left: Direction,
    pub width: f64,
    pub bar_height: f64,
    /// Diversity (bits) mapped to the darkest fill; larger values clamp.
    pub ramp_max_bits: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            left: Direction::CorpusP,
            width: 720.0,
            bar_height: 16.0,
            ramp_max_bits: 12.0,
        }
    }
}

type Rgb = (u8, u8, u8);

const LEFT_RAMP: (Rgb, Rgb) = ((222, 235, 247), (8, 48, 107));
const RIGHT_RAMP: (Rgb, Rgb) = ((254, 230, 206), (127, 39, 4));

/// Linear blend from the light end (t = 0) to the dark end (t = 1).
fn ramp((light, dark): (Rgb, Rgb), t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    (mix(light.0, dark.0), mix(light.1, dark.1), mix(light.2, dark.2))
}

/// Fill colour for an entry with the given direction-side diversity.
pub fn fill_for(diversity_bits: Option<f64>, left_side: bool, style: &SvgStyle) -> String {
    let t = diversity_bits.unwrap_or(0.0) / style.ramp_max_bits;
    let (r, g, b) = ramp(if left_side { LEFT_RAMP } else { RIGHT_RAMP }, t);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' => {}
            c => out.push(c),
        }
    }
    out
}

/// Horizontal bar chart of the report entries, one bar per entry.
pub fn render_word_shift_svg(report: &WordShiftReport, style: &SvgStyle) -> String {
    let top = 56.0;
    let bottom_pad = 48.0;
    let label_pad = 110.0;
    let rows = report.entries.len() as f64;
    let height = top + rows * (style.bar_height + 4.0) + bottom_pad;
    let center = style.width / 2.0;
    let half = center - label_pad;
    let max_pct = report.entries.iter().map(|e| e.percent).fold(0.0f64, f64::max);
    let scale = if max_pct > 0.0 { half / max_pct } else { 0.0 };
    let (left_anchor, right_anchor) = if style.left == Direction::CorpusQ {
        (&report.anchor_b, &report.anchor_a)
    } else {
        (&report.anchor_a, &report.anchor_b)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#,
        w = style.width,
        h = height
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="white"/>"#,
        style.width, height
    );
    let _ = writeln!(
        svg,
        r#"<text x="{center:.2}" y="18" text-anchor="middle" font-size="13">JSD {:.4} bits</text>"#,
        report.total_jsd_bits
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="38" text-anchor="start">#{}</text>"##,
        label_pad,
        escape_xml(left_anchor)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="38" text-anchor="end">#{}</text>"##,
        style.width - label_pad,
        escape_xml(right_anchor)
    );

    for (i, e) in report.entries.iter().enumerate() {
        let y = top + i as f64 * (style.bar_height + 4.0);
        let len = e.percent * scale;
        let left_side = e.direction == style.left;
        let x = if left_side { center - len } else { center };
        let fill = fill_for(e.direction_diversity(), left_side, style);
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{len:.2}" height="{:.2}" fill="{fill}"><title>{} {:.2}%</title></rect>"#,
            style.bar_height,
            escape_xml(&e.token),
            e.percent
        );
        let (tx, anchor) = if left_side {
            (x - 4.0, "end")
        } else {
            (x + len + 4.0, "start")
        };
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            y + style.bar_height * 0.75,
            escape_xml(&e.token)
        );
    }

    let axis_bottom = top + rows * (style.bar_height + 4.0);
    let _ = writeln!(
        svg,
        r#"<line x1="{center:.2}" y1="{:.2}" x2="{center:.2}" y2="{axis_bottom:.2}" stroke="black"/>"#,
        top - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{label_pad:.2}" y1="{axis_bottom:.2}" x2="{:.2}" y2="{axis_bottom:.2}" stroke="black"/>"#,
        style.width - label_pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{center:.2}" y="{:.2}" text-anchor="middle">percent of total JSD</text>"#,
        axis_bottom + 30.0
    );
    svg.push_str("</svg>\n");
    svg
}
