//! Entropy, effective diversity, Kullback-Leibler and Jensen-Shannon
//! divergence, all in bits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenBag, TokenDistribution};
use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `x log2 x` with `0 log 0 = 0`.
pub fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Shannon entropy `-Σ p log2 p`.
pub fn shannon_entropy(dist: &TokenDistribution) -> f64 {
    let h = -compensated_sum(dist.iter().map(|(_, p)| xlog2x(p)));
    h.max(0.0)
}

/// Perplexity `2^H`: the number of equally likely tokens with the same entropy.
pub fn effective_diversity(entropy_bits: f64) -> Result<f64> {
    if !entropy_bits.is_finite() || entropy_bits < 0.0 {
        return Err(Error::Domain(format!(
            "entropy must be finite and nonnegative, got {entropy_bits}"
        )));
    }
    Ok(entropy_bits.exp2())
}

/// Entropy of a raw bag, 0 when the bag is empty.
pub fn bag_entropy(bag: &TokenBag) -> f64 {
    if bag.is_empty() {
        return 0.0;
    }
    let total = bag.total() as f64;
    let h = -compensated_sum(bag.iter().map(|(_, c)| xlog2x(c as f64 / total)));
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlDivergence {
    Finite(f64),
    /// Some token of `p` is missing from `q`.
    Infinite,
}

impl KlDivergence {
    pub fn is_infinite(&self) -> bool {
        matches!(self, KlDivergence::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            KlDivergence::Finite(v) => Some(v),
            KlDivergence::Infinite => None,
        }
    }
}

pub fn kl_divergence(p: &TokenDistribution, q: &TokenDistribution) -> KlDivergence {
    let mut terms = Vec::with_capacity(p.support_size());
    for (tok, pi) in p.iter() {
        let qi = q.prob(tok);
        if qi <= 0.0 {
            return KlDivergence::Infinite;
        }
        terms.push(pi * (pi / qi).log2());
    }
    KlDivergence::Finite(compensated_sum(terms).max(0.0))
}

/// Mixture weights; `pi1 + pi2 = 1`, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsdWeights {
    pub pi1: f64,
    pub pi2: f64,
}

impl JsdWeights {
    pub fn new(pi1: f64, pi2: f64) -> Result<Self> {
        if !(pi1 > 0.0 && pi2 > 0.0) || (pi1 + pi2 - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "weights ({pi1}, {pi2}) must be positive and sum to 1"
            )));
        }
        Ok(JsdWeights { pi1, pi2 })
    }

    pub fn equal() -> Self {
        JsdWeights { pi1: 0.5, pi2: 0.5 }
    }

    /// Weights proportional to two corpus sizes.
    pub fn proportional(size_p: u64, size_q: u64) -> Result<Self> {
        if size_p == 0 || size_q == 0 {
            return Err(Error::EmptyCorpus(format!("cannot weight sizes {size_p} and {size_q}")));
        }
        let total = (size_p + size_q) as f64;
        let pi1 = size_p as f64 / total;
        Ok(JsdWeights { pi1, pi2: 1.0 - pi1 })
    }

    pub fn swapped(self) -> Self {
        JsdWeights {
            pi1: self.pi2,
            pi2: self.pi1,
        }
    }
}

/// `M = pi1 P + pi2 Q` over the union support.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    probs: BTreeMap<String, f64>,
}

impl MixedDistribution {
    pub fn new(p: &TokenDistribution, q: &TokenDistribution, w: JsdWeights) -> Self {
        let tokens: BTreeSet<&str> = p.tokens().chain(q.tokens()).collect();
        let probs = tokens
            .into_iter()
            .map(|t| (t.to_string(), w.pi1 * p.prob(t) + w.pi2 * q.prob(t)))
            .collect();
        MixedDistribution { probs }
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// `pi1 KL(P||M) + pi2 KL(Q||M)`. Finite for every pair, since `M` covers
/// both supports.
pub fn jsd(p: &TokenDistribution, q: &TokenDistribution, w: JsdWeights) -> (f64, MixedDistribution) {
    let m = MixedDistribution::new(p, q, w);
    let side = |d: &TokenDistribution| compensated_sum(d.iter().map(|(t, pi)| pi * (pi / m.prob(t)).log2()));
    let total = w.pi1 * side(p) + w.pi2 * side(q);
    (total.max(0.0), m)
}

/// Which corpus a word's contribution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    CorpusP,
    CorpusQ,
    Zero,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::CorpusP => Direction::CorpusQ,
            Direction::CorpusQ => Direction::CorpusP,
            Direction::Zero => Direction::Zero,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::CorpusP => "corpus_p",
            Direction::CorpusQ => "corpus_q",
            Direction::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordContribution {
    pub token: String,
    /// Bits, never negative.
    pub contribution: f64,
    pub direction: Direction,
    pub p: f64,
    pub q: f64,
}

/// Per-token terms `-m log2 m + pi1 p log2 p + pi2 q log2 q` over the union
/// support, in token order. They sum to the [`jsd`] total.
pub fn jsd_contributions(p: &TokenDistribution, q: &TokenDistribution, w: JsdWeights) -> Vec<WordContribution> {
    let m = MixedDistribution::new(p, q, w);
    m.iter()
        .map(|(tok, mi)| {
            let (pi, qi) = (p.prob(tok), q.prob(tok));
            let (contribution, direction) = if pi == qi {
                (0.0, Direction::Zero)
            } else {
                let c = -xlog2x(mi) + w.pi1 * xlog2x(pi) + w.pi2 * xlog2x(qi);
                let dir = if pi > qi {
                    Direction::CorpusP
                } else {
                    Direction::CorpusQ
                };
                (c.max(0.0), dir)
            };
            WordContribution {
                token: tok.to_string(),
                contribution,
                direction,
                p: pi,
                q: qi,
            }
        })
        .collect()
}

/// Shannon index of the tokens that co-occur with `word` across `tweets`,
/// with `word` and the anchors removed. Returns 0 for an empty remainder.
pub fn word_context_diversity<T: AsRef<[String]>>(tweets: &[T], word: &str, anchors: &BTreeSet<String>) -> f64 {
    let mut bag = TokenBag::new();
    for t in tweets {
        for tok in t.as_ref() {
            if tok == word {
                continue;
            }
            let bare = tok.strip_prefix('#').unwrap_or(tok);
            if tok.starts_with('#') && anchors.contains(bare) {
                continue;
            }
            bag.add(tok);
        }
    }
    bag_entropy(&bag)
}
