//! Volume-controlled effective diversity: repeated fixed-size subsamples of
//! a window, summarized as notched box plots.

use std::collections::HashMap;
use std::io::Write;

use chrono::{DateTime, Datelike, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{filter_window, format_instant, CorpusWindow, StopList, Tokenizer, Tweet};
use crate::error::{Error, Result};
use crate::infotheory::{compensated_sum, xlog2x};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityKind {
    /// Words other than hashtags.
    Lexical,
    /// Hashtags other than the window's anchor.
    Hashtag,
}

impl DiversityKind {
    pub const ALL: [DiversityKind; 2] = [DiversityKind::Lexical, DiversityKind::Hashtag];

    pub fn as_str(self) -> &'static str {
        match self {
            DiversityKind::Lexical => "lexical",
            DiversityKind::Hashtag => "hashtag",
        }
    }
}

/// Pooling toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolOptions {
    /// Lexical pools drop every hashtag; when false only anchors are dropped.
    pub lexical_excludes_all_hashtags: bool,
    /// Hashtag pools drop the window's own anchor.
    pub exclude_own_anchor: bool,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            lexical_excludes_all_hashtags: true,
            exclude_own_anchor: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySampleSet {
    pub anchor: String,
    #[serde(with = "crate::wordshift::instant")]
    pub period_start: DateTime<Utc>,
    #[serde(with = "crate::wordshift::instant")]
    pub period_end: DateTime<Utc>,
    pub kind: DiversityKind,
    pub samples: Vec<f64>,
    pub sample_size: usize,
    pub n_draws: usize,
    pub seed: u64,
}

impl DiversitySampleSet {
    pub fn mean(&self) -> f64 {
        compensated_sum(self.samples.iter().copied()) / self.samples.len() as f64
    }
}

/// Token ids of each tweet's pool, interned in order of first appearance.
fn pooled_ids(
    window: &CorpusWindow,
    kind: DiversityKind,
    stoplist: &StopList,
    opts: PoolOptions,
) -> (Vec<Vec<u32>>, usize) {
    let anchors: Vec<&str> = match kind {
        DiversityKind::Hashtag if !opts.exclude_own_anchor => Vec::new(),
        _ => vec![window.anchor.as_str()],
    };
    let tokenizer = Tokenizer::new(anchors, stoplist.clone());
    let tokenized: Vec<Vec<String>> = window.tweets.par_iter().map(|t| tokenizer.tokenize(&t.text)).collect();
    let keep = |t: &str| match kind {
        DiversityKind::Hashtag => t.starts_with('#'),
        DiversityKind::Lexical => !(opts.lexical_excludes_all_hashtags && t.starts_with('#')),
    };
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let pools = tokenized
        .into_iter()
        .map(|toks| {
            toks.into_iter()
                .filter(|t| keep(t))
                .map(|t| {
                    let next = vocab.len() as u32;
                    *vocab.entry(t).or_insert(next)
                })
                .collect()
        })
        .collect();
    (pools, vocab.len())
}

/// Effective diversity of the pooled tokens of the chosen tweets, using
/// `counts` (all zero on entry and on exit) as scratch space.
fn draw_diversity(pools: &[Vec<u32>], chosen: &[usize], counts: &mut [u64], touched: &mut Vec<u32>) -> f64 {
    let mut total = 0u64;
    for &i in chosen {
        for &id in &pools[i] {
            if counts[id as usize] == 0 {
                touched.push(id);
            }
            counts[id as usize] += 1;
            total += 1;
        }
    }
    touched.sort_unstable();
    let h = if total == 0 {
        0.0
    } else {
        let n = total as f64;
        -compensated_sum(touched.iter().map(|&id| xlog2x(counts[id as usize] as f64 / n)))
    };
    for &id in touched.iter() {
        counts[id as usize] = 0;
    }
    touched.clear();
    h.max(0.0).exp2()
}

/// Draws `n_draws` subsamples of `sample_size` tweets without replacement and
/// records the effective diversity of each pooled distribution. Draw `i`
/// uses stream `i` of a ChaCha8 generator seeded with `seed`, so the
/// result does not depend on scheduling.
pub fn subsample_diversity(
    window: &CorpusWindow,
    kind: DiversityKind,
    sample_size: usize,
    n_draws: usize,
    seed: u64,
    stoplist: &StopList,
    opts: PoolOptions,
) -> Result<DiversitySampleSet> {
    if sample_size == 0 || n_draws == 0 {
        return Err(Error::Domain("sample_size and n_draws must be positive".into()));
    }
    if window.len() < sample_size {
        return Err(Error::InsufficientData {
            needed: sample_size,
            available: window.len(),
        });
    }
    let (pools, vocab) = pooled_ids(window, kind, stoplist, opts);
    let n = window.len();
    let samples: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map_init(
            || (vec![0u64; vocab], Vec::new()),
            |(counts, touched), draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw as u64);
                let chosen = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
                draw_diversity(&pools, &chosen, counts, touched)
            },
        )
        .collect();
    Ok(DiversitySampleSet {
        anchor: window.anchor.clone(),
        period_start: window.start,
        period_end: window.end,
        kind,
        samples,
        sample_size,
        n_draws,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub notch_lo: f64,
    pub notch_hi: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (position `(n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Notched box-plot summary. Notches sit at `median ± 1.57 IQR / sqrt(n)`;
/// whiskers reach the most extreme samples within 1.5 IQR of the box.
pub fn boxplot_stats(samples: &[f64]) -> Result<BoxplotStats> {
    if samples.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            available: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let half = 1.57 * iqr / (n as f64).sqrt();
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|v| *v >= lo_fence && *v <= hi_fence)
        .collect();
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    Ok(BoxplotStats {
        n,
        median,
        q1,
        q3,
        notch_lo: median - half,
        notch_hi: median + half,
        whisker_lo: inside[0],
        whisker_hi: inside[inside.len() - 1],
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityComparison {
    pub kind: DiversityKind,
    #[serde(with = "crate::wordshift::instant")]
    pub period_start: DateTime<Utc>,
    #[serde(with = "crate::wordshift::instant")]
    pub period_end: DateTime<Utc>,
    pub anchor_a: String,
    pub anchor_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_ratio: f64,
    pub notches_disjoint: bool,
    pub box_a: BoxplotStats,
    pub box_b: BoxplotStats,
}

/// Ratio of mean diversities and whether the median notches are disjoint.
pub fn compare_diversity(a: &DiversitySampleSet, b: &DiversitySampleSet) -> Result<DiversityComparison> {
    if a.kind != b.kind {
        return Err(Error::Mismatch(format!(
            "cannot compare {} diversity with {} diversity",
            a.kind.as_str(),
            b.kind.as_str()
        )));
    }
    if a.period_start != b.period_start || a.period_end != b.period_end {
        return Err(Error::Mismatch(format!(
            "periods differ: [{}, {}) vs [{}, {})",
            format_instant(a.period_start),
            format_instant(a.period_end),
            format_instant(b.period_start),
            format_instant(b.period_end)
        )));
    }
    let box_a = boxplot_stats(&a.samples)?;
    let box_b = boxplot_stats(&b.samples)?;
    let (mean_a, mean_b) = (a.mean(), b.mean());
    Ok(DiversityComparison {
        kind: a.kind,
        period_start: a.period_start,
        period_end: a.period_end,
        anchor_a: a.anchor.clone(),
        anchor_b: b.anchor.clone(),
        mean_a,
        mean_b,
        mean_ratio: mean_a / mean_b,
        notches_disjoint: box_a.notch_hi < box_b.notch_lo || box_b.notch_hi < box_a.notch_lo,
        box_a,
        box_b,
    })
}

fn month_start(year: i32, month: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(year, month, 1, 0, 0, 0)
        .single()
        .expect("first of month is unambiguous in UTC")
}

/// Calendar months (UTC) overlapping `[start, end)`, clipped to the interval.
pub fn calendar_months(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Vec<(DateTime<Utc>, DateTime<Utc>)>> {
    if start >= end {
        return Err(Error::InvalidInterval {
            start: format_instant(start),
            end: format_instant(end),
        });
    }
    let mut out = Vec::new();
    let (mut y, mut m) = (start.year(), start.month());
    loop {
        let lo = month_start(y, m);
        if lo >= end {
            break;
        }
        (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
        let hi = month_start(y, m);
        out.push((lo.max(start), hi.min(end)));
    }
    Ok(out)
}

/// One window per calendar month of `[start, end)`.
pub fn monthly_windows(
    tweets: &[Tweet],
    anchor: &str,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Result<Vec<CorpusWindow>> {
    calendar_months(start, end)?
        .into_iter()
        .map(|(lo, hi)| filter_window(tweets, anchor, lo, hi))
        .collect()
}

pub fn write_samples_csv<W: Write>(set: &DiversitySampleSet, mut out: W) -> Result<()> {
    writeln!(out, "draw_index,effective_diversity")?;
    for (i, v) in set.samples.iter().enumerate() {
        writeln!(out, "{i},{v:.6}")?;
    }
    Ok(())
}

pub const BOXPLOT_CSV_HEADER: &str =
    "anchor,period_start,period_end,kind,n,median,q1,q3,notch_lo,notch_hi,whisker_lo,whisker_hi,outliers";

/// One summary row per sample set; outliers are `;`-separated.
pub fn write_boxplot_csv<W: Write>(rows: &[(&DiversitySampleSet, BoxplotStats)], mut out: W) -> Result<()> {
    writeln!(out, "{BOXPLOT_CSV_HEADER}")?;
    for (set, b) in rows {
        let outliers: Vec<String> = b.outliers.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            set.anchor,
            format_instant(set.period_start),
            format_instant(set.period_end),
            set.kind.as_str(),
            b.n,
            b.median,
            b.q1,
            b.q3,
            b.notch_lo,
            b.notch_hi,
            b.whisker_lo,
            b.whisker_hi,
            outliers.join(";")
        )?;
    }
    Ok(())
}

pub fn write_comparison_csv<W: Write>(rows: &[DiversityComparison], mut out: W) -> Result<()> {
    writeln!(
        out,
        "kind,period_start,period_end,anchor_a,anchor_b,mean_a,mean_b,mean_ratio,notches_disjoint"
    )?;
    for c in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{}",
            c.kind.as_str(),
            format_instant(c.period_start),
            format_instant(c.period_end),
            c.anchor_a,
            c.anchor_b,
            c.mean_a,
            c.mean_b,
            c.mean_ratio,
            c.notches_disjoint
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(day: u32, hour: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2015, 3, day, hour, 0, 0).unwrap()
    }

    fn window(texts: &[String]) -> CorpusWindow {
        let tweets: Vec<Tweet> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Tweet::new(i.to_string(), at(1 + (i % 20) as u32, 0), "u", t.clone()))
            .collect();
        filter_window(&tweets, "anchor", at(1, 0), at(28, 0)).unwrap()
    }

    fn tagged(tags: usize, n: usize) -> CorpusWindow {
        let texts: Vec<String> = (0..n).map(|i| format!("#anchor words here #t{}", i % tags)).collect();
        window(&texts)
    }

    #[test]
    fn hashtag_diversity_of_uniform_tags() {
        let w = tagged(8, 4000);
        let set = subsample_diversity(
            &w,
            DiversityKind::Hashtag,
            1000,
            20,
            1,
            &StopList::default(),
            PoolOptions::default(),
        )
        .unwrap();
        assert_eq!(set.samples.len(), 20);
        for v in &set.samples {
            assert!((v - 8.0).abs() < 0.2, "{v}");
        }
    }

    #[test]
    fn own_anchor_toggle() {
        let w = tagged(1, 50);
        let excl = subsample_diversity(
            &w,
            DiversityKind::Hashtag,
            10,
            3,
            0,
            &StopList::default(),
            PoolOptions::default(),
        )
        .unwrap();
        assert!(excl.samples.iter().all(|&v| v == 1.0));
        let opts = PoolOptions {
            exclude_own_anchor: false,
            ..Default::default()
        };
        let incl = subsample_diversity(&w, DiversityKind::Hashtag, 10, 3, 0, &StopList::default(), opts).unwrap();
        assert!(incl.samples.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn lexical_hashtag_toggle() {
        let w = tagged(4, 40);
        let lex = subsample_diversity(
            &w,
            DiversityKind::Lexical,
            40,
            1,
            0,
            &StopList::default(),
            PoolOptions::default(),
        )
        .unwrap();
        assert!((lex.samples[0] - 2.0).abs() < 1e-12);
        let opts = PoolOptions {
            lexical_excludes_all_hashtags: false,
            ..Default::default()
        };
        let with_tags = subsample_diversity(&w, DiversityKind::Lexical, 40, 1, 0, &StopList::default(), opts).unwrap();
        // words and here at 1/3 each, four tags at 1/12 each
        assert!((with_tags.samples[0] - 3.0 * 2.0f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn full_window_draws_identical() {
        let w = tagged(3, 30);
        let set = subsample_diversity(
            &w,
            DiversityKind::Hashtag,
            30,
            10,
            5,
            &StopList::default(),
            PoolOptions::default(),
        )
        .unwrap();
        assert!(set.samples.iter().all(|&v| v == set.samples[0]));
    }

    #[test]
    fn seeds_reproduce() {
        let texts: Vec<String> = (0..300)
            .map(|i| format!("#anchor w{} w{} #t{}", i % 17, i % 5, i % 11))
            .collect();
        let w = window(&texts);
        let run = |seed| {
            subsample_diversity(
                &w,
                DiversityKind::Lexical,
                50,
                40,
                seed,
                &StopList::default(),
                PoolOptions::default(),
            )
            .unwrap()
            .samples
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn insufficient_data() {
        let w = tagged(2, 10);
        let err = subsample_diversity(
            &w,
            DiversityKind::Hashtag,
            11,
            1,
            0,
            &StopList::default(),
            PoolOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                needed: 11,
                available: 10
            }
        ));
    }

    #[test]
    fn boxplot_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let b = boxplot_stats(&v).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (25.75, 50.5, 75.25));
        assert!((b.notch_hi - b.notch_lo - 2.0 * 1.57 * 49.5 / 10.0).abs() < 1e-12);
        assert_eq!((b.whisker_lo, b.whisker_hi), (1.0, 100.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn boxplot_constant_and_outliers() {
        let b = boxplot_stats(&[3.0; 7]).unwrap();
        assert_eq!(
            (b.q1, b.median, b.q3, b.notch_lo, b.notch_hi),
            (3.0, 3.0, 3.0, 3.0, 3.0)
        );
        assert!(b.outliers.is_empty());
        let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_hi, 5.0);
        assert!(boxplot_stats(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    fn set(anchor: &str, kind: DiversityKind, samples: Vec<f64>) -> DiversitySampleSet {
        DiversitySampleSet {
            anchor: anchor.into(),
            period_start: at(1, 0),
            period_end: at(2, 0),
            kind,
            n_draws: samples.len(),
            samples,
            sample_size: 1,
            seed: 0,
        }
    }

    #[test]
    fn comparisons() {
        let a = set("a", DiversityKind::Lexical, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = compare_diversity(&a, &a).unwrap();
        assert_eq!(c.mean_ratio, 1.0);
        assert!(!c.notches_disjoint);
        let hi = set("b", DiversityKind::Lexical, vec![10.0, 10.1, 10.2, 10.3, 10.4]);
        let lo = set("c", DiversityKind::Lexical, vec![1.0, 1.1, 1.2, 1.3, 1.4]);
        assert!(compare_diversity(&hi, &lo).unwrap().notches_disjoint);
        let other = set("d", DiversityKind::Hashtag, vec![1.0; 5]);
        assert!(matches!(compare_diversity(&a, &other), Err(Error::Mismatch(_))));
        let mut shifted = a.clone();
        shifted.period_end = at(3, 0);
        assert!(matches!(compare_diversity(&a, &shifted), Err(Error::Mismatch(_))));
    }

    #[test]
    fn months_are_calendar_aligned() {
        let m = calendar_months(at(15, 6), Utc.with_ymd_and_hms(2015, 6, 1, 0, 0, 0).unwrap()).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].0, at(15, 6));
        assert_eq!(m[0].1, Utc.with_ymd_and_hms(2015, 4, 1, 0, 0, 0).unwrap());
        assert_eq!(m[2].1, Utc.with_ymd_and_hms(2015, 6, 1, 0, 0, 0).unwrap());
        let dec = calendar_months(
            Utc.with_ymd_and_hms(2014, 12, 5, 0, 0, 0).unwrap(),
            Utc.with_ymd_and_hms(2015, 1, 2, 0, 0, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(dec.len(), 2);
        assert_eq!(dec[1].0, Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap());
    }

    #[test]
    fn samples_csv() {
        let s = set("a", DiversityKind::Lexical, vec![1.0, 2.5]);
        let mut out = Vec::new();
        write_samples_csv(&s, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "draw_index,effective_diversity\n0,1.000000\n1,2.500000\n"
        );
    }

    proptest! {
        #[test]
        fn boxplot_permutation_invariant(mut v in prop::collection::vec(-1e6f64..1e6, 5..60), seed in any::<u64>()) {
            let b = boxplot_stats(&v).unwrap();
            prop_assert!(b.q1 <= b.median && b.median <= b.q3);
            prop_assert!(b.notch_lo <= b.median && b.median <= b.notch_hi);
            use rand::seq::SliceRandom;
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(boxplot_stats(&v).unwrap(), b);
        }

        #[test]
        fn lexical_ignores_hashtag_only_tweets(extra in 1usize..30, seed in 0u64..50) {
            let mut texts: Vec<String> = (0..40).map(|i| format!("#anchor w{} v{}", i % 7, i % 3)).collect();
            let base = window(&texts);
            let full = subsample_diversity(&base, DiversityKind::Lexical, 40, 1, seed, &StopList::default(), PoolOptions::default()).unwrap();
            texts.extend((0..extra).map(|i| format!("#anchor #x{i}")));
            let more = window(&texts);
            let n = more.len();
            let all = subsample_diversity(&more, DiversityKind::Lexical, n, 1, seed, &StopList::default(), PoolOptions::default()).unwrap();
            prop_assert!((full.samples[0] - all.samples[0]).abs() < 1e-9);
        }
    }
}
