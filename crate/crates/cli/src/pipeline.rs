//! Stage execution for `run` and the per-stage subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::TimeDelta;
use divergent_core::corpus::{filter_window, frequency_timeseries, write_timeseries_csv};
use divergent_core::diversity::{
    boxplot_stats, calendar_months, compare_diversity, subsample_diversity, write_boxplot_csv, write_comparison_csv,
    write_samples_csv, DiversityKind, DiversitySampleSet, PoolOptions,
};
use divergent_core::graphalgs::{centrality_table, write_centrality_csv, PageRankParams};
use divergent_core::hashnet::{
    alpha_sweep, build_cooccurrence, network_stats, write_edge_list_csv, write_graphml, BackboneStats, TopicNetwork,
    TopicParams,
};
use divergent_core::wordshift::{
    build_word_shift, export_word_shift_json, render_word_shift_svg, ShiftConfig, SvgStyle,
};
use divergent_core::{parse_tweet_files, Direction, Error as CoreError, StopList, Tweet};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::artifacts::{write_manifest, ArtifactStore, Manifest};
use crate::config::{normalize_anchor, RunConfig, Side, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Timeseries,
    Shift,
    Network,
    Diversity,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Timeseries, Stage::Shift, Stage::Network, Stage::Diversity];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Timeseries => "timeseries",
            Stage::Shift => "shift",
            Stage::Network => "network",
            Stage::Diversity => "diversity",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s.trim())
            .ok_or_else(|| format!("unknown stage {s:?}; expected one of timeseries, shift, network, diversity"))
    }
}

/// Comma-separated stage list; `all` selects every stage.
pub fn parse_stages(list: &str) -> Result<BTreeSet<Stage>, String> {
    if list.trim() == "all" {
        return Ok(Stage::ALL.into_iter().collect());
    }
    let stages = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Stage::from_str)
        .collect::<Result<BTreeSet<_>, _>>()?;
    if stages.is_empty() {
        return Err("no stages selected".into());
    }
    Ok(stages)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Data { source, .. } if !matches!(source, CoreError::Io(_)) => 2,
            _ => 3,
        }
    }

    fn data(context: impl Into<String>, source: CoreError) -> Self {
        RunError::Data {
            context: context.into(),
            source,
        }
    }

    fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RunError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Stable per-slot seed: the first eight bytes of
/// `sha256(seed, stage, window, anchor)`.
pub fn sub_seed(seed: u64, stage: &str, window: &str, anchor: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [stage, window, anchor] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

struct Context<'a> {
    cfg: &'a RunConfig,
    tweets: Vec<Tweet>,
    stoplist: StopList,
    anchors: [String; 2],
    store: &'a ArtifactStore,
}

/// Runs the selected stages and writes the manifest last. On failure the
/// manifest is still written, marked incomplete, and the error returned.
pub fn run(cfg: &RunConfig, config_sha256: &str, stages: &BTreeSet<Stage>) -> Result<Manifest, RunError> {
    let findings = cfg.validate();
    if let Some(f) = findings.first() {
        return Err(RunError::Config(f.to_string()));
    }
    if stages.contains(&Stage::Diversity) && cfg.diversity_period().is_none() {
        return Err(RunError::Config(
            "diversity: no period; set diversity.start and diversity.end or define windows".into(),
        ));
    }
    let parsed = parse_tweet_files(&cfg.inputs).map_err(|e| RunError::data("reading inputs", e))?;
    if !parsed.rejected.is_empty() {
        eprintln!("warning: {} malformed input records skipped", parsed.rejected.len());
    }
    let stoplist = match &cfg.stoplist {
        Some(p) => StopList::from_path(p).map_err(|e| RunError::data("reading stoplist", e))?,
        None => StopList::default(),
    };
    let store = ArtifactStore::new(&cfg.output_dir);
    let ctx = Context {
        cfg,
        tweets: parsed.tweets,
        stoplist,
        anchors: [normalize_anchor(&cfg.anchor_a), normalize_anchor(&cfg.anchor_b)],
        store: &store,
    };
    let mut outcome = Ok(());
    for stage in stages {
        let result = match stage {
            Stage::Timeseries => timeseries_stage(&ctx),
            Stage::Shift => shift_stage(&ctx),
            Stage::Network => network_stage(&ctx),
            Stage::Diversity => diversity_stage(&ctx),
        };
        if let Err(e) = result {
            outcome = Err(e);
            break;
        }
    }
    let (artifacts, skipped) = store.finish();
    let manifest = Manifest {
        complete: outcome.is_ok(),
        error: outcome.as_ref().err().map(|e| e.to_string()),
        config_sha256: config_sha256.to_string(),
        seed: cfg.seed,
        stages: stages.iter().map(|s| s.to_string()).collect(),
        input_records: ctx.tweets.len(),
        rejected_records: parsed.rejected.len(),
        artifacts,
        skipped,
    };
    write_manifest(&cfg.output_dir, &manifest).map_err(|e| RunError::io("writing manifest", e))?;
    outcome.map(|()| manifest)
}

fn render<F>(f: F) -> Result<Vec<u8>, CoreError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), CoreError>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// First error in slot order, so failures are reported deterministically.
fn first_error(results: Vec<Result<(), RunError>>) -> Result<(), RunError> {
    results.into_iter().collect()
}

fn timeseries_stage(ctx: &Context) -> Result<(), RunError> {
    let bin = TimeDelta::hours(ctx.cfg.timeseries.bin_hours);
    let mut series: Vec<(String, Vec<&Tweet>)> = Vec::new();
    if ctx.cfg.timeseries.per_anchor {
        for a in &ctx.anchors {
            series.push((
                format!("timeseries/{a}.csv"),
                ctx.tweets.iter().filter(|t| t.has_hashtag(a)).collect(),
            ));
        }
    } else {
        let both = ctx
            .tweets
            .iter()
            .filter(|t| ctx.anchors.iter().any(|a| t.has_hashtag(a)))
            .collect();
        series.push(("timeseries/timeseries.csv".into(), both));
    }
    for (path, tweets) in series {
        let owned: Vec<Tweet> = tweets.into_iter().cloned().collect();
        let bytes = frequency_timeseries(&owned, bin)
            .and_then(|s| render(|b| write_timeseries_csv(&s, b)))
            .map_err(|e| RunError::data("timeseries", e))?;
        ctx.store
            .write(&path, &bytes, "timeseries", None, None)
            .map_err(|e| RunError::io(format!("writing {path}"), e))?;
    }
    Ok(())
}

fn shift_config(cfg: &RunConfig) -> ShiftConfig {
    ShiftConfig {
        top_k: Some(cfg.shift.top_k),
        diversity_threshold_bits: cfg.shift.diversity_threshold_bits,
        min_occurrences: cfg.shift.min_occurrences,
        weight_basis: cfg.shift.weight_basis,
        dominance_fraction: cfg.shift.dominance_fraction,
    }
}

fn shift_stage(ctx: &Context) -> Result<(), RunError> {
    let shift = shift_config(ctx.cfg);
    let style = SvgStyle {
        left: match ctx.cfg.shift.left {
            Side::A => Direction::CorpusP,
            Side::B => Direction::CorpusQ,
        },
        ..Default::default()
    };
    let windows = ctx.cfg.windows();
    let results = windows
        .par_iter()
        .map(|w| {
            let slot = format!("shift, window {}", w.label);
            let data = |e| RunError::data(slot.clone(), e);
            let p = filter_window(&ctx.tweets, &ctx.anchors[0], w.start, w.end).map_err(data)?;
            let q = filter_window(&ctx.tweets, &ctx.anchors[1], w.start, w.end).map_err(data)?;
            let report = build_word_shift(&p, &q, &ctx.stoplist, &shift).map_err(data)?;
            let json = render(|b| export_word_shift_json(&report, b)).map_err(data)?;
            let svg = render_word_shift_svg(&report, &style);
            for (ext, bytes) in [("json", json), ("svg", svg.into_bytes())] {
                let path = format!("shift/{}.{ext}", w.label);
                ctx.store
                    .write(&path, &bytes, "shift", Some(&w.label), None)
                    .map_err(|e| RunError::io(format!("writing {path}"), e))?;
            }
            Ok(())
        })
        .collect();
    first_error(results)
}

fn network_slot(ctx: &Context, w: &Window, anchor: &str) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let slot = format!("network, window {}, anchor {anchor}", w.label);
    let data = |e| RunError::data(slot.clone(), e);
    let window = filter_window(&ctx.tweets, anchor, w.start, w.end).map_err(data)?;
    let own: BTreeSet<String> = [anchor.to_string()].into();
    let original = build_cooccurrence(&window.tweets, &own);
    let params = TopicParams {
        alpha: cfg.alpha,
        pagerank: PageRankParams {
            damping: cfg.centrality.damping,
            tol: cfg.centrality.tol,
            max_iter: cfg.centrality.max_iter,
        },
        louvain_seed: sub_seed(cfg.seed, "network", &w.label, anchor),
        size_scale: cfg.network.size_scale,
    };
    let net = TopicNetwork::build(&original, &params).map_err(data)?;
    let stats = network_stats(&original, &net.graph);
    let sweep = alpha_sweep(&original, &cfg.network.alpha_grid).map_err(data)?;

    let graphml = render(|b| write_graphml(&net, b)).map_err(data)?;
    let edges = render(|b| write_edge_list_csv(&net.graph, b)).map_err(data)?;
    let backbone = format!("{}\n{}\n", BackboneStats::CSV_HEADER, stats.csv_fields()).into_bytes();
    let rows = centrality_table(&net, cfg.network.top_k);
    let centrality = render(|b| write_centrality_csv(&rows, b)).map_err(data)?;
    let mut sweep_csv = String::from("alpha,pct_original_nodes\n");
    for (a, pct) in sweep {
        sweep_csv.push_str(&format!("{a},{pct:.4}\n"));
    }
    let files = [
        ("topic.graphml", graphml),
        ("edges.csv", edges),
        ("backbone.csv", backbone),
        ("centrality.csv", centrality),
        ("alpha_sweep.csv", sweep_csv.into_bytes()),
    ];
    for (name, bytes) in files {
        let path = format!("network/{}/{anchor}/{name}", w.label);
        ctx.store
            .write(&path, &bytes, "network", Some(&w.label), Some(anchor))
            .map_err(|e| RunError::io(format!("writing {path}"), e))?;
    }
    Ok(())
}

fn network_stage(ctx: &Context) -> Result<(), RunError> {
    let windows = ctx.cfg.windows();
    let slots: Vec<(&Window, &String)> = windows
        .iter()
        .flat_map(|w| ctx.anchors.iter().map(move |a| (w, a)))
        .collect();
    let results = slots.par_iter().map(|(w, a)| network_slot(ctx, w, a)).collect();
    first_error(results)
}

fn diversity_stage(ctx: &Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let (start, end) = cfg.diversity_period().expect("checked before running");
    let months = calendar_months(start, end).map_err(|e| RunError::data("diversity", e))?;
    let opts = PoolOptions {
        lexical_excludes_all_hashtags: cfg.diversity.lexical_excludes_all_hashtags,
        exclude_own_anchor: cfg.diversity.exclude_own_anchor,
    };
    let mut slots = Vec::new();
    for anchor in &ctx.anchors {
        for &(lo, hi) in &months {
            for kind in DiversityKind::ALL {
                slots.push((anchor, lo, hi, kind));
            }
        }
    }
    let results: Vec<Result<Option<DiversitySampleSet>, RunError>> = slots
        .par_iter()
        .map(|&(anchor, lo, hi, kind)| {
            let month = lo.format("%Y-%m").to_string();
            let slot = format!("diversity, month {month}, anchor {anchor}, {}", kind.as_str());
            let window = filter_window(&ctx.tweets, anchor, lo, hi).map_err(|e| RunError::data(slot.clone(), e))?;
            let seed = sub_seed(cfg.seed, "diversity", &month, anchor);
            let set = match subsample_diversity(
                &window,
                kind,
                cfg.diversity.sample_size,
                cfg.diversity.n_draws,
                seed,
                &ctx.stoplist,
                opts,
            ) {
                Ok(set) => set,
                Err(e @ CoreError::InsufficientData { .. }) if cfg.diversity.skip_insufficient => {
                    ctx.store.skip("diversity", slot, e.to_string());
                    return Ok(None);
                }
                Err(e) => return Err(RunError::data(slot, e)),
            };
            let bytes = render(|b| write_samples_csv(&set, b)).map_err(|e| RunError::data(slot.clone(), e))?;
            let path = format!("diversity/{anchor}/{month}_{}.csv", kind.as_str());
            ctx.store
                .write(&path, &bytes, "diversity", Some(&month), Some(anchor))
                .map_err(|e| RunError::io(format!("writing {path}"), e))?;
            Ok(Some(set))
        })
        .collect();
    let mut sets = Vec::new();
    for r in results {
        if let Some(s) = r? {
            sets.push(s);
        }
    }

    let mut boxes = Vec::new();
    for s in &sets {
        let b = boxplot_stats(&s.samples).map_err(|e| RunError::data("diversity box plots", e))?;
        boxes.push((s, b));
    }
    let bytes = render(|b| write_boxplot_csv(&boxes, b)).map_err(|e| RunError::data("diversity box plots", e))?;
    ctx.store
        .write("diversity/boxplots.csv", &bytes, "diversity", None, None)
        .map_err(|e| RunError::io("writing diversity/boxplots.csv", e))?;

    let mut by_slot: BTreeMap<(chrono::DateTime<chrono::Utc>, DiversityKind), [Option<&DiversitySampleSet>; 2]> =
        BTreeMap::new();
    for s in &sets {
        let side = usize::from(s.anchor != ctx.anchors[0]);
        by_slot.entry((s.period_start, s.kind)).or_default()[side] = Some(s);
    }
    let mut comparisons = Vec::new();
    for pair in by_slot.values() {
        if let [Some(a), Some(b)] = pair {
            comparisons.push(compare_diversity(a, b).map_err(|e| RunError::data("diversity comparison", e))?);
        }
    }
    let bytes =
        render(|b| write_comparison_csv(&comparisons, b)).map_err(|e| RunError::data("diversity comparison", e))?;
    ctx.store
        .write("diversity/comparison.csv", &bytes, "diversity", None, None)
        .map_err(|e| RunError::io("writing diversity/comparison.csv", e))?;
    Ok(())
}
