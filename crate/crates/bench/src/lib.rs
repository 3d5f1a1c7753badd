//! Shared inputs for the benchmarks in `benches/`.

use std::collections::BTreeSet;

use chrono::TimeDelta;
use divergent_core::hashnet::{build_cooccurrence, WeightedGraph};
use divergent_core::synth::{planted_corpus, PlantedConfig};
use divergent_core::{filter_window, CorpusWindow};

/// Both anchor windows of a planted corpus with `per_anchor` tweets each.
pub fn planted_windows(per_anchor: usize) -> (CorpusWindow, CorpusWindow) {
    let cfg = PlantedConfig {
        tweets_per_anchor: per_anchor,
        ..Default::default()
    };
    let tweets = planted_corpus(&cfg);
    let end = cfg.start + TimeDelta::days(cfg.span_days);
    let p = filter_window(&tweets, &cfg.anchor_a, cfg.start, end).expect("planted window");
    let q = filter_window(&tweets, &cfg.anchor_b, cfg.start, end).expect("planted window");
    (p, q)
}

/// Hashtag co-occurrence graph of one anchor window.
pub fn cooccurrence(window: &CorpusWindow) -> WeightedGraph {
    let own: BTreeSet<String> = [window.anchor.clone()].into();
    build_cooccurrence(&window.tweets, &own)
}

/// Connected ring of `n` nodes with deterministic chords and weights.
pub fn ring_with_chords(n: usize) -> WeightedGraph {
    let mut g = WeightedGraph::new();
    let label = |i: usize| format!("t{i:05}");
    for i in 0..n {
        g.add_edge_weight(&label(i), &label((i + 1) % n), 1 + (i % 5) as u64)
            .expect("distinct nodes");
        let j = (i * 7 + 13) % n;
        if j != i {
            g.add_edge_weight(&label(i), &label(j), 1 + (i % 3) as u64)
                .expect("distinct nodes");
        }
    }
    g
}
