//! Hashtag co-occurrence networks and their disparity-filter backbone.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::io::Write;

use crate::corpus::{extract_hashtags, Tweet};
use crate::error::{Error, Result};
use crate::graphalgs::{self, CentralityTable, Measure, PageRankParams};

/// Undirected graph with positive integer edge weights and per-node usage
/// counts. Labels are kept sorted, so every traversal is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WeightedGraph {
    usage: BTreeMap<String, u64>,
    /// Keyed by `(a, b)` with `a < b`.
    edges: BTreeMap<(String, String), u64>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Test-friendly constructor: every endpoint gets usage 1.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S, u64)]) -> Result<Self> {
        let mut g = WeightedGraph::new();
        for (a, b, w) in edges {
            g.add_node(a.as_ref(), 0);
            g.add_node(b.as_ref(), 0);
            g.add_edge_weight(a.as_ref(), b.as_ref(), *w)?;
        }
        for u in g.usage.values_mut() {
            *u = (*u).max(1);
        }
        Ok(g)
    }

    /// Adds `usage` to the node's usage count, creating it if needed.
    pub fn add_node(&mut self, label: &str, usage: u64) {
        *self.usage.entry(label.to_string()).or_default() += usage;
    }

    /// Adds `weight` to the edge between two existing or new nodes.
    pub fn add_edge_weight(&mut self, a: &str, b: &str, weight: u64) -> Result<()> {
        if a == b {
            return Err(Error::Domain(format!("self-loop on {a:?}")));
        }
        if weight == 0 {
            return Err(Error::Domain("edge weight must be positive".into()));
        }
        self.usage.entry(a.to_string()).or_default();
        self.usage.entry(b.to_string()).or_default();
        *self.edges.entry(key(a, b)).or_default() += weight;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.usage.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.usage.is_empty()
    }

    pub fn contains_node(&self, label: &str) -> bool {
        self.usage.contains_key(label)
    }

    pub fn usage(&self, label: &str) -> Option<u64> {
        self.usage.get(label).copied()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<u64> {
        self.edges.get(&key(a, b)).copied()
    }

    /// Labels in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.usage.keys().map(String::as_str)
    }

    pub fn node_usage(&self) -> impl Iterator<Item = (&str, u64)> {
        self.usage.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Edges as `(a, b, weight)` with `a < b`, sorted by `a` then `b`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w))
    }

    /// Induced subgraph on `keep`.
    pub fn subgraph(&self, keep: &BTreeSet<String>) -> WeightedGraph {
        WeightedGraph {
            usage: self
                .usage
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            edges: self
                .edges
                .iter()
                .filter(|((a, b), _)| keep.contains(a) && keep.contains(b))
                .map(|(k, &w)| (k.clone(), w))
                .collect(),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_graph(self)
    }
}

/// Index-based adjacency lists over a [`WeightedGraph`]; node `i` is the
/// `i`-th label in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub labels: Vec<String>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl Adjacency {
    pub fn from_graph(g: &WeightedGraph) -> Self {
        let labels: Vec<String> = g.usage.keys().cloned().collect();
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut neighbors = vec![Vec::new(); labels.len()];
        for ((a, b), &w) in &g.edges {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            neighbors[i].push((j, w as f64));
            neighbors[j].push((i, w as f64));
        }
        for n in &mut neighbors {
            n.sort_by_key(|&(j, _)| j);
        }
        Adjacency { labels, neighbors }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    /// Connected components as sorted index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &(u, _) in &self.neighbors[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Builds the co-occurrence graph: one node per distinct non-anchor hashtag,
/// usage = number of tweets using it, and weight 1 per tweet for every pair
/// of distinct hashtags sharing that tweet.
pub fn build_cooccurrence(tweets: &[Tweet], anchors: &BTreeSet<String>) -> WeightedGraph {
    let mut g = WeightedGraph::new();
    for t in tweets {
        let tags: BTreeSet<String> = extract_hashtags(&t.text)
            .into_iter()
            .filter(|h| !anchors.contains(h))
            .collect();
        let tags: Vec<&String> = tags.iter().collect();
        for (i, a) in tags.iter().enumerate() {
            g.add_node(a, 1);
            for b in &tags[i + 1..] {
                *g.edges.entry(((*a).clone(), (*b).clone())).or_default() += 1;
            }
        }
    }
    g
}

/// Probability under the uniform null model that an edge carrying share `p`
/// of a degree-`k` node's strength is at least that heavy: `(1 - p)^(k - 1)`.
/// Nodes with `k < 2` cannot certify edges and get 1.
pub fn disparity_significance(p: f64, k: usize) -> f64 {
    if k < 2 {
        1.0
    } else {
        (1.0 - p).max(0.0).powi(k as i32 - 1)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Multiscale backbone: keeps an edge when it is significant at level
/// `alpha` from either endpoint (strict `<`). Kept edges retain their
/// weights; nodes left without edges are dropped.
pub fn disparity_filter(g: &WeightedGraph, alpha: f64) -> Result<WeightedGraph> {
    check_alpha(alpha)?;
    let adj = g.adjacency();
    let mut keep = BTreeSet::new();
    for v in 0..adj.len() {
        let k = adj.degree(v);
        if k < 2 {
            continue;
        }
        let s = adj.strength(v);
        for &(u, w) in &adj.neighbors[v] {
            if disparity_significance(w / s, k) < alpha {
                keep.insert((v.min(u), v.max(u)));
            }
        }
    }
    let mut out = WeightedGraph::new();
    for &(i, j) in &keep {
        let (a, b) = (&adj.labels[i], &adj.labels[j]);
        for l in [a, b] {
            if !out.usage.contains_key(l) {
                out.usage.insert(l.clone(), g.usage[l]);
            }
        }
        out.edges.insert(key(a, b), g.edges[&key(a, b)]);
    }
    Ok(out)
}

/// Induced subgraph on the largest connected component; among equally large
/// components the one holding the smallest label wins.
pub fn largest_component(g: &WeightedGraph) -> WeightedGraph {
    let adj = g.adjacency();
    let comps = adj.components();
    let Some(best) = comps.iter().fold(None::<&Vec<usize>>, |best, c| match best {
        Some(b) if b.len() >= c.len() => Some(b),
        _ => Some(c),
    }) else {
        return WeightedGraph::new();
    };
    let keep = best.iter().map(|&i| adj.labels[i].clone()).collect();
    g.subgraph(&keep)
}

/// Mean local clustering coefficient, with 0 for nodes of degree < 2.
pub fn average_clustering(g: &WeightedGraph) -> f64 {
    let adj = g.adjacency();
    if adj.is_empty() {
        return 0.0;
    }
    let sets: Vec<BTreeSet<usize>> = adj
        .neighbors
        .iter()
        .map(|n| n.iter().map(|&(j, _)| j).collect())
        .collect();
    let total: f64 = (0..adj.len())
        .map(|v| {
            let k = sets[v].len();
            if k < 2 {
                return 0.0;
            }
            let nb: Vec<usize> = sets[v].iter().copied().collect();
            let mut tri = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if sets[a].contains(&b) {
                        tri += 1;
                    }
                }
            }
            tri as f64 / (k * (k - 1) / 2) as f64
        })
        .sum();
    total / adj.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneStats {
    pub nodes: usize,
    pub pct_original_nodes: f64,
    pub edges: usize,
    pub clustering: f64,
}

impl BackboneStats {
    pub const CSV_HEADER: &'static str = "nodes,pct_original_nodes,edges,clustering";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{:.4},{},{:.4}",
            self.nodes, self.pct_original_nodes, self.edges, self.clustering
        )
    }
}

pub fn network_stats(original: &WeightedGraph, topic: &WeightedGraph) -> BackboneStats {
    let pct = if original.node_count() == 0 {
        0.0
    } else {
        100.0 * topic.node_count() as f64 / original.node_count() as f64
    };
    BackboneStats {
        nodes: topic.node_count(),
        pct_original_nodes: pct,
        edges: topic.edge_count(),
        clustering: average_clustering(topic),
    }
}

/// Default significance grid 0.01, 0.02, ..., 0.10.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 100.0).collect()
}

/// Percent of the original nodes left in the topic network at each level.
pub fn alpha_sweep(g: &WeightedGraph, alphas: &[f64]) -> Result<Vec<(f64, f64)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let topic = largest_component(&disparity_filter(g, alpha)?);
            Ok((alpha, network_stats(g, &topic).pct_original_nodes))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicParams {
    pub alpha: f64,
    pub pagerank: PageRankParams,
    pub louvain_seed: u64,
    /// Display radius per square root of usage.
    pub size_scale: f64,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            alpha: 0.03,
            pagerank: PageRankParams::default(),
            louvain_seed: 0,
            size_scale: 1.0,
        }
    }
}

/// Connected backbone with communities, centralities and display sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicNetwork {
    pub graph: WeightedGraph,
    pub alpha: f64,
    pub community: BTreeMap<String, usize>,
    pub modularity: f64,
    pub centrality: BTreeMap<Measure, CentralityTable>,
    pub node_size: BTreeMap<String, f64>,
}

impl TopicNetwork {
    /// Filters `original`, keeps the largest component and annotates it.
    pub fn build(original: &WeightedGraph, params: &TopicParams) -> Result<Self> {
        let graph = largest_component(&disparity_filter(original, params.alpha)?);
        Self::annotate(graph, params)
    }

    /// Annotates an already-connected graph.
    pub fn annotate(graph: WeightedGraph, params: &TopicParams) -> Result<Self> {
        let adj = graph.adjacency();
        let comms = adj.components().len();
        if comms > 1 {
            return Err(Error::Disconnected { components: comms });
        }
        let mut centrality = BTreeMap::new();
        if !adj.is_empty() {
            centrality.insert(Measure::Betweenness, graphalgs::betweenness(&adj));
            centrality.insert(
                Measure::RandomWalkBetweenness,
                graphalgs::random_walk_betweenness(&adj)?,
            );
            centrality.insert(Measure::PageRank, graphalgs::pagerank(&adj, &params.pagerank)?);
        }
        let communities = graphalgs::louvain(&adj, params.louvain_seed);
        let node_size = graph
            .node_usage()
            .map(|(k, u)| (k.to_string(), params.size_scale * (u as f64).sqrt()))
            .collect();
        Ok(TopicNetwork {
            alpha: params.alpha,
            community: communities.labels,
            modularity: communities.modularity,
            centrality,
            node_size,
            graph,
        })
    }
}

/// `source,target,weight`, sorted by source then target.
pub fn write_edge_list_csv<W: Write>(g: &WeightedGraph, mut out: W) -> Result<()> {
    writeln!(out, "source,target,weight")?;
    for (a, b, w) in g.edges() {
        writeln!(out, "{},{},{}", csv_field(a), csv_field(b), w)?;
    }
    Ok(())
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// GraphML document with node usage, community, centralities and size, and
/// edge weights.
pub fn write_graphml<W: Write>(net: &TopicNetwork, mut out: W) -> Result<()> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"usage\" for=\"node\" attr.name=\"usage\" attr.type=\"long\"/>\n");
    s.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    for m in Measure::ALL {
        let _ = writeln!(
            s,
            "  <key id=\"{0}\" for=\"node\" attr.name=\"{0}\" attr.type=\"double\"/>",
            m.as_str()
        );
    }
    s.push_str("  <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"double\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    let _ = writeln!(
        s,
        "  <graph id=\"topic\" edgedefault=\"undirected\">\n    <desc>alpha={} modularity={}</desc>",
        net.alpha, net.modularity
    );
    for (label, usage) in net.graph.node_usage() {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(label));
        let _ = writeln!(s, "      <data key=\"usage\">{usage}</data>");
        if let Some(c) = net.community.get(label) {
            let _ = writeln!(s, "      <data key=\"community\">{c}</data>");
        }
        for (m, table) in &net.centrality {
            if let Some(v) = table.scores.get(label) {
                let _ = writeln!(s, "      <data key=\"{}\">{v}</data>", m.as_str());
            }
        }
        if let Some(r) = net.node_size.get(label) {
            let _ = writeln!(s, "      <data key=\"size\">{r}</data>");
        }
        s.push_str("    </node>\n");
    }
    for (i, (a, b, w)) in net.graph.edges().enumerate() {
        let _ = writeln!(
            s,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">\n      <data key=\"weight\">{w}</data>\n    </edge>",
            xml_escape(a),
            xml_escape(b)
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}
