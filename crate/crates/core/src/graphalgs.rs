//! Centrality measures and Louvain community detection over [`Adjacency`]
//! graphs.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hashnet::{csv_field, Adjacency, TopicNetwork};

/// Sources are processed in fixed-size chunks and the partial sums combined
/// in chunk order, so results do not depend on the thread count.
const CHUNK: usize = 16;

/// Graphs up to this size use a dense inverse of the grounded Laplacian;
/// larger ones solve column by column with conjugate gradients.
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Betweenness,
    RandomWalkBetweenness,
    PageRank,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Betweenness, Measure::RandomWalkBetweenness, Measure::PageRank];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Betweenness => "betweenness",
            Measure::RandomWalkBetweenness => "random_walk_betweenness",
            Measure::PageRank => "pagerank",
        }
    }
}

/// Scores per node plus the descending ranking (ties broken by label).
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityTable {
    pub measure: Measure,
    pub scores: BTreeMap<String, f64>,
    pub ranking: Vec<String>,
}

impl CentralityTable {
    pub fn new(measure: Measure, labels: &[String], values: &[f64]) -> Self {
        let scores: BTreeMap<String, f64> = labels.iter().cloned().zip(values.iter().copied()).collect();
        // Scores within 1e-12 of each other rank as ties.
        let quantize = |v: f64| (v * 1e12).round();
        let mut ranking: Vec<String> = labels.to_vec();
        ranking.sort_by(|a, b| {
            quantize(scores[b])
                .total_cmp(&quantize(scores[a]))
                .then_with(|| a.cmp(b))
        });
        CentralityTable {
            measure,
            scores,
            ranking,
        }
    }

    pub fn score(&self, label: &str) -> Option<f64> {
        self.scores.get(label).copied()
    }
}

fn chunked_sum<F>(n: usize, per_source: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &s in chunk {
                per_source(s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Shortest-path betweenness on hop counts, normalized by
/// `2 / ((n - 1)(n - 2))`. Graphs with fewer than three nodes score zero.
pub fn betweenness(adj: &Adjacency) -> CentralityTable {
    let n = adj.len();
    if n < 3 {
        return CentralityTable::new(Measure::Betweenness, &adj.labels, &vec![0.0; n]);
    }
    let raw = chunked_sum(n, |s, acc| {
        // Brandes: BFS from s, then accumulate dependencies in reverse order.
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut order = Vec::with_capacity(n);
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(w, _) in &adj.neighbors[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                acc[w] += delta[w];
            }
        }
    });
    // each unordered pair is visited from both ends
    let norm = 1.0 / ((n - 1) * (n - 2)) as f64;
    let scores: Vec<f64> = raw.iter().map(|v| v * norm).collect();
    CentralityTable::new(Measure::Betweenness, &adj.labels, &scores)
}

/// Dense symmetric matrix stored row-major.
struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }
}

/// Laplacian with the last node grounded (its row and column removed).
fn grounded_laplacian(adj: &Adjacency) -> Dense {
    let n = adj.len() - 1;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for &(j, w) in &adj.neighbors[i] {
            a[i * n + i] += w;
            if j < n {
                a[i * n + j] -= w;
            }
        }
    }
    Dense { n, a }
}

/// Inverse of an SPD matrix through its Cholesky factor.
fn spd_inverse(m: &Dense) -> Result<Dense> {
    let n = m.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m.at(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::Domain("grounded Laplacian is not positive definite".into()));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m.at(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            // L y = e_c, then L^T x = y
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k * n + i] * x[k];
                }
                x[i] = s / l[i * n + i];
            }
            x
        })
        .collect();
    let mut a = vec![0.0; n * n];
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            a[r * n + c] = *v;
        }
    }
    Ok(Dense { n, a })
}

/// Jacobi-preconditioned conjugate gradients for the grounded Laplacian,
/// applied matrix-free.
fn cg_solve(adj: &Adjacency, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut s = 0.0;
            for &(j, w) in &adj.neighbors[i] {
                s += w * x[i];
                if j < n {
                    s -= w * x[j];
                }
            }
            out[i] = s;
        }
    };
    let diag: Vec<f64> = (0..n).map(|i| adj.strength(i)).collect();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut ap = vec![0.0; n];
    for _ in 0..10 * n.max(10) {
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-14 * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Full `n x n` potential matrix: the grounded inverse padded with a zero
/// row and column for the grounded node.
fn potential_matrix(adj: &Adjacency, dense: bool) -> Result<Vec<Vec<f64>>> {
    let n = adj.len();
    let inner: Vec<Vec<f64>> = if dense {
        let inv = spd_inverse(&grounded_laplacian(adj))?;
        (0..n - 1).map(|i| (0..n - 1).map(|j| inv.at(i, j)).collect()).collect()
    } else {
        // columns of the inverse; symmetric, so they double as rows
        (0..n - 1)
            .into_par_iter()
            .map(|c| {
                let mut e = vec![0.0; n - 1];
                e[c] = 1.0;
                cg_solve(adj, &e)
            })
            .collect()
    };
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i < n - 1 && j < n - 1 { inner[i][j] } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Current-flow (random-walk) betweenness with edge weights as
/// conductances. For every pair a unit current enters at the source and
/// leaves at the target; a node's throughflow is half the absolute current
/// on its edges. Endpoints are excluded and totals normalized by
/// `2 / ((n - 1)(n - 2))`.
pub fn random_walk_betweenness(adj: &Adjacency) -> Result<CentralityTable> {
    random_walk_betweenness_with(adj, adj.len() <= DENSE_LIMIT)
}

/// As [`random_walk_betweenness`], choosing the dense or iterative solver explicitly.
pub fn random_walk_betweenness_with(adj: &Adjacency, dense: bool) -> Result<CentralityTable> {
    let n = adj.len();
    if n < 3 {
        if n == 2 && adj.degree(0) == 0 {
            return Err(Error::Disconnected { components: 2 });
        }
        return Ok(CentralityTable::new(
            Measure::RandomWalkBetweenness,
            &adj.labels,
            &vec![0.0; n],
        ));
    }
    let comps = adj.components().len();
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let c = potential_matrix(adj, dense)?;
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| {
            adj.neighbors[i]
                .iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
        .collect();
    let raw = chunked_sum(n, |s, acc| {
        for t in s + 1..n {
            for &(i, j, w) in &edges {
                let vi = c[i][s] - c[i][t];
                let vj = c[j][s] - c[j][t];
                let flow = 0.5 * w * (vi - vj).abs();
                if i != s && i != t {
                    acc[i] += flow;
                }
                if j != s && j != t {
                    acc[j] += flow;
                }
            }
        }
    });
    let norm = 2.0 / ((n - 1) * (n - 2)) as f64;
    let scores: Vec<f64> = raw.iter().map(|v| v * norm).collect();
    Ok(CentralityTable::new(
        Measure::RandomWalkBetweenness,
        &adj.labels,
        &scores,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Power iteration on the weighted random walk with uniform teleportation.
/// Nodes without edges spread their mass uniformly.
pub fn pagerank(adj: &Adjacency, params: &PageRankParams) -> Result<CentralityTable> {
    let n = adj.len();
    if n == 0 {
        return Err(Error::Domain("pagerank of an empty graph".into()));
    }
    let d = params.damping;
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Domain(format!("damping must lie in (0, 1), got {d}")));
    }
    let strength: Vec<f64> = (0..n).map(|i| adj.strength(i)).collect();
    let mut x = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..params.max_iter {
        let dangling: f64 = (0..n).filter(|&i| strength[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) / n as f64 + d * dangling / n as f64;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                base + d * adj.neighbors[i]
                    .iter()
                    .map(|&(j, w)| x[j] * w / strength[j])
                    .sum::<f64>()
            })
            .collect();
        residual = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if residual < params.tol {
            let total: f64 = x.iter().sum();
            let scores: Vec<f64> = x.iter().map(|v| v / total).collect();
            return Ok(CentralityTable::new(Measure::PageRank, &adj.labels, &scores));
        }
    }
    Err(Error::NoConvergence {
        iterations: params.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    /// Community ids numbered from 0 in order of each community's smallest label.
    pub labels: BTreeMap<String, usize>,
    pub modularity: f64,
    /// Modularity of the original graph after each aggregation level.
    pub level_modularity: Vec<f64>,
}

/// Weighted Newman-Girvan modularity at resolution 1 for a community id per node.
/// Graphs without edges have modularity 0.
pub fn modularity(adj: &Adjacency, community: &[usize]) -> f64 {
    let m: f64 = (0..adj.len()).map(|i| adj.strength(i)).sum::<f64>() / 2.0;
    if m == 0.0 {
        return 0.0;
    }
    let k = community.iter().copied().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for i in 0..adj.len() {
        degree[community[i]] += adj.strength(i);
        for &(j, w) in &adj.neighbors[i] {
            if j > i && community[i] == community[j] {
                internal[community[i]] += w;
            }
        }
    }
    (0..k).map(|c| internal[c] / m - (degree[c] / (2.0 * m)).powi(2)).sum()
}

struct Level {
    neighbors: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

/// Local-move phase. Returns the community of each level node (renumbered
/// densely in order of first appearance) and whether anything moved.
fn local_moves(level: &Level, two_m: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    const EPS: f64 = 1e-12;
    let n = level.degree.len();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = level.degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved = false;
    loop {
        let mut improved = false;
        for &i in &order {
            let ci = comm[i];
            let ki = level.degree[i];
            for &(j, w) in &level.neighbors[i] {
                if j == i {
                    continue;
                }
                let c = comm[j];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[ci] -= ki;
            let gain = |c: usize| link[c] - tot[c] * ki / two_m;
            let mut best = ci;
            let mut best_gain = gain(ci);
            touched.sort_unstable();
            for &c in &touched {
                if c != ci && gain(c) > best_gain + EPS {
                    best = c;
                    best_gain = gain(c);
                }
            }
            tot[best] += ki;
            comm[i] = best;
            if best != ci {
                improved = true;
                moved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        if !improved {
            break;
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut next = 0;
    for c in comm.iter_mut() {
        if remap[*c] == usize::MAX {
            remap[*c] = next;
            next += 1;
        }
        *c = remap[*c];
    }
    (comm, moved)
}

fn aggregate(level: &Level, comm: &[usize]) -> Level {
    let k = comm.iter().copied().max().map_or(0, |c| c + 1);
    let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    let mut degree = vec![0.0; k];
    for (i, nb) in level.neighbors.iter().enumerate() {
        degree[comm[i]] += level.degree[i];
        for &(j, w) in nb {
            *weights[comm[i]].entry(comm[j]).or_default() += w;
        }
    }
    Level {
        neighbors: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
        degree,
    }
}

/// Two-phase Louvain maximizing modularity. The node visit order of each
/// level is shuffled from `seed`; a node only moves for a strictly positive
/// gain, and equal gains go to the lowest community id.
pub fn louvain(adj: &Adjacency, seed: u64) -> CommunityAssignment {
    let n = adj.len();
    let mut assignment: Vec<usize> = (0..n).collect();
    let two_m: f64 = (0..n).map(|i| adj.strength(i)).sum();
    let mut level_modularity = Vec::new();
    if two_m > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level = Level {
            neighbors: adj.neighbors.clone(),
            degree: (0..n).map(|i| adj.strength(i)).collect(),
        };
        loop {
            let (comm, moved) = local_moves(&level, two_m, &mut rng);
            if !moved {
                break;
            }
            for a in assignment.iter_mut() {
                *a = comm[*a];
            }
            level_modularity.push(modularity(adj, &assignment));
            level = aggregate(&level, &comm);
        }
    }
    // renumber by smallest member label (labels are sorted)
    let mut remap = BTreeMap::new();
    for &a in &assignment {
        let next = remap.len();
        remap.entry(a).or_insert(next);
    }
    let assignment: Vec<usize> = assignment.iter().map(|a| remap[a]).collect();
    let q = modularity(adj, &assignment);
    CommunityAssignment {
        labels: adj.labels.iter().cloned().zip(assignment).collect(),
        modularity: q,
        level_modularity,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityRow {
    pub measure: Measure,
    pub rank: usize,
    pub node: String,
    pub score: f64,
}

/// Top-`k` nodes per measure; smaller networks list every node.
pub fn centrality_table(net: &TopicNetwork, k: usize) -> Vec<CentralityRow> {
    let mut rows = Vec::new();
    for m in Measure::ALL {
        if let Some(table) = net.centrality.get(&m) {
            for (i, node) in table.ranking.iter().take(k).enumerate() {
                rows.push(CentralityRow {
                    measure: m,
                    rank: i + 1,
                    node: node.clone(),
                    score: table.scores[node],
                });
            }
        }
    }
    rows
}

/// `measure,rank,node,score` with four decimal places.
pub fn write_centrality_csv<W: Write>(rows: &[CentralityRow], mut out: W) -> Result<()> {
    writeln!(out, "measure,rank,node,score")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.4}",
            r.measure.as_str(),
            r.rank,
            csv_field(&r.node),
            r.score
        )?;
    }
    Ok(())
}
