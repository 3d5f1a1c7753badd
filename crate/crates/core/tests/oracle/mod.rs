//! Slow, direct reference implementations used to check the library.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;

/// Term-by-term Jensen-Shannon divergence with natural logs converted at
/// the end. Returns the total and the contribution of each token.
pub fn jsd_terms(
    p: &BTreeMap<String, f64>,
    q: &BTreeMap<String, f64>,
    pi1: f64,
    pi2: f64,
) -> (f64, BTreeMap<String, f64>) {
    let plogp = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let mut tokens: Vec<&String> = p.keys().chain(q.keys()).collect();
    tokens.sort();
    tokens.dedup();
    let mut per = BTreeMap::new();
    let mut total = 0.0;
    for t in tokens {
        let pi = p.get(t).copied().unwrap_or(0.0);
        let qi = q.get(t).copied().unwrap_or(0.0);
        let m = pi1 * pi + pi2 * qi;
        let c = (-plogp(m) + pi1 * plogp(pi) + pi2 * plogp(qi)) / std::f64::consts::LN_2;
        total += c;
        per.insert(t.clone(), c);
    }
    (total, per)
}

/// Edge list of a graph on nodes `0..n` with positive weights.
pub type Edges = Vec<(usize, usize, f64)>;

fn hop_distances(n: usize, edges: &Edges) -> Vec<Vec<usize>> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b, _) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Normalized shortest-path betweenness. Shortest-path counts come from
/// powers of the 0/1 adjacency matrix: the number of walks of length
/// `dist(s, t)` between `s` and `t` equals the number of shortest paths.
pub fn betweenness(n: usize, edges: &Edges) -> Vec<f64> {
    if n < 3 {
        return vec![0.0; n];
    }
    let d = hop_distances(n, edges);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(i, j, _) in edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let mut powers = vec![DMatrix::<f64>::identity(n, n)];
    for k in 1..n {
        let next = &powers[k - 1] * &a;
        powers.push(next);
    }
    let sigma = |s: usize, t: usize| powers[d[s][t]][(s, t)];
    let mut out = vec![0.0; n];
    for (v, o) in out.iter_mut().enumerate() {
        for s in 0..n {
            for t in s + 1..n {
                if s == v || t == v {
                    continue;
                }
                if d[s][v] + d[v][t] == d[s][t] {
                    *o += sigma(s, v) * sigma(v, t) / sigma(s, t);
                }
            }
        }
        *o *= 2.0 / ((n - 1) * (n - 2)) as f64;
    }
    out
}

pub fn laplacian(n: usize, edges: &Edges) -> DMatrix<f64> {
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

/// Moore-Penrose pseudo-inverse of a connected graph's Laplacian through
/// the identity `L+ = (L + J/n)^-1 - J/n`.
pub fn laplacian_pinv(n: usize, edges: &Edges) -> DMatrix<f64> {
    let j = DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
    (laplacian(n, edges) + &j).try_inverse().expect("connected graph") - j
}

/// Current-flow betweenness from the pseudo-inverse of the full Laplacian.
pub fn current_flow(n: usize, edges: &Edges) -> Vec<f64> {
    if n < 3 {
        return vec![0.0; n];
    }
    let pinv = laplacian_pinv(n, edges);
    let mut out = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let v: Vec<f64> = (0..n).map(|i| pinv[(i, s)] - pinv[(i, t)]).collect();
            let mut through = vec![0.0; n];
            for &(i, j, w) in edges {
                let current = w * (v[i] - v[j]).abs();
                through[i] += current;
                through[j] += current;
            }
            for (x, th) in through.iter().enumerate() {
                if x != s && x != t {
                    out[x] += 0.5 * th;
                }
            }
        }
    }
    let norm = 2.0 / ((n - 1) * (n - 2)) as f64;
    out.iter().map(|x| x * norm).collect()
}

/// PageRank as the solution of `(I - d W D^-1) x = (1 - d) / n`.
/// Assumes no isolated nodes.
pub fn pagerank(n: usize, edges: &Edges, d: f64) -> Vec<f64> {
    let mut w = DMatrix::<f64>::zeros(n, n);
    for &(i, j, x) in edges {
        w[(i, j)] += x;
        w[(j, i)] += x;
    }
    let strength: Vec<f64> = (0..n).map(|j| w.column(j).sum()).collect();
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= d * w[(i, j)] / strength[j];
        }
    }
    let rhs = nalgebra::DVector::from_element(n, (1.0 - d) / n as f64);
    let x = m.lu().solve(&rhs).expect("nonsingular");
    x.iter().copied().collect()
}

/// Weighted modularity of a partition given as a community id per node.
pub fn modularity(n: usize, edges: &Edges, community: &[usize]) -> f64 {
    let m: f64 = edges.iter().map(|e| e.2).sum();
    if m == 0.0 {
        return 0.0;
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in edges {
        a[(i, j)] += w;
        a[(j, i)] += w;
    }
    let k: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if community[i] == community[j] {
                q += a[(i, j)] - k[i] * k[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            grow(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut prefix = vec![0];
    grow(&mut prefix, 0, n, &mut out);
    out
}

/// Best modularity over all partitions, with the optimal partitions.
pub fn best_modularity(n: usize, edges: &Edges) -> (f64, Vec<Vec<usize>>) {
    let mut best = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for part in set_partitions(n) {
        let q = modularity(n, edges, &part);
        if q > best + 1e-12 {
            best = q;
            argmax = vec![part];
        } else if (q - best).abs() <= 1e-12 {
            argmax.push(part);
        }
    }
    (best, argmax)
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Null-model tail `1 - (k - 1) ∫_0^p (1 - x)^(k - 2) dx` by quadrature.
pub fn disparity_tail_quadrature(p: f64, k: usize, rule: &[(f64, f64)]) -> f64 {
    let half = p / 2.0;
    let integral: f64 = rule
        .iter()
        .map(|&(x, w)| {
            let t = half * (x + 1.0);
            w * (1.0 - t).powi(k as i32 - 2)
        })
        .sum::<f64>()
        * half;
    1.0 - (k - 1) as f64 * integral
}

/// One representative edge set per isomorphism class of connected simple
/// graphs on `n` nodes.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let index = |a: usize, b: usize| pairs.iter().position(|&e| e == (a.min(b), a.max(b))).unwrap();
    // for each permutation, where each pair bit moves to
    let moves: Vec<Vec<u32>> = permutations(n)
        .iter()
        .map(|p| pairs.iter().map(|&(a, b)| 1u32 << index(p[a], p[b])).collect())
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| pairs[b])
            .collect();
        if edges.len() + 1 < n || !is_connected(n, &edges) {
            continue;
        }
        let bits: Vec<usize> = (0..pairs.len()).filter(|b| mask >> b & 1 == 1).collect();
        let canon = moves
            .iter()
            .map(|m| bits.iter().fold(0u32, |acc, &b| acc | m[b]))
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(edges);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let other = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.iter().all(|&s| s)
}
