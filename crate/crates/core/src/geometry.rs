//! Community count and geometry vector of a single graph from the log-abs
//! profiles of its extremal eigenvectors.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{self, KrylovOptions};
use crate::spectral::{smallest_eigenvalue, DENSE_LIMIT};

/// Regularizer inside the logarithm.
pub const LOG_EPS: f64 = 1e-12;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Spanning-tree edges this many times longer than the 90th percentile edge
/// separate node groups in the canonical order.
pub const SEPARATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryEstimate {
    #[serde(rename = "K")]
    pub k: usize,
    /// Positions in the canonical node order where a new block starts.
    pub change_points: Vec<usize>,
    /// Block fractions, non-increasing.
    pub s: Vec<f64>,
    pub community_count: usize,
    /// Canonical node order; block j is order[cp_{j-1}..cp_j].
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Penalty per change point is beta · ln n; `None` uses 2(d + 1) for d
    /// profile channels.
    pub beta: Option<f64>,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions { beta: None }
    }
}

/// Top eigenpairs together with the smallest eigenvalue.
struct Extremal {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    smallest: f64,
}

/// Eigenpairs strictly above |λ_min|, plus any pair tied with the last one.
fn extremal_pairs(g: &Graph) -> Result<Extremal> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument("geometry needs n >= 2".into()));
    }
    if n <= DENSE_LIMIT {
        let all = linalg::sym_eigen_desc(g.adjacency());
        let smallest = *all.values.last().unwrap();
        return Ok(Extremal {
            values: all.values,
            vectors: all.vectors,
            smallest,
        });
    }
    let smallest = smallest_eigenvalue(g)?;
    let mut k = 8.min(n);
    loop {
        let pairs = linalg::top_eigenpairs(n, k, |x, y| g.mul_vec(x, y), KrylovOptions::default())?;
        let last = pairs.values[k - 1];
        if k == n || last <= smallest.abs() - DEGENERACY_GAP {
            return Ok(Extremal {
                values: pairs.values,
                vectors: pairs.vectors,
                smallest,
            });
        }
        k = (2 * k).min(n);
    }
}

fn count_above(values: &[f64], smallest: f64) -> usize {
    values.iter().take_while(|&&v| v > smallest.abs()).count()
}

/// Number of eigenvalues strictly greater than |λ_min|.
pub fn extremal_count(g: &Graph) -> Result<usize> {
    let e = extremal_pairs(g)?;
    Ok(count_above(&e.values, e.smallest))
}

/// One profile channel per eigenvector, or per degenerate cluster of
/// eigenvectors, in original node order. A cluster that straddles position
/// `k` is taken whole. Returns (channels, number of eigenvectors used).
fn channels(values: &[f64], vectors: &DMatrix<f64>, k: usize) -> (Vec<Vec<f64>>, usize) {
    let n = vectors.nrows();
    let mut out = Vec::new();
    let mut j = 0;
    while j < k {
        let mut end = j + 1;
        while end < values.len() && (values[end - 1] - values[end]).abs() < DEGENERACY_GAP {
            end += 1;
        }
        let r = (end - j) as f64;
        let ch = (0..n)
            .map(|i| {
                if end - j == 1 {
                    (vectors[(i, j)].abs() + LOG_EPS).ln()
                } else {
                    let diag: f64 = (j..end).map(|c| vectors[(i, c)].powi(2)).sum();
                    r * ((diag / r).sqrt() + LOG_EPS).ln()
                }
            })
            .collect();
        out.push(ch);
        j = end;
    }
    (out, j)
}

/// Eigenvector profile in canonical node order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProfile {
    /// Canonical node order.
    pub order: Vec<usize>,
    /// Σ_j log(|u_j| + η) per node, listed in canonical order.
    pub profile: Vec<f64>,
    /// Per-eigenvector (or per-cluster) terms of the sum, canonical order.
    pub channels: Vec<Vec<f64>>,
}

/// Log-abs profile of the `k` leading eigenvectors, with nodes reordered by
/// the single-linkage leaf order of their spectral embedding.
pub fn eigenvector_profile(g: &Graph, k: usize) -> Result<EigenProfile> {
    if k == 0 {
        return Err(Error::InvalidArgument("profile needs K >= 1".into()));
    }
    let mut e = extremal_pairs(g)?;
    if k > e.values.len() {
        if g.n() <= DENSE_LIMIT || k > g.n() {
            return Err(Error::TruncationOutOfRange { c: k, n: g.n() });
        }
        let pairs = linalg::top_eigenpairs(
            g.n(),
            k + 2,
            |x, y| g.mul_vec(x, y),
            KrylovOptions::default(),
        )?;
        e.values = pairs.values;
        e.vectors = pairs.vectors;
    }
    Ok(profile_from(&e.values, &e.vectors, k))
}

fn profile_from(values: &[f64], vectors: &DMatrix<f64>, k: usize) -> EigenProfile {
    let n = vectors.nrows();
    let (raw, used) = channels(values, vectors, k);
    let order = embedding_order(vectors, used);
    let channels: Vec<Vec<f64>> = raw
        .iter()
        .map(|ch| order.iter().map(|&v| ch[v]).collect())
        .collect();
    let profile = (0..n)
        .map(|t| channels.iter().map(|ch| ch[t]).sum())
        .collect();
    EigenProfile {
        order,
        profile,
        channels,
    }
}

/// Canonical node order from the rows of √n·U, U the first `d`
/// eigenvectors. Rows are grouped by single linkage, cutting minimum spanning
/// tree edges longer than SEPARATION_FACTOR times the 90th percentile edge.
/// Groups follow the dendrogram leaf order, so well-separated clusters are
/// contiguous; inside a group nodes keep their index order, which keeps the
/// profile free of ordering artefacts within a block. Row distances do not
/// depend on eigenvector signs or on the basis of a degenerate eigenspace.
fn embedding_order(vectors: &DMatrix<f64>, d: usize) -> Vec<usize> {
    let n = vectors.nrows();
    let scale = (n as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|j| scale * vectors[(i, j)]).collect())
        .collect();
    let dist2 = |a: usize, b: usize| -> f64 {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };

    // Prim's algorithm on the complete graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0usize; n];
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    in_tree[0] = true;
    for v in 1..n {
        best[v] = dist2(0, v);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (next == usize::MAX || best[v] < best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((best[next], link[next].min(next), link[next].max(next)));
        for v in 0..n {
            if !in_tree[v] {
                let dv = dist2(next, v);
                if dv < best[v] {
                    best[v] = dv;
                    link[v] = next;
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let cut = if edges.is_empty() {
        0.0
    } else {
        SEPARATION_FACTOR * SEPARATION_FACTOR * edges[edges.len() * 9 / 10].0
    };

    // Kruskal merges over the tree edges. Short edges build clusters whose
    // members stay in index order; long edges join clusters end to end.
    let mut parent: Vec<usize> = (0..n).collect();
    let mut leaves: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (len2, a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let (first, second) = if leaves[ra][0] <= leaves[rb][0] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let moved = std::mem::take(&mut leaves[second]);
        leaves[first].extend(moved);
        if len2 <= cut {
            leaves[first].sort_unstable();
        }
        parent[second] = first;
    }
    let root = find(&mut parent, 0);
    std::mem::take(&mut leaves[root])
}

/// Rank-based normal scores, average ranks on ties. Log-abs entries of an
/// eigenvector that is near zero on a block are heavy-tailed; scores keep the
/// ordering between blocks and tame the tails before segmentation.
pub fn normal_scores(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // Average of 1-based ranks i+1..=j.
        let rank = (i + j + 1) as f64 / 2.0;
        let score = z.inverse_cdf((rank - 0.5) / n as f64);
        for &k in &idx[i..j] {
            out[k] = score;
        }
        i = j;
    }
    out
}

/// Prefix sums for O(1) segment costs.
struct Prefix {
    s1: Vec<Vec<f64>>,
    s2: Vec<Vec<f64>>,
    floor: Vec<f64>,
}

impl Prefix {
    fn new(channels: &[Vec<f64>]) -> Self {
        let mut s1 = Vec::with_capacity(channels.len());
        let mut s2 = Vec::with_capacity(channels.len());
        let mut floor = Vec::with_capacity(channels.len());
        for ch in channels {
            let mut a = vec![0.0; ch.len() + 1];
            let mut b = vec![0.0; ch.len() + 1];
            // Center first so the prefix sums do not cancel catastrophically.
            let mean = ch.iter().sum::<f64>() / ch.len() as f64;
            for (t, &x) in ch.iter().enumerate() {
                let y = x - mean;
                a[t + 1] = a[t] + y;
                b[t + 1] = b[t] + y * y;
            }
            let total_var = b[ch.len()] / ch.len() as f64;
            floor.push((1e-10 * total_var).max(1e-20));
            s1.push(a);
            s2.push(b);
        }
        Prefix { s1, s2, floor }
    }

    /// Twice the negative Gaussian log-likelihood (up to constants) of
    /// [a, b) with its own mean and variance per channel.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let m = (b - a) as f64;
        (0..self.s1.len())
            .map(|j| {
                let s1 = self.s1[j][b] - self.s1[j][a];
                let s2 = self.s2[j][b] - self.s2[j][a];
                let var = ((s2 - s1 * s1 / m) / m).max(self.floor[j]);
                m * var.ln()
            })
            .sum()
    }
}

/// Binary segmentation for changes in mean and variance across all channels.
/// A split is kept when it lowers the cost by more than `penalty` and leaves
/// both sides at least `min_len` long. Returns sorted change points.
pub fn binary_segmentation(channels: &[Vec<f64>], min_len: usize, penalty: f64) -> Vec<usize> {
    let n = channels.first().map_or(0, Vec::len);
    let min_len = min_len.max(2);
    if n < 2 * min_len {
        return Vec::new();
    }
    let pre = Prefix::new(channels);
    let mut out = Vec::new();
    let mut stack = vec![(0usize, n)];
    while let Some((a, b)) = stack.pop() {
        if b - a < 2 * min_len {
            continue;
        }
        let whole = pre.cost(a, b);
        let mut best: Option<(f64, usize)> = None;
        for t in (a + min_len)..=(b - min_len) {
            let gain = whole - pre.cost(a, t) - pre.cost(t, b);
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, t));
            }
        }
        if let Some((gain, t)) = best {
            if gain > penalty {
                out.push(t);
                stack.push((a, t));
                stack.push((t, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Replaces adjacent change points closer than `min_gap` by their (floored)
/// average until all gaps are at least `min_gap`.
pub fn merge_change_points(cps: &[usize], min_gap: usize) -> Vec<usize> {
    let mut v: Vec<usize> = cps.to_vec();
    v.sort_unstable();
    v.dedup();
    loop {
        let close = (1..v.len())
            .filter(|&i| v[i] - v[i - 1] < min_gap)
            .min_by_key(|&i| v[i] - v[i - 1]);
        match close {
            Some(i) => {
                let avg = (v[i] + v[i - 1]) / 2;
                v.splice(i - 1..=i, [avg]);
                v.dedup();
            }
            None => return v,
        }
    }
}

/// Drops change points that leave a first or last block shorter than
/// `min_len`, then re-merges.
fn enforce_block_sizes(mut cps: Vec<usize>, n: usize, min_len: usize) -> Vec<usize> {
    loop {
        cps = merge_change_points(&cps, min_len);
        let before = cps.len();
        cps.retain(|&c| c >= min_len && n - c >= min_len);
        if cps.len() == before {
            return cps;
        }
    }
}

pub fn detect_geometry(g: &Graph) -> Result<GeometryEstimate> {
    detect_geometry_with(g, GeometryOptions::default())
}

pub fn detect_geometry_with(g: &Graph, opts: GeometryOptions) -> Result<GeometryEstimate> {
    let n = g.n();
    let e = extremal_pairs(g)?;
    let k = count_above(&e.values, e.smallest);
    let single = |k: usize, order: Vec<usize>| GeometryEstimate {
        k,
        change_points: vec![],
        s: vec![1.0],
        community_count: 1,
        order,
    };
    if k == 0 {
        return Ok(single(0, (0..n).collect()));
    }
    let prof = profile_from(&e.values, &e.vectors, k);
    let lambda1 = e.values[0];
    let min_len = (lambda1.ceil().max(1.0) as usize).min(n);
    let d = prof.channels.len() as f64;
    let beta = opts.beta.unwrap_or(2.0 * (d + 1.0));
    let scores: Vec<Vec<f64>> = prof.channels.iter().map(|ch| normal_scores(ch)).collect();
    let raw = binary_segmentation(&scores, min_len, beta * (n as f64).ln());
    let cps = enforce_block_sizes(raw, n, min_len);
    if cps.is_empty() {
        return Ok(single(k, prof.order));
    }
    Ok(estimate_from_change_points(k, cps, n, prof.order))
}

fn estimate_from_change_points(
    k: usize,
    cps: Vec<usize>,
    n: usize,
    order: Vec<usize>,
) -> GeometryEstimate {
    let mut bounds = vec![0];
    bounds.extend(&cps);
    bounds.push(n);
    let mut s: Vec<f64> = bounds
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / n as f64)
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    GeometryEstimate {
        k,
        community_count: cps.len() + 1,
        change_points: cps,
        s,
        order,
    }
}

/// Corpus indices grouped by detected community count, ascending count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountCluster {
    pub community_count: usize,
    pub members: Vec<usize>,
}

pub fn cluster_by_community_count(corpus: &[Graph]) -> Result<Vec<CountCluster>> {
    let estimates: Vec<GeometryEstimate> = corpus
        .par_iter()
        .map(detect_geometry)
        .collect::<Result<_>>()?;
    Ok(cluster_estimates(&estimates))
}

pub fn cluster_estimates(estimates: &[GeometryEstimate]) -> Vec<CountCluster> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in estimates.iter().enumerate() {
        groups.entry(e.community_count).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(community_count, members)| CountCluster {
            community_count,
            members,
        })
        .collect()
}
