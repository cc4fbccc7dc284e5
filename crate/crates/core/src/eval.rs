//! Ground-truth oracles and accuracy metrics.

use std::collections::BTreeSet;
use std::io::{self, Write};

use crate::error::{check_decay, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::query::ScoreVector;
use crate::sampler::{meet_lockstep, Rng};

/// Largest graph the dense oracle accepts by default (O(n²) memory).
pub const DEFAULT_EXACT_CAP: usize = 2000;

/// Iterations needed for the power method to reach `c^K <= 1e-12`.
pub fn default_iterations(c: f64) -> usize {
    ((1e-12f64).ln() / c.ln()).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct ExactSimRank {
    pub n: usize,
    pub c: f64,
    pub iterations: usize,
    values: Vec<f64>,
}

impl ExactSimRank {
    #[inline]
    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.values[u as usize * self.n + v as usize]
    }

    pub fn row(&self, u: NodeId) -> &[f64] {
        let u = u as usize;
        &self.values[u * self.n..(u + 1) * self.n]
    }

    /// Elementwise bound on the distance to the fixed point.
    pub fn residual_bound(&self) -> f64 {
        self.c.powi(self.iterations as i32)
    }
}

pub fn exact_simrank(graph: &Graph, c: f64, iterations: usize) -> Result<ExactSimRank> {
    exact_simrank_with_cap(graph, c, iterations, DEFAULT_EXACT_CAP)
}

/// Power method `S ← c·W S Wᵀ` with the diagonal pinned to 1, where row `u` of
/// `W` averages over `I(u)`. Rows and columns of nodes without in-neighbors
/// stay zero off the diagonal.
pub fn exact_simrank_with_cap(graph: &Graph, c: f64, iterations: usize, cap: usize) -> Result<ExactSimRank> {
    check_decay(c)?;
    let n = graph.node_count();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let mut s = vec![0.0; n * n];
    for u in 0..n {
        s[u * n + u] = 1.0;
    }
    let mut half = vec![0.0; n * n];
    for _ in 0..iterations {
        // half[u][y] = mean_{x ∈ I(u)} s[x][y]
        for u in 0..n {
            let ins = graph.in_neighbors(u as NodeId);
            let row = &mut half[u * n..(u + 1) * n];
            row.fill(0.0);
            if ins.is_empty() {
                continue;
            }
            for &x in ins {
                let src = &s[x as usize * n..(x as usize + 1) * n];
                for (h, &v) in row.iter_mut().zip(src) {
                    *h += v;
                }
            }
            let inv = 1.0 / ins.len() as f64;
            row.iter_mut().for_each(|h| *h *= inv);
        }
        // s[u][v] = c · mean_{y ∈ I(v)} half[u][y]
        for u in 0..n {
            let hrow = &half[u * n..(u + 1) * n];
            for v in 0..n {
                let val = if u == v {
                    1.0
                } else {
                    let ins = graph.in_neighbors(v as NodeId);
                    if ins.is_empty() {
                        0.0
                    } else {
                        let sum: f64 = ins.iter().map(|&y| hrow[y as usize]).sum();
                        c * sum / ins.len() as f64
                    }
                };
                s[u * n + v] = val;
            }
        }
    }
    Ok(ExactSimRank {
        n,
        c,
        iterations,
        values: s,
    })
}

/// Probability that two √c-walks from `w` never share a node at a step
/// `i >= 1`: both survive step one with probability `c` and land on a uniform
/// pair of in-neighbors, after which they meet with probability `s(x, y)`
/// (or surely, when `x = y`).
pub fn exact_eta(graph: &Graph, exact: &ExactSimRank, w: NodeId) -> f64 {
    let ins = graph.in_neighbors(w);
    if ins.is_empty() {
        return 1.0;
    }
    let d = ins.len() as f64;
    let mut sum = 0.0;
    for &x in ins {
        for &y in ins {
            sum += if x == y { 1.0 } else { exact.get(x, y) };
        }
    }
    1.0 - exact.c * sum / (d * d)
}

/// Sample count for which the mean of i.i.d. `[0, 1]` variables with mean at
/// most `mu_bound` is within `eps` of its expectation except with probability
/// `fail`, from `P[|X̄ - μ| >= ε] <= exp(-n ε² / (2ε/3 + 2μ))`.
///
/// For the pooled ground truth (error 1e-5, confidence 99.999%, μ <= 1) this
/// gives about 2.3e11 walk pairs per node pair.
pub fn chernoff_sample_size(eps: f64, fail: f64, mu_bound: f64) -> u64 {
    ((1.0 / fail).ln() * (2.0 * eps / 3.0 + 2.0 * mu_bound) / (eps * eps)).ceil() as u64
}

/// Fraction of `n_pairs` walk pairs from `u` and `v` that meet.
pub fn mc_pair_simrank(graph: &Graph, u: NodeId, v: NodeId, c: f64, n_pairs: u64, rng: &mut Rng) -> f64 {
    if u == v {
        return 1.0;
    }
    let sqrt_c = c.sqrt();
    let hits = (0..n_pairs)
        .filter(|_| meet_lockstep(graph, u, v, sqrt_c, rng))
        .count();
    hits as f64 / n_pairs as f64
}

/// Monte Carlo baseline: pairwise estimates against every node, each sized by
/// the Chernoff bound for error `eps` with failure `delta / n`.
pub fn mc_single_source(graph: &Graph, u: NodeId, c: f64, eps: f64, delta: f64, rng: &mut Rng) -> Result<ScoreVector> {
    check_decay(c)?;
    graph.check_node(u)?;
    let n = graph.node_count();
    let pairs = chernoff_sample_size(eps, delta / n as f64, 1.0);
    let mut scores = Vec::new();
    for v in 0..n as NodeId {
        let s = mc_pair_simrank(graph, u, v, c, pairs, rng);
        if s > 0.0 {
            scores.push((v, s));
        }
    }
    Ok(ScoreVector {
        source: u,
        n,
        scores,
        components: None,
    })
}

/// Union of every list's top-`k`.
pub fn build_pool(lists: &[&ScoreVector], k: usize) -> Result<Vec<NodeId>> {
    if k == 0 {
        return Err(Error::InvalidParameter("pool needs k >= 1".into()));
    }
    if lists.is_empty() {
        return Err(Error::InvalidParameter("pool needs at least one list".into()));
    }
    let pool: BTreeSet<NodeId> = lists.iter().flat_map(|l| l.top_k(k)).collect();
    Ok(pool.into_iter().collect())
}

/// The `k` pool nodes with the highest ground truth, ties by id.
pub fn truth_top_k(pool: &[NodeId], truth: impl Fn(NodeId) -> f64, k: usize) -> Vec<NodeId> {
    let mut ranked: Vec<(NodeId, f64)> = pool.iter().map(|&v| (v, truth(v))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(v, _)| v).collect()
}

/// Mean of `|ŝ(v) - s(v)|` over `top`.
pub fn avg_error_at_k(truth: impl Fn(NodeId) -> f64, est: &ScoreVector, top: &[NodeId]) -> Result<f64> {
    if top.is_empty() {
        return Err(Error::InvalidParameter("AvgError@k needs k >= 1".into()));
    }
    let total: f64 = top.iter().map(|&v| (est.get(v) - truth(v)).abs()).sum();
    Ok(total / top.len() as f64)
}

pub fn precision_at_k(truth_top: &[NodeId], est_top: &[NodeId]) -> Result<f64> {
    if truth_top.len() != est_top.len() || truth_top.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "Precision@k needs two non-empty sets of equal size (got {} and {})",
            truth_top.len(),
            est_top.len()
        )));
    }
    let truth: BTreeSet<NodeId> = truth_top.iter().copied().collect();
    let hits = est_top.iter().filter(|v| truth.contains(v)).count();
    Ok(hits as f64 / truth_top.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub source: u64,
    pub k: usize,
    pub avg_error: f64,
    pub precision: f64,
    pub micros: u128,
    pub samples: u64,
    pub vb_walks: u64,
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub const HEADER: &'static str = "source,k,avg_error,precision,micros,samples,vb_walks";

    /// One row per query followed by a `mean` row.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.source, r.k, r.avg_error, r.precision, r.micros, r.samples, r.vb_walks
            )?;
        }
        if !self.rows.is_empty() {
            let m = self.rows.len() as f64;
            let mean = |f: &dyn Fn(&EvalRow) -> f64| self.rows.iter().map(f).sum::<f64>() / m;
            writeln!(
                out,
                "mean,{},{},{},{},{},{}",
                self.rows[0].k,
                mean(&|r| r.avg_error),
                mean(&|r| r.precision),
                mean(&|r| r.micros as f64),
                mean(&|r| r.samples as f64),
                mean(&|r| r.vb_walks as f64),
            )?;
        }
        Ok(())
    }
}
