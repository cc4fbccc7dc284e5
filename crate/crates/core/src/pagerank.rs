//! Reverse PageRank and exact ℓ-hop reverse personalized PageRank.
//!
//! A √c-walk from `u` stops at its current node with probability `1 - √c`,
//! otherwise moves to a uniformly random in-neighbor. At a node without
//! in-neighbors the continue branch has nowhere to go and the walk evaporates,
//! so both quantities below are sub-stochastic on graphs with such nodes.

use crate::error::{check_decay, Error, Result};
use crate::graph::{Graph, NodeId};

pub const DEFAULT_TOL: f64 = 1e-9;

/// `π_ℓ(·, target)` for `ℓ = 0..=max_level`, dense per level.
#[derive(Debug, Clone)]
pub struct RpprVector {
    pub target: NodeId,
    pub levels: Vec<Vec<f64>>,
}

impl RpprVector {
    /// `π_ℓ(v, target)`, zero beyond the computed depth.
    pub fn get(&self, level: usize, v: NodeId) -> f64 {
        self.levels
            .get(level)
            .map_or(0.0, |lv| lv[v as usize])
    }

    pub fn max_level(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// `Σ_ℓ Σ_u π_ℓ(u, target)`.
    pub fn total_mass(&self) -> f64 {
        self.levels.iter().flatten().sum()
    }
}

/// Computes `π_ℓ(·, w)` level by level through the pull recurrence
/// `π_{ℓ+1}(y, w) = Σ_{x ∈ I(y)} √c / d_in(y) · π_ℓ(x, w)`.
pub fn exact_lhop_rppr(graph: &Graph, w: NodeId, max_level: usize, c: f64) -> Result<RpprVector> {
    check_decay(c)?;
    graph.check_node(w)?;
    let n = graph.node_count();
    let sqrt_c = c.sqrt();
    let mut levels = Vec::with_capacity(max_level + 1);
    let mut level0 = vec![0.0; n];
    level0[w as usize] = 1.0 - sqrt_c;
    levels.push(level0);
    for l in 0..max_level {
        let prev = &levels[l];
        let next: Vec<f64> = (0..n as NodeId)
            .map(|y| {
                let d = graph.in_degree(y);
                if d == 0 {
                    return 0.0;
                }
                let sum: f64 = graph.in_neighbors(y).iter().map(|&x| prev[x as usize]).sum();
                sqrt_c * sum / d as f64
            })
            .collect();
        levels.push(next);
    }
    Ok(RpprVector { target: w, levels })
}

#[derive(Debug, Clone)]
pub struct PageRankVector {
    pub pi: Vec<f64>,
    pub tol: f64,
    pub iterations: usize,
}

/// Number of power-iteration terms kept so the discarded tail `(√c)^L` is
/// at most `tol`.
pub fn truncation_length(c: f64, tol: f64) -> usize {
    (tol.ln() / c.sqrt().ln()).ceil().max(1.0) as usize
}

/// Deterministic power iteration for reverse PageRank: the probability that a
/// √c-walk from a uniformly random node terminates at `w`.
pub fn reverse_pagerank(graph: &Graph, c: f64, tol: f64) -> Result<PageRankVector> {
    check_decay(c)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must satisfy 0 < tol < 1 (got {tol})"
        )));
    }
    let n = graph.node_count();
    let sqrt_c = c.sqrt();
    let iterations = truncation_length(c, tol);

    let mut q = vec![1.0 / n as f64; n];
    let mut acc = q.clone();
    let mut scaled = vec![0.0; n];
    for _ in 1..iterations {
        for (y, s) in scaled.iter_mut().enumerate() {
            let d = graph.in_degree(y as NodeId);
            *s = if d == 0 { 0.0 } else { sqrt_c * q[y] / d as f64 };
        }
        // q'(x) = Σ_{y ∈ O(x)} √c q(y) / d_in(y)
        for (x, qx) in q.iter_mut().enumerate() {
            *qx = graph
                .out_neighbors(x as NodeId)
                .iter()
                .map(|&y| scaled[y as usize])
                .sum();
        }
        for (a, &b) in acc.iter_mut().zip(&q) {
            *a += b;
        }
    }
    let pi = acc.into_iter().map(|a| (1.0 - sqrt_c) * a).collect();
    Ok(PageRankVector {
        pi,
        tol,
        iterations,
    })
}

/// The `k` nodes with the largest π, ties by ascending id.
pub fn top_k_by_pagerank(pr: &PageRankVector, k: usize) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..pr.pi.len() as NodeId).collect();
    order.sort_by(|&a, &b| {
        pr.pi[b as usize]
            .total_cmp(&pr.pi[a as usize])
            .then(a.cmp(&b))
    });
    order.truncate(k.min(order.len()));
    order
}
