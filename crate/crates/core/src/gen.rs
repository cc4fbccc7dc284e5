//! Seeded synthetic graphs: Chung-Lu power-law, Erdős–Rényi, and a few fixed
//! shapes used as fixtures.

use crate::error::{Error, Result};
use crate::graph::{Graph, LoadOptions, NodeId};
use crate::sampler::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum GenKind {
    PowerLaw { gamma: f64, avg_degree: f64, undirected: bool },
    Er { p: f64 },
    Star,
    Cycle,
    BwCounterexample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    pub seed: u64,
}

pub fn generate(spec: &GenSpec) -> Result<Graph> {
    match spec.kind {
        GenKind::PowerLaw {
            gamma,
            avg_degree,
            undirected,
        } => gen_powerlaw(spec.n, gamma, avg_degree, undirected, spec.seed),
        GenKind::Er { p } => gen_er(spec.n, p, spec.seed),
        GenKind::Star => gen_star(spec.n),
        GenKind::Cycle => gen_cycle(spec.n),
        GenKind::BwCounterexample => gen_bw_counterexample(spec.n),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2 (got {n})")));
    }
    if n > NodeId::MAX as usize {
        return Err(Error::TooManyNodes(n));
    }
    Ok(())
}

/// Expected-degree weights `w_i ∝ (i+1)^{-1/γ}`, descending, with mean
/// `avg_degree`.
pub fn chung_lu_weights(n: usize, gamma: f64, avg_degree: f64) -> Vec<f64> {
    let beta = 1.0 / gamma;
    let raw: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-beta)).collect();
    let scale = avg_degree * n as f64 / raw.iter().sum::<f64>();
    raw.into_iter().map(|x| x * scale).collect()
}

/// Chung-Lu graph whose degree tail follows `P(deg >= k) ~ k^{-γ}`.
///
/// Each candidate edge `(i, j)` appears with probability
/// `min(1, w_i w_j / Σw)`. Weights are sorted, so along a row the
/// probabilities are non-increasing and geometric skipping visits only
/// O(n + m) candidates. Directed graphs sample every ordered pair `i ≠ j`;
/// undirected graphs sample each unordered pair once and emit both
/// directions, so the mean in-degree is `avg_degree` either way.
pub fn gen_powerlaw(n: usize, gamma: f64, avg_degree: f64, undirected: bool, seed: u64) -> Result<Graph> {
    check_n(n)?;
    if !(gamma >= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 1 (got {gamma})")));
    }
    if !(avg_degree > 0.0) || avg_degree >= n as f64 {
        return Err(Error::InvalidParameter(format!(
            "average degree must satisfy 0 < d < n (got {avg_degree} with n = {n})"
        )));
    }
    let weights = chung_lu_weights(n, gamma, avg_degree);
    let total: f64 = weights.iter().sum();
    let mut rng = Rng::new(seed);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity((avg_degree * n as f64 * 1.05) as usize);

    for u in 0..n {
        let wu = weights[u];
        let mut v = if undirected { u + 1 } else { 0 };
        if v >= n {
            continue;
        }
        let mut p = (wu * weights[v] / total).min(1.0);
        while v < n && p > 0.0 {
            if p < 1.0 {
                let skip = (rng.open_unit().ln() / (1.0 - p).ln()).floor();
                v = v.saturating_add(skip as usize);
            }
            if v >= n {
                break;
            }
            let q = (wu * weights[v] / total).min(1.0);
            if rng.unit() < q / p && v != u {
                edges.push((u as NodeId, v as NodeId));
                if undirected {
                    edges.push((v as NodeId, u as NodeId));
                }
            }
            p = q;
            v += 1;
        }
    }
    Graph::from_edges(n, edges, true)
}

/// Directed G(n, p) over ordered pairs `u ≠ v`.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1] (got {p})")));
    }
    let pairs = n as u64 * (n as u64 - 1);
    let mut edges = Vec::new();
    let to_edge = |k: u64| {
        let u = k / (n as u64 - 1);
        let j = k % (n as u64 - 1);
        let v = if j < u { j } else { j + 1 };
        (u as NodeId, v as NodeId)
    };
    if p >= 1.0 {
        edges.extend((0..pairs).map(to_edge));
    } else if p > 0.0 {
        let mut rng = Rng::new(seed);
        let log_q = (1.0 - p).ln();
        let mut k: u64 = 0;
        loop {
            let skip = (rng.open_unit().ln() / log_q).floor();
            if skip >= (pairs - k) as f64 {
                break;
            }
            k += skip as u64;
            edges.push(to_edge(k));
            k += 1;
            if k >= pairs {
                break;
            }
        }
    }
    Graph::from_edges(n, edges, true)
}

/// Labels `1..=n`: edges `1 → j` for `j = 2..=n`.
pub fn gen_star(n: usize) -> Result<Graph> {
    check_n(n)?;
    let edges: Vec<(u64, u64)> = (2..=n as u64).map(|j| (1, j)).collect();
    Graph::from_labeled_edges(&edges, LoadOptions::default())
}

/// `i → (i + 1) mod n`.
pub fn gen_cycle(n: usize) -> Result<Graph> {
    check_n(n)?;
    let edges = (0..n).map(|i| (i as NodeId, ((i + 1) % n) as NodeId)).collect();
    Graph::from_edges(n, edges, true)
}

/// Node 0 is `w`, nodes `1..=n` are the `x_i`, node `n + 1` is `v`:
/// `w → x_i` and `x_i → v` for every `i`.
pub fn gen_bw_counterexample(n: usize) -> Result<Graph> {
    if n < 1 {
        return Err(Error::InvalidParameter("need n >= 1".into()));
    }
    let v = n as NodeId + 1;
    let mut edges = Vec::with_capacity(2 * n);
    for x in 1..=n as NodeId {
        edges.push((0, x));
        edges.push((x, v));
    }
    Graph::from_edges(n + 2, edges, true)
}

/// Least-squares slope of `log P(deg >= k)` against `log k` over the tail
/// `k >= k_min` where at least `min_count` nodes remain.
pub fn ccdf_slope(degrees: &[u32], k_min: u32, min_count: usize) -> f64 {
    let mut sorted: Vec<u32> = degrees.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut pts = Vec::new();
    let max = *sorted.last().unwrap_or(&0);
    let mut k = k_min.max(1) as f64;
    while k <= max as f64 {
        let idx = sorted.partition_point(|&d| (d as f64) < k);
        let count = sorted.len() - idx;
        if count < min_count {
            break;
        }
        pts.push((k.ln(), (count as f64 / n).ln()));
        k *= 1.25;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    num / den
}
