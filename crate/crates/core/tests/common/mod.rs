#![allow(dead_code)]

use prsim::eval::{exact_eta, ExactSimRank};
use prsim::graph::{Graph, NodeId};
use prsim::pagerank::exact_lhop_rppr;

pub fn triangle_dag() -> Graph {
    Graph::from_edges(3, vec![(0, 1), (0, 2), (1, 2)], true).unwrap()
}

/// Levels needed for the remaining walk mass `(√c)^L` to drop below `tol`.
pub fn levels_for(c: f64, tol: f64) -> usize {
    (tol.ln() / c.sqrt().ln()).ceil() as usize
}

/// `s(u, v) = 1/(1-√c)² Σ_ℓ Σ_w π_ℓ(u,w) π_ℓ(v,w) η(w)` from the DP and exact
/// oracles, as a dense row-major matrix.
pub fn formula_simrank(graph: &Graph, exact: &ExactSimRank, levels: usize) -> Vec<f64> {
    let n = graph.node_count();
    let c = exact.c;
    let alpha = 1.0 - c.sqrt();
    let mut s = vec![0.0; n * n];
    for w in 0..n as NodeId {
        let eta = exact_eta(graph, exact, w);
        if eta == 0.0 {
            continue;
        }
        let r = exact_lhop_rppr(graph, w, levels, c).unwrap();
        for l in 0..=levels {
            let nz: Vec<(usize, f64)> = (0..n)
                .map(|v| (v, r.get(l, v as NodeId)))
                .filter(|p| p.1 > 0.0)
                .collect();
            for &(u, a) in &nz {
                for &(v, b) in &nz {
                    s[u * n + v] += a * b * eta / (alpha * alpha);
                }
            }
        }
    }
    s
}

/// Empirical mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
