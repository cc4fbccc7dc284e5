//! Single-source SimRank queries.
//!
//! `s(u, v) = 1/(1-√c)² Σ_ℓ Σ_w π_ℓ(u,w) π_ℓ(v,w) η(w)` is split by target:
//! hubs contribute through the stored reserves, every other target through a
//! variance bounded backward walk. Both halves are driven by the same stream
//! of √c-walks from `u`, each followed by a two-walk meeting test at its
//! terminal node.

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{check_decay, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::index::HubIndex;
use crate::sampler::{backward_walk_vb_in, eta_sample_sqrt, walk_terminal, Rng, WalkWorkspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    pub c: f64,
    pub eps: f64,
    pub delta: f64,
    /// Multiplier on the per-round sample count. 1 gives the full guarantee.
    pub sample_scale: f64,
}

impl QueryParams {
    pub fn new(c: f64, eps: f64, delta: f64) -> Result<QueryParams> {
        let params = QueryParams {
            c,
            eps,
            delta,
            sample_scale: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_decay(self.c)?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must satisfy 0 < eps < 1 (got {})",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must satisfy 0 < delta < 1 (got {})",
                self.delta
            )));
        }
        if !(self.sample_scale > 0.0 && self.sample_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample_scale must be positive (got {})",
                self.sample_scale
            )));
        }
        Ok(())
    }

    /// `12 / (1-√c)²`.
    pub fn c1(&self) -> f64 {
        let alpha = 1.0 - self.c.sqrt();
        12.0 / (alpha * alpha)
    }

    /// `d_r = ⌈c1 / ε²⌉`, times `sample_scale`.
    pub fn samples_per_round(&self) -> usize {
        ((self.c1() / (self.eps * self.eps)).ceil() * self.sample_scale)
            .ceil()
            .max(1.0) as usize
    }

    /// `f_r = ⌈3 ln(n / δ)⌉`.
    pub fn rounds(&self, n: usize) -> usize {
        (3.0 * (n as f64 / self.delta).ln()).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Components {
    /// `ŝ_I`, from hub reserves.
    pub index: Vec<(NodeId, f64)>,
    /// `ŝ_B`, medians of the per-round backward-walk sums.
    pub walk: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub source: NodeId,
    pub n: usize,
    /// Nonzero scores ascending by node; the source maps to exactly 1.
    pub scores: Vec<(NodeId, f64)>,
    pub components: Option<Components>,
}

impl ScoreVector {
    pub fn get(&self, v: NodeId) -> f64 {
        self.scores
            .binary_search_by_key(&v, |&(x, _)| x)
            .map_or(0.0, |i| self.scores[i].1)
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(v, s) in &self.scores {
            out[v as usize] = s;
        }
        out
    }

    /// The `k` highest-scoring nodes other than the source, ties by ascending
    /// id. Nodes without a stored score count as zero.
    pub fn top_k(&self, k: usize) -> Vec<NodeId> {
        let mut ranked: Vec<(NodeId, f64)> = self
            .scores
            .iter()
            .copied()
            .filter(|&(v, s)| v != self.source && s > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut top: Vec<NodeId> = ranked.into_iter().take(k).map(|(v, _)| v).collect();
        if top.len() < k {
            let mut zero = (0..self.n as NodeId).filter(|&v| v != self.source && self.get(v) <= 0.0);
            while top.len() < k {
                match zero.next() {
                    Some(v) => top.push(v),
                    None => break,
                }
            }
        }
        top
    }

    /// "label\tscore" lines, descending by score.
    pub fn write_tsv(&self, graph: &Graph, mut out: impl Write) -> io::Result<()> {
        let mut rows = self.scores.clone();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (v, s) in rows {
            writeln!(out, "{}\t{}", graph.label(v), s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueryStats {
    pub samples: u64,
    /// Source walks that evaporated at a node without in-neighbors.
    pub evaporated: u64,
    /// Source walks whose terminal passed the meeting test.
    pub eta_hits: u64,
    /// ...of which terminated at a hub.
    pub hub_hits: u64,
    pub vb_walks: u64,
    /// Backward walks started from hub nodes. Always zero.
    pub vb_walks_on_hubs: u64,
    pub vb_increments: u64,
    /// `(w, ℓ)` cells above the `ε / c1` threshold that were read from the index.
    pub index_lookups: u64,
    pub index_tuples: u64,
}

impl QueryStats {
    fn absorb(&mut self, o: &QueryStats) {
        self.samples += o.samples;
        self.evaporated += o.evaporated;
        self.eta_hits += o.eta_hits;
        self.hub_hits += o.hub_hits;
        self.vb_walks += o.vb_walks;
        self.vb_walks_on_hubs += o.vb_walks_on_hubs;
        self.vb_increments += o.vb_increments;
        self.index_lookups += o.index_lookups;
        self.index_tuples += o.index_tuples;
    }
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub scores: ScoreVector,
    pub stats: QueryStats,
    /// Estimates of `η(w) π_ℓ(u, w)`, sorted by `(w, ℓ)`.
    pub eta_pi: Vec<(NodeId, usize, f64)>,
}

struct RoundWorkspace {
    acc: Vec<f64>,
    touched: Vec<NodeId>,
    walk: WalkWorkspace,
}

impl RoundWorkspace {
    fn new(n: usize) -> RoundWorkspace {
        RoundWorkspace {
            acc: vec![0.0; n],
            touched: Vec::new(),
            walk: WalkWorkspace::new(n),
        }
    }
}

struct RoundOutput {
    walk_sums: Vec<(NodeId, f64)>,
    eta_counts: HashMap<(NodeId, u32), u32>,
    stats: QueryStats,
}

fn run_round(
    graph: &Graph,
    index: &HubIndex,
    u: NodeId,
    params: &QueryParams,
    mut rng: Rng,
    ws: &mut RoundWorkspace,
) -> RoundOutput {
    let sqrt_c = params.c.sqrt();
    let alpha = 1.0 - sqrt_c;
    let d_r = params.samples_per_round();
    let weight = 1.0 / (alpha * alpha * d_r as f64);
    let mut stats = QueryStats::default();
    let mut eta_counts: HashMap<(NodeId, u32), u32> = HashMap::new();

    let RoundWorkspace { acc, touched, walk } = ws;
    for _ in 0..d_r {
        stats.samples += 1;
        let Some((w, level)) = walk_terminal(graph, u, sqrt_c, &mut rng) else {
            stats.evaporated += 1;
            continue;
        };
        if !eta_sample_sqrt(graph, w, sqrt_c, &mut rng) {
            continue;
        }
        stats.eta_hits += 1;
        *eta_counts.entry((w, level as u32)).or_insert(0) += 1;
        if index.contains_hub(w) {
            stats.hub_hits += 1;
            continue;
        }
        stats.vb_walks += 1;
        backward_walk_vb_in(graph, w, level, sqrt_c, &mut rng, walk);
        stats.vb_increments += walk.increments;
        for (v, p) in walk.current() {
            let slot = &mut acc[v as usize];
            if *slot == 0.0 {
                touched.push(v);
            }
            *slot += p * weight;
        }
    }

    let walk_sums = touched
        .iter()
        .map(|&v| (v, std::mem::take(&mut acc[v as usize])))
        .collect();
    touched.clear();
    RoundOutput {
        walk_sums,
        eta_counts,
        stats,
    }
}

/// Median of `rounds` values of which only `nonzero` are stored; the rest
/// are zeros. Even counts average the two middle values.
fn median_with_zeros(nonzero: &mut [f64], rounds: usize) -> f64 {
    nonzero.sort_by(f64::total_cmp);
    let zeros = rounds - nonzero.len();
    let at = |i: usize| if i < zeros { 0.0 } else { nonzero[i - zeros] };
    if rounds % 2 == 1 {
        at(rounds / 2)
    } else {
        0.5 * (at(rounds / 2 - 1) + at(rounds / 2))
    }
}

/// Answers a single-source query from `u`.
///
/// Rounds draw from independent streams derived from one value of `rng`, and
/// are merged in round order, so the result is identical for any number of
/// worker threads.
pub fn single_source(
    graph: &Graph,
    index: &HubIndex,
    u: NodeId,
    params: &QueryParams,
    rng: &mut Rng,
) -> Result<QueryResult> {
    params.validate()?;
    index.check_compatible(graph, params.c)?;
    graph.check_node(u)?;
    let n = graph.node_count();
    let rounds = params.rounds(n);
    let d_r = params.samples_per_round();
    let n_r = (rounds * d_r) as f64;
    let alpha = 1.0 - params.c.sqrt();
    let base = rng.next_u64();

    let outputs: Vec<RoundOutput> = if rayon::current_num_threads() <= 1 {
        let mut ws = RoundWorkspace::new(n);
        (0..rounds)
            .map(|i| run_round(graph, index, u, params, Rng::stream(base, i as u64), &mut ws))
            .collect()
    } else {
        (0..rounds)
            .into_par_iter()
            .map_init(
                || RoundWorkspace::new(n),
                |ws, i| run_round(graph, index, u, params, Rng::stream(base, i as u64), ws),
            )
            .collect()
    };

    let mut stats = QueryStats::default();
    let mut eta_counts: HashMap<(NodeId, u32), u64> = HashMap::new();
    let mut per_node: HashMap<NodeId, Vec<f64>> = HashMap::new();
    for out in &outputs {
        stats.absorb(&out.stats);
        for (&key, &count) in &out.eta_counts {
            *eta_counts.entry(key).or_insert(0) += count as u64;
        }
        for &(v, s) in &out.walk_sums {
            per_node.entry(v).or_default().push(s);
        }
    }
    drop(outputs);

    let mut walk_part: Vec<(NodeId, f64)> = per_node
        .into_iter()
        .map(|(v, mut vals)| (v, median_with_zeros(&mut vals, rounds)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    walk_part.sort_unstable_by_key(|&(v, _)| v);

    let mut eta_pi: Vec<(NodeId, usize, f64)> = eta_counts
        .into_iter()
        .map(|((w, l), count)| (w, l as usize, count as f64 / n_r))
        .collect();
    eta_pi.sort_unstable_by_key(|p| (p.0, p.1));

    let threshold = params.eps / params.c1();
    let mut index_acc: HashMap<NodeId, f64> = HashMap::new();
    for &(w, level, est) in &eta_pi {
        if est > threshold && index.contains_hub(w) {
            stats.index_lookups += 1;
            let tuples = index.lookup(w, level);
            stats.index_tuples += tuples.len() as u64;
            for &(v, psi) in tuples {
                *index_acc.entry(v).or_insert(0.0) += est * psi / (alpha * alpha);
            }
        }
    }
    let mut index_part: Vec<(NodeId, f64)> = index_acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
    index_part.sort_unstable_by_key(|&(v, _)| v);

    let mut total: HashMap<NodeId, f64> = HashMap::new();
    for &(v, s) in index_part.iter().chain(&walk_part) {
        *total.entry(v).or_insert(0.0) += s;
    }
    total.insert(u, 1.0);
    let mut scores: Vec<(NodeId, f64)> = total.into_iter().collect();
    scores.sort_unstable_by_key(|&(v, _)| v);

    Ok(QueryResult {
        scores: ScoreVector {
            source: u,
            n,
            scores,
            components: Some(Components {
                index: index_part,
                walk: walk_part,
            }),
        },
        stats,
        eta_pi,
    })
}

/// [`single_source`] without an index: every target is sampled.
pub fn single_source_index_free(graph: &Graph, u: NodeId, params: &QueryParams, rng: &mut Rng) -> Result<QueryResult> {
    let index = HubIndex::empty(graph, params.c, params.eps);
    single_source(graph, &index, u, params, rng)
}
