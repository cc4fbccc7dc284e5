//! Query batches, pooled evaluation and synthetic sweeps.

use std::io::{self, Write};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, EvalRow, ExactSimRank};
use crate::gen;
use crate::graph::{Graph, NodeId};
use crate::index::{build_index, HubIndex, HubSelection};
use crate::pagerank::{reverse_pagerank, DEFAULT_TOL};
use crate::query::{single_source, QueryParams, QueryResult};
use crate::sampler::Rng;

/// `count` distinct nodes drawn uniformly (all nodes when `count >= n`), in
/// draw order.
pub fn pick_sources(n: usize, count: usize, rng: &mut Rng) -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = (0..n as NodeId).collect();
    let take = count.min(n);
    for i in 0..take {
        let j = i + rng.below(n - i);
        ids.swap(i, j);
    }
    ids.truncate(take);
    ids
}

pub struct Timed {
    pub result: QueryResult,
    pub micros: u128,
}

pub fn timed_query(graph: &Graph, index: &HubIndex, u: NodeId, params: &QueryParams, rng: &mut Rng) -> Result<Timed> {
    let start = Instant::now();
    let result = single_source(graph, index, u, params, rng)?;
    Ok(Timed {
        result,
        micros: start.elapsed().as_micros(),
    })
}

pub enum GroundTruth {
    Exact(ExactSimRank),
    /// Pairwise Monte Carlo with a fixed number of walk pairs per node pair.
    MonteCarlo { c: f64, pairs: u64, seed: u64 },
}

impl GroundTruth {
    /// Exact scores when `n <= cap`, otherwise Monte Carlo with `pairs`
    /// walk pairs per scored node.
    pub fn for_graph(graph: &Graph, c: f64, cap: usize, pairs: u64, seed: u64) -> Result<GroundTruth> {
        if graph.node_count() <= cap {
            let k = eval::default_iterations(c);
            Ok(GroundTruth::Exact(eval::exact_simrank_with_cap(graph, c, k, cap)?))
        } else {
            if pairs == 0 {
                return Err(Error::InvalidParameter("Monte Carlo ground truth needs pairs >= 1".into()));
            }
            Ok(GroundTruth::MonteCarlo { c, pairs, seed })
        }
    }

    fn scores(&self, graph: &Graph, u: NodeId, pool: &[NodeId]) -> Vec<(NodeId, f64)> {
        match self {
            GroundTruth::Exact(s) => pool.iter().map(|&v| (v, s.get(u, v))).collect(),
            GroundTruth::MonteCarlo { c, pairs, seed } => pool
                .iter()
                .map(|&v| {
                    let mut rng = Rng::stream(*seed ^ u as u64, v as u64);
                    (v, eval::mc_pair_simrank(graph, u, v, *c, *pairs, &mut rng))
                })
                .collect(),
        }
    }
}

/// Runs one query per source and grades its top-`k` against the pool of
/// PRSim's top-`k` (plus the exact top-`k` when exact scores are at hand).
pub fn evaluate(
    graph: &Graph,
    index: &HubIndex,
    sources: &[NodeId],
    params: &QueryParams,
    k: usize,
    truth: &GroundTruth,
    rng: &mut Rng,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for &u in sources {
        let timed = timed_query(graph, index, u, params, rng)?;
        let est = &timed.result.scores;
        let exact_list = match truth {
            GroundTruth::Exact(s) => Some(crate::query::ScoreVector {
                source: u,
                n: graph.node_count(),
                scores: s
                    .row(u)
                    .iter()
                    .enumerate()
                    .filter(|p| *p.1 > 0.0)
                    .map(|(v, &x)| (v as NodeId, x))
                    .collect(),
                components: None,
            }),
            GroundTruth::MonteCarlo { .. } => None,
        };
        let mut lists = vec![est];
        if let Some(e) = &exact_list {
            lists.push(e);
        }
        let pool = eval::build_pool(&lists, k)?;
        let truth_scores = truth.scores(graph, u, &pool);
        let lookup = |v: NodeId| {
            truth_scores
                .binary_search_by_key(&v, |p| p.0)
                .map_or(0.0, |i| truth_scores[i].1)
        };
        let kk = k.min(pool.len());
        let truth_top = eval::truth_top_k(&pool, lookup, kk);
        let est_top: Vec<NodeId> = est.top_k(kk);
        report.rows.push(EvalRow {
            source: graph.label(u),
            k: kk,
            avg_error: eval::avg_error_at_k(lookup, est, &truth_top)?,
            precision: eval::precision_at_k(&truth_top, &est_top)?,
            micros: timed.micros,
            samples: timed.result.stats.samples,
            vb_walks: timed.result.stats.vb_walks,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub avg_degree: f64,
    pub undirected: bool,
    pub queries: usize,
    pub hubs: HubSelection,
    pub params: QueryParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    pub n: usize,
    pub seed: u64,
    pub m: usize,
    pub hubs: usize,
    pub index_tuples: usize,
    pub index_micros: u128,
    pub queries: usize,
    pub mean_query_micros: f64,
    pub mean_samples: f64,
    pub mean_vb_walks: f64,
    pub mean_vb_increments: f64,
}

impl SweepPoint {
    pub const HEADER: &'static str = "gamma,n,seed,m,hubs,index_tuples,index_micros,queries,mean_query_micros,mean_samples,mean_vb_walks,mean_vb_increments";

    pub fn write_csv_row(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.1},{:.1},{:.1},{:.1}",
            self.gamma,
            self.n,
            self.seed,
            self.m,
            self.hubs,
            self.index_tuples,
            self.index_micros,
            self.queries,
            self.mean_query_micros,
            self.mean_samples,
            self.mean_vb_walks,
            self.mean_vb_increments
        )
    }
}

/// A generated and indexed sweep graph with its query sources.
pub struct Prepared {
    pub gamma: f64,
    pub seed: u64,
    pub graph: Graph,
    pub index: HubIndex,
    pub index_micros: u128,
    pub sources: Vec<NodeId>,
    pub rng: Rng,
}

pub fn prepare(gamma: f64, n: usize, seed: u64, cfg: &SweepConfig) -> Result<Prepared> {
    let graph = gen::gen_powerlaw(n, gamma, cfg.avg_degree, cfg.undirected, seed)?;
    let c = cfg.params.c;
    let start = Instant::now();
    let pr = reverse_pagerank(&graph, c, DEFAULT_TOL)?;
    let j0 = cfg.hubs.resolve(&graph, cfg.params.eps)?;
    let index = build_index(&graph, &pr, c, cfg.params.eps, j0)?;
    let index_micros = start.elapsed().as_micros();
    let mut rng = Rng::stream(seed, 1);
    let sources = pick_sources(n, cfg.queries, &mut rng);
    Ok(Prepared {
        gamma,
        seed,
        graph,
        index,
        index_micros,
        sources,
        rng,
    })
}

impl Prepared {
    /// Runs the `i`-th query.
    pub fn query(&mut self, i: usize, params: &QueryParams) -> Result<Timed> {
        timed_query(&self.graph, &self.index, self.sources[i], params, &mut self.rng)
    }

    pub fn summarize(&self, timings: &[Timed]) -> SweepPoint {
        let q = timings.len().max(1) as f64;
        let mean = |f: &dyn Fn(&Timed) -> f64| timings.iter().map(f).sum::<f64>() / q;
        SweepPoint {
            gamma: self.gamma,
            n: self.graph.node_count(),
            seed: self.seed,
            m: self.graph.edge_count(),
            hubs: self.index.hubs.len(),
            index_tuples: self.index.tuple_count(),
            index_micros: self.index_micros,
            queries: timings.len(),
            mean_query_micros: mean(&|t| t.micros as f64),
            mean_samples: mean(&|t| t.result.stats.samples as f64),
            mean_vb_walks: mean(&|t| t.result.stats.vb_walks as f64),
            mean_vb_increments: mean(&|t| t.result.stats.vb_increments as f64),
        }
    }
}

/// Generates one power-law graph, indexes it, and times `cfg.queries`
/// queries from random sources.
pub fn sweep_point(gamma: f64, n: usize, seed: u64, cfg: &SweepConfig) -> Result<SweepPoint> {
    let mut prep = prepare(gamma, n, seed, cfg)?;
    let timings = (0..prep.sources.len())
        .map(|i| prep.query(i, &cfg.params))
        .collect::<Result<Vec<_>>>()?;
    Ok(prep.summarize(&timings))
}

/// Times the queries of several prepared graphs in round-robin order, so
/// slow drift in machine speed affects every graph alike.
pub fn interleaved_points(prepared: &mut [Prepared], params: &QueryParams) -> Result<Vec<SweepPoint>> {
    let rounds = prepared.iter().map(|p| p.sources.len()).max().unwrap_or(0);
    let mut timings: Vec<Vec<Timed>> = prepared.iter().map(|_| Vec::new()).collect();
    for i in 0..rounds {
        for (p, t) in prepared.iter_mut().zip(timings.iter_mut()) {
            if i < p.sources.len() {
                t.push(p.query(i, params)?);
            }
        }
    }
    Ok(prepared.iter().zip(&timings).map(|(p, t)| p.summarize(t)).collect())
}

/// Mean query time over the points of one sweep setting.
pub fn mean_query_micros(points: &[SweepPoint]) -> f64 {
    points.iter().map(|p| p.mean_query_micros).sum::<f64>() / points.len().max(1) as f64
}
