//! Randomized primitives: √c-walks, the two-walk meeting test, and the two
//! backward-walk estimators of `π_ℓ(·, w)`.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::graph::{Graph, NodeId};

/// Seeded deterministic random stream. Independent streams for parallel work
/// are derived from one seed with [`Rng::stream`].
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn stream(seed: u64, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng(inner)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform in `(0, 1)`; zero is redrawn.
    #[inline]
    pub fn open_unit(&mut self) -> f64 {
        loop {
            let r = self.0.random::<f64>();
            if r > 0.0 {
                return r;
            }
        }
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.random()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkOutcome {
    /// `positions[i]` is the node reached after `i` moves.
    pub positions: Vec<NodeId>,
    /// Set iff the walk stopped through the termination coin.
    pub terminal: Option<NodeId>,
}

impl WalkOutcome {
    /// Number of moves, when the walk terminated.
    pub fn steps(&self) -> Option<usize> {
        self.terminal.map(|_| self.positions.len() - 1)
    }
}

/// One step of a √c-walk at `x`.
enum Step {
    Stop,
    Evaporate,
    Move(NodeId),
}

#[inline]
fn step(graph: &Graph, x: NodeId, sqrt_c: f64, rng: &mut Rng) -> Step {
    if rng.unit() >= sqrt_c {
        return Step::Stop;
    }
    let ins = graph.in_neighbors(x);
    if ins.is_empty() {
        Step::Evaporate
    } else {
        Step::Move(ins[rng.below(ins.len())])
    }
}

pub fn sample_walk(graph: &Graph, u: NodeId, c: f64, rng: &mut Rng) -> WalkOutcome {
    let sqrt_c = c.sqrt();
    let mut positions = vec![u];
    let mut x = u;
    loop {
        match step(graph, x, sqrt_c, rng) {
            Step::Stop => {
                return WalkOutcome {
                    positions,
                    terminal: Some(x),
                }
            }
            Step::Evaporate => {
                return WalkOutcome {
                    positions,
                    terminal: None,
                }
            }
            Step::Move(y) => {
                positions.push(y);
                x = y;
            }
        }
    }
}

/// Terminal node and step count of a √c-walk, without recording the path.
#[inline]
pub(crate) fn walk_terminal(graph: &Graph, u: NodeId, sqrt_c: f64, rng: &mut Rng) -> Option<(NodeId, usize)> {
    let mut x = u;
    let mut steps = 0;
    loop {
        match step(graph, x, sqrt_c, rng) {
            Step::Stop => return Some((x, steps)),
            Step::Evaporate => return None,
            Step::Move(y) => {
                x = y;
                steps += 1;
            }
        }
    }
}

/// True iff both walks occupy the same node at some step `i >= from_step`.
pub fn walks_meet(a: &WalkOutcome, b: &WalkOutcome, from_step: usize) -> bool {
    a.positions
        .iter()
        .zip(&b.positions)
        .skip(from_step)
        .any(|(x, y)| x == y)
}

/// Samples two independent √c-walks from `w` and returns true iff they never
/// share a node at any step `i >= 1`.
///
/// The walks are advanced in lockstep and abandoned as soon as either one
/// stops, since no later meeting is possible. This has the same distribution
/// as sampling both full walks and calling [`walks_meet`] with `from_step = 1`.
pub fn eta_sample(graph: &Graph, w: NodeId, c: f64, rng: &mut Rng) -> bool {
    eta_sample_sqrt(graph, w, c.sqrt(), rng)
}

#[inline]
pub(crate) fn eta_sample_sqrt(graph: &Graph, w: NodeId, sqrt_c: f64, rng: &mut Rng) -> bool {
    !meet_lockstep(graph, w, w, sqrt_c, rng)
}

/// Runs √c-walks from `a` and `b` side by side and reports whether they
/// occupy the same node at some step `i >= 1`.
#[inline]
pub(crate) fn meet_lockstep(graph: &Graph, mut a: NodeId, mut b: NodeId, sqrt_c: f64, rng: &mut Rng) -> bool {
    loop {
        let na = match step(graph, a, sqrt_c, rng) {
            Step::Move(y) => y,
            _ => return false,
        };
        let nb = match step(graph, b, sqrt_c, rng) {
            Step::Move(y) => y,
            _ => return false,
        };
        if na == nb {
            return true;
        }
        a = na;
        b = nb;
    }
}

/// Sparse estimate `π̂_ℓ(v, w)` produced by one backward walk.
#[derive(Debug, Clone, PartialEq)]
pub struct BwEstimate {
    pub target: NodeId,
    pub level: usize,
    /// Nonzero entries in first-touch order.
    pub values: Vec<(NodeId, f64)>,
}

impl BwEstimate {
    pub fn get(&self, v: NodeId) -> f64 {
        self.values
            .iter()
            .find(|(x, _)| *x == v)
            .map_or(0.0, |&(_, p)| p)
    }
}

/// Reusable dense scratch for backward walks: two level buffers plus the
/// list of touched entries in each, so a walk costs time proportional to the
/// entries it touches rather than `n`.
#[derive(Debug, Clone)]
pub struct WalkWorkspace {
    cur: Vec<f64>,
    next: Vec<f64>,
    cur_touched: Vec<NodeId>,
    next_touched: Vec<NodeId>,
    /// Increment operations performed by the most recent walk.
    pub increments: u64,
}

impl WalkWorkspace {
    pub fn new(n: usize) -> WalkWorkspace {
        WalkWorkspace {
            cur: vec![0.0; n],
            next: vec![0.0; n],
            cur_touched: Vec::new(),
            next_touched: Vec::new(),
            increments: 0,
        }
    }

    fn reset(&mut self, w: NodeId, init: f64) {
        for &v in &self.cur_touched {
            self.cur[v as usize] = 0.0;
        }
        for &v in &self.next_touched {
            self.next[v as usize] = 0.0;
        }
        self.cur_touched.clear();
        self.next_touched.clear();
        self.cur[w as usize] = init;
        self.cur_touched.push(w);
        self.increments = 0;
    }

    #[inline]
    fn add_next(&mut self, y: NodeId, amount: f64) {
        let slot = &mut self.next[y as usize];
        if *slot == 0.0 {
            self.next_touched.push(y);
        }
        *slot += amount;
        self.increments += 1;
    }

    fn advance(&mut self) {
        for &v in &self.cur_touched {
            self.cur[v as usize] = 0.0;
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        std::mem::swap(&mut self.cur_touched, &mut self.next_touched);
        self.next_touched.clear();
    }

    /// Nonzero entries of the current level.
    pub fn current(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.cur_touched.iter().map(|&v| (v, self.cur[v as usize]))
    }

    fn snapshot(&self, target: NodeId, level: usize) -> BwEstimate {
        BwEstimate {
            target,
            level,
            values: self.current().collect(),
        }
    }
}

/// Backward walk with unbounded variance: every nonzero entry at level `i`
/// draws one `r` and copies its value to each out-neighbor `y` with
/// `d_in(y) <= √c / r`.
pub fn backward_walk_simple(graph: &Graph, w: NodeId, level: usize, c: f64, rng: &mut Rng) -> BwEstimate {
    let mut ws = WalkWorkspace::new(graph.node_count());
    backward_walk_simple_in(graph, w, level, c, rng, &mut ws);
    ws.snapshot(w, level)
}

pub fn backward_walk_simple_in(
    graph: &Graph,
    w: NodeId,
    level: usize,
    c: f64,
    rng: &mut Rng,
    ws: &mut WalkWorkspace,
) {
    let sqrt_c = c.sqrt();
    ws.reset(w, 1.0 - sqrt_c);
    for _ in 0..level {
        for i in 0..ws.cur_touched.len() {
            let x = ws.cur_touched[i];
            let p = ws.cur[x as usize];
            let limit = sqrt_c / rng.open_unit();
            for &y in graph.out_neighbors(x) {
                if graph.in_degree(y) as f64 > limit {
                    break;
                }
                ws.add_next(y, p);
            }
        }
        ws.advance();
        if ws.cur_touched.is_empty() {
            break;
        }
    }
}

/// Variance bounded backward walk. Returns the unbiased estimate of
/// `π_level(·, w)`; `E[π̂²] <= π` for every entry.
pub fn backward_walk_vb(graph: &Graph, w: NodeId, level: usize, c: f64, rng: &mut Rng) -> BwEstimate {
    let mut ws = WalkWorkspace::new(graph.node_count());
    backward_walk_vb_in(graph, w, level, c.sqrt(), rng, &mut ws);
    ws.snapshot(w, level)
}

/// [`backward_walk_vb`] into a caller-owned workspace; the estimate is left
/// in [`WalkWorkspace::current`].
///
/// For each nonzero `p = π̂_i(x, w)`, with probability √c:
/// out-neighbors `y` with `d_in(y) <= p / (1-√c)` receive `p / d_in(y)`;
/// then, for one fresh `r`, those with
/// `p / (1-√c) < d_in(y) <= p / (r (1-√c))` receive `1-√c`.
pub fn backward_walk_vb_in(
    graph: &Graph,
    w: NodeId,
    level: usize,
    sqrt_c: f64,
    rng: &mut Rng,
    ws: &mut WalkWorkspace,
) {
    let alpha = 1.0 - sqrt_c;
    ws.reset(w, alpha);
    for _ in 0..level {
        for i in 0..ws.cur_touched.len() {
            let x = ws.cur_touched[i];
            let p = ws.cur[x as usize];
            if rng.unit() >= sqrt_c {
                continue;
            }
            let outs = graph.out_neighbors(x);
            let det_limit = p / alpha;
            let mut j = 0;
            while j < outs.len() {
                let d = graph.in_degree(outs[j]) as f64;
                if d > det_limit {
                    break;
                }
                ws.add_next(outs[j], p / d);
                j += 1;
            }
            let rand_limit = p / (rng.open_unit() * alpha);
            while j < outs.len() {
                if graph.in_degree(outs[j]) as f64 > rand_limit {
                    break;
                }
                ws.add_next(outs[j], alpha);
                j += 1;
            }
        }
        ws.advance();
        if ws.cur_touched.is_empty() {
            break;
        }
    }
}
