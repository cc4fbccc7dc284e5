//! Hub index: level-wise backward search from the highest-reverse-PageRank
//! nodes, storing reserves `ψ_ℓ(v, w) > r_max`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{check_decay, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::pagerank::{top_k_by_pagerank, PageRankVector};

pub const MAGIC: &[u8; 8] = b"PRSIMIDX";
pub const VERSION: u32 = 1;

/// `(1-√c)² ε / 12`.
pub fn residue_threshold(c: f64, eps: f64) -> f64 {
    let alpha = 1.0 - c.sqrt();
    alpha * alpha * eps / 12.0
}

/// How many hubs to index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HubSelection {
    Count(usize),
    /// `⌈√n⌉`.
    Sqrt,
    /// `n (ε d̄)^{γ/(γ-1)}`, the setting that keeps the index at O(m) on a
    /// power-law graph with cumulative exponent γ.
    AutoM { gamma: f64 },
}

impl HubSelection {
    pub fn resolve(self, graph: &Graph, eps: f64) -> Result<usize> {
        let n = graph.node_count();
        let j0 = match self {
            HubSelection::Count(k) => k,
            HubSelection::Sqrt => (n as f64).sqrt().ceil() as usize,
            HubSelection::AutoM { gamma } => {
                if !(gamma > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "auto-m hub selection needs gamma > 1 (got {gamma})"
                    )));
                }
                let avg_deg = graph.edge_count() as f64 / n as f64;
                let j = n as f64 * (eps * avg_deg).powf(gamma / (gamma - 1.0));
                j.floor() as usize
            }
        };
        Ok(j0.min(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    pub c: f64,
    pub eps: f64,
    pub r_max: f64,
    pub j0: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubLists {
    pub node: NodeId,
    /// `levels[ℓ]` is `L_ℓ(w)`, ascending by `v`. Trailing levels are nonempty.
    pub levels: Vec<Vec<(NodeId, f64)>>,
}

impl HubLists {
    pub fn tuple_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubIndex {
    pub params: IndexParams,
    pub n: usize,
    pub m: usize,
    /// Hubs in selection order (descending π).
    pub hubs: Vec<HubLists>,
    slot: Vec<u32>,
}

const NO_SLOT: u32 = u32::MAX;
/// Residue mass at level ℓ is at most (√c)^ℓ, so real indexes stop far
/// below this; larger values only come from corrupt files.
const MAX_LEVEL: usize = 1 << 16;

impl HubIndex {
    fn from_parts(params: IndexParams, n: usize, m: usize, hubs: Vec<HubLists>) -> Result<HubIndex> {
        let mut slot = vec![NO_SLOT; n];
        for (i, h) in hubs.iter().enumerate() {
            let s = slot
                .get_mut(h.node as usize)
                .ok_or_else(|| Error::Corrupt(format!("hub {} out of range", h.node)))?;
            if *s != NO_SLOT {
                return Err(Error::Corrupt(format!("hub {} listed twice", h.node)));
            }
            *s = i as u32;
        }
        Ok(HubIndex {
            params,
            n,
            m,
            hubs,
            slot,
        })
    }

    /// An index with no hubs; every target goes through backward walks.
    pub fn empty(graph: &Graph, c: f64, eps: f64) -> HubIndex {
        let params = IndexParams {
            c,
            eps,
            r_max: residue_threshold(c, eps),
            j0: 0,
        };
        HubIndex::from_parts(params, graph.node_count(), graph.edge_count(), Vec::new()).unwrap()
    }

    #[inline]
    pub fn contains_hub(&self, w: NodeId) -> bool {
        self.slot.get(w as usize).is_some_and(|&s| s != NO_SLOT)
    }

    pub fn hub(&self, w: NodeId) -> Option<&HubLists> {
        match self.slot.get(w as usize) {
            Some(&s) if s != NO_SLOT => Some(&self.hubs[s as usize]),
            _ => None,
        }
    }

    /// `L_ℓ(w)`; empty for non-hubs and levels past the deepest stored one.
    pub fn lookup(&self, w: NodeId, level: usize) -> &[(NodeId, f64)] {
        self.hub(w)
            .and_then(|h| h.levels.get(level))
            .map_or(&[], Vec::as_slice)
    }

    pub fn tuple_count(&self) -> usize {
        self.hubs.iter().map(HubLists::tuple_count).sum()
    }

    pub fn check_compatible(&self, graph: &Graph, c: f64) -> Result<()> {
        if self.n != graph.node_count() || self.m != graph.edge_count() {
            return Err(Error::IndexMismatch(format!(
                "index built for n={} m={}, graph has n={} m={}",
                self.n,
                self.m,
                graph.node_count(),
                graph.edge_count()
            )));
        }
        if self.params.c.to_bits() != c.to_bits() {
            return Err(Error::IndexMismatch(format!(
                "index built with c={}, query uses c={c}",
                self.params.c
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.m as u64).to_le_bytes())?;
        out.write_all(&self.params.c.to_le_bytes())?;
        out.write_all(&self.params.eps.to_le_bytes())?;
        out.write_all(&self.params.r_max.to_le_bytes())?;
        out.write_all(&(self.params.j0 as u64).to_le_bytes())?;
        out.write_all(&(self.hubs.len() as u64).to_le_bytes())?;
        for hub in &self.hubs {
            out.write_all(&(hub.node as u64).to_le_bytes())?;
            let nonempty = hub.levels.iter().filter(|l| !l.is_empty()).count();
            out.write_all(&(nonempty as u32).to_le_bytes())?;
            for (l, tuples) in hub.levels.iter().enumerate().filter(|(_, t)| !t.is_empty()) {
                out.write_all(&(l as u32).to_le_bytes())?;
                out.write_all(&(tuples.len() as u64).to_le_bytes())?;
                for &(v, psi) in tuples {
                    out.write_all(&(v as u64).to_le_bytes())?;
                    out.write_all(&psi.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(input: impl Read) -> Result<HubIndex> {
        let mut r = Reader(input);
        let mut magic = [0u8; 8];
        r.fill(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let n = r.u64()? as usize;
        let m = r.u64()? as usize;
        let c = r.f64()?;
        let eps = r.f64()?;
        let r_max = r.f64()?;
        let j0 = r.u64()? as usize;
        let hub_count = r.u64()? as usize;
        if hub_count > n {
            return Err(Error::Corrupt(format!("{hub_count} hubs for {n} nodes")));
        }
        let node = |v: u64| -> Result<NodeId> {
            if (v as usize) < n {
                Ok(v as NodeId)
            } else {
                Err(Error::Corrupt(format!("node {v} out of range")))
            }
        };
        let mut hubs = Vec::with_capacity(hub_count);
        for _ in 0..hub_count {
            let w = node(r.u64()?)?;
            let level_count = r.u32()?;
            let mut levels: Vec<Vec<(NodeId, f64)>> = Vec::new();
            for _ in 0..level_count {
                let l = r.u32()? as usize;
                if l < levels.len() || l > MAX_LEVEL {
                    return Err(Error::Corrupt(format!("hub {w}: level {l} out of order")));
                }
                let tuples = r.u64()? as usize;
                if tuples > n {
                    return Err(Error::Corrupt(format!("hub {w}: {tuples} tuples at level {l}")));
                }
                levels.resize_with(l + 1, Vec::new);
                let list = &mut levels[l];
                list.reserve(tuples);
                for _ in 0..tuples {
                    let v = node(r.u64()?)?;
                    list.push((v, r.f64()?));
                }
            }
            hubs.push(HubLists { node: w, levels });
        }
        let params = IndexParams { c, eps, r_max, j0 };
        HubIndex::from_parts(params, n, m, hubs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<HubIndex> {
        HubIndex::read_from(BufReader::new(File::open(path)?))
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Truncated,
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

/// Reserves and leftover residues from one backward search.
#[derive(Debug, Clone, Default)]
pub struct BackwardSearch {
    /// `reserves[ℓ]`: every nonzero `ψ_ℓ(v, w)`, ascending by `v`.
    pub reserves: Vec<Vec<(NodeId, f64)>>,
    /// Residues left at or below `r_max` when their level was processed.
    pub residues: Vec<Vec<(NodeId, f64)>>,
}

/// Dense scratch reused across hubs.
struct PushWorkspace {
    cur: Vec<f64>,
    next: Vec<f64>,
    cur_touched: Vec<NodeId>,
    next_touched: Vec<NodeId>,
}

impl PushWorkspace {
    fn new(n: usize) -> PushWorkspace {
        PushWorkspace {
            cur: vec![0.0; n],
            next: vec![0.0; n],
            cur_touched: Vec::new(),
            next_touched: Vec::new(),
        }
    }
}

pub fn backward_search(graph: &Graph, w: NodeId, r_max: f64, c: f64) -> BackwardSearch {
    let mut ws = PushWorkspace::new(graph.node_count());
    backward_search_in(graph, w, r_max, c, &mut ws)
}

/// Level-synchronous push. Residue at level ℓ only ever comes from pushes at
/// level ℓ-1, so each level is visited once: every `v` with `r_ℓ(v) > r_max`
/// sends `√c r / d_in(z)` to each out-neighbor `z` and keeps `(1-√c) r` as
/// its reserve. A level with nothing to push leaves the next one empty, which
/// ends the loop.
fn backward_search_in(graph: &Graph, w: NodeId, r_max: f64, c: f64, ws: &mut PushWorkspace) -> BackwardSearch {
    let sqrt_c = c.sqrt();
    let alpha = 1.0 - sqrt_c;
    let mut result = BackwardSearch::default();

    ws.cur[w as usize] = 1.0;
    ws.cur_touched.push(w);
    while !ws.cur_touched.is_empty() {
        ws.cur_touched.sort_unstable();
        let mut reserves = Vec::new();
        let mut residues = Vec::new();
        for i in 0..ws.cur_touched.len() {
            let v = ws.cur_touched[i];
            let r = std::mem::take(&mut ws.cur[v as usize]);
            if r > r_max {
                for &z in graph.out_neighbors(v) {
                    let slot = &mut ws.next[z as usize];
                    if *slot == 0.0 {
                        ws.next_touched.push(z);
                    }
                    *slot += sqrt_c * r / graph.in_degree(z) as f64;
                }
                reserves.push((v, alpha * r));
            } else {
                residues.push((v, r));
            }
        }
        result.reserves.push(reserves);
        result.residues.push(residues);
        // Every entry of `cur` was taken above, so it is all zeros again.
        ws.cur_touched.clear();
        std::mem::swap(&mut ws.cur, &mut ws.next);
        std::mem::swap(&mut ws.cur_touched, &mut ws.next_touched);
    }
    while result.reserves.last().is_some_and(Vec::is_empty) {
        result.reserves.pop();
    }
    result
}

/// Builds the index over the top-`j0` nodes by reverse PageRank. Hubs are
/// processed in parallel; output order and contents do not depend on the
/// thread count.
pub fn build_index(graph: &Graph, pr: &PageRankVector, c: f64, eps: f64, j0: usize) -> Result<HubIndex> {
    check_decay(c)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive (got {eps})")));
    }
    if pr.pi.len() != graph.node_count() {
        return Err(Error::IndexMismatch("PageRank vector length differs from n".into()));
    }
    let n = graph.node_count();
    let j0 = j0.min(n);
    let r_max = residue_threshold(c, eps);
    let hub_nodes = top_k_by_pagerank(pr, j0);
    let hubs: Vec<HubLists> = hub_nodes
        .par_iter()
        .map_init(
            || PushWorkspace::new(n),
            |ws, &w| {
                let search = backward_search_in(graph, w, r_max, c, ws);
                let mut levels: Vec<Vec<(NodeId, f64)>> = search
                    .reserves
                    .into_iter()
                    .map(|lv| lv.into_iter().filter(|&(_, psi)| psi > r_max).collect())
                    .collect();
                while levels.last().is_some_and(Vec::is_empty) {
                    levels.pop();
                }
                HubLists { node: w, levels }
            },
        )
        .collect();
    let params = IndexParams { c, eps, r_max, j0 };
    HubIndex::from_parts(params, n, graph.edge_count(), hubs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::pagerank::{exact_lhop_rppr, reverse_pagerank, DEFAULT_TOL};

    fn index_for(g: &Graph, c: f64, eps: f64, j0: usize) -> HubIndex {
        let pr = reverse_pagerank(g, c, DEFAULT_TOL).unwrap();
        build_index(g, &pr, c, eps, j0).unwrap()
    }

    #[test]
    fn large_threshold_keeps_only_the_seed() {
        let g = gen::gen_er(30, 0.2, 1).unwrap();
        let s = backward_search(&g, 4, 1.0, 0.6);
        assert_eq!(s.reserves.len(), 0);
        assert_eq!(s.residues[0], vec![(4, 1.0)]);
        let s = backward_search(&g, 4, 0.99, 0.6);
        assert_eq!(s.reserves[0], vec![(4, 1.0 - 0.6f64.sqrt())]);
    }

    #[test]
    fn two_node_reserves() {
        let g = Graph::from_edges(2, vec![(0, 1)], true).unwrap();
        let s = backward_search(&g, 0, 0.01, 0.64);
        assert!((s.reserves[0][0].1 - 0.2).abs() < 1e-15);
        assert_eq!(s.reserves[1].len(), 1);
        assert!((s.reserves[1][0].1 - 0.16).abs() < 1e-15);
        assert_eq!(s.reserves.len(), 2);

        let s = backward_search(&g, 1, 0.01, 0.64);
        assert_eq!(s.reserves.len(), 1);
        assert!((s.reserves[0][0].1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reserves_underestimate_by_at_most_r_max() {
        let c = 0.6;
        for seed in 0..3 {
            let g = gen::gen_er(40, 0.1, seed).unwrap();
            let r_max = residue_threshold(c, 0.1);
            for w in 0..40 {
                let s = backward_search(&g, w, r_max, c);
                let exact = exact_lhop_rppr(&g, w, 80, c).unwrap();
                for l in 0..=80 {
                    for v in 0..40 {
                        let psi = s.reserves.get(l).map_or(0.0, |lv| {
                            lv.iter().find(|p| p.0 == v).map_or(0.0, |p| p.1)
                        });
                        let gap = exact.get(l, v) - psi;
                        assert!(gap >= -1e-12 && gap <= r_max + 1e-12, "w={w} l={l} v={v} gap={gap}");
                    }
                }
            }
        }
    }

    #[test]
    fn lookup_cases() {
        let g = gen::gen_star(10).unwrap();
        let center = g.dense_id(1).unwrap();
        let leaf = g.dense_id(2).unwrap();
        let idx = index_for(&g, 0.6, 0.05, 1);
        // leaves pass their walks to the center, which therefore ranks first
        assert_eq!(idx.hubs.len(), 1);
        assert_eq!(idx.hubs[0].node, center);
        assert!(idx.contains_hub(center));
        assert!(!idx.contains_hub(leaf));
        assert_eq!(idx.lookup(center, 0), &[(center, 1.0 - 0.6f64.sqrt())]);
        assert_eq!(idx.lookup(center, 1).len(), 9);
        assert!(idx.lookup(center, 2).is_empty());
        assert!(idx.lookup(center, 50).is_empty());
        assert!(idx.lookup(leaf, 0).is_empty());
        assert!(idx.lookup(10_000, 0).is_empty());
    }

    #[test]
    fn star_center_hub() {
        let g = gen::gen_star(10).unwrap();
        let c = 0.6;
        let center = g.dense_id(1).unwrap();
        let s = backward_search(&g, center, residue_threshold(c, 0.05), c);
        assert_eq!(s.reserves.len(), 2);
        assert_eq!(s.reserves[1].len(), 9);
        let want = c.sqrt() * (1.0 - c.sqrt());
        assert!(s.reserves[1].iter().all(|&(_, psi)| (psi - want).abs() < 1e-15));
    }

    #[test]
    fn zero_hubs_is_empty() {
        let g = gen::gen_er(20, 0.2, 0).unwrap();
        let idx = index_for(&g, 0.6, 0.1, 0);
        assert!(idx.hubs.is_empty());
        assert_eq!(idx.tuple_count(), 0);
        assert_eq!(idx, HubIndex::empty(&g, 0.6, 0.1));
    }

    #[test]
    fn size_bound_per_hub() {
        let c = 0.6;
        for seed in 0..3 {
            let g = gen::gen_powerlaw(500, 2.0, 5.0, false, seed).unwrap();
            let pr = reverse_pagerank(&g, c, DEFAULT_TOL).unwrap();
            let idx = build_index(&g, &pr, c, 0.05, 50).unwrap();
            for h in &idx.hubs {
                let bound = 500.0 * pr.pi[h.node as usize] / idx.params.r_max;
                assert!(h.tuple_count() as f64 <= bound + 1e-9, "{} > {bound}", h.tuple_count());
                assert!(h.levels.iter().flatten().all(|&(_, psi)| psi > idx.params.r_max));
                assert!(h.levels.last().is_none_or(|l| !l.is_empty()));
            }
        }
    }

    #[test]
    fn hubs_follow_pagerank_order() {
        let g = gen::gen_er(60, 0.08, 3).unwrap();
        let pr = reverse_pagerank(&g, 0.6, DEFAULT_TOL).unwrap();
        let idx = build_index(&g, &pr, 0.6, 0.1, 8).unwrap();
        let nodes: Vec<NodeId> = idx.hubs.iter().map(|h| h.node).collect();
        assert_eq!(nodes, top_k_by_pagerank(&pr, 8));
    }

    #[test]
    fn serialization_round_trip() {
        let g = gen::gen_er(80, 0.06, 5).unwrap();
        let idx = index_for(&g, 0.6, 0.05, 9);
        assert!(idx.tuple_count() > 9);
        let bytes = idx.to_bytes();
        let back = HubIndex::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes(), bytes);

        let empty = HubIndex::empty(&g, 0.6, 0.05);
        assert_eq!(HubIndex::read_from(empty.to_bytes().as_slice()).unwrap(), empty);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.idx");
        idx.save(&path).unwrap();
        assert_eq!(HubIndex::load(&path).unwrap(), idx);
    }

    #[test]
    fn malformed_files() {
        let g = gen::gen_er(30, 0.1, 2).unwrap();
        let bytes = index_for(&g, 0.6, 0.1, 3).to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(HubIndex::read_from(bad.as_slice()), Err(Error::BadMagic)));

        let mut bad = bytes.clone();
        bad[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(HubIndex::read_from(bad.as_slice()), Err(Error::UnsupportedVersion(7))));

        for cut in [4, 20, bytes.len() - 3] {
            assert!(matches!(HubIndex::read_from(&bytes[..cut]), Err(Error::Truncated)), "cut {cut}");
        }
    }

    #[test]
    fn compatibility_checks() {
        let g = gen::gen_er(30, 0.1, 2).unwrap();
        let idx = index_for(&g, 0.6, 0.1, 3);
        assert!(idx.check_compatible(&g, 0.6).is_ok());
        assert!(matches!(idx.check_compatible(&g, 0.5), Err(Error::IndexMismatch(_))));
        let other = gen::gen_er(31, 0.1, 2).unwrap();
        assert!(matches!(idx.check_compatible(&other, 0.6), Err(Error::IndexMismatch(_))));
    }

    #[test]
    fn build_is_deterministic() {
        let g = gen::gen_powerlaw(2_000, 2.0, 6.0, true, 8).unwrap();
        let a = index_for(&g, 0.6, 0.05, 45).to_bytes();
        let b = index_for(&g, 0.6, 0.05, 45).to_bytes();
        assert_eq!(a, b);
    }

    #[test]
    fn hub_selection_modes() {
        let g = gen::gen_er(50, 0.1, 1).unwrap();
        assert_eq!(HubSelection::Sqrt.resolve(&g, 0.1).unwrap(), 8);
        assert_eq!(HubSelection::Count(500).resolve(&g, 0.1).unwrap(), 50);
        assert!(HubSelection::AutoM { gamma: 1.0 }.resolve(&g, 0.1).is_err());
        let d = g.edge_count() as f64 / 50.0;
        let want = (50.0 * (0.01 * d).powf(2.0)).floor() as usize;
        assert_eq!(HubSelection::AutoM { gamma: 2.0 }.resolve(&g, 0.01).unwrap(), want.min(50));
    }
}
