//! Immutable CSR directed graph.
//!
//! Out-adjacency lists are ordered by ascending in-degree of the target (ties
//! by ascending node id). The backward-walk samplers rely on this: the set of
//! out-neighbors whose in-degree is below a threshold is always a prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node id.
pub type NodeId = u32;

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Collapse repeated directed edges into one.
    pub dedupe: bool,
    /// Emit both directions for every input pair.
    pub undirected: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            dedupe: true,
            undirected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    in_offsets: Vec<usize>,
    in_targets: Vec<NodeId>,
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_deg: Vec<u32>,
    /// Original label of every dense id, ascending.
    labels: Vec<u64>,
}

impl Graph {
    /// Builds a graph over dense ids `0..n`. Labels are the ids themselves.
    pub fn from_edges(n: usize, edges: Vec<(NodeId, NodeId)>, dedupe: bool) -> Result<Graph> {
        if n > NodeId::MAX as usize {
            return Err(Error::TooManyNodes(n));
        }
        for &(x, y) in &edges {
            let bad = x.max(y);
            if bad as usize >= n {
                return Err(Error::NodeOutOfRange {
                    node: bad as u64,
                    n,
                });
            }
        }
        Ok(Self::build(n, edges, dedupe, (0..n as u64).collect()))
    }

    /// Builds a graph from arbitrary non-negative labels, remapping them to
    /// dense ids in ascending label order.
    pub fn from_labeled_edges(edges: &[(u64, u64)], options: LoadOptions) -> Result<Graph> {
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut labels: Vec<u64> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() > NodeId::MAX as usize {
            return Err(Error::TooManyNodes(labels.len()));
        }
        let dense = |l: u64| labels.binary_search(&l).unwrap() as NodeId;
        let mut dense_edges = Vec::with_capacity(edges.len() * if options.undirected { 2 } else { 1 });
        for &(a, b) in edges {
            let (x, y) = (dense(a), dense(b));
            dense_edges.push((x, y));
            if options.undirected {
                dense_edges.push((y, x));
            }
        }
        let n = labels.len();
        Ok(Self::build(n, dense_edges, options.dedupe, labels))
    }

    fn build(n: usize, mut edges: Vec<(NodeId, NodeId)>, dedupe: bool, labels: Vec<u64>) -> Graph {
        edges.sort_unstable();
        if dedupe {
            edges.dedup();
        }

        // In-adjacency: bucket by target, sources stay ascending.
        let mut in_offsets = vec![0usize; n + 1];
        for &(_, y) in &edges {
            in_offsets[y as usize + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut cursor = in_offsets.clone();
        let mut in_targets = vec![0 as NodeId; edges.len()];
        for &(x, y) in &edges {
            in_targets[cursor[y as usize]] = x;
            cursor[y as usize] += 1;
        }
        let in_deg: Vec<u32> = (0..n)
            .map(|v| (in_offsets[v + 1] - in_offsets[v]) as u32)
            .collect();

        let mut out_offsets = vec![0usize; n + 1];
        for &(x, _) in &edges {
            out_offsets[x as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        let out_targets = sorted_out_targets(n, &in_offsets, &in_targets, &in_deg, &out_offsets);

        Graph {
            in_offsets,
            in_targets,
            out_offsets,
            out_targets,
            in_deg,
            labels,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.in_deg.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.in_targets.len()
    }

    #[inline]
    pub fn in_degree(&self, v: NodeId) -> u32 {
        self.in_deg[v as usize]
    }

    #[inline]
    pub fn out_degree(&self, v: NodeId) -> u32 {
        let v = v as usize;
        (self.out_offsets[v + 1] - self.out_offsets[v]) as u32
    }

    /// `(in_degree, out_degree)` with a range check.
    pub fn degrees(&self, v: NodeId) -> Result<(u32, u32)> {
        self.check_node(v)?;
        Ok((self.in_degree(v), self.out_degree(v)))
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if (v as usize) < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: v as u64,
                n: self.node_count(),
            })
        }
    }

    /// In-neighbors of `v`, ascending by id.
    #[inline]
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.in_targets[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// Out-neighbors of `v`, ascending by in-degree, then id.
    #[inline]
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn in_degrees(&self) -> &[u32] {
        &self.in_deg
    }

    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn dense_id(&self, label: u64) -> Result<NodeId> {
        self.labels
            .binary_search(&label)
            .map(|i| i as NodeId)
            .map_err(|_| Error::UnknownNode(label))
    }

    /// Every directed edge as `(source, target)` in dense ids.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count() as NodeId)
            .flat_map(move |y| self.in_neighbors(y).iter().map(move |&x| (x, y)))
    }

    /// True when every out-list is ordered by `(in_degree, id)`.
    pub fn is_out_sorted(&self) -> bool {
        (0..self.node_count() as NodeId).all(|x| {
            self.out_neighbors(x)
                .windows(2)
                .all(|p| (self.in_degree(p[0]), p[0]) <= (self.in_degree(p[1]), p[1]))
        })
    }

    /// Re-derives the out-adjacency ordering. Graphs built through the
    /// constructors are already sorted; this exists for callers that want the
    /// step made explicit.
    pub fn sort_out_adjacency_by_indegree(mut self) -> Graph {
        let n = self.node_count();
        self.out_targets = sorted_out_targets(
            n,
            &self.in_offsets,
            &self.in_targets,
            &self.in_deg,
            &self.out_offsets,
        );
        self
    }

    /// Writes "src\tdst" lines using original labels.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut edges: Vec<(NodeId, NodeId)> = self.edges().collect();
        edges.sort_unstable();
        for (x, y) in edges {
            writeln!(out, "{}\t{}", self.label(x), self.label(y))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes the "orig\tdense" sidecar.
    pub fn write_id_map(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (dense, label) in self.labels.iter().enumerate() {
            writeln!(out, "{label}\t{dense}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Counting sort of all edges by target in-degree. Walking targets in
/// `(in_degree, id)` order and appending each to its sources' lists yields
/// sorted out-lists in O(n + m).
fn sorted_out_targets(
    n: usize,
    in_offsets: &[usize],
    in_targets: &[NodeId],
    in_deg: &[u32],
    out_offsets: &[usize],
) -> Vec<NodeId> {
    let mut bucket_start = vec![0usize; n + 2];
    for &d in in_deg {
        bucket_start[d as usize + 1] += 1;
    }
    for i in 0..=n {
        bucket_start[i + 1] += bucket_start[i];
    }
    let mut order = vec![0 as NodeId; n];
    for (y, &d) in in_deg.iter().enumerate() {
        order[bucket_start[d as usize]] = y as NodeId;
        bucket_start[d as usize] += 1;
    }

    let mut cursor = out_offsets[..n].to_vec();
    let mut out_targets = vec![0 as NodeId; in_targets.len()];
    for &y in &order {
        for &x in &in_targets[in_offsets[y as usize]..in_offsets[y as usize + 1]] {
            out_targets[cursor[x as usize]] = y;
            cursor[x as usize] += 1;
        }
    }
    out_targets
}

/// Parses an edge list: one "src dst" pair per line, `#` comments, LF or CRLF.
pub fn parse_edge_list(reader: impl BufRead) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected two node ids, got {line:?}"),
            });
        };
        edges.push((parse_id(a, line_no)?, parse_id(b, line_no)?));
    }
    Ok(edges)
}

fn parse_id(tok: &str, line: usize) -> Result<u64> {
    use std::num::IntErrorKind;
    tok.parse::<u64>().map_err(|e| match e.kind() {
        IntErrorKind::PosOverflow => Error::IdOverflow { line },
        _ => Error::Parse {
            line,
            msg: format!("invalid node id {tok:?}"),
        },
    })
}

pub fn load_edge_list(path: impl AsRef<Path>, options: LoadOptions) -> Result<Graph> {
    let file = File::open(path)?;
    let edges = parse_edge_list(BufReader::new(file))?;
    Graph::from_labeled_edges(&edges, options)
}
