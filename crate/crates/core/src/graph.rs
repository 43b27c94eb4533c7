//! Undirected simple graphs over a dense adjacency matrix, file ingestion,
//! synthetic planted-partition generation, and the structural algorithms
//! (BFS distances, Brandes betweenness) the rest of the pipeline builds on.
//!
//! Graphs are immutable after construction; the attack code mutates only
//! private copies.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`, stored as a symmetric binary
/// adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Array2<u8>,
}

impl Graph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: Array2::zeros((n, n)),
        }
    }

    /// Build a graph from unordered node pairs. Duplicate pairs and both
    /// orientations collapse to a single edge; self-loops are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            if u == v {
                return Err(Error::Config(format!("self-loop on node {u}")));
            }
            let id = u.max(v);
            if id >= n {
                return Err(Error::NodeOutOfRange { id, n });
            }
            g.adj[[u, v]] = 1;
            g.adj[[v, u]] = 1;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[[u, v]] != 0
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj.row(u).iter().map(|&a| a as usize).sum()
    }

    /// Degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        self.adj
            .row(u)
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(v, _)| v)
            .collect()
    }

    /// Edges as unordered pairs `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adj[[u, v]] != 0 {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = self.adj.iter().map(|&a| a as usize).sum();
        total / 2
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adj
    }

    /// Dense `f64` copy of the adjacency matrix.
    pub fn to_f64(&self) -> Array2<f64> {
        self.adj.mapv(|a| a as f64)
    }

    /// Flip or set a single undirected edge. Keeps symmetry; panics on the
    /// diagonal, which no caller may touch.
    pub(crate) fn set_edge(&mut self, u: usize, v: usize, present: bool) {
        assert_ne!(u, v, "diagonal adjacency entries are always zero");
        let bit = present as u8;
        self.adj[[u, v]] = bit;
        self.adj[[v, u]] = bit;
    }

    /// Check the structural invariants: symmetry, zero diagonal, binarity.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.adj[[i, i]] != 0 {
                return Err(Error::Config(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..self.n {
                let a = self.adj[[i, j]];
                let b = self.adj[[j, i]];
                if a != b {
                    return Err(Error::Config(format!("asymmetric entry ({i},{j})")));
                }
                if a > 1 {
                    return Err(Error::Config(format!("non-binary entry ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth class per node. Nodes may be only partially labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    labels: BTreeMap<usize, usize>,
    num_classes: usize,
}

impl LabelAssignment {
    pub fn new<I>(pairs: I, num_classes: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let labels: BTreeMap<usize, usize> = pairs.into_iter().collect();
        for (&node, &class) in &labels {
            if class >= num_classes {
                return Err(Error::Config(format!(
                    "node {node} has class {class} >= num_classes {num_classes}"
                )));
            }
        }
        Ok(LabelAssignment {
            labels,
            num_classes,
        })
    }

    /// Build from pairs, inferring `num_classes` as the largest class + 1.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let labels: BTreeMap<usize, usize> = pairs.into_iter().collect();
        let num_classes = labels.values().max().map_or(0, |&c| c + 1);
        Ok(LabelAssignment {
            labels,
            num_classes,
        })
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        self.labels.get(&node).copied()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Labeled `(node, class)` pairs in ascending node order.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().map(|(&n, &c)| (n, c))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Node feature matrix X, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    x: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(x: Array2<f64>) -> Self {
        FeatureMatrix { x }
    }

    /// One-hot node identity features for featureless datasets.
    pub fn identity(n: usize) -> Self {
        FeatureMatrix {
            x: Array2::eye(n),
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load an edge list: one edge per line, two whitespace-separated node ids,
/// `#` lines ignored. Duplicates and reversed orientations collapse; a
/// self-loop line is rejected. `declared_n` fixes the node count (ids must
/// stay below it); without it the count is the largest id + 1.
pub fn load_edge_list(path: impl AsRef<Path>, declared_n: Option<usize>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut edges = Vec::new();
    let mut max_id = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_error(path, lineno, "expected exactly two node ids")),
        };
        let u: usize = a
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid node id '{a}'")))?;
        let v: usize = b
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid node id '{b}'")))?;
        if u == v {
            return Err(parse_error(path, lineno, format!("self-loop on node {u}")));
        }
        max_id = max_id.max(u).max(v);
        edges.push((u, v));
    }
    let n = match declared_n {
        Some(n) => {
            for &(u, v) in &edges {
                let id = u.max(v);
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            n
        }
        None => {
            if edges.is_empty() {
                0
            } else {
                max_id + 1
            }
        }
    };
    Graph::from_edges(n, edges)
}

/// Load a `node<TAB>class` label file (any whitespace separator, `#` lines
/// ignored). Classes are inferred as `0..max+1`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelAssignment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_error(path, lineno, "expected 'node class'")),
        };
        let node: usize = a
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid node id '{a}'")))?;
        let class: usize = b
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid class '{b}'")))?;
        pairs.push((node, class));
    }
    LabelAssignment::from_pairs(pairs)
}

/// Load a `node<TAB>v1,v2,...,vd` feature file. Every node in `0..n` must
/// appear exactly once and all rows must share one width.
pub fn load_features(path: impl AsRef<Path>, n: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(parse_error(path, lineno, "expected 'node v1,v2,...'")),
        };
        let node: usize = a
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid node id '{a}'")))?;
        if node >= n {
            return Err(Error::NodeOutOfRange { id: node, n });
        }
        let values: Vec<f64> = b
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| parse_error(path, lineno, format!("invalid value '{s}'")))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("expected {d} values, found {}", values.len()),
                ));
            }
            _ => {}
        }
        if rows.insert(node, values).is_some() {
            return Err(parse_error(path, lineno, format!("duplicate node {node}")));
        }
    }
    let d = dim.ok_or_else(|| Error::Config(format!("feature file {} is empty", path.display())))?;
    let mut x = Array2::zeros((n, d));
    for node in 0..n {
        let row = rows
            .get(&node)
            .ok_or_else(|| Error::Config(format!("feature file missing node {node}")))?;
        for (j, &v) in row.iter().enumerate() {
            x[[node, j]] = v;
        }
    }
    Ok(FeatureMatrix::new(x))
}

/// Edge list in the on-disk format, one `u\tv` line per edge, `u < v`.
pub fn edge_list_string(g: &Graph) -> String {
    let mut out = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u}\t{v}");
    }
    out
}

/// Label file body in the on-disk format.
pub fn labels_string(labels: &LabelAssignment) -> String {
    let mut out = String::new();
    for (node, class) in labels.labeled() {
        let _ = writeln!(out, "{node}\t{class}");
    }
    out
}

/// Planted-partition (equal-block stochastic block model) generator:
/// `k` blocks of `n / k` nodes, intra-block edges with probability `p_in`,
/// inter-block with `p_out`. Labels are block indices. Bit-reproducible for
/// a fixed seed.
pub fn generate_planted_partition(
    n: usize,
    k: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, LabelAssignment)> {
    if k == 0 || n == 0 || !n.is_multiple_of(k) {
        return Err(Error::Config(format!(
            "node count {n} must be a positive multiple of community count {k}"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::Config("probabilities must lie in [0, 1]".into()));
    }
    if p_out >= p_in {
        return Err(Error::Config(format!(
            "p_out {p_out} >= p_in {p_in}: no community structure"
        )));
    }
    let block = n / k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if u / block == v / block { p_in } else { p_out };
            if rng.random::<f64>() < p {
                g.set_edge(u, v, true);
            }
        }
    }
    let labels = LabelAssignment::new((0..n).map(|u| (u, u / block)), k)?;
    Ok((g, labels))
}

/// Hop distances from `source`; `None` marks unreachable nodes.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<Option<usize>> {
    let n = g.node_count();
    assert!(source < n, "source {source} out of range for {n} nodes");
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have distances");
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Per-source Brandes pass shared by the node and edge variants. Calls
/// `credit(v, w, c)` for every shortest-path predecessor edge with its
/// dependency contribution and `node_credit(w, delta)` for interior nodes.
fn brandes_pass<FE, FN>(g: &Graph, s: usize, mut credit: FE, mut node_credit: FN)
where
    FE: FnMut(usize, usize, f64),
    FN: FnMut(usize, f64),
{
    let n = g.node_count();
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::new();
    let mut queue = VecDeque::new();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for w in g.neighbors(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
            credit(v, w, c);
            delta[v] += c;
        }
        if w != s {
            node_credit(w, delta[w]);
        }
    }
}

/// Exact edge betweenness: for each edge `e`, the sum over unordered node
/// pairs of the fraction of shortest paths through `e`, with disconnected
/// pairs contributing zero.
pub fn edge_betweenness(g: &Graph) -> BTreeMap<(usize, usize), f64> {
    let mut scores: BTreeMap<(usize, usize), f64> = g.edges().into_iter().map(|e| (e, 0.0)).collect();
    for s in 0..g.node_count() {
        brandes_pass(
            g,
            s,
            |v, w, c| {
                let key = (v.min(w), v.max(w));
                *scores.get_mut(&key).expect("credited pair is an edge") += c;
            },
            |_, _| {},
        );
    }
    // Each unordered pair was counted from both endpoints.
    for value in scores.values_mut() {
        *value /= 2.0;
    }
    scores
}

/// Exact node betweenness (Brandes), unordered-pair convention.
pub fn node_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut scores = vec![0.0f64; n];
    for s in 0..n {
        brandes_pass(g, s, |_, _, _| {}, |w, delta| scores[w] += delta);
    }
    for value in &mut scores {
        *value /= 2.0;
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn from_edges_collapses_duplicates_and_orientations() {
        let g = Graph::from_edges(3, [(0, 1), (1, 0), (1, 2), (1, 2)]).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.edge_count(), 2);
        g.validate().unwrap();
    }

    #[test]
    fn from_edges_rejects_self_loop_and_range() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(matches!(
            Graph::from_edges(3, [(0, 3)]),
            Err(Error::NodeOutOfRange { id: 3, n: 3 })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.tsv");
        std::fs::write(&path, "# comment\n0 1\n1 0\n1\t2\n").unwrap();
        let g = load_edge_list(&path, None).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);

        let path2 = dir.path().join("roundtrip.tsv");
        std::fs::write(&path2, edge_list_string(&g)).unwrap();
        assert_eq!(load_edge_list(&path2, Some(3)).unwrap(), g);
    }

    #[test]
    fn empty_edge_file_with_declared_n() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        std::fs::write(&path, "").unwrap();
        let g = load_edge_list(&path, Some(4)).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn edge_list_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "0 1\nnope\n").unwrap();
        match load_edge_list(&path, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "0 1\n2 2\n").unwrap();
        match load_edge_list(&path, None) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("self-loop"));
            }
            other => panic!("expected self-loop rejection, got {other:?}"),
        }

        std::fs::write(&path, "0 9\n").unwrap();
        assert!(matches!(
            load_edge_list(&path, Some(4)),
            Err(Error::NodeOutOfRange { id: 9, n: 4 })
        ));
    }

    #[test]
    fn label_and_feature_files() {
        let dir = tempfile::tempdir().unwrap();
        let lpath = dir.path().join("labels.tsv");
        std::fs::write(&lpath, "0\t1\n1\t0\n2\t2\n").unwrap();
        let labels = load_labels(&lpath).unwrap();
        assert_eq!(labels.num_classes(), 3);
        assert_eq!(labels.class_of(0), Some(1));
        assert_eq!(labels.class_of(9), None);

        let fpath = dir.path().join("features.tsv");
        std::fs::write(&fpath, "0\t1.0,0.5\n1\t0.0,1.0\n").unwrap();
        let x = load_features(&fpath, 2).unwrap();
        assert_eq!(x.dim(), 2);
        assert_eq!(x.matrix()[[0, 1]], 0.5);

        assert!(load_features(&fpath, 3).is_err()); // node 2 missing
    }

    #[test]
    fn planted_partition_degenerate_probabilities() {
        let (g, labels) = generate_planted_partition(8, 2, 1.0, 0.0, 7).unwrap();
        // Two disjoint 4-cliques.
        assert_eq!(g.edge_count(), 12);
        for u in 0..4 {
            for v in (u + 1)..4 {
                assert!(g.has_edge(u, v));
                assert!(g.has_edge(u + 4, v + 4));
            }
        }
        for u in 0..4 {
            for v in 4..8 {
                assert!(!g.has_edge(u, v));
            }
        }
        let expect: Vec<usize> = vec![0, 0, 0, 0, 1, 1, 1, 1];
        for (node, class) in labels.labeled() {
            assert_eq!(class, expect[node]);
        }
    }

    #[test]
    fn planted_partition_is_deterministic() {
        let (a, _) = generate_planted_partition(40, 2, 0.4, 0.05, 123).unwrap();
        let (b, _) = generate_planted_partition(40, 2, 0.4, 0.05, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planted_partition_rejects_bad_config() {
        assert!(generate_planted_partition(9, 2, 0.5, 0.1, 0).is_err());
        assert!(generate_planted_partition(8, 2, 0.1, 0.1, 0).is_err());
        assert!(generate_planted_partition(8, 2, 0.1, 0.5, 0).is_err());
    }

    #[test]
    fn planted_partition_edge_count_within_three_sigma() {
        // n=200, k=2: 2*C(100,2) intra pairs and 100*100 inter pairs.
        let intra: f64 = 2.0 * (100.0 * 99.0 / 2.0);
        let inter: f64 = 100.0 * 100.0;
        let mean = intra * 0.1 + inter * 0.01;
        let var = intra * 0.1 * 0.9 + inter * 0.01 * 0.99;
        let sigma = var.sqrt();
        assert!((mean - 1090.0).abs() < 1e-9);
        for seed in [1u64, 2, 3] {
            let (g, _) = generate_planted_partition(200, 2, 0.1, 0.01, seed).unwrap();
            let edges = g.edge_count() as f64;
            assert!(
                (edges - mean).abs() <= 3.0 * sigma,
                "seed {seed}: {edges} edges vs mean {mean} (3 sigma = {})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn bfs_on_path_and_disjoint_edges() {
        assert_eq!(
            bfs_distances(&path3(), 0),
            vec![Some(0), Some(1), Some(2)]
        );
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(
            bfs_distances(&g, 0),
            vec![Some(0), Some(1), None, None]
        );
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(
            bfs_distances(&k4, 2),
            vec![Some(1), Some(1), Some(0), Some(1)]
        );
    }

    #[test]
    fn degrees_of_small_graphs() {
        assert_eq!(triangle().degrees(), vec![2, 2, 2]);
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(star.degrees(), vec![3, 1, 1, 1]);
        assert_eq!(Graph::empty(3).degrees(), vec![0, 0, 0]);
    }

    #[test]
    fn edge_betweenness_on_known_graphs() {
        let b = edge_betweenness(&path3());
        assert!((b[&(0, 1)] - 2.0).abs() < 1e-12);
        assert!((b[&(1, 2)] - 2.0).abs() < 1e-12);

        let b = edge_betweenness(&triangle());
        for value in b.values() {
            assert!((value - 1.0).abs() < 1e-12);
        }

        let single = Graph::from_edges(2, [(0, 1)]).unwrap();
        let b = edge_betweenness(&single);
        assert!((b[&(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn node_betweenness_on_known_graphs() {
        // Path 0-1-2: only the middle node carries a pair.
        let b = node_betweenness(&path3());
        assert_eq!(b, vec![0.0, 1.0, 0.0]);

        // Star: the center carries all C(3,2) leaf pairs.
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let b = node_betweenness(&star);
        assert_eq!(b, vec![3.0, 0.0, 0.0, 0.0]);

        let b = node_betweenness(&triangle());
        assert_eq!(b, vec![0.0, 0.0, 0.0]);
    }

    /// Exhaustive oracle: enumerate all shortest paths per unordered pair by
    /// BFS layering and count, per edge, the paths that traverse it.
    fn brute_force_edge_betweenness(g: &Graph) -> BTreeMap<(usize, usize), f64> {
        let n = g.node_count();
        let mut scores: BTreeMap<(usize, usize), f64> =
            g.edges().into_iter().map(|e| (e, 0.0)).collect();
        for u in 0..n {
            let du = bfs_distances(g, u);
            for v in (u + 1)..n {
                let Some(target_dist) = du[v] else { continue };
                // Count shortest u->v paths through each edge by enumerating
                // all shortest paths recursively backwards from v.
                let mut paths: Vec<Vec<usize>> = Vec::new();
                let mut stack = vec![vec![v]];
                while let Some(partial) = stack.pop() {
                    let last = *partial.last().unwrap();
                    if last == u {
                        paths.push(partial);
                        continue;
                    }
                    let dl = du[last].unwrap();
                    for w in g.neighbors(last) {
                        if du[w] == Some(dl - 1) {
                            let mut next = partial.clone();
                            next.push(w);
                            stack.push(next);
                        }
                    }
                }
                let sigma = paths.len() as f64;
                assert!(sigma > 0.0, "pair ({u},{v}) at distance {target_dist}");
                let mut through: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                for p in &paths {
                    for pair in p.windows(2) {
                        let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                        *through.entry(key).or_insert(0) += 1;
                    }
                }
                for (edge, count) in through {
                    *scores.get_mut(&edge).unwrap() += count as f64 / sigma;
                }
            }
        }
        scores
    }

    proptest! {
        #[test]
        fn edge_betweenness_matches_brute_force(
            n in 2usize..=8,
            edge_bits in prop::collection::vec(any::<bool>(), 28),
        ) {
            let mut edges = Vec::new();
            let mut idx = 0;
            for u in 0..n {
                for v in (u + 1)..n {
                    if edge_bits[idx] {
                        edges.push((u, v));
                    }
                    idx += 1;
                }
            }
            let g = Graph::from_edges(n, edges).unwrap();
            let fast = edge_betweenness(&g);
            let slow = brute_force_edge_betweenness(&g);
            prop_assert_eq!(fast.len(), slow.len());
            for (edge, value) in &fast {
                prop_assert!((value - slow[edge]).abs() < 1e-9, "edge {:?}", edge);
            }
        }

        #[test]
        fn bfs_triangle_property(
            n in 2usize..=8,
            edge_bits in prop::collection::vec(any::<bool>(), 28),
            source in 0usize..8,
        ) {
            let source = source % n;
            let mut edges = Vec::new();
            let mut idx = 0;
            for u in 0..n {
                for v in (u + 1)..n {
                    if edge_bits[idx] {
                        edges.push((u, v));
                    }
                    idx += 1;
                }
            }
            let g = Graph::from_edges(n, edges).unwrap();
            let dist = bfs_distances(&g, source);
            for (u, v) in g.edges() {
                if let (Some(a), Some(b)) = (dist[u], dist[v]) {
                    prop_assert!(a.abs_diff(b) <= 1, "edge ({},{})", u, v);
                }
            }
        }
    }
}
