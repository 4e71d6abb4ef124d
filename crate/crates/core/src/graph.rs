//! Undirected graphs with node features, edge splits and negative sampling.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An undirected edge stored with the smaller endpoint first.
pub type Edge = (usize, usize);

/// Orders the endpoints of a pair so that `u < v`.
#[inline]
pub fn canonical(u: usize, v: usize) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Undirected, self-loop-free graph with an `N x D_f` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    features: Array2<f64>,
}

impl Graph {
    /// Builds a graph from arbitrary pairs. Direction, duplicates and self-loops
    /// are normalised away.
    pub fn new(n_nodes: usize, pairs: impl IntoIterator<Item = Edge>, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != n_nodes {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows but the graph has {} nodes",
                features.nrows(),
                n_nodes
            )));
        }
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for id in [u, v] {
                if id >= n_nodes {
                    return Err(Error::Range { id, n_nodes });
                }
            }
            if u != v {
                edges.push(canonical(u, v));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted(n_nodes, edges, features))
    }

    /// Graph without features (a zero-width feature matrix).
    pub fn structural(n_nodes: usize, pairs: impl IntoIterator<Item = Edge>) -> Result<Self> {
        Self::new(n_nodes, pairs, Array2::zeros((n_nodes, 0)))
    }

    fn from_sorted(n_nodes: usize, edges: Vec<Edge>, features: Array2<f64>) -> Self {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph {
            n_nodes,
            edges,
            adjacency,
            features,
        }
    }

    /// Same nodes and features, different edge set.
    pub fn with_edges(&self, pairs: impl IntoIterator<Item = Edge>) -> Result<Self> {
        Self::new(self.n_nodes, pairs, self.features.clone())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edges, sorted lexicographically.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Sorted neighbour ids of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_set(&self) -> HashSet<Edge> {
        self.edges.iter().copied().collect()
    }

    /// Edge density `2m / (N (N - 1))`.
    pub fn density(&self) -> f64 {
        let n = self.n_nodes as f64;
        if self.n_nodes < 2 {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / (n * (n - 1.0))
    }

    /// Reads the canonical edge-list and feature files.
    pub fn load(edge_path: impl AsRef<Path>, feature_path: impl AsRef<Path>) -> Result<Self> {
        let features = read_features(feature_path.as_ref())?;
        let pairs = read_edge_list(edge_path.as_ref())?;
        let n = features.nrows();
        for (line, (u, v)) in &pairs.lines {
            for id in [*u, *v] {
                if id >= n {
                    return Err(Error::Parse {
                        path: edge_path.as_ref().to_path_buf(),
                        line: *line,
                        msg: Error::Range { id, n_nodes: n }.to_string(),
                    });
                }
            }
        }
        Graph::new(n, pairs.lines.into_iter().map(|(_, e)| e), features)
    }

    /// Writes both canonical files; `load` on the output reproduces `self` exactly.
    pub fn save(&self, edge_path: impl AsRef<Path>, feature_path: impl AsRef<Path>) -> Result<()> {
        write_edge_list(edge_path.as_ref(), &self.edges, None)?;
        write_features(feature_path.as_ref(), &self.features)
    }
}

/// Per-node degrees and their minimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Degrees {
    pub per_node: Vec<usize>,
    pub min: usize,
}

pub fn degrees(g: &Graph) -> Degrees {
    let per_node: Vec<usize> = (0..g.n_nodes()).map(|v| g.degree(v)).collect();
    let min = per_node.iter().copied().min().unwrap_or(0);
    Degrees { per_node, min }
}

pub(crate) struct EdgeLines {
    pub lines: Vec<(usize, Edge)>,
}

pub(crate) fn read_edge_list(path: &Path) -> Result<EdgeLines> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "expected two node ids".into(),
            })?;
            tok.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("invalid node id `{tok}`"),
            })
        };
        let u = parse(tokens.next())?;
        let v = parse(tokens.next())?;
        if tokens.next().is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "expected exactly two node ids".into(),
            });
        }
        lines.push((idx + 1, (u, v)));
    }
    Ok(EdgeLines { lines })
}

pub(crate) fn write_edge_list(path: &Path, edges: &[Edge], header: Option<&str>) -> Result<()> {
    let mut out = String::with_capacity(edges.len() * 12);
    if let Some(header) = header {
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    for &(u, v) in edges {
        let _ = writeln!(out, "{u} {v}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (n, d) = loop {
        let Some((idx, raw)) = lines.next() else {
            return Err(parse_err(1, "missing `N D_f` header".into()));
        };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let dims: Vec<&str> = raw.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(parse_err(idx + 1, "header must be `N D_f`".into()));
        }
        let n = dims[0]
            .parse::<usize>()
            .map_err(|_| parse_err(idx + 1, format!("invalid node count `{}`", dims[0])))?;
        let d = dims[1]
            .parse::<usize>()
            .map_err(|_| parse_err(idx + 1, format!("invalid feature dimension `{}`", dims[1])))?;
        break (n, d);
    };
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0usize;
    for (idx, raw) in lines {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let before = data.len();
        for tok in raw.split_whitespace() {
            let value = tok
                .parse::<f64>()
                .map_err(|_| parse_err(idx + 1, format!("invalid real `{tok}`")))?;
            data.push(value);
        }
        if data.len() - before != d {
            return Err(parse_err(
                idx + 1,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Shape(format!(
            "{}: header declares {n} rows but {rows} were found",
            path.display()
        )));
    }
    Array2::from_shape_vec((n, d), data).map_err(|e| Error::Shape(e.to_string()))
}

pub(crate) fn write_features(path: &Path, x: &Array2<f64>) -> Result<()> {
    let mut out = String::with_capacity(x.len() * 4 + 16);
    let _ = writeln!(out, "{} {}", x.nrows(), x.ncols());
    for row in x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            // `Display` for f64 prints the shortest string that parses back to the same bits.
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Train/valid/test partition of the positive edges plus fixed negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub valid_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub valid_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
}

/// Fractions of edges assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.85,
            valid: 0.05,
            test: 0.10,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.valid, self.test];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(format!("split ratios must lie in [0, 1], got {all:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

// Guards products like 0.07 * 100 = 7.000000000000001 and 0.29 * 100 = 28.999999999999996.
fn floor_count(ratio: f64, total: usize) -> usize {
    (ratio * total as f64 + 1e-9).floor() as usize
}

/// Seeded uniform partition of the edges; valid and test take `floor(ratio * |E|)`
/// edges each and train keeps the remainder.
pub fn split_edges(g: &Graph, ratios: SplitRatios, seed: u64) -> Result<EdgeSplit> {
    ratios.validate()?;
    let m = g.n_edges();
    if m < 3 {
        return Err(Error::Split(format!("graph has {m} edges, at least 3 are required")));
    }
    let n_valid = floor_count(ratios.valid, m);
    let n_test = floor_count(ratios.test, m);
    if n_valid == 0 || n_test == 0 || n_valid + n_test >= m {
        return Err(Error::Split(format!(
            "{m} edges give {} train / {n_valid} valid / {n_test} test positives; every split must be non-empty",
            m.saturating_sub(n_valid + n_test)
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = g.edges().to_vec();
    shuffled.shuffle(&mut rng);
    let test_pos = shuffled[..n_test].to_vec();
    let valid_pos = shuffled[n_test..n_test + n_valid].to_vec();
    let mut train_pos = shuffled[n_test + n_valid..].to_vec();
    train_pos.sort_unstable();

    let neg_seed: u64 = rng.random();
    let valid_neg = sample_negatives(g, n_valid, neg_seed, &HashSet::new())?;
    let taken: HashSet<Edge> = valid_neg.iter().copied().collect();
    let test_neg = sample_negatives(g, n_test, neg_seed.wrapping_add(1), &taken)?;

    Ok(EdgeSplit {
        train_pos,
        valid_pos,
        test_pos,
        valid_neg,
        test_neg,
        seed,
    })
}

/// Draws `count` distinct non-edges, avoiding `exclude` and self-loops.
pub fn sample_negatives(g: &Graph, count: usize, seed: u64, exclude: &HashSet<Edge>) -> Result<Vec<Edge>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = g.n_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let excluded_extra = exclude
        .iter()
        .filter(|&&(u, v)| u != v && u.max(v) < n && !g.has_edge(u, v))
        .count();
    let available = total_pairs - g.n_edges() - excluded_extra;
    if available < count {
        return Err(Error::Sampling(format!(
            "requested {count} negatives but only {available} non-edges are available"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocked = |e: Edge| g.has_edge(e.0, e.1) || exclude.contains(&e);

    // Dense regime: enumerate and shuffle instead of rejecting most draws.
    if available < 4 * count {
        let mut pool: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&e| !blocked(e))
            .collect();
        pool.shuffle(&mut rng);
        pool.truncate(count);
        return Ok(pool);
    }

    let mut seen = HashSet::with_capacity(count * 2);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let e = canonical(u, v);
        if blocked(e) || !seen.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

impl EdgeSplit {
    /// Training graph: the original nodes and features with only `train_pos`.
    pub fn train_graph(&self, g: &Graph) -> Result<Graph> {
        g.with_edges(self.train_pos.iter().copied())
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.manifest_text()).map_err(|e| Error::io(path, e))
    }

    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed {}", self.seed);
        for (name, edges) in self.sections() {
            let _ = writeln!(out, "[{name}]");
            for (u, v) in edges {
                let _ = writeln!(out, "{u} {v}");
            }
        }
        out
    }

    fn sections(&self) -> [(&'static str, &Vec<Edge>); 5] {
        [
            ("train_pos", &self.train_pos),
            ("valid_pos", &self.valid_pos),
            ("test_pos", &self.test_pos),
            ("valid_neg", &self.valid_neg),
            ("test_neg", &self.test_neg),
        ]
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut split = EdgeSplit {
            train_pos: Vec::new(),
            valid_pos: Vec::new(),
            test_pos: Vec::new(),
            valid_neg: Vec::new(),
            test_neg: Vec::new(),
            seed: 0,
        };
        let mut current: Option<&mut Vec<Edge>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(seed) = rest.trim().strip_prefix("seed ") {
                    split.seed = seed
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(idx + 1, format!("invalid seed `{seed}`")))?;
                }
                continue;
            }
            if line.starts_with('[') {
                current = Some(match line {
                    "[train_pos]" => &mut split.train_pos,
                    "[valid_pos]" => &mut split.valid_pos,
                    "[test_pos]" => &mut split.test_pos,
                    "[valid_neg]" => &mut split.valid_neg,
                    "[test_neg]" => &mut split.test_neg,
                    other => return Err(parse_err(idx + 1, format!("unknown section `{other}`"))),
                });
                continue;
            }
            let Some(target) = current.as_deref_mut() else {
                return Err(parse_err(idx + 1, "edge outside of a section".into()));
            };
            let ids: Vec<&str> = line.split_whitespace().collect();
            if ids.len() != 2 {
                return Err(parse_err(idx + 1, "expected two node ids".into()));
            }
            let u = ids[0]
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("invalid node id `{}`", ids[0])))?;
            let v = ids[1]
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("invalid node id `{}`", ids[1])))?;
            target.push((u, v));
        }
        Ok(split)
    }

    /// Hex SHA-256 of the manifest text.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(self.manifest_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_features(n: usize) -> Array2<f64> {
        Array2::zeros((n, 1))
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn load_dedups_and_drops_self_loops() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "g.edges", "0 1\n1 0\n1 1\n");
        let f = write(dir.path(), "g.features", "2 1\n0.5\n1\n");
        let g = Graph::load(&e, &f).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn empty_edge_file_keeps_isolated_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "g.edges", "# nothing here\n");
        let f = write(dir.path(), "g.features", "3 2\n1 2\n3 4\n5 6\n");
        let g = Graph::load(&e, &f).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn load_reports_line_numbers_and_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "g.features", "2 1\n0\n0\n");
        let e = write(dir.path(), "bad.edges", "0 1\n# c\n0 x\n");
        match Graph::load(&e, &f).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let e = write(dir.path(), "range.edges", "0 1\n0 2\n");
        let err = Graph::load(&e, &f).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("out of range"));

        let e = write(dir.path(), "ok.edges", "0 1\n");
        let f = write(dir.path(), "short.features", "3 1\n0\n0\n");
        assert!(matches!(Graph::load(&e, &f), Err(Error::Shape(_))));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let x = Array2::from_shape_vec((3, 2), vec![0.1, -2.5e-17, 1.0 / 3.0, 7.0, 0.0, 1e300]).unwrap();
        let g = Graph::new(3, [(2, 0), (1, 2)], x).unwrap();
        let (e, f) = (dir.path().join("a.edges"), dir.path().join("a.features"));
        g.save(&e, &f).unwrap();
        let back = Graph::load(&e, &f).unwrap();
        assert_eq!(back, g);
        let before = (fs::read(&e).unwrap(), fs::read(&f).unwrap());
        back.save(&e, &f).unwrap();
        assert_eq!(before, (fs::read(&e).unwrap(), fs::read(&f).unwrap()));
    }

    fn ring(n: usize) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)), no_features(n)).unwrap()
    }

    #[test]
    fn split_counts_follow_floors() {
        let g = ring(100);
        let s = split_edges(&g, SplitRatios::default(), 7).unwrap();
        assert_eq!((s.train_pos.len(), s.valid_pos.len(), s.test_pos.len()), (85, 5, 10));
        assert_eq!(s.valid_neg.len(), 5);
        assert_eq!(s.test_neg.len(), 10);
        assert_eq!(s, split_edges(&g, SplitRatios::default(), 7).unwrap());
    }

    #[test]
    fn split_rejects_tiny_and_bad_ratios() {
        let k4 = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], no_features(4)).unwrap();
        assert!(matches!(
            split_edges(&k4, SplitRatios::default(), 0),
            Err(Error::Split(_))
        ));
        let bad = SplitRatios {
            train: 0.8,
            valid: 0.1,
            test: 0.2,
        };
        assert!(matches!(split_edges(&ring(100), bad, 0), Err(Error::Config(_))));
        let two = Graph::new(3, [(0, 1), (1, 2)], no_features(3)).unwrap();
        assert!(matches!(
            split_edges(&two, SplitRatios::default(), 0),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn negatives_single_non_edge() {
        let g = Graph::new(3, [(0, 1), (1, 2)], no_features(3)).unwrap();
        assert_eq!(sample_negatives(&g, 1, 3, &HashSet::new()).unwrap(), vec![(0, 2)]);
        assert!(sample_negatives(&g, 0, 3, &HashSet::new()).unwrap().is_empty());
        assert!(matches!(
            sample_negatives(&g, 2, 3, &HashSet::new()),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn negatives_on_empty_graph() {
        let g = Graph::new(5, [], no_features(5)).unwrap();
        let neg = sample_negatives(&g, 10, 11, &HashSet::new()).unwrap();
        let distinct: HashSet<Edge> = neg.iter().copied().collect();
        assert_eq!(distinct.len(), 10);
        assert!(neg.iter().all(|&(u, v)| u < v && v < 5));
    }

    #[test]
    fn degree_examples() {
        let path = Graph::structural(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(
            degrees(&path),
            Degrees {
                per_node: vec![1, 2, 1],
                min: 1
            }
        );
        let empty = Graph::structural(2, []).unwrap();
        assert_eq!(
            degrees(&empty),
            Degrees {
                per_node: vec![0, 0],
                min: 0
            }
        );
        let tri = Graph::structural(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(
            degrees(&tri),
            Degrees {
                per_node: vec![2, 2, 2],
                min: 2
            }
        );
    }

    #[test]
    fn manifest_round_trip() {
        let g = ring(60);
        let s = split_edges(&g, SplitRatios::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.txt");
        s.write_manifest(&p).unwrap();
        let back = EdgeSplit::read_manifest(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.digest(), s.digest());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (4usize..25).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 3..60).prop_map(move |pairs| Graph::structural(n, pairs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn negatives_avoid_edges_and_exclusions(
            g in arb_graph(),
            seed in any::<u64>(),
            exclude_pairs in proptest::collection::vec((0usize..25, 0usize..25), 0..10),
        ) {
            let n = g.n_nodes();
            let exclude: HashSet<Edge> = exclude_pairs
                .into_iter()
                .filter(|&(u, v)| u < n && v < n && u != v)
                .map(|(u, v)| canonical(u, v))
                .collect();
            let free = n * (n - 1) / 2 - g.edge_set().union(&exclude).count();
            let want = free.min(8);
            let neg = sample_negatives(&g, want, seed, &exclude).unwrap();
            prop_assert_eq!(neg.len(), want);
            let uniq: HashSet<Edge> = neg.iter().copied().collect();
            prop_assert_eq!(uniq.len(), want);
            for &(u, v) in &neg {
                prop_assert!(u < v);
                prop_assert!(!g.has_edge(u, v));
                prop_assert!(!exclude.contains(&(u, v)));
            }
        }

        #[test]
        fn split_partitions_edge_set(n in 20usize..60, extra in 0usize..40, seed in any::<u64>()) {
            let mut pairs: Vec<Edge> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            pairs.extend((0..extra).map(|i| (i % n, (i * 7 + 3) % n)));
            let g = Graph::structural(n, pairs).unwrap();
            let s = split_edges(&g, SplitRatios::default(), seed).unwrap();
            let sets: Vec<HashSet<Edge>> = [&s.train_pos, &s.valid_pos, &s.test_pos]
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect();
            prop_assert!(sets[0].is_disjoint(&sets[1]));
            prop_assert!(sets[0].is_disjoint(&sets[2]));
            prop_assert!(sets[1].is_disjoint(&sets[2]));
            let union: HashSet<Edge> = sets.iter().flatten().copied().collect();
            prop_assert_eq!(union, g.edge_set());
            for &(u, v) in s.valid_neg.iter().chain(&s.test_neg) {
                prop_assert!(u != v && !g.has_edge(u, v));
            }
            prop_assert_eq!(s.valid_neg.len(), s.valid_pos.len());
            prop_assert_eq!(s.test_neg.len(), s.test_pos.len());
        }
    }
}
