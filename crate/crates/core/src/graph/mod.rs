//! Tactile graph construction over taxel layouts.
//!
//! Three distance-based constructions are supported: a hand-authored edge list,
//! k-nearest neighbors (symmetrized), and a Kruskal minimum spanning tree augmented
//! with every pair closer than a distance threshold. Each graph carries its
//! symmetric-normalized adjacency and the powers consumed by TAGConv.

mod adjacency;
mod layout;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use adjacency::{adjacency_powers, normalize_adjacency};
pub(crate) use layout::strip_comment;
pub use layout::TaxelLayout;

/// Polynomial degree used when a graph is built without an explicit hop count.
pub const DEFAULT_HOPS: usize = 2;

/// How a graph's edges are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum GraphSpec {
    Manual { edges: Vec<(usize, usize)> },
    Knn { k: usize },
    Mst { sigma_d: f64 },
}

/// Construction metadata recorded on a built graph (a [`GraphSpec`] without the manual edge list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum GraphMethod {
    Manual,
    Knn { k: usize },
    Mst { sigma_d: f64 },
}

impl GraphSpec {
    pub fn build(&self, layout: &TaxelLayout) -> Result<TactileGraph> {
        match self {
            GraphSpec::Manual { edges } => build_manual(layout, edges),
            GraphSpec::Knn { k } => build_knn(layout, *k),
            GraphSpec::Mst { sigma_d } => build_mst(layout, *sigma_d),
        }
    }
}

/// Undirected tactile graph with its normalized adjacency and adjacency powers.
#[derive(Debug, Clone)]
pub struct TactileGraph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    method: GraphMethod,
    adjacency_norm: Array2<f64>,
    adjacency_powers: Vec<Array2<f64>>,
}

impl TactileGraph {
    /// Builds a graph from an edge list. Pairs are deduplicated and stored as `(min, max)`.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)], method: GraphMethod) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= num_nodes || j >= num_nodes {
                return Err(Error::EdgeOutOfRange(i, j, num_nodes));
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let adjacency_norm = normalize_adjacency(&edges, num_nodes);
        let adjacency_powers = adjacency_powers(&adjacency_norm, DEFAULT_HOPS);
        Ok(Self { num_nodes, edges, method, adjacency_norm, adjacency_powers })
    }

    /// Recomputes the adjacency powers up to `hops`.
    pub fn with_hops(mut self, hops: usize) -> Self {
        self.adjacency_powers = adjacency_powers(&self.adjacency_norm, hops);
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn method(&self) -> &GraphMethod {
        &self.method
    }

    pub fn adjacency_norm(&self) -> &Array2<f64> {
        &self.adjacency_norm
    }

    /// `[I, A, ..., A^K]` where `K` is [`Self::hops`].
    pub fn adjacency_powers(&self) -> &[Array2<f64>] {
        &self.adjacency_powers
    }

    pub fn hops(&self) -> usize {
        self.adjacency_powers.len() - 1
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// `2 |E| / N`.
    pub fn average_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.num_nodes as f64
    }

    /// Mean number of neighbors each node selected before symmetrization (kNN only).
    pub fn average_selections(&self) -> Option<f64> {
        match self.method {
            GraphMethod::Knn { k } => Some(k as f64),
            _ => None,
        }
    }

    /// SHA-256 over the node count and sorted edge list.
    pub fn hash(&self) -> String {
        graph_hash(self.num_nodes, &self.edges)
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            num_nodes: self.num_nodes,
            method: self.method.clone(),
            edges: self.edges.clone(),
            num_edges: self.edges.len(),
            average_degree: self.average_degree(),
            average_selections: self.average_selections(),
            hash: self.hash(),
        }
    }
}

pub(crate) fn graph_hash(num_nodes: usize, edges: &[(usize, usize)]) -> String {
    let mut h = Sha256::new();
    h.update((num_nodes as u64).to_le_bytes());
    for &(i, j) in edges {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialized form of a graph, written by `graph` and read back by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub num_nodes: usize,
    #[serde(flatten)]
    pub method: GraphMethod,
    pub num_edges: usize,
    pub average_degree: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_selections: Option<f64>,
    pub hash: String,
    pub edges: Vec<(usize, usize)>,
}

impl GraphExport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data { path: path.into(), msg: e.to_string() })
    }

    pub fn to_graph(&self) -> Result<TactileGraph> {
        let graph = TactileGraph::from_edges(self.num_nodes, &self.edges, self.method.clone())?;
        if graph.hash() != self.hash {
            return Err(Error::InvalidParameter("graph export hash does not match its edges".into()));
        }
        Ok(graph)
    }
}

pub fn build_manual(layout: &TaxelLayout, edges: &[(usize, usize)]) -> Result<TactileGraph> {
    TactileGraph::from_edges(layout.len(), edges, GraphMethod::Manual)
}

/// Each node selects its `k` nearest neighbors (distance ties go to the lower index);
/// an undirected edge exists if either endpoint selected the other.
pub fn build_knn(layout: &TaxelLayout, k: usize) -> Result<TactileGraph> {
    let n = layout.len();
    if k == 0 || k >= n {
        return Err(Error::KOutOfRange { k, max: n.saturating_sub(1) });
    }
    let mut edges = Vec::with_capacity(n * k);
    for i in 0..n {
        for j in knn_selection(layout, i, k) {
            edges.push((i, j));
        }
    }
    TactileGraph::from_edges(n, &edges, GraphMethod::Knn { k })
}

/// The `k` neighbors node `i` selects, nearest first.
pub fn knn_selection(layout: &TaxelLayout, i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> =
        (0..layout.len()).filter(|&j| j != i).map(|j| (layout.distance(i, j), j)).collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Kruskal MST over the complete Euclidean graph, plus every pair strictly closer than `sigma_d`.
pub fn build_mst(layout: &TaxelLayout, sigma_d: f64) -> Result<TactileGraph> {
    if !(sigma_d.is_finite() && sigma_d >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_d must be finite and >= 0, got {sigma_d}")));
    }
    let n = layout.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((layout.distance(i, j), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut sets = DisjointSets::new(n);
    let mut edges = Vec::new();
    for &(d, i, j) in &pairs {
        if sets.union(i, j) || d < sigma_d {
            edges.push((i, j));
        }
    }
    TactileGraph::from_edges(n, &edges, GraphMethod::Mst { sigma_d })
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Reads a manual edge list: one `i j` pair per line, `#` comments.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let ids: Vec<&str> = line.split_whitespace().collect();
        let parsed = match ids.as_slice() {
            [a, b] => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        let Some(pair) = parsed else {
            return Err(Error::parse(path, lineno + 1, "expected two node indices `i j`"));
        };
        edges.push(pair);
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> TaxelLayout {
        TaxelLayout::new((0..n).map(|i| [i as f64, 0.0]).collect()).unwrap()
    }

    #[test]
    fn manual_two_nodes() {
        let g = build_manual(&line(2), &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.average_degree(), 1.0);
    }

    #[test]
    fn manual_empty() {
        let g = build_manual(&line(3), &[]).unwrap();
        assert!(g.edges().is_empty());
        assert!(g.adjacency_norm().iter().all(|&v| v == 0.0));
        assert_eq!(g.average_degree(), 0.0);
    }

    #[test]
    fn manual_rejects_bad_edges() {
        assert!(matches!(build_manual(&line(2), &[(0, 2)]), Err(Error::EdgeOutOfRange(0, 2, 2))));
        assert!(matches!(build_manual(&line(2), &[(1, 1)]), Err(Error::SelfLoop(1))));
    }

    #[test]
    fn knn_collinear() {
        // distances: d(0,1) = d(1,2) = 1, d(0,2) = 2; node 1 ties and picks the lower index 0.
        let g = build_knn(&line(3), 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(knn_selection(&line(3), 1, 1), vec![0]);
        assert_eq!(g.average_selections(), Some(1.0));
    }

    #[test]
    fn knn_k_range() {
        assert!(matches!(build_knn(&line(3), 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(build_knn(&line(3), 3), Err(Error::KOutOfRange { .. })));
        assert!(build_knn(&line(3), 2).is_ok());
    }

    #[test]
    fn mst_small() {
        let g = build_mst(&line(2), 100.0).unwrap();
        assert_eq!(g.edges().len(), 1);
        let g = build_mst(&line(1), 0.0).unwrap();
        assert!(g.edges().is_empty());
        assert!(build_mst(&line(3), -1.0).is_err());
    }

    #[test]
    fn mst_threshold_is_strict() {
        // unit spacing: sigma_d = 2 must not add the (0, 2) pair at distance exactly 2.
        let g = build_mst(&line(3), 2.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g = build_mst(&line(3), 2.0 + 1e-9).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn radial_example_mst() {
        let g = build_mst(&TaxelLayout::radial_example(), 0.0).unwrap();
        assert_eq!(g.edges().len(), 38);
        assert!((g.average_degree() - 76.0 / 39.0).abs() < 1e-15);
        assert_eq!(format!("{:.1}", g.average_degree()), "1.9");
    }

    #[test]
    fn export_round_trip() {
        let g = build_knn(&TaxelLayout::radial_example(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        g.export().save(&path).unwrap();
        let back = GraphExport::load(&path).unwrap();
        assert_eq!(back.average_selections, Some(2.0));
        let g2 = back.to_graph().unwrap();
        assert_eq!(g2.edges(), g.edges());
        assert_eq!(g2.hash(), g.hash());
    }

    #[test]
    fn edge_list_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "# edges\n0 1\n1 2 # tail\n").unwrap();
        assert_eq!(load_edge_list(&path).unwrap(), vec![(0, 1), (1, 2)]);
        fs::write(&path, "0 1\n3\n").unwrap();
        assert!(load_edge_list(&path).unwrap_err().to_string().contains(":2"));
    }

    fn layout_strategy(max: usize) -> impl Strategy<Value = TaxelLayout> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..=max)
            .prop_filter_map("duplicate taxels", |pts| {
                TaxelLayout::new(pts.into_iter().map(|(x, y)| [x, y]).collect()).ok()
            })
    }

    fn weight(layout: &TaxelLayout, edges: &[(usize, usize)]) -> f64 {
        edges.iter().map(|&(i, j)| layout.distance(i, j)).sum()
    }

    fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut sets = DisjointSets::new(n);
        edges.len() == n - 1 && edges.iter().all(|&(i, j)| sets.union(i, j))
    }

    /// Minimum weight over every (n-1)-subset of the complete graph's edges.
    fn brute_force_mst_weight(layout: &TaxelLayout) -> f64 {
        let n = layout.len();
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << all.len()) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let subset: Vec<_> = (0..all.len()).filter(|b| mask >> b & 1 == 1).map(|b| all[b]).collect();
            if is_spanning_tree(n, &subset) {
                best = best.min(weight(layout, &subset));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric(layout in layout_strategy(12), k in 1usize..4, sigma in 0.0f64..4.0) {
            let k = k.min(layout.len() - 1);
            for g in [build_knn(&layout, k).unwrap(), build_mst(&layout, sigma).unwrap()] {
                let a = g.adjacency_norm();
                prop_assert!(a.iter().zip(a.t().iter()).all(|(x, y)| x == y));
                prop_assert!(a.diag().iter().all(|&v| v == 0.0));
            }
        }

        #[test]
        fn mst_is_a_minimum_spanning_tree(layout in layout_strategy(6)) {
            let g = build_mst(&layout, 0.0).unwrap();
            prop_assert!(is_spanning_tree(layout.len(), g.edges()));
            let w = weight(&layout, g.edges());
            let best = brute_force_mst_weight(&layout);
            prop_assert!((w - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", w, best);
        }

        #[test]
        fn mst_has_n_minus_one_edges(layout in layout_strategy(30)) {
            let g = build_mst(&layout, 0.0).unwrap();
            prop_assert_eq!(g.edges().len(), layout.len() - 1);
        }

        #[test]
        fn edges_grow_with_sigma_d(layout in layout_strategy(15), a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = build_mst(&layout, lo).unwrap();
            let large = build_mst(&layout, hi).unwrap();
            prop_assert!(small.edges().iter().all(|e| large.edges().contains(e)));
        }

        #[test]
        fn edges_grow_with_k(layout in layout_strategy(15), k in 1usize..8) {
            prop_assume!(k + 1 < layout.len());
            let small = build_knn(&layout, k).unwrap();
            let large = build_knn(&layout, k + 1).unwrap();
            prop_assert!(small.edges().iter().all(|e| large.edges().contains(e)));
        }

        #[test]
        fn knn_selects_k_and_covers_selections(layout in layout_strategy(15), k in 1usize..6) {
            prop_assume!(k < layout.len());
            let g = build_knn(&layout, k).unwrap();
            for i in 0..layout.len() {
                let chosen = knn_selection(&layout, i, k);
                prop_assert_eq!(chosen.len(), k);
                for j in chosen {
                    prop_assert!(g.edges().contains(&(i.min(j), i.max(j))));
                }
            }
            prop_assert!(g.degrees().iter().all(|&d| d >= k));
        }

        #[test]
        fn normalized_spectrum_in_unit_interval(layout in layout_strategy(12), sigma in 0.0f64..6.0) {
            let g = build_mst(&layout, sigma).unwrap();
            let n = g.num_nodes();
            let a = g.adjacency_norm();
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
            let eig = nalgebra::SymmetricEigen::new(m);
            prop_assert!(eig.eigenvalues.iter().all(|&v| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&v)));
        }
    }
}
