//! Undirected graphs, datasets, connectivity filtering and degree features.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Matrix;
use crate::{contract, Error, Result};

/// Immutable undirected graph with node features and an optional class label.
///
/// Edges are stored once per unordered pair as `(min, max)`, sorted, with no
/// self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Matrix,
    label: Option<usize>,
}

impl Graph {
    /// Builds a graph, normalizing the edge list: pairs are oriented
    /// `(min, max)`, duplicates (in either direction) collapse, self-loops are
    /// dropped. An endpoint outside `0..n` or a feature matrix whose row count
    /// differs from `n` is an error.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, features: Matrix, label: Option<usize>) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::InvalidGraph(format!("{} feature rows for {n} nodes", features.rows())));
        }
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) outside 0..{n}")));
            }
            if a != b {
                list.push((a.min(b), a.max(b)));
            }
        }
        list.sort_unstable();
        list.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &list {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        Ok(Self { n, edges: list, adjacency, features, label })
    }

    /// Seeded random connected graph: a random recursive tree on `n` nodes
    /// (under a random relabeling) plus up to `extra` further random edges.
    pub fn random_connected(n: usize, extra: usize, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (order[i], order[rng.gen_range(0..i)])).collect();
        if n > 1 {
            edges.extend((0..extra).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))));
        }
        Self::structure(n, edges, None)
    }

    /// Graph without node features (`n x 0`).
    pub fn structure(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, label: Option<usize>) -> Result<Self> {
        Self::new(n, edges, Matrix::zeros(n, 0), label)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::InvalidGraph(format!("{} feature rows for {} nodes", features.rows(), self.n)));
        }
        Ok(Self { features, ..self.clone() })
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    /// Number of connected components (an empty graph has none).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Node-induced sub-graph on `nodes`, renumbered by position in `nodes`.
    /// Feature rows and the label are carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self> {
        let mut position = vec![usize::MAX; self.n];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.n || position[v] != usize::MAX {
                return Err(contract(format!("node list for induced sub-graph is invalid at {v}")));
            }
            position[v] = k;
        }
        let mut edges = Vec::new();
        for (k, &v) in nodes.iter().enumerate() {
            for &w in &self.adjacency[v] {
                let p = position[w];
                if p != usize::MAX && k < p {
                    edges.push((k, p));
                }
            }
        }
        let cols = self.features.cols();
        let mut features = Matrix::zeros(nodes.len(), cols);
        for (k, &v) in nodes.iter().enumerate() {
            features.row_mut(k).copy_from_slice(self.features.row(v));
        }
        Self::new(nodes.len(), edges, features, self.label)
    }

    /// Replaces features with a one-hot encoding of `min(degree, cap)`
    /// (width `cap + 1`).
    pub fn synthesize_features(&self, cap: usize) -> Self {
        let mut features = Matrix::zeros(self.n, cap + 1);
        for v in 0..self.n {
            features[(v, self.degree(v).min(cap))] = 1.0;
        }
        Self { features, ..self.clone() }
    }
}

/// A named collection of graphs with `num_classes` dense class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
}

impl Dataset {
    /// Validates that every label lies in `0..num_classes`.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, num_classes: usize) -> Result<Self> {
        if let Some(g) = graphs.iter().find(|g| g.label().is_some_and(|l| l >= num_classes)) {
            return Err(contract(format!("label {:?} outside 0..{num_classes}", g.label())));
        }
        Ok(Self { name: name.into(), graphs, num_classes })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Keeps only graphs forming a single connected component, in order.
    pub fn filter_connected(&self) -> Self {
        Self {
            name: self.name.clone(),
            graphs: self.graphs.iter().filter(|g| g.is_connected()).cloned().collect(),
            num_classes: self.num_classes,
        }
    }

    /// Degree one-hot features (see [`Graph::synthesize_features`]) on every graph.
    pub fn synthesize_features(&self, cap: usize) -> Self {
        Self {
            name: self.name.clone(),
            graphs: self.graphs.iter().map(|g| g.synthesize_features(cap)).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn stats(&self) -> Result<DatasetStats> {
        if self.graphs.is_empty() {
            return Err(contract("statistics of an empty dataset"));
        }
        let n = self.graphs.len() as f64;
        Ok(DatasetStats {
            graphs: self.graphs.len(),
            classes: self.num_classes,
            mean_nodes: self.graphs.iter().map(|g| g.node_count() as f64).sum::<f64>() / n,
            mean_edges: self.graphs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / n,
        })
    }

    /// Number of graphs carrying each label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for l in self.graphs.iter().filter_map(Graph::label) {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub classes: usize,
    pub mean_nodes: f64,
    pub mean_edges: f64,
}
