//! GNN encoders, mean readout and the sigmoid predictor.
//!
//! Layer forms (`H` is `n x w`, `Â = A + I`, `D̂` its degree matrix):
//!
//! | kind      | layer                                                        |
//! |-----------|--------------------------------------------------------------|
//! | GCN       | `D̂^{-1/2} Â D̂^{-1/2} H W + b`                                 |
//! | GraphSAGE | `[H ‖ mean_{N(v)} H] W + b`                                   |
//! | GAT       | single head, `α_vu = softmax_u LeakyReLU_{0.2}(a_dst·z_v + a_src·z_u)` over `N(v) ∪ {v}`, `z = HW`, output `Σ_u α_vu z_u + b` |
//! | GIN       | `MLP(Â H)` (ε = 0), MLP = linear, ReLU, linear               |
//!
//! ReLU is applied between layers, not after the last one.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::graph::Graph;
use crate::poincare::{Activation, PoincareBall};
use crate::tensor::{Matrix, SparseMatrix};
use crate::{Error, Result};

/// Negative slope of the LeakyReLU in GAT attention scores.
pub const GAT_NEGATIVE_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EncoderKind {
    #[serde(rename = "GCN", alias = "gcn")]
    Gcn,
    #[serde(rename = "GraphSAGE", alias = "graphsage", alias = "sage")]
    GraphSage,
    #[serde(rename = "GAT", alias = "gat")]
    Gat,
    #[serde(rename = "GIN", alias = "gin", alias = "GCIN")]
    Gin,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 4] = [EncoderKind::Gcn, EncoderKind::GraphSage, EncoderKind::Gat, EncoderKind::Gin];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "GCN",
            EncoderKind::GraphSage => "GraphSAGE",
            EncoderKind::Gat => "GAT",
            EncoderKind::Gin => "GIN",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    /// Case-insensitive. `GCIN` is accepted as GIN.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "graphsage" | "sage" => Ok(EncoderKind::GraphSage),
            "gat" => Ok(EncoderKind::Gat),
            "gin" | "gcin" => Ok(EncoderKind::Gin),
            _ => Err(Error::Unknown { what: "encoder kind", name: s.into() }),
        }
    }
}

/// Constant message-passing operators of one graph.
#[derive(Debug, Clone)]
pub struct MessagePassing {
    n: usize,
    gcn: Arc<SparseMatrix>,
    neighbor_mean: Arc<SparseMatrix>,
    self_and_neighbor_sum: Arc<SparseMatrix>,
    // edges of N(v) ∪ {v}: message from `source[k]` into `target[k]`
    source: Arc<[usize]>,
    target: Arc<[usize]>,
}

impl MessagePassing {
    pub fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / libm::sqrt((g.degree(v) + 1) as f64)).collect();
        let mut gcn = Vec::with_capacity(n + 2 * g.edge_count());
        let mut mean = Vec::with_capacity(2 * g.edge_count());
        let mut sum = Vec::with_capacity(n + 2 * g.edge_count());
        let mut source = Vec::with_capacity(n + 2 * g.edge_count());
        let mut target = Vec::with_capacity(n + 2 * g.edge_count());
        for v in 0..n {
            gcn.push((v, v, inv_sqrt[v] * inv_sqrt[v]));
            sum.push((v, v, 1.0));
            source.push(v);
            target.push(v);
            let deg = g.degree(v) as f64;
            for &u in g.neighbors(v) {
                gcn.push((v, u, inv_sqrt[v] * inv_sqrt[u]));
                mean.push((v, u, 1.0 / deg));
                sum.push((v, u, 1.0));
                source.push(u);
                target.push(v);
            }
        }
        Self {
            n,
            gcn: Arc::new(SparseMatrix::from_triplets(n, n, gcn)),
            neighbor_mean: Arc::new(SparseMatrix::from_triplets(n, n, mean)),
            self_and_neighbor_sum: Arc::new(SparseMatrix::from_triplets(n, n, sum)),
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn gcn_operator(&self) -> &SparseMatrix {
        &self.gcn
    }
}

/// Trainable tensors of one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Gcn { weight: ParamId, bias: ParamId },
    GraphSage { weight: ParamId, bias: ParamId },
    Gat { weight: ParamId, att_src: ParamId, att_dst: ParamId, bias: ParamId },
    Gin { weight1: ParamId, bias1: ParamId, weight2: ParamId, bias2: ParamId },
}

impl LayerParams {
    pub fn kind(&self) -> EncoderKind {
        match self {
            LayerParams::Gcn { .. } => EncoderKind::Gcn,
            LayerParams::GraphSage { .. } => EncoderKind::GraphSage,
            LayerParams::Gat { .. } => EncoderKind::Gat,
            LayerParams::Gin { .. } => EncoderKind::Gin,
        }
    }

    /// Allocates a layer mapping width `input` to width `output`.
    pub fn init(kind: EncoderKind, input: usize, output: usize, store: &mut ParamStore, rng: &mut impl Rng, prefix: &str) -> Self {
        let mut w = |name: &str, rows, cols, store: &mut ParamStore| store.add(format!("{prefix}.{name}"), glorot(rows, cols, rng));
        let zeros = |name: &str, cols, store: &mut ParamStore| store.add(format!("{prefix}.{name}"), Matrix::zeros(1, cols));
        match kind {
            EncoderKind::Gcn => LayerParams::Gcn { weight: w("weight", input, output, store), bias: zeros("bias", output, store) },
            EncoderKind::GraphSage => {
                LayerParams::GraphSage { weight: w("weight", 2 * input, output, store), bias: zeros("bias", output, store) }
            }
            EncoderKind::Gat => LayerParams::Gat {
                weight: w("weight", input, output, store),
                att_src: w("att_src", output, 1, store),
                att_dst: w("att_dst", output, 1, store),
                bias: zeros("bias", output, store),
            },
            EncoderKind::Gin => LayerParams::Gin {
                weight1: w("weight1", input, output, store),
                bias1: zeros("bias1", output, store),
                weight2: w("weight2", output, output, store),
                bias2: zeros("bias2", output, store),
            },
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match *self {
            LayerParams::Gcn { weight, bias } | LayerParams::GraphSage { weight, bias } => alloc::vec![weight, bias],
            LayerParams::Gat { weight, att_src, att_dst, bias } => alloc::vec![weight, att_src, att_dst, bias],
            LayerParams::Gin { weight1, bias1, weight2, bias2 } => alloc::vec![weight1, bias1, weight2, bias2],
        }
    }
}

/// Glorot-uniform `rows x cols` matrix: `U(−a, a)` with `a = √(6 / (rows + cols))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let a = libm::sqrt(6.0 / (rows + cols) as f64);
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// One message-passing layer (pre-activation).
pub fn encoder_layer(tape: &mut Tape, store: &ParamStore, layer: &LayerParams, mp: &MessagePassing, h: Var) -> Result<Var> {
    let (rows, _) = tape.shape(h);
    if rows != mp.n {
        return Err(crate::contract(format!("{rows} feature rows for a {}-node graph", mp.n)));
    }
    let out = match *layer {
        LayerParams::Gcn { weight, bias } => {
            let w = tape.param(store, weight);
            let b = tape.param(store, bias);
            let agg = tape.spmm(mp.gcn.clone(), h)?;
            let z = tape.matmul(agg, w)?;
            tape.add_row(z, b)?
        }
        LayerParams::GraphSage { weight, bias } => {
            let w = tape.param(store, weight);
            let b = tape.param(store, bias);
            let mean = tape.spmm(mp.neighbor_mean.clone(), h)?;
            let cat = tape.concat_cols(h, mean)?;
            let z = tape.matmul(cat, w)?;
            tape.add_row(z, b)?
        }
        LayerParams::Gat { weight, att_src, att_dst, bias } => {
            let w = tape.param(store, weight);
            let a_src = tape.param(store, att_src);
            let a_dst = tape.param(store, att_dst);
            let b = tape.param(store, bias);
            let z = tape.matmul(h, w)?;
            let s_src = tape.matmul(z, a_src)?;
            let s_dst = tape.matmul(z, a_dst)?;
            let e_src = tape.gather_rows(s_src, mp.source.clone())?;
            let e_dst = tape.gather_rows(s_dst, mp.target.clone())?;
            let e = tape.add(e_src, e_dst)?;
            let e = tape.leaky_relu(e, GAT_NEGATIVE_SLOPE)?;
            let alpha = tape.segment_softmax(e, mp.target.clone(), mp.n)?;
            let msg = tape.gather_rows(z, mp.source.clone())?;
            let msg = tape.mul_col(msg, alpha)?;
            let agg = tape.scatter_add_rows(msg, mp.target.clone(), mp.n)?;
            tape.add_row(agg, b)?
        }
        LayerParams::Gin { weight1, bias1, weight2, bias2 } => {
            let w1 = tape.param(store, weight1);
            let b1 = tape.param(store, bias1);
            let w2 = tape.param(store, weight2);
            let b2 = tape.param(store, bias2);
            let agg = tape.spmm(mp.self_and_neighbor_sum.clone(), h)?;
            let z = tape.matmul(agg, w1)?;
            let z = tape.add_row(z, b1)?;
            let z = tape.relu(z)?;
            let z = tape.matmul(z, w2)?;
            tape.add_row(z, b2)?
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Euclidean,
    Hyperbolic,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Euclidean => "euclidean",
            Space::Hyperbolic => "hyperbolic",
        }
    }
}

/// A `1 x d` graph embedding on a tape, tagged with the space it lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEmbedding {
    pub var: Var,
    pub space: Space,
}

impl GraphEmbedding {
    pub fn expect(self, space: Space) -> Result<Var> {
        if self.space != space {
            return Err(Error::WrongSpace { expected: space.name(), found: self.space.name() });
        }
        Ok(self.var)
    }

    pub fn coords(&self, tape: &Tape) -> Vec<f64> {
        tape.value(self.var).as_slice().to_vec()
    }
}

/// Column-wise mean of node embeddings.
pub fn readout_mean(tape: &mut Tape, nodes: Var) -> Result<GraphEmbedding> {
    if tape.shape(nodes).0 == 0 {
        return Err(crate::contract("readout of a graph with no nodes"));
    }
    Ok(GraphEmbedding { var: tape.col_mean(nodes)?, space: Space::Euclidean })
}

/// Stack of `L` layers of one kind: widths `F → d → … → d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoder {
    kind: EncoderKind,
    input_dim: usize,
    hidden_dim: usize,
    layers: Vec<LayerParams>,
}

impl GraphEncoder {
    pub fn new(
        kind: EncoderKind,
        input_dim: usize,
        hidden_dim: usize,
        layers: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
    ) -> Result<Self> {
        if layers == 0 || hidden_dim == 0 {
            return Err(crate::contract("an encoder needs at least one layer and a positive width"));
        }
        let layers = (0..layers)
            .map(|l| {
                let input = if l == 0 { input_dim } else { hidden_dim };
                LayerParams::init(kind, input, hidden_dim, store, rng, &format!("{name}.{l}"))
            })
            .collect();
        Ok(Self { kind, input_dim, hidden_dim, layers })
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(LayerParams::param_ids).collect()
    }

    /// Node embeddings after all layers.
    pub fn node_embeddings(&self, tape: &mut Tape, store: &ParamStore, g: &Graph, mp: &MessagePassing) -> Result<Var> {
        if g.feature_dim() != self.input_dim {
            return Err(crate::contract(format!("graph has {} features, encoder expects {}", g.feature_dim(), self.input_dim)));
        }
        let mut h = tape.constant(g.features().clone());
        for (l, layer) in self.layers.iter().enumerate() {
            h = encoder_layer(tape, store, layer, mp, h)?;
            if l + 1 < self.layers.len() {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// `g_E(G)`: layers then mean readout.
    pub fn encode_euclidean(&self, tape: &mut Tape, store: &ParamStore, g: &Graph) -> Result<GraphEmbedding> {
        let mp = MessagePassing::new(g);
        let h = self.node_embeddings(tape, store, g, &mp)?;
        readout_mean(tape, h)
    }

    /// `exp_o(g_H(G))`: the same architecture, mapped into the ball at the end.
    pub fn encode_hyperbolic(&self, tape: &mut Tape, store: &ParamStore, g: &Graph, ball: &PoincareBall) -> Result<GraphEmbedding> {
        let e = self.encode_euclidean(tape, store, g)?;
        Ok(GraphEmbedding { var: ball.exp_map(tape, e.var)?, space: Space::Hyperbolic })
    }
}

/// Optional Möbius layer `exp_o(σ(log_o(W ⊗ u ⊕ b)))` applied to hyperbolic
/// graph embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusHead {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
}

impl MobiusHead {
    pub fn new(dim: usize, activation: Activation, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let weight = store.add("mobius_head.weight", glorot(dim, dim, rng));
        let bias = store.add("mobius_head.bias", Matrix::zeros(1, dim));
        Self { weight, bias, activation }
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, ball: &PoincareBall, h: GraphEmbedding) -> Result<GraphEmbedding> {
        let u = h.expect(Space::Hyperbolic)?;
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let out = ball.hyperbolic_activation(tape, u, w, b, self.activation)?;
        Ok(GraphEmbedding { var: out, space: Space::Hyperbolic })
    }
}

/// Two-layer MLP `d → d → K` with a ReLU hidden layer; probabilities are the
/// elementwise sigmoid of its output.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub weight1: ParamId,
    pub bias1: ParamId,
    pub weight2: ParamId,
    pub bias2: ParamId,
    classes: usize,
}

impl Predictor {
    pub fn new(dim: usize, classes: usize, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        Self {
            weight1: store.add("predictor.weight1", glorot(dim, dim, rng)),
            bias1: store.add("predictor.bias1", Matrix::zeros(1, dim)),
            weight2: store.add("predictor.weight2", glorot(dim, classes, rng)),
            bias2: store.add("predictor.bias2", Matrix::zeros(1, classes)),
            classes,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Pre-sigmoid outputs, `1 x K`. Only Euclidean embeddings are accepted.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, h: GraphEmbedding) -> Result<Var> {
        let x = h.expect(Space::Euclidean)?;
        let w1 = tape.param(store, self.weight1);
        let b1 = tape.param(store, self.bias1);
        let w2 = tape.param(store, self.weight2);
        let b2 = tape.param(store, self.bias2);
        let z = tape.matmul(x, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = tape.relu(z)?;
        let z = tape.matmul(z, w2)?;
        Ok(tape.add_row(z, b2)?)
    }

    /// `p = sigmoid(P(h))`, one entry per class.
    pub fn predict(&self, tape: &mut Tape, store: &ParamStore, h: GraphEmbedding) -> Result<Var> {
        let z = self.logits(tape, store, h)?;
        Ok(tape.sigmoid(z)?)
    }
}

/// Index of the largest entry (first on ties).
pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) }).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge_graph() -> Graph {
        Graph::new(2, [(0, 1)], Matrix::from_rows(&[[1.0], [0.0]]), None).unwrap()
    }

    fn set(store: &mut ParamStore, id: ParamId, m: Matrix) {
        store.get_mut(id).set_value(m);
    }

    #[test]
    fn gcn_on_single_edge() {
        let g = edge_graph();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = LayerParams::init(EncoderKind::Gcn, 1, 1, &mut store, &mut rng, "l");
        let LayerParams::Gcn { weight, .. } = layer else { unreachable!() };
        set(&mut store, weight, Matrix::scalar(1.0));
        let mut tape = Tape::new();
        let h = tape.constant(g.features().clone());
        let out = encoder_layer(&mut tape, &store, &layer, &MessagePassing::new(&g), h).unwrap();
        assert!(tape.value(out).max_abs_diff(&Matrix::from_rows(&[[0.5], [0.5]])) < 1e-15);
    }

    #[test]
    fn gin_with_identity_mlp_sums_self_and_neighbors() {
        let g = edge_graph();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = LayerParams::init(EncoderKind::Gin, 1, 1, &mut store, &mut rng, "l");
        let LayerParams::Gin { weight1, weight2, .. } = layer else { unreachable!() };
        set(&mut store, weight1, Matrix::scalar(1.0));
        set(&mut store, weight2, Matrix::scalar(1.0));
        let mut tape = Tape::new();
        let h = tape.constant(g.features().clone());
        let out = encoder_layer(&mut tape, &store, &layer, &MessagePassing::new(&g), h).unwrap();
        assert_eq!(tape.value(out).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn gat_with_identical_features_is_a_mean() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (1, 3)], Matrix::filled(4, 3, 0.7), None).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = LayerParams::init(EncoderKind::Gat, 3, 2, &mut store, &mut rng, "l");
        let LayerParams::Gat { weight, .. } = layer else { unreachable!() };
        let mut tape = Tape::new();
        let h = tape.constant(g.features().clone());
        let out = encoder_layer(&mut tape, &store, &layer, &MessagePassing::new(&g), h).unwrap();
        let expected = g.features().matmul(store.value(weight));
        assert!(tape.value(out).max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn one_layer_gcn_embedding() {
        let g = edge_graph();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = GraphEncoder::new(EncoderKind::Gcn, 1, 1, 1, &mut store, &mut rng, "e").unwrap();
        let LayerParams::Gcn { weight, .. } = enc.layers()[0] else { unreachable!() };
        set(&mut store, weight, Matrix::scalar(1.0));
        let mut tape = Tape::new();
        let e = enc.encode_euclidean(&mut tape, &store, &g).unwrap();
        assert!((e.coords(&tape)[0] - 0.5).abs() < 1e-15);
        assert_eq!(e.space, Space::Euclidean);
    }

    #[test]
    fn readout_examples() {
        let mut tape = Tape::new();
        let one = tape.constant(Matrix::row_vector(&[0.3, -2.0]));
        assert_eq!(readout_mean(&mut tape, one).unwrap().coords(&tape), alloc::vec![0.3, -2.0]);
        let two = tape.constant(Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(readout_mean(&mut tape, two).unwrap().coords(&tape), alloc::vec![0.5, 0.5]);
        let none = tape.constant(Matrix::zeros(0, 2));
        assert!(readout_mean(&mut tape, none).is_err());
    }

    #[test]
    fn hyperbolic_encoding_maps_into_ball() {
        let g = edge_graph();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = GraphEncoder::new(EncoderKind::Gcn, 1, 1, 1, &mut store, &mut rng, "e").unwrap();
        let LayerParams::Gcn { weight, .. } = enc.layers()[0] else { unreachable!() };
        // pre-map output: GCN gives [[0.5],[0.5]]·w, mean 0.5·w; w = 1 → exp(0.5) = tanh(0.5)
        set(&mut store, weight, Matrix::scalar(1.0));
        let mut tape = Tape::new();
        let e = enc.encode_hyperbolic(&mut tape, &store, &g, &PoincareBall::default()).unwrap();
        assert!((e.coords(&tape)[0] - libm::tanh(0.5)).abs() < 1e-12);
        set(&mut store, weight, Matrix::scalar(0.0));
        let mut tape = Tape::new();
        let e = enc.encode_hyperbolic(&mut tape, &store, &g, &PoincareBall::default()).unwrap();
        assert_eq!(e.coords(&tape), alloc::vec![0.0]);
    }

    #[test]
    fn predictor_shapes_and_space_check() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred = Predictor::new(4, 3, &mut store, &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[0.1, 0.2, -0.3, 0.4]));
        let p = pred.predict(&mut tape, &store, GraphEmbedding { var: x, space: Space::Euclidean }).unwrap();
        assert_eq!(tape.shape(p), (1, 3));
        assert!(tape.value(p).as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        let wrong = pred.predict(&mut tape, &store, GraphEmbedding { var: x, space: Space::Hyperbolic });
        assert!(matches!(wrong, Err(Error::WrongSpace { .. })));
    }

    #[test]
    fn predictor_zero_output_is_one_half() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred = Predictor::new(2, 2, &mut store, &mut rng);
        set(&mut store, pred.weight2, Matrix::zeros(2, 2));
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[1.0, -1.0]));
        let p = pred.predict(&mut tape, &store, GraphEmbedding { var: x, space: Space::Euclidean }).unwrap();
        assert_eq!(tape.value(p).as_slice(), &[0.5, 0.5]);
        set(&mut store, pred.bias2, Matrix::row_vector(&[100.0, -100.0]));
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[1.0, -1.0]));
        let p = pred.predict(&mut tape, &store, GraphEmbedding { var: x, space: Space::Euclidean }).unwrap();
        let p = tape.value(p).as_slice();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-40);
    }

    #[test]
    fn kind_names_parse() {
        for k in EncoderKind::ALL {
            assert_eq!(k.name().parse::<EncoderKind>().unwrap(), k);
        }
        assert_eq!("GCIN".parse::<EncoderKind>().unwrap(), EncoderKind::Gin);
        assert!("mlp".parse::<EncoderKind>().is_err());
    }
}
