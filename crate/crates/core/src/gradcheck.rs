//! Central finite-difference gradient checking.
//!
//! Only forward values are used to build the numeric estimate, so the check is
//! independent of the backward rules it validates.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tape, Var};
use crate::encoder::{EncoderKind, GraphEncoder, Space};
use crate::graph::Graph;
use crate::loss::LossConfig;
use crate::poincare::{Activation, PoincareBall};
use crate::tensor::{l2_norm, Matrix, SparseMatrix};
use crate::train::{batch_objective, sample_views, Batch, DsgcModel, Member, ModelConfig, TrainConfig};
use crate::Result;

/// Per-parameter comparison of analytic and numeric gradients.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub entries: Vec<(String, f64)>,
}

impl GradReport {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.entries.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Relative error used throughout: `‖a − n‖ / max(‖a‖, ‖n‖, 1e-6)` over a
/// whole parameter tensor. The floor keeps all-zero gradients from turning
/// roundoff into a spurious failure.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |xs: &mut dyn Iterator<Item = f64>| libm::sqrt(xs.map(|x| x * x).sum());
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let a = norm(&mut analytic.iter().copied());
    let n = norm(&mut numeric.iter().copied());
    diff / a.max(n).max(1e-6)
}

/// Compares backward-mode gradients of the scalar `f` with central
/// differences of step `h` for every entry of every parameter in `store`.
/// Existing gradients in `store` are cleared.
pub fn check<F>(store: &mut ParamStore, h: f64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let root = f(&mut tape, store)?;
    tape.backward(root, store)?;

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let root = f(&mut tape, store)?;
        Ok(tape.value(root).item())
    };

    let mut entries = Vec::with_capacity(store.len());
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let analytic = store.grad(id).as_slice().to_vec();
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let original = store.value(id).as_slice()[k];
            let mut probe = store.value(id).clone();
            probe.as_mut_slice()[k] = original + h;
            store.get_mut(id).set_value(probe.clone());
            let plus = eval(store)?;
            probe.as_mut_slice()[k] = original - h;
            store.get_mut(id).set_value(probe.clone());
            let minus = eval(store)?;
            probe.as_mut_slice()[k] = original;
            store.get_mut(id).set_value(probe);
            numeric.push((plus - minus) / (2.0 * h));
        }
        entries.push((String::from(store.get(id).name()), relative_error(&analytic, &numeric)));
    }
    Ok(GradReport { entries })
}

/// Named gradient checks covering every tape primitive, every ball operation,
/// each encoder kind on a random 5-node graph and the full training objective
/// on a frozen batch. Inputs are drawn from `seed` inside each operation's
/// smooth domain.
pub fn battery(seed: u64) -> Result<Vec<(String, GradReport)>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    primitives(&mut rng, &mut out)?;
    ball_ops(&mut rng, &mut out)?;
    encoders(&mut rng, &mut out)?;
    objective(&mut rng, &mut out)?;
    Ok(out)
}

/// Step used by [`battery`].
pub const STEP: f64 = 1e-5;

type Case<'a> = &'a dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

/// Random `r x c` matrix with entries of magnitude in `[lo, hi]` and random sign.
fn signed(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi) * if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Checks `sum(f(params) ∘ R)` for a fixed random `R`, so every output entry
/// gets a distinct weight.
fn run_case(rng: &mut ChaCha8Rng, name: &str, inputs: Vec<Matrix>, f: Case<'_>, out: &mut Vec<(String, GradReport)>) -> Result<()> {
    let mut store = ParamStore::new();
    let ids: Vec<_> = inputs.into_iter().enumerate().map(|(k, m)| store.add(format!("{name}.{k}"), m)).collect();
    let shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(&store, id)).collect();
        let v = f(&mut tape, &vars)?;
        tape.shape(v)
    };
    let weights = signed(rng, shape.0, shape.1, 0.2, 1.0);
    let report = check(&mut store, STEP, |tape, store| {
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(store, id)).collect();
        let y = f(tape, &vars)?;
        let w = tape.constant(weights.clone());
        let y = tape.mul(y, w)?;
        Ok(tape.sum(y)?)
    })?;
    out.push((name.into(), report));
    Ok(())
}

fn primitives(rng: &mut ChaCha8Rng, out: &mut Vec<(String, GradReport)>) -> Result<()> {
    let idx: Arc<[usize]> = alloc::vec![2, 0, 1, 2, 1].into();
    let seg: Arc<[usize]> = alloc::vec![0, 0, 1, 2, 2].into();
    let sparse = Arc::new(SparseMatrix::from_triplets(3, 4, alloc::vec![(0, 0, 0.5), (0, 3, -1.2), (1, 1, 2.0), (2, 2, 0.7), (2, 0, 0.3)]));
    macro_rules! case {
        ($name:expr, [$($m:expr),*], |$t:ident, $v:ident| $body:expr) => {{
            let inputs = alloc::vec![$($m),*];
            run_case(rng, $name, inputs, &|$t: &mut Tape, $v: &[Var]| -> Result<Var> { Ok($body) }, out)?;
        }};
    }
    case!("matmul", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 4, 2, 0.1, 1.0)], |t, v| t.matmul(v[0], v[1])?);
    case!("transpose", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.transpose(v[0])?);
    case!("add", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.add(v[0], v[1])?);
    case!("sub", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.sub(v[0], v[1])?);
    case!("mul", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.mul(v[0], v[1])?);
    case!("div", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 3, 4, 0.5, 2.0)], |t, v| t.div(v[0], v[1])?);
    case!("add_row", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 1, 4, 0.1, 1.0)], |t, v| t.add_row(v[0], v[1])?);
    case!("mul_col", [signed(rng, 3, 4, 0.1, 1.0), signed(rng, 3, 1, 0.1, 1.0)], |t, v| t.mul_col(v[0], v[1])?);
    case!("scale", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.scale(v[0], -1.7)?);
    case!("add_scalar", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.add_scalar(v[0], 0.3)?);
    case!("tanh", [signed(rng, 3, 4, 0.1, 2.0)], |t, v| t.tanh(v[0])?);
    case!("artanh", [signed(rng, 3, 4, 0.05, 0.9)], |t, v| t.artanh(v[0])?);
    case!("arcosh", [uniform(rng, 3, 4, 1.2, 3.0)], |t, v| t.arcosh(v[0])?);
    case!("sigmoid", [signed(rng, 3, 4, 0.1, 3.0)], |t, v| t.sigmoid(v[0])?);
    case!("relu", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.relu(v[0])?);
    case!("leaky_relu", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.leaky_relu(v[0], 0.2)?);
    case!("exp", [signed(rng, 3, 4, 0.1, 1.5)], |t, v| t.exp(v[0])?);
    case!("ln", [uniform(rng, 3, 4, 0.3, 3.0)], |t, v| t.ln(v[0])?);
    case!("softplus", [signed(rng, 3, 4, 0.1, 3.0)], |t, v| t.softplus(v[0])?);
    case!("clamp", [Matrix::from_rows(&[[0.3, -0.8, 1.2], [-0.1, 0.7, -1.5]])], |t, v| t.clamp(v[0], -1.0, 0.5)?);
    case!("row_norm", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.row_norm(v[0])?);
    case!("row_sum", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.row_sum(v[0])?);
    case!("col_mean", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.col_mean(v[0])?);
    case!("sum", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.sum(v[0])?);
    case!("mean", [signed(rng, 3, 4, 0.1, 1.0)], |t, v| t.mean(v[0])?);
    case!("max", [Matrix::from_rows(&[[0.1, -0.4, 0.9], [0.3, 0.5, -0.2]])], |t, v| t.max(v[0])?);
    case!("log_sum_exp", [signed(rng, 5, 1, 0.1, 2.0)], |t, v| t.log_sum_exp(v[0])?);
    case!("concat_cols", [signed(rng, 3, 2, 0.1, 1.0), signed(rng, 3, 3, 0.1, 1.0)], |t, v| t.concat_cols(v[0], v[1])?);
    case!("concat_rows", [signed(rng, 1, 3, 0.1, 1.0), signed(rng, 2, 3, 0.1, 1.0)], |t, v| t.concat_rows(&[v[0], v[1], v[0]])?);
    case!("gather_rows", [signed(rng, 3, 2, 0.1, 1.0)], |t, v| t.gather_rows(v[0], idx.clone())?);
    case!("scatter_add_rows", [signed(rng, 5, 2, 0.1, 1.0)], |t, v| t.scatter_add_rows(v[0], idx.clone(), 3)?);
    case!("segment_softmax", [signed(rng, 5, 1, 0.1, 2.0)], |t, v| t.segment_softmax(v[0], seg.clone(), 3)?);
    case!("spmm", [signed(rng, 4, 2, 0.1, 1.0)], |t, v| t.spmm(sparse.clone(), v[0])?);
    Ok(())
}

/// Rows with norm in `[0.1, max]` inside the unit ball.
fn ball_rows(rng: &mut ChaCha8Rng, r: usize, c: usize, max: f64) -> Matrix {
    let mut m = signed(rng, r, c, 0.05, 1.0);
    for i in 0..r {
        let row = m.row_mut(i);
        let n = l2_norm(row);
        let target = rng.gen_range(0.1..max);
        row.iter_mut().for_each(|x| *x *= target / n);
    }
    m
}

fn ball_ops(rng: &mut ChaCha8Rng, out: &mut Vec<(String, GradReport)>) -> Result<()> {
    for c in [1.0, 0.7] {
        let ball = PoincareBall::new(c)?;
        let r = 1.0 / libm::sqrt(c);
        let tag = |s: &str| format!("{s} (c = {c})");
        let inside = |rng: &mut ChaCha8Rng| {
            let mut m = ball_rows(rng, 3, 4, 0.9);
            m.as_mut_slice().iter_mut().for_each(|x| *x *= r);
            m
        };
        let t = signed(rng, 3, 4, 0.1, 1.0);
        run_case(rng, &tag("exp_map"), alloc::vec![t], &|tp, v| ball.exp_map(tp, v[0]), out)?;
        let u = inside(rng);
        run_case(rng, &tag("log_map"), alloc::vec![u], &|tp, v| ball.log_map(tp, v[0]), out)?;
        let (u, w) = (inside(rng), inside(rng));
        run_case(rng, &tag("similarity"), alloc::vec![u, w], &|tp, v| ball.similarity(tp, v[0], v[1]), out)?;
        let u = inside(rng);
        run_case(rng, &tag("project"), alloc::vec![u], &|tp, v| ball.project(tp, v[0]), out)?;
        let (w, u) = (signed(rng, 3, 4, 0.1, 0.6), inside(rng));
        run_case(rng, &tag("mobius_matvec"), alloc::vec![w, u], &|tp, v| ball.mobius_matvec(tp, v[0], v[1]), out)?;
        let (u, b) = (inside(rng), ball_rows(rng, 1, 4, 0.5));
        run_case(rng, &tag("mobius_bias_add"), alloc::vec![u, b], &|tp, v| ball.mobius_bias_add(tp, v[0], v[1]), out)?;
        for act in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
            let (u, w, b) = (inside(rng), signed(rng, 4, 4, 0.1, 0.5), ball_rows(rng, 1, 4, 0.3));
            let name = tag(&format!("hyperbolic_activation[{act:?}]"));
            run_case(rng, &name, alloc::vec![u, w, b], &|tp, v| ball.hyperbolic_activation(tp, v[0], v[1], v[2], act), out)?;
        }
    }
    Ok(())
}

fn encoders(rng: &mut ChaCha8Rng, out: &mut Vec<(String, GradReport)>) -> Result<()> {
    let g = Graph::random_connected(5, 2, rng.gen())?;
    let g = g.with_features(signed(rng, 5, 3, 0.1, 1.0))?;
    let ball = PoincareBall::default();
    for kind in EncoderKind::ALL {
        for space in [Space::Euclidean, Space::Hyperbolic] {
            let mut store = ParamStore::new();
            let enc = GraphEncoder::new(kind, 3, 4, 2, &mut store, rng, "enc")?;
            randomize_biases(&mut store, rng);
            let weights = signed(rng, 1, 4, 0.2, 1.0);
            let report = check(&mut store, STEP, |tape, store| {
                let e = match space {
                    Space::Euclidean => enc.encode_euclidean(tape, store, &g)?,
                    Space::Hyperbolic => enc.encode_hyperbolic(tape, store, &g, &ball)?,
                };
                let w = tape.constant(weights.clone());
                let y = tape.mul(e.var, w)?;
                Ok(tape.sum(y)?)
            })?;
            out.push((format!("encoder {kind} ({})", space.name()), report));
        }
    }
    Ok(())
}

/// Zero biases make some ReLU inputs exactly zero; nudge them off the kink.
fn randomize_biases(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for p in store.tensors_mut() {
        if p.name().contains("bias") {
            let (r, c) = p.shape();
            p.set_value(signed(rng, r, c, 0.05, 0.3));
        }
    }
}

fn objective(rng: &mut ChaCha8Rng, out: &mut Vec<(String, GradReport)>) -> Result<()> {
    let graphs: Vec<Graph> = [(7, 3), (6, 2), (8, 4), (5, 1)]
        .iter()
        .enumerate()
        .map(|(k, &(n, extra))| Ok(Graph::random_connected(n, extra, rng.gen())?.with_label(Some(k % 2)).synthesize_features(4)))
        .collect::<Result<_>>()?;
    for (euclidean, hyperbolic, omega, head) in [
        (EncoderKind::Gcn, EncoderKind::Gin, 0.5, false),
        (EncoderKind::GraphSage, EncoderKind::Gat, 0.01, false),
        (EncoderKind::Gat, EncoderKind::Gcn, 1.0, true),
    ] {
        let cfg =
            ModelConfig { feature_dim: 5, hidden_dim: 4, layers: 2, euclidean, hyperbolic, classes: 2, curvature: 1.0, mobius_head: head };
        let mut model = DsgcModel::new(&cfg, rng.gen())?;
        randomize_biases(&mut model.store, rng);
        let train = TrainConfig {
            loss: LossConfig { temperature: 0.5, unlabeled_weight: 1.0, contrastive_weight: omega },
            alpha_h: 0.7,
            alpha_e: 0.8,
        };
        let batch = Batch::new(
            Member { id: 0, graph: &graphs[0] },
            graphs[1..].iter().enumerate().map(|(k, g)| Member { id: k + 1, graph: g }).collect(),
        )?;
        let views = sample_views(&batch, &train, rng.gen())?;
        let net = model.network.clone();
        let report = check(&mut model.store, STEP, |tape, store| Ok(batch_objective(tape, store, &net, &views, &train.loss)?.total))?;
        let head = if head { " + head" } else { "" };
        out.push((format!("objective {euclidean}/{hyperbolic}, ω = {omega}{head}"), report));
    }
    Ok(())
}
