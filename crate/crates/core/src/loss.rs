//! Cross-view contrastive and supervised losses.
//!
//! Similarities are reciprocal geodesic distances in the ball. InfoNCE terms
//! are evaluated as `LSE(0, (s⁻ᵢ − s⁺)/τ …)`, the same quantity as
//! `−log(e^{s⁺/τ} / (e^{s⁺/τ} + Σ e^{s⁻ᵢ/τ}))` but safe for similarities near
//! the distance cap (around 7e5).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoder::{GraphEmbedding, Space};
use crate::poincare::PoincareBall;
use crate::tensor::Matrix;
use crate::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// τ
    pub temperature: f64,
    /// λ_u
    pub unlabeled_weight: f64,
    /// ω
    pub contrastive_weight: f64,
}

impl LossConfig {
    pub fn new(temperature: f64, unlabeled_weight: f64, contrastive_weight: f64) -> Result<Self> {
        let cfg = Self { temperature, unlabeled_weight, contrastive_weight };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(contract(alloc::format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.unlabeled_weight >= 0.0 && self.contrastive_weight >= 0.0) {
            return Err(contract("loss weights must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { temperature: 1.0, unlabeled_weight: 1.0, contrastive_weight: 0.01 }
    }
}

/// Moves a Euclidean graph embedding into the ball with `exp_o`.
pub fn to_hyperbolic(tape: &mut Tape, h: GraphEmbedding, ball: &PoincareBall) -> Result<GraphEmbedding> {
    let x = h.expect(Space::Euclidean)?;
    Ok(GraphEmbedding { var: ball.exp_map(tape, x)?, space: Space::Hyperbolic })
}

/// InfoNCE of one positive score against `negatives` (all `1 x 1`).
pub fn info_nce(tape: &mut Tape, positive: Var, negatives: &[Var], temperature: f64) -> Result<Var> {
    if negatives.is_empty() {
        return Err(contract("InfoNCE needs at least one negative"));
    }
    let mut logits = Vec::with_capacity(negatives.len() + 1);
    logits.push(tape.constant(Matrix::scalar(0.0)));
    for &n in negatives {
        logits.push(tape.sub(n, positive)?);
    }
    let column = tape.concat_rows(&logits)?;
    let column = tape.scale(column, 1.0 / temperature)?;
    Ok(tape.log_sum_exp(column)?)
}

/// Plain-number version of [`info_nce`].
pub fn info_nce_value(positive: f64, negatives: &[f64], temperature: f64) -> f64 {
    let mut logits = Vec::with_capacity(negatives.len() + 1);
    logits.push(0.0);
    logits.extend(negatives.iter().map(|&n| (n - positive) / temperature));
    crate::autodiff::tape::log_sum_exp(&logits)
}

fn sim(tape: &mut Tape, ball: &PoincareBall, a: GraphEmbedding, b: GraphEmbedding) -> Result<Var> {
    let a = a.expect(Space::Hyperbolic)?;
    let b = b.expect(Space::Hyperbolic)?;
    ball.similarity(tape, a, b)
}

/// Labeled term: positive `sim(H_l, H^{E→H}_l)`, negatives
/// `sim(H^{E→H}_l, H_{u,i})` for every unlabeled graph in the batch.
pub fn info_nce_labeled(
    tape: &mut Tape,
    ball: &PoincareBall,
    labeled_h: GraphEmbedding,
    labeled_eh: GraphEmbedding,
    unlabeled_h: &[GraphEmbedding],
    cfg: &LossConfig,
) -> Result<Var> {
    if unlabeled_h.is_empty() {
        return Err(contract("a batch needs at least one unlabeled graph"));
    }
    let positive = sim(tape, ball, labeled_h, labeled_eh)?;
    let negatives = unlabeled_h.iter().map(|&u| sim(tape, ball, labeled_eh, u)).collect::<Result<Vec<_>>>()?;
    info_nce(tape, positive, &negatives, cfg.temperature)
}

/// Unlabeled term for graph `i` (unscaled): positive
/// `sim(H_{u,i}, H^{E→H}_{u,i})`, negative `sim(H_l, H^{E→H}_{u,i})`.
pub fn info_nce_unlabeled(
    tape: &mut Tape,
    ball: &PoincareBall,
    unlabeled_h: GraphEmbedding,
    unlabeled_eh: GraphEmbedding,
    labeled_h: GraphEmbedding,
    cfg: &LossConfig,
) -> Result<Var> {
    let positive = sim(tape, ball, unlabeled_h, unlabeled_eh)?;
    let negative = sim(tape, ball, labeled_h, unlabeled_eh)?;
    info_nce(tape, positive, &[negative], cfg.temperature)
}

/// Summed binary cross-entropy of probabilities `p` against the one-hot
/// target `label`.
pub fn supervised_loss(p: &[f64], label: usize) -> Result<f64> {
    if label >= p.len() {
        return Err(contract(alloc::format!("label {label} outside 0..{}", p.len())));
    }
    Ok(p.iter().enumerate().map(|(k, &pk)| if k == label { -libm::log(pk) } else { -libm::log1p(-pk) }).sum())
}

/// [`supervised_loss`] of `sigmoid(logits)` computed from the logits:
/// `Σ_k softplus(z_k) − z_label`.
pub fn supervised_loss_logits(tape: &mut Tape, logits: Var, label: usize) -> Result<Var> {
    let (rows, cols) = tape.shape(logits);
    if rows != 1 || label >= cols {
        return Err(contract(alloc::format!("label {label} for a {rows}x{cols} prediction")));
    }
    let mut onehot = Matrix::zeros(1, cols);
    onehot[(0, label)] = 1.0;
    let onehot = tape.constant(onehot);
    let sp = tape.softplus(logits)?;
    let sp = tape.sum(sp)?;
    let picked = tape.mul(logits, onehot)?;
    let picked = tape.sum(picked)?;
    Ok(tape.sub(sp, picked)?)
}

/// Loss components of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLosses {
    pub supervised: Var,
    pub labeled: Var,
    pub unlabeled: Vec<Var>,
}

/// `L_contra = L^l + (λ_u / N) Σ L^u_i`.
pub fn contrastive_objective(tape: &mut Tape, losses: &BatchLosses, cfg: &LossConfig) -> Result<Var> {
    if losses.unlabeled.is_empty() {
        return Err(contract("a batch needs at least one unlabeled graph"));
    }
    let terms = tape.concat_rows(&losses.unlabeled)?;
    let sum = tape.sum(terms)?;
    let scaled = tape.scale(sum, cfg.unlabeled_weight / losses.unlabeled.len() as f64)?;
    Ok(tape.add(losses.labeled, scaled)?)
}

/// `L = L_sup + ω · L_contra`. With `ω = 0` the supervised node is returned
/// unchanged.
pub fn total_objective(tape: &mut Tape, losses: &BatchLosses, cfg: &LossConfig) -> Result<Var> {
    if cfg.contrastive_weight == 0.0 {
        return Ok(losses.supervised);
    }
    let contra = contrastive_objective(tape, losses, cfg)?;
    let weighted = tape.scale(contra, cfg.contrastive_weight)?;
    Ok(tape.add(losses.supervised, weighted)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn separated_scores_keep_a_positive_loss() {
        let l = info_nce_value(40.0, &[0.0, 1.0], 1.0);
        let expected = libm::exp(-40.0) + libm::exp(-39.0);
        assert!(l > 0.0 && (l - expected).abs() < 1e-12 * expected, "{l:e}");
    }

    fn ball_embedding(tape: &mut Tape, coords: &[f64]) -> GraphEmbedding {
        GraphEmbedding { var: tape.constant(Matrix::row_vector(coords)), space: Space::Hyperbolic }
    }

    fn scalar(tape: &mut Tape, x: f64) -> Var {
        tape.constant(Matrix::scalar(x))
    }

    #[test]
    fn to_hyperbolic_examples() {
        let ball = PoincareBall::default();
        let mut tape = Tape::new();
        let z = tape.constant(Matrix::zeros(1, 2));
        let out = to_hyperbolic(&mut tape, GraphEmbedding { var: z, space: Space::Euclidean }, &ball).unwrap();
        assert_eq!(out.coords(&tape), alloc::vec![0.0, 0.0]);
        let x = tape.constant(Matrix::row_vector(&[0.5, 0.0]));
        let out = to_hyperbolic(&mut tape, GraphEmbedding { var: x, space: Space::Euclidean }, &ball).unwrap();
        assert_eq!(out.space, Space::Hyperbolic);
        assert!((out.coords(&tape)[0] - 0.462117).abs() < 1e-6);
        assert!(matches!(to_hyperbolic(&mut tape, out, &ball), Err(Error::WrongSpace { .. })));
    }

    #[test]
    fn equal_scores_give_log_of_count() {
        for n in 1..=3 {
            let mut tape = Tape::new();
            let pos = scalar(&mut tape, 0.8);
            let negs: Vec<Var> = (0..n).map(|_| scalar(&mut tape, 0.8)).collect();
            let l = info_nce(&mut tape, pos, &negs, 1.0).unwrap();
            assert!((tape.value(l).item() - libm::log((n + 1) as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_evaluations() {
        assert!((info_nce_value(10.0, &[0.0], 1.0) - 4.5398899e-5).abs() < 1e-10);
        assert!((info_nce_value(0.0, &[10.0], 100.0) - 0.7443967).abs() < 1e-6);
        let saturated = info_nce_value(7.0e5, &[3.0], 1.0);
        assert!((0.0..1e-12).contains(&saturated));
    }

    #[test]
    fn labeled_term_uses_geodesic_similarity() {
        let ball = PoincareBall::default();
        let mut tape = Tape::new();
        let l_h = ball_embedding(&mut tape, &[0.5, 0.0]);
        let l_eh = ball_embedding(&mut tape, &[0.0, 0.0]);
        let u_h = ball_embedding(&mut tape, &[0.0, 0.5]);
        let cfg = LossConfig::new(1.0, 1.0, 0.01).unwrap();
        let l = info_nce_labeled(&mut tape, &ball, l_h, l_eh, &[u_h], &cfg).unwrap();
        // both pairs are at distance ln 3 from the origin
        assert!((tape.value(l).item() - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(info_nce_labeled(&mut tape, &ball, l_h, l_eh, &[], &cfg).is_err());
        let bad = GraphEmbedding { var: l_h.var, space: Space::Euclidean };
        assert!(info_nce_unlabeled(&mut tape, &ball, bad, l_eh, l_h, &cfg).is_err());
    }

    #[test]
    fn bce_examples() {
        let eps = 1e-9;
        assert!((supervised_loss(&[1.0 - eps, eps], 0).unwrap() - 2e-9).abs() < 1e-15);
        assert!((supervised_loss(&[0.5, 0.5], 0).unwrap() - 2.0 * core::f64::consts::LN_2).abs() < 1e-15);
        assert!(supervised_loss(&[0.6, 0.5], 0).unwrap() < supervised_loss(&[0.5, 0.5], 0).unwrap());
        assert!(supervised_loss(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn logit_form_matches_probability_form() {
        let z = [0.3, -1.2, 2.0];
        let p: Vec<f64> = z.iter().map(|&v| crate::autodiff::tape::sigmoid(v)).collect();
        let mut tape = Tape::new();
        let logits = tape.constant(Matrix::row_vector(&z));
        let l = supervised_loss_logits(&mut tape, logits, 1).unwrap();
        assert!((tape.value(l).item() - supervised_loss(&p, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn objective_composition() {
        let mut tape = Tape::new();
        let losses = BatchLosses {
            supervised: scalar(&mut tape, 1.0),
            labeled: scalar(&mut tape, 0.5),
            unlabeled: alloc::vec![scalar(&mut tape, 0.4), scalar(&mut tape, 0.6)],
        };
        let cfg = LossConfig::new(1.0, 1.0, 0.01).unwrap();
        let t = total_objective(&mut tape, &losses, &cfg).unwrap();
        assert!((tape.value(t).item() - 1.01).abs() < 1e-15);

        let off = LossConfig { contrastive_weight: 0.0, ..cfg };
        let t = total_objective(&mut tape, &losses, &off).unwrap();
        assert_eq!(tape.value(t).item(), 1.0);

        let no_u = LossConfig { unlabeled_weight: 0.0, ..cfg };
        let t = total_objective(&mut tape, &losses, &no_u).unwrap();
        assert!((tape.value(t).item() - 1.005).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::new(0.0, 1.0, 0.01).is_err());
        assert!(LossConfig::new(1.0, -1.0, 0.01).is_err());
    }
}
