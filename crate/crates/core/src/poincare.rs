//! Poincaré ball geometry.
//!
//! The ball of curvature `−c` is `{x : c‖x‖² < 1}`. Maps between the ball and
//! the tangent space at the origin are
//!
//! ```text
//! exp_o(t) = tanh(√c‖t‖) · t / (√c‖t‖)
//! log_o(u) = artanh(√c‖u‖) · u / (√c‖u‖)
//! ```
//!
//! and the Möbius layer operations conjugate ordinary linear algebra with
//! them. Similarity between two points is the reciprocal of their geodesic
//! distance.
//!
//! Every operation comes in two forms: a differentiable one recording onto a
//! [`Tape`] (row-wise over an `n x d` matrix of points), and a plain one on
//! [`BallPoint`] / [`TangentVector`] that evaluates the same tape code.

use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Norms below this are treated as this value (series limit of tanh(x)/x).
pub const MIN_NORM: f64 = 1e-15;
/// Smallest admissible arcosh argument; caps the similarity of coincident points.
pub const MIN_ARCOSH_ARG: f64 = 1.0 + 1e-12;
/// Largest admissible artanh argument.
pub const MAX_ARTANH_ARG: f64 = 1.0 - 1e-7;
/// Points are kept within `(1 − BOUNDARY_EPS)/√c` of the origin.
pub const BOUNDARY_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareBall {
    c: f64,
}

impl Default for PoincareBall {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

impl PoincareBall {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidCurvature(c));
        }
        Ok(Self { c })
    }

    pub fn curvature(&self) -> f64 {
        self.c
    }

    /// Euclidean radius `1/√c`.
    pub fn radius(&self) -> f64 {
        1.0 / libm::sqrt(self.c)
    }

    /// Largest norm an output point is allowed to have.
    pub fn max_norm(&self) -> f64 {
        (1.0 - BOUNDARY_EPS) / libm::sqrt(self.c)
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        self.c * coords.iter().map(|x| x * x).sum::<f64>() < 1.0
    }

    fn check_inside(&self, m: &Matrix) -> Result<()> {
        for i in 0..m.rows() {
            let sq: f64 = m.row(i).iter().map(|x| x * x).sum();
            if !(self.c * sq < 1.0) {
                return Err(Error::OutsideBall(self.c * sq));
            }
        }
        Ok(())
    }

    /// Radially pulls rows with norm above [`max_norm`](Self::max_norm) back onto it.
    pub fn project(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let max = self.max_norm();
        let v = tape.value(x);
        let needs = (0..v.rows()).any(|i| crate::tensor::l2_norm(v.row(i)) > max);
        if !needs {
            return Ok(x);
        }
        let rows = v.rows();
        let norm = tape.row_norm(x)?;
        let denom = tape.clamp(norm, max, f64::INFINITY)?;
        let num = tape.constant(Matrix::filled(rows, 1, max));
        let factor = tape.div(num, denom)?;
        Ok(tape.mul_col(x, factor)?)
    }

    /// Row-wise exponential map at the origin.
    pub fn exp_map(&self, tape: &mut Tape, t: Var) -> Result<Var> {
        let sqrt_c = libm::sqrt(self.c);
        let norm = tape.row_norm(t)?;
        let norm = tape.clamp(norm, MIN_NORM, f64::INFINITY)?;
        let scaled = tape.scale(norm, sqrt_c)?;
        let th = tape.tanh(scaled)?;
        let factor = tape.div(th, scaled)?;
        let out = tape.mul_col(t, factor)?;
        self.project(tape, out)
    }

    /// Row-wise logarithmic map at the origin. Every row must lie inside the ball.
    pub fn log_map(&self, tape: &mut Tape, u: Var) -> Result<Var> {
        self.check_inside(tape.value(u))?;
        let sqrt_c = libm::sqrt(self.c);
        let norm = tape.row_norm(u)?;
        let norm = tape.clamp(norm, MIN_NORM, f64::INFINITY)?;
        let scaled = tape.scale(norm, sqrt_c)?;
        let arg = tape.clamp(scaled, -MAX_ARTANH_ARG, MAX_ARTANH_ARG)?;
        let at = tape.artanh(arg)?;
        let factor = tape.div(at, scaled)?;
        Ok(tape.mul_col(u, factor)?)
    }

    /// Row-wise reciprocal geodesic distance between paired rows of `u` and `v`,
    /// as a `rows x 1` column.
    ///
    /// Points are rescaled by `√c` into the unit ball, where the distance is
    /// `arcosh(1 + 2‖u−v‖² / ((1−‖u‖²)(1−‖v‖²)))`; dividing by `√c` restores
    /// curvature `−c`.
    pub fn similarity(&self, tape: &mut Tape, u: Var, v: Var) -> Result<Var> {
        self.check_inside(tape.value(u))?;
        self.check_inside(tape.value(v))?;
        let sqrt_c = libm::sqrt(self.c);
        let us = tape.scale(u, sqrt_c)?;
        let vs = tape.scale(v, sqrt_c)?;
        let diff = tape.sub(us, vs)?;
        let diff_sq = tape.mul(diff, diff)?;
        let dist_sq = tape.row_sum(diff_sq)?;
        let one_minus = |tape: &mut Tape, x: Var| -> Result<Var> {
            let sq = tape.mul(x, x)?;
            let n = tape.row_sum(sq)?;
            let neg = tape.scale(n, -1.0)?;
            Ok(tape.add_scalar(neg, 1.0)?)
        };
        let au = one_minus(tape, us)?;
        let av = one_minus(tape, vs)?;
        let den = tape.mul(au, av)?;
        let den = tape.clamp(den, MIN_NORM, f64::INFINITY)?;
        let ratio = tape.div(dist_sq, den)?;
        let ratio = tape.scale(ratio, 2.0)?;
        let arg = tape.add_scalar(ratio, 1.0)?;
        let arg = tape.clamp(arg, MIN_ARCOSH_ARG, f64::INFINITY)?;
        let length = tape.arcosh(arg)?;
        let rows = tape.value(length).rows();
        let num = tape.constant(Matrix::filled(rows, 1, sqrt_c));
        Ok(tape.div(num, length)?)
    }

    /// `W ⊗ u = exp_o(W · log_o(u))` for each row `u`; `w` is `out x in`.
    pub fn mobius_matvec(&self, tape: &mut Tape, w: Var, u: Var) -> Result<Var> {
        let (wr, wc) = tape.shape(w);
        let (_, ud) = tape.shape(u);
        if wc != ud {
            return Err(crate::autodiff::AutodiffError::Shape { op: "mobius_matvec", lhs: (wr, wc), rhs: tape.shape(u) }.into());
        }
        let t = self.log_map(tape, u)?;
        let wt = tape.transpose(w)?;
        let mapped = tape.matmul(t, wt)?;
        self.exp_map(tape, mapped)
    }

    /// `u ⊕ b = exp_o(log_o(u) + b)` for each row `u`; `b` is `1 x d`.
    pub fn mobius_bias_add(&self, tape: &mut Tape, u: Var, b: Var) -> Result<Var> {
        let t = self.log_map(tape, u)?;
        let shifted = tape.add_row(t, b)?;
        self.exp_map(tape, shifted)
    }

    /// `exp_o(σ(log_o(W ⊗ u ⊕ b)))`.
    pub fn hyperbolic_activation(&self, tape: &mut Tape, u: Var, w: Var, b: Var, act: Activation) -> Result<Var> {
        let x = self.mobius_matvec(tape, w, u)?;
        let x = self.mobius_bias_add(tape, x, b)?;
        let t = self.log_map(tape, x)?;
        let t = act.apply(tape, t)?;
        self.exp_map(tape, t)
    }

    pub fn exp_map_origin(&self, t: &TangentVector) -> BallPoint {
        let out = eval_rows(&[&t.0], |tape, v| self.exp_map(tape, v[0])).expect("exp map of a finite vector");
        BallPoint(out)
    }

    pub fn log_map_origin(&self, u: &BallPoint) -> Result<TangentVector> {
        Ok(TangentVector(eval_rows(&[&u.0], |tape, v| self.log_map(tape, v[0]))?))
    }

    pub fn geodesic_similarity(&self, u: &BallPoint, v: &BallPoint) -> Result<f64> {
        if u.dim() != v.dim() {
            return Err(crate::autodiff::AutodiffError::Shape { op: "similarity", lhs: (1, u.dim()), rhs: (1, v.dim()) }.into());
        }
        Ok(eval_rows(&[&u.0, &v.0], |tape, x| self.similarity(tape, x[0], x[1]))?[0])
    }

    /// Geodesic distance, the reciprocal of [`geodesic_similarity`](Self::geodesic_similarity).
    pub fn distance(&self, u: &BallPoint, v: &BallPoint) -> Result<f64> {
        Ok(1.0 / self.geodesic_similarity(u, v)?)
    }

    pub fn mobius_matvec_point(&self, w: &Matrix, u: &BallPoint) -> Result<BallPoint> {
        let mut tape = Tape::new();
        let wv = tape.constant(w.clone());
        let uv = tape.constant(Matrix::row_vector(&u.0));
        let out = self.mobius_matvec(&mut tape, wv, uv)?;
        Ok(BallPoint(tape.value(out).as_slice().to_vec()))
    }

    pub fn mobius_bias_add_point(&self, u: &BallPoint, b: &[f64]) -> Result<BallPoint> {
        Ok(BallPoint(eval_rows(&[&u.0, b], |tape, x| self.mobius_bias_add(tape, x[0], x[1]))?))
    }

    pub fn hyperbolic_activation_point(&self, u: &BallPoint, w: &Matrix, b: &[f64], act: Activation) -> Result<BallPoint> {
        let mut tape = Tape::new();
        let wv = tape.constant(w.clone());
        let uv = tape.constant(Matrix::row_vector(&u.0));
        let bv = tape.constant(Matrix::row_vector(b));
        let out = self.hyperbolic_activation(&mut tape, uv, wv, bv, act)?;
        Ok(BallPoint(tape.value(out).as_slice().to_vec()))
    }
}

fn eval_rows(rows: &[&[f64]], f: impl FnOnce(&mut Tape, &[Var]) -> Result<Var>) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = rows.iter().map(|r| tape.constant(Matrix::row_vector(r))).collect();
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out).as_slice().to_vec())
}

/// A point strictly inside the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    pub fn new(coords: Vec<f64>, ball: &PoincareBall) -> Result<Self> {
        if !ball.contains(&coords) {
            let sq: f64 = coords.iter().map(|x| x * x).sum();
            return Err(Error::OutsideBall(ball.curvature() * sq));
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        crate::tensor::l2_norm(&self.0)
    }
}

/// A vector in the tangent space at the origin; any finite vector is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(Vec<f64>);

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        crate::tensor::l2_norm(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        Ok(match self {
            Activation::Relu => tape.relu(x)?,
            Activation::Tanh => tape.tanh(x)?,
            Activation::Sigmoid => tape.sigmoid(x)?,
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            _ => Err(Error::Unknown { what: "activation", name: s.into() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TANH_HALF: f64 = 0.46211715726000974;

    fn unit() -> PoincareBall {
        PoincareBall::default()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn rejects_nonpositive_curvature() {
        assert!(PoincareBall::new(0.0).is_err());
        assert!(PoincareBall::new(-1.0).is_err());
        assert!(PoincareBall::new(f64::NAN).is_err());
    }

    #[test]
    fn exp_map_examples() {
        let b = unit();
        let p = b.exp_map_origin(&TangentVector::new(alloc::vec![0.5, 0.0]));
        assert!(close(p.coords(), &[TANH_HALF, 0.0], 1e-12));
        let o = b.exp_map_origin(&TangentVector::zeros(2));
        assert_eq!(o.coords(), &[0.0, 0.0]);
        let far = b.exp_map_origin(&TangentVector::new(alloc::vec![100.0, 0.0]));
        assert!(far.norm() < 1.0);
    }

    #[test]
    fn log_map_examples() {
        let b = unit();
        let t = b.log_map_origin(&BallPoint::new(alloc::vec![TANH_HALF, 0.0], &b).unwrap()).unwrap();
        assert!(close(t.coords(), &[0.5, 0.0], 1e-12));
        let z = b.log_map_origin(&BallPoint::origin(3)).unwrap();
        assert_eq!(z.coords(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn boundary_point_is_rejected() {
        let b = unit();
        assert!(matches!(BallPoint::new(alloc::vec![1.0, 0.0], &b), Err(Error::OutsideBall(_))));
        let mut tape = Tape::new();
        let u = tape.constant(Matrix::row_vector(&[0.6, 0.8]));
        assert!(matches!(b.log_map(&mut tape, u), Err(Error::OutsideBall(_))));
    }

    #[test]
    fn similarity_worked_value() {
        let b = unit();
        let u = BallPoint::new(alloc::vec![0.5, 0.0], &b).unwrap();
        let s = b.geodesic_similarity(&u, &BallPoint::origin(2)).unwrap();
        // arcosh(5/3) = ln 3
        assert!((s - 1.0 / libm::log(3.0)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn coincident_points_hit_the_cap() {
        let b = unit();
        let u = BallPoint::new(alloc::vec![0.3, 0.4], &b).unwrap();
        let s = b.geodesic_similarity(&u, &u).unwrap();
        let cap = 1.0 / libm::sqrt(2.0 * 1e-12);
        assert!(((s - cap) / cap).abs() < 1e-4, "{s} vs {cap}");
    }

    #[test]
    fn general_curvature_rescales_distance() {
        // d_c(u, v) = d_1(√c u, √c v) / √c
        let c = 4.0;
        let b = PoincareBall::new(c).unwrap();
        let u = BallPoint::new(alloc::vec![0.25, 0.0], &b).unwrap();
        let d = b.distance(&u, &BallPoint::origin(2)).unwrap();
        let unit_u = BallPoint::new(alloc::vec![0.5, 0.0], &unit()).unwrap();
        let d1 = unit().distance(&unit_u, &BallPoint::origin(2)).unwrap();
        assert!((d - d1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_matvec_examples() {
        let b = unit();
        let u = BallPoint::new(alloc::vec![TANH_HALF, 0.0], &b).unwrap();
        let id = b.mobius_matvec_point(&Matrix::identity(2), &u).unwrap();
        assert!(close(id.coords(), u.coords(), 1e-12));
        let zero = b.mobius_matvec_point(&Matrix::zeros(2, 2), &u).unwrap();
        assert_eq!(zero.coords(), &[0.0, 0.0]);
        let mut two = Matrix::identity(2);
        two[(0, 0)] = 2.0;
        two[(1, 1)] = 2.0;
        let doubled = b.mobius_matvec_point(&two, &u).unwrap();
        assert!(close(doubled.coords(), &[libm::tanh(1.0), 0.0], 1e-12));
        assert!(b.mobius_matvec_point(&Matrix::zeros(2, 3), &u).is_err());
    }

    #[test]
    fn mobius_bias_add_examples() {
        let b = unit();
        let u = BallPoint::new(alloc::vec![0.1, -0.2], &b).unwrap();
        let same = b.mobius_bias_add_point(&u, &[0.0, 0.0]).unwrap();
        assert!(close(same.coords(), u.coords(), 1e-12));
        let shifted = b.mobius_bias_add_point(&BallPoint::origin(2), &[0.5, 0.0]).unwrap();
        assert!(close(shifted.coords(), &[TANH_HALF, 0.0], 1e-12));
        assert_eq!(shifted, b.mobius_bias_add_point(&BallPoint::origin(2), &[0.5, 0.0]).unwrap());
        assert!(b.mobius_bias_add_point(&u, &[0.0]).is_err());
    }

    #[test]
    fn hyperbolic_activation_examples() {
        let b = unit();
        let i = Matrix::identity(2);
        let o = b.hyperbolic_activation_point(&BallPoint::origin(2), &i, &[0.0, 0.0], Activation::Tanh).unwrap();
        assert!(close(o.coords(), &[0.0, 0.0], 1e-15));
        let u = BallPoint::new(alloc::vec![TANH_HALF, 0.0], &b).unwrap();
        let r = b.hyperbolic_activation_point(&u, &i, &[0.0, 0.0], Activation::Relu).unwrap();
        assert!(close(r.coords(), &[TANH_HALF, 0.0], 1e-12));
        assert!("swish".parse::<Activation>().is_err());
    }

    #[test]
    fn saturated_exp_is_projected_inside() {
        let b = unit();
        let p = b.exp_map_origin(&TangentVector::new(alloc::vec![50.0, 50.0]));
        assert!((p.norm() - b.max_norm()).abs() < 1e-12);
        assert!(b.contains(p.coords()));
    }
}
