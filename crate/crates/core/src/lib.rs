//! Graph contrastive learning across a Euclidean and a Poincaré-ball view.
//!
//! Every graph is viewed twice: a diffusion-sampled sub-graph encoded by a
//! Euclidean GNN, and a community-expansion-sampled sub-graph encoded by a GNN
//! whose output is mapped into the Poincaré ball. The Euclidean embedding is
//! moved into the ball too, the two views are contrasted with an InfoNCE loss
//! built on reciprocal geodesic distance, and a sigmoid predictor on the
//! Euclidean embedding supplies the supervised term.
//!
//! The crate is `no_std` (with `alloc`); file formats, the experiment runner
//! and the command line live in the companion `dsgc` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod encoder;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod poincare;
pub mod sampling;
pub mod tensor;
pub mod train;

mod seed;

pub use seed::mix_seed;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error("point lies on or outside the Poincare ball (c*|x|^2 = {0})")]
    OutsideBall(f64),
    #[error("curvature magnitude must be positive and finite, got {0}")]
    InvalidCurvature(f64),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is not connected; filter disconnected graphs before sampling")]
    Disconnected,
    #[error("embedding is in {found} space, expected {expected}")]
    WrongSpace { expected: &'static str, found: &'static str },
    #[error("unknown {what} '{name}'")]
    Unknown { what: &'static str, name: String },
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
