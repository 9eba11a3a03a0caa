//! The model, its batch objective and the optimizer step.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, ParamStore, Tape, Var};
use crate::encoder::{argmax, EncoderKind, GraphEmbedding, GraphEncoder, MobiusHead, Predictor};
use crate::graph::Graph;
use crate::loss::{self, BatchLosses, LossConfig};
use crate::poincare::{Activation, PoincareBall};
use crate::sampling::{SamplerConfig, SamplerKind};
use crate::{contract, mix_seed, Result};

/// View tags mixed into sampling seeds.
pub const EUCLIDEAN_VIEW: u64 = 0;
pub const HYPERBOLIC_VIEW: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub euclidean: EncoderKind,
    pub hyperbolic: EncoderKind,
    pub classes: usize,
    pub curvature: f64,
    /// Adds a Möbius layer after the hyperbolic readout.
    pub mobius_head: bool,
}

/// Parameter handles of the two encoders, the predictor and the optional head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub euclidean: GraphEncoder,
    pub hyperbolic: GraphEncoder,
    pub predictor: Predictor,
    pub head: Option<MobiusHead>,
    pub ball: PoincareBall,
}

impl Network {
    pub fn new(cfg: &ModelConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        if cfg.classes == 0 {
            return Err(contract("a classifier needs at least one class"));
        }
        let ball = PoincareBall::new(cfg.curvature)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let euclidean = GraphEncoder::new(cfg.euclidean, cfg.feature_dim, cfg.hidden_dim, cfg.layers, store, &mut rng, "euclidean")?;
        let hyperbolic = GraphEncoder::new(cfg.hyperbolic, cfg.feature_dim, cfg.hidden_dim, cfg.layers, store, &mut rng, "hyperbolic")?;
        let predictor = Predictor::new(cfg.hidden_dim, cfg.classes, store, &mut rng);
        let head = cfg.mobius_head.then(|| MobiusHead::new(cfg.hidden_dim, Activation::Tanh, store, &mut rng));
        Ok(Self { euclidean, hyperbolic, predictor, head, ball })
    }

    fn hyperbolic_view(&self, tape: &mut Tape, store: &ParamStore, g: &Graph) -> Result<GraphEmbedding> {
        let h = self.hyperbolic.encode_hyperbolic(tape, store, g, &self.ball)?;
        match &self.head {
            Some(head) => head.apply(tape, store, &self.ball, h),
            None => Ok(h),
        }
    }

    /// Class probabilities of a whole (unsampled) graph from the Euclidean branch.
    pub fn probabilities(&self, store: &ParamStore, g: &Graph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let h = self.euclidean.encode_euclidean(&mut tape, store, g)?;
        let p = self.predictor.predict(&mut tape, store, h)?;
        Ok(tape.value(p).as_slice().to_vec())
    }
}

/// A network together with its parameters.
#[derive(Debug, Clone)]
pub struct DsgcModel {
    pub store: ParamStore,
    pub network: Network,
}

impl DsgcModel {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let network = Network::new(cfg, &mut store, seed)?;
        Ok(Self { store, network })
    }

    pub fn probabilities(&self, g: &Graph) -> Result<Vec<f64>> {
        self.network.probabilities(&self.store, g)
    }

    /// Argmax of the sigmoid outputs.
    pub fn classify(&self, g: &Graph) -> Result<usize> {
        Ok(argmax(&self.probabilities(g)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    /// Sampling rate of the hyperbolic (community expansion) view.
    pub alpha_h: f64,
    /// Sampling rate of the Euclidean (diffusion) view.
    pub alpha_e: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { loss: LossConfig::default(), alpha_h: 0.8, alpha_e: 0.8 }
    }
}

/// One labeled graph and `N ≥ 1` unlabeled graphs, each with its dataset id.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub id: usize,
    pub graph: &'a Graph,
}

#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub labeled: Member<'a>,
    pub unlabeled: Vec<Member<'a>>,
}

impl<'a> Batch<'a> {
    pub fn new(labeled: Member<'a>, unlabeled: Vec<Member<'a>>) -> Result<Self> {
        if labeled.graph.label().is_none() {
            return Err(contract(alloc::format!("anchor graph {} has no label", labeled.id)));
        }
        if unlabeled.is_empty() {
            return Err(contract("a batch needs at least one unlabeled graph"));
        }
        Ok(Self { labeled, unlabeled })
    }
}

/// Sampled Euclidean and hyperbolic views of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Views {
    pub euclidean: Graph,
    pub hyperbolic: Graph,
}

/// Both views of every batch member, sampled with seeds
/// `mix_seed(seed, [graph id, view])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchViews {
    pub label: usize,
    pub labeled: Views,
    pub unlabeled: Vec<Views>,
}

pub fn sample_views(batch: &Batch<'_>, cfg: &TrainConfig, seed: u64) -> Result<BatchViews> {
    let views = |m: &Member<'_>| -> Result<Views> {
        let e = SamplerConfig::new(cfg.alpha_e, mix_seed(seed, &[m.id as u64, EUCLIDEAN_VIEW]))?;
        let h = SamplerConfig::new(cfg.alpha_h, mix_seed(seed, &[m.id as u64, HYPERBOLIC_VIEW]))?;
        Ok(Views {
            euclidean: SamplerKind::Diffusion.sample(m.graph, &e)?.graph,
            hyperbolic: SamplerKind::CommunityExpansion.sample(m.graph, &h)?.graph,
        })
    };
    Ok(BatchViews {
        label: batch.labeled.graph.label().ok_or_else(|| contract("anchor graph has no label"))?,
        labeled: views(&batch.labeled)?,
        unlabeled: batch.unlabeled.iter().map(views).collect::<Result<_>>()?,
    })
}

/// Tape nodes of one batch objective.
#[derive(Debug, Clone)]
pub struct Objective {
    pub total: Var,
    pub supervised: Var,
    /// Absent when `ω = 0`, in which case the contrastive branch is skipped.
    pub contrastive: Option<Var>,
    pub logits: Var,
}

/// Builds the full objective of a batch on `tape`.
pub fn batch_objective(tape: &mut Tape, store: &ParamStore, net: &Network, views: &BatchViews, cfg: &LossConfig) -> Result<Objective> {
    let labeled_e = net.euclidean.encode_euclidean(tape, store, &views.labeled.euclidean)?;
    let logits = net.predictor.logits(tape, store, labeled_e)?;
    let supervised = loss::supervised_loss_logits(tape, logits, views.label)?;
    if cfg.contrastive_weight == 0.0 {
        return Ok(Objective { total: supervised, supervised, contrastive: None, logits });
    }

    let labeled_h = net.hyperbolic_view(tape, store, &views.labeled.hyperbolic)?;
    let labeled_eh = loss::to_hyperbolic(tape, labeled_e, &net.ball)?;
    let mut unlabeled_h = Vec::with_capacity(views.unlabeled.len());
    let mut unlabeled_eh = Vec::with_capacity(views.unlabeled.len());
    for v in &views.unlabeled {
        unlabeled_h.push(net.hyperbolic_view(tape, store, &v.hyperbolic)?);
        let e = net.euclidean.encode_euclidean(tape, store, &v.euclidean)?;
        unlabeled_eh.push(loss::to_hyperbolic(tape, e, &net.ball)?);
    }
    let labeled = loss::info_nce_labeled(tape, &net.ball, labeled_h, labeled_eh, &unlabeled_h, cfg)?;
    let unlabeled = unlabeled_h
        .iter()
        .zip(&unlabeled_eh)
        .map(|(&h, &eh)| loss::info_nce_unlabeled(tape, &net.ball, h, eh, labeled_h, cfg))
        .collect::<Result<Vec<_>>>()?;
    let losses = BatchLosses { supervised, labeled, unlabeled };
    let contrastive = loss::contrastive_objective(tape, &losses, cfg)?;
    let total = loss::total_objective(tape, &losses, cfg)?;
    Ok(Objective { total, supervised, contrastive: Some(contrastive), logits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub total: f64,
    pub supervised: f64,
    pub contrastive: Option<f64>,
    /// Sigmoid outputs for the labeled graph's Euclidean view.
    pub prediction: Vec<f64>,
}

impl StepMetrics {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.supervised.is_finite() && self.contrastive.is_none_or(f64::is_finite)
    }
}

/// Samples views, evaluates the objective, backpropagates and takes one
/// optimizer step. Reported losses are those before the step.
pub fn train_step(model: &mut DsgcModel, optimizer: &mut Adam, batch: &Batch<'_>, cfg: &TrainConfig, seed: u64) -> Result<StepMetrics> {
    let views = sample_views(batch, cfg, seed)?;
    let mut tape = Tape::new();
    let obj = batch_objective(&mut tape, &model.store, &model.network, &views, &cfg.loss)?;
    let metrics = StepMetrics {
        total: tape.value(obj.total).item(),
        supervised: tape.value(obj.supervised).item(),
        contrastive: obj.contrastive.map(|c| tape.value(c).item()),
        prediction: tape.value(obj.logits).as_slice().iter().map(|&z| crate::autodiff::tape::sigmoid(z)).collect(),
    };
    if !metrics.is_finite() {
        return Ok(metrics);
    }
    model.store.zero_grads();
    tape.backward(obj.total, &mut model.store)?;
    optimizer.step(model.store.tensors_mut());
    Ok(metrics)
}
