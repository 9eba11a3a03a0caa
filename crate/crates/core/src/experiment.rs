//! Evaluation protocol: configuration, fold splits, per-fold training and
//! aggregation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, AutodiffError};
use crate::encoder::EncoderKind;
use crate::graph::Dataset;
use crate::loss::LossConfig;
use crate::train::{train_step, Batch, DsgcModel, Member, ModelConfig, TrainConfig};
use crate::{contract, mix_seed, Error, Result};

const SPLIT_TAG: u64 = 0x5911;
const LABEL_TAG: u64 = 0x1abe;
const MODEL_TAG: u64 = 0x30de;
const ORDER_TAG: u64 = 0x0bde;
const POOL_TAG: u64 = 0x9001;

/// How the test sets of the folds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Disjoint slices of one seeded shuffle; their union is the dataset.
    #[default]
    Partition,
    /// An independent seeded draw of `round(test_fraction · n)` graphs per fold.
    Independent,
}

/// Every hyperparameter of a run, in snake case; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub euclidean_encoder: EncoderKind,
    pub hyperbolic_encoder: EncoderKind,
    pub number_of_encoder_layers: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub number_of_training_epoch: usize,
    pub weight_of_contrastive_learning: f64,
    pub unlabeled_weight: f64,
    pub batch_size: usize,
    pub hidden_dimension: usize,
    pub label_ratio: f64,
    pub folds: usize,
    pub test_fraction: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
    pub alpha_h: f64,
    pub alpha_e: f64,
    pub curvature: f64,
    pub degree_cap: usize,
    pub mobius_head: bool,
}

impl Default for ExperimentConfig {
    /// The MUTAG, label ratio 0.5 setting.
    fn default() -> Self {
        Self {
            dataset: "MUTAG".into(),
            euclidean_encoder: EncoderKind::Gcn,
            hyperbolic_encoder: EncoderKind::Gin,
            number_of_encoder_layers: 3,
            temperature: 1.0,
            learning_rate: 5e-5,
            weight_decay: 1e-5,
            number_of_training_epoch: 200,
            weight_of_contrastive_learning: 0.01,
            unlabeled_weight: 1.0,
            batch_size: 8,
            hidden_dimension: 16,
            label_ratio: 0.5,
            folds: 10,
            test_fraction: 0.1,
            split_mode: SplitMode::Partition,
            seed: 0,
            alpha_h: 0.8,
            alpha_e: 0.8,
            curvature: 1.0,
            degree_cap: 64,
            mobius_head: false,
        }
    }
}

impl ExperimentConfig {
    /// Reference settings for `dataset` (MUTAG, REDDIT-BINARY, COLLAB) at
    /// label ratio 0.1, 0.3 or 0.5.
    pub fn preset(dataset: &str, label_ratio: f64) -> Result<Self> {
        use EncoderKind::*;
        let col = [0.1, 0.3, 0.5]
            .iter()
            .position(|&r| (r - label_ratio).abs() < 1e-9)
            .ok_or_else(|| contract(format!("no preset for label ratio {label_ratio}")))?;
        #[rustfmt::skip]
        let rows: [(EncoderKind, EncoderKind, usize, f64, f64, f64, usize); 3] = match dataset.to_ascii_uppercase().as_str() {
            "MUTAG" => [
                (GraphSage, GraphSage, 3, 1.0, 1e-4, 0.01, 8),
                (Gcn, Gcn, 3, 1.0, 1.7e-4, 0.01, 8),
                (Gcn, Gin, 3, 1.0, 5e-5, 0.01, 8),
            ],
            "REDDIT-BINARY" => [
                (Gcn, Gat, 1, 100.0, 2e-5, 1e-5, 16),
                (Gcn, Gin, 1, 100.0, 1e-4, 0.01, 16),
                (Gin, Gin, 1, 100.0, 1e-5, 0.01, 16),
            ],
            "COLLAB" => [
                (GraphSage, Gcn, 3, 100.0, 2e-5, 0.01, 32),
                (GraphSage, GraphSage, 3, 100.0, 2e-5, 1e-4, 64),
                (GraphSage, Gin, 1, 100.0, 2e-5, 0.01, 64),
            ],
            _ => return Err(Error::Unknown { what: "dataset preset", name: dataset.into() }),
        };
        let (e, h, layers, tau, lr, omega, batch) = rows[col];
        Ok(Self {
            dataset: dataset.to_ascii_uppercase(),
            euclidean_encoder: e,
            hyperbolic_encoder: h,
            number_of_encoder_layers: layers,
            temperature: tau,
            learning_rate: lr,
            weight_of_contrastive_learning: omega,
            batch_size: batch,
            label_ratio,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(contract(format!("{name} must lie in (0, 1), got {x}")))
            }
        };
        open_unit("label_ratio", self.label_ratio)?;
        open_unit("test_fraction", self.test_fraction)?;
        for (name, x) in [("alpha_h", self.alpha_h), ("alpha_e", self.alpha_e)] {
            if !(x > 0.0 && x <= 1.0) {
                return Err(contract(format!("{name} must lie in (0, 1], got {x}")));
            }
        }
        for (name, x) in [
            ("number_of_encoder_layers", self.number_of_encoder_layers),
            ("number_of_training_epoch", self.number_of_training_epoch),
            ("hidden_dimension", self.hidden_dimension),
            ("folds", self.folds),
        ] {
            if x == 0 {
                return Err(contract(format!("{name} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(contract("batch_size must be at least 2 (one labeled plus unlabeled graphs)"));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(contract("learning_rate must be positive and weight_decay nonnegative"));
        }
        if !(self.curvature > 0.0 && self.curvature.is_finite()) {
            return Err(Error::InvalidCurvature(self.curvature));
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            temperature: self.temperature,
            unlabeled_weight: self.unlabeled_weight,
            contrastive_weight: self.weight_of_contrastive_learning,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { loss: self.loss_config(), alpha_h: self.alpha_h, alpha_e: self.alpha_e }
    }

    pub fn model_config(&self, feature_dim: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            feature_dim,
            hidden_dim: self.hidden_dimension,
            layers: self.number_of_encoder_layers,
            euclidean: self.euclidean_encoder,
            hyperbolic: self.hyperbolic_encoder,
            classes,
            curvature: self.curvature,
            mobius_head: self.mobius_head,
        }
    }
}

/// Drops disconnected graphs and replaces features by degree one-hots.
pub fn prepare_dataset(raw: &Dataset, cfg: &ExperimentConfig) -> Dataset {
    raw.filter_connected().synthesize_features(cfg.degree_cap)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    /// Graphs whose labels feed the supervised loss.
    pub labeled: Vec<usize>,
    /// Every graph not in `labeled`, test graphs included.
    pub unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

/// Test, labeled and unlabeled ids of every fold; a pure function of
/// `(n, cfg)`.
pub fn split_folds(n: usize, cfg: &ExperimentConfig) -> Result<Vec<FoldSplit>> {
    if n < cfg.folds || n < 2 {
        return Err(contract(format!("{n} graphs cannot be split into {} folds", cfg.folds)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[SPLIT_TAG])));
    let labeled_count = libm::round(cfg.label_ratio * n as f64) as usize;
    if labeled_count == 0 {
        return Err(contract(format!("label ratio {} gives no labeled graphs out of {n}", cfg.label_ratio)));
    }

    (0..cfg.folds)
        .map(|fold| {
            let test: Vec<usize> = match cfg.split_mode {
                SplitMode::Partition => {
                    // first n % folds slices are one longer
                    let (base, extra) = (n / cfg.folds, n % cfg.folds);
                    let start = fold * base + fold.min(extra);
                    let len = base + usize::from(fold < extra);
                    order[start..start + len].to_vec()
                }
                SplitMode::Independent => {
                    let k = (libm::round(cfg.test_fraction * n as f64) as usize).clamp(1, n - 1);
                    let mut ids: Vec<usize> = (0..n).collect();
                    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[SPLIT_TAG, fold as u64])));
                    ids.truncate(k);
                    ids
                }
            };
            let mut is_test = alloc::vec![false; n];
            test.iter().for_each(|&t| is_test[t] = true);
            let mut pool: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
            pool.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[LABEL_TAG, fold as u64])));
            pool.truncate(labeled_count.min(pool.len()));
            let mut labeled = pool;
            labeled.sort_unstable();
            let mut is_labeled = alloc::vec![false; n];
            labeled.iter().for_each(|&l| is_labeled[l] = true);
            let unlabeled = (0..n).filter(|&i| !is_labeled[i]).collect();
            let mut test = test;
            test.sort_unstable();
            Ok(FoldSplit { labeled, unlabeled, test })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub supervised: f64,
    pub contrastive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub trace: Vec<EpochLoss>,
    /// Distinct graphs that anchored a supervised loss, sorted.
    pub supervised_ids: Vec<usize>,
}

/// Trains a fresh model on one fold and measures test accuracy.
///
/// An epoch anchors one batch on every labeled graph (in a per-epoch seeded
/// order); the `B − 1` unlabeled graphs of each batch are drawn round-robin
/// from a seeded shuffle of the unlabeled pool. Views of epoch `e` are sampled
/// from `seed + e`.
pub fn run_fold(ds: &Dataset, split: &FoldSplit, cfg: &ExperimentConfig, fold: usize) -> Result<FoldResult> {
    cfg.validate()?;
    let feature_dim = ds.graphs.first().map_or(0, |g| g.feature_dim());
    let mut model = DsgcModel::new(&cfg.model_config(feature_dim, ds.num_classes), mix_seed(cfg.seed, &[MODEL_TAG, fold as u64]))?;
    let mut optimizer = Adam::new(AdamConfig::new(cfg.learning_rate, cfg.weight_decay));
    let train_cfg = cfg.train_config();

    let mut pool = split.unlabeled.clone();
    if pool.is_empty() {
        return Err(contract("no unlabeled graphs to contrast against"));
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[POOL_TAG, fold as u64])));
    let mut cursor = 0;
    let mut supervised_ids = Vec::new();
    let mut trace = Vec::with_capacity(cfg.number_of_training_epoch);

    for epoch in 0..cfg.number_of_training_epoch {
        let epoch_seed = cfg.seed.wrapping_add(epoch as u64);
        let mut anchors = split.labeled.clone();
        anchors.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(epoch_seed, &[ORDER_TAG, fold as u64])));
        let (mut total, mut supervised, mut contrastive) = (0.0, 0.0, 0.0);
        for &anchor in &anchors {
            let unlabeled = (0..cfg.batch_size - 1)
                .map(|_| {
                    let id = pool[cursor];
                    cursor = (cursor + 1) % pool.len();
                    Member { id, graph: &ds.graphs[id] }
                })
                .collect();
            let batch = Batch::new(Member { id: anchor, graph: &ds.graphs[anchor] }, unlabeled)?;
            supervised_ids.push(anchor);
            let m = match train_step(&mut model, &mut optimizer, &batch, &train_cfg, mix_seed(epoch_seed, &[fold as u64])) {
                // overflowed parameters surface as NaN arguments inside the forward pass
                Err(Error::Autodiff(AutodiffError::Domain { value, .. })) if !value.is_finite() => return Err(Error::NonFinite { epoch }),
                r => r?,
            };
            if !m.is_finite() || !model.store.all_finite() {
                return Err(Error::NonFinite { epoch });
            }
            total += m.total;
            supervised += m.supervised;
            contrastive += m.contrastive.unwrap_or(0.0);
        }
        let k = anchors.len() as f64;
        let has_contrastive = cfg.weight_of_contrastive_learning != 0.0;
        trace.push(EpochLoss {
            epoch,
            total: total / k,
            supervised: supervised / k,
            contrastive: has_contrastive.then_some(contrastive / k),
        });
    }

    let correct = split
        .test
        .iter()
        .map(|&t| Ok(Some(model.classify(&ds.graphs[t])?) == ds.graphs[t].label()))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&c| c)
        .count();
    supervised_ids.sort_unstable();
    supervised_ids.dedup();
    Ok(FoldResult { fold, accuracy: correct as f64 / split.test.len() as f64, trace, supervised_ids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub loss_traces: Vec<Vec<EpochLoss>>,
}

impl MetricsRecord {
    pub fn from_folds(mut folds: Vec<FoldResult>) -> Result<Self> {
        if folds.is_empty() {
            return Err(contract("no folds to aggregate"));
        }
        folds.sort_by_key(|f| f.fold);
        let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let (mean, std) = mean_std(&fold_accuracies);
        Ok(Self { fold_accuracies, mean, std, loss_traces: folds.into_iter().map(|f| f.trace).collect() })
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// All folds in sequence on a prepared dataset.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let splits = split_folds(ds.len(), cfg)?;
    let folds = splits.iter().enumerate().map(|(k, s)| run_fold(ds, s, cfg, k)).collect::<Result<Vec<_>>>()?;
    MetricsRecord::from_folds(folds)
}

/// Fraction of `ids` carrying the most frequent label among them.
pub fn majority_rate(ds: &Dataset, ids: &[usize]) -> f64 {
    let mut counts = alloc::vec![0usize; ds.num_classes];
    ids.iter().filter_map(|&i| ds.graphs[i].label()).for_each(|l| counts[l] += 1);
    counts.into_iter().max().unwrap_or(0) as f64 / ids.len().max(1) as f64
}
