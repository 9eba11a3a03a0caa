use std::path::Path;

use dsgc::{runner, tu};
use dsgc_core::encoder::EncoderKind;
use dsgc_core::experiment::{majority_rate, prepare_dataset, split_folds, ExperimentConfig};
use dsgc_core::graph::Dataset;

fn mutag(cfg: &ExperimentConfig) -> Dataset {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    prepare_dataset(&tu::load(&dir).unwrap(), cfg)
}

fn quick() -> ExperimentConfig {
    ExperimentConfig { number_of_training_epoch: 2, label_ratio: 0.1, ..ExperimentConfig::default() }
}

#[test]
fn encoder_grid_covers_all_pairs_and_matches_standalone_runs() {
    let cfg = ExperimentConfig { number_of_training_epoch: 1, ..quick() };
    let ds = mutag(&cfg);
    let grid = runner::encoder_pair_grid(&ds, &cfg, &EncoderKind::ALL, 2).unwrap();
    assert_eq!(grid.len(), 16);
    for e in EncoderKind::ALL {
        for h in EncoderKind::ALL {
            assert_eq!(grid.iter().filter(|g| g.euclidean == e && g.hyperbolic == h).count(), 1);
        }
    }
    for g in grid.iter().filter(|g| g.euclidean == g.hyperbolic) {
        let single = ExperimentConfig { euclidean_encoder: g.euclidean, hyperbolic_encoder: g.hyperbolic, ..cfg.clone() };
        assert_eq!(g.record, runner::run_experiment(&ds, &single, 1).unwrap(), "{}", g.euclidean);
    }
}

#[test]
fn dimension_sweep_entry_matches_a_standalone_run() {
    let cfg = quick();
    let ds = mutag(&cfg);
    let sweep = runner::hidden_dim_sweep(&ds, &cfg, &runner::SWEEP_DIMS, 1).unwrap();
    assert_eq!(sweep.iter().map(|(d, _)| *d).collect::<Vec<_>>(), runner::SWEEP_DIMS);
    let (_, at16) = sweep.iter().find(|(d, _)| *d == 16).unwrap();
    let single = ExperimentConfig { hidden_dimension: 16, ..cfg.clone() };
    assert_eq!(at16, &runner::run_experiment(&ds, &single, 1).unwrap());
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let cfg = quick();
    let ds = mutag(&cfg);
    let a = runner::run_experiment(&ds, &cfg, 1).unwrap();
    assert_eq!(a, runner::run_experiment(&ds, &cfg, 1).unwrap());
    assert_eq!(a, runner::run_experiment(&ds, &cfg, 3).unwrap());
    assert_eq!(a, dsgc_core::experiment::run_experiment(&ds, &cfg).unwrap());
    let other = runner::run_experiment(&ds, &ExperimentConfig { seed: cfg.seed + 1, ..cfg.clone() }, 1).unwrap();
    assert_ne!(a.loss_traces, other.loss_traces);
}

#[test]
fn supervised_only_ablation_beats_the_majority_class() {
    let cfg = ExperimentConfig { weight_of_contrastive_learning: 0.0, ..ExperimentConfig::default() };
    let ds = mutag(&cfg);
    let record = runner::run_experiment(&ds, &cfg, 1).unwrap();
    let splits = split_folds(ds.len(), &cfg).unwrap();
    let majority = splits.iter().map(|s| majority_rate(&ds, &s.test)).sum::<f64>() / splits.len() as f64;
    assert!(record.mean >= majority, "mean {:.4} below majority {majority:.4}", record.mean);
    assert!(record.loss_traces.iter().flatten().all(|e| e.contrastive.is_none()));
}
