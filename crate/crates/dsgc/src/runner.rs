//! Experiment orchestration with folds spread over worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dsgc_core::encoder::EncoderKind;
use dsgc_core::experiment::{self, ExperimentConfig, FoldResult, MetricsRecord};
use dsgc_core::graph::Dataset;

/// Hidden widths compared by the dimension sweep.
pub const SWEEP_DIMS: [usize; 4] = [8, 16, 32, 64];

/// Runs every fold on a prepared dataset using up to `workers` threads.
/// Results do not depend on `workers`.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig, workers: usize) -> dsgc_core::Result<MetricsRecord> {
    cfg.validate()?;
    let splits = experiment::split_folds(ds.len(), cfg)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<dsgc_core::Result<FoldResult>>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, splits.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(split) = splits.get(k) else { break };
                let r = experiment::run_fold(ds, split, cfg, k);
                results.lock().unwrap().push(r);
            });
        }
    });
    let mut folds = results.into_inner().unwrap().into_iter().collect::<dsgc_core::Result<Vec<_>>>()?;
    folds.sort_by_key(|f| f.fold);
    MetricsRecord::from_folds(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub euclidean: EncoderKind,
    pub hyperbolic: EncoderKind,
    pub record: MetricsRecord,
}

/// One run per (Euclidean kind, hyperbolic kind) pair, row-major over `kinds`.
pub fn encoder_pair_grid(ds: &Dataset, cfg: &ExperimentConfig, kinds: &[EncoderKind], workers: usize) -> dsgc_core::Result<Vec<GridEntry>> {
    let mut grid = Vec::with_capacity(kinds.len() * kinds.len());
    for &euclidean in kinds {
        for &hyperbolic in kinds {
            let c = ExperimentConfig { euclidean_encoder: euclidean, hyperbolic_encoder: hyperbolic, ..cfg.clone() };
            grid.push(GridEntry { euclidean, hyperbolic, record: run_experiment(ds, &c, workers)? });
        }
    }
    Ok(grid)
}

/// One run per hidden width.
pub fn hidden_dim_sweep(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    dims: &[usize],
    workers: usize,
) -> dsgc_core::Result<Vec<(usize, MetricsRecord)>> {
    dims.iter().map(|&d| Ok((d, run_experiment(ds, &ExperimentConfig { hidden_dimension: d, ..cfg.clone() }, workers)?))).collect()
}
