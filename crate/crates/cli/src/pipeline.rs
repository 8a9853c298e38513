//! Training and cross-validation runs shared by the commands and the
//! acceptance suite.

use rrl_core::binarizer::sample_bounds;
use rrl_core::data::{macro_f1, split_train_validation, stratified_kfold, Dataset};
use rrl_core::model::RrlModel;
use rrl_core::numerics::Rng;
use rrl_core::rules::{extract, ExtractOptions, RuleSet};
use rrl_core::trainer::{fit_with, EpochRecord, FitResult};
use rrl_core::Result;

use crate::settings::Settings;

pub const TRAIN_FRACTION: f64 = 0.95;

// Streams derived from the master seed. Fold `f` of a cross-validation run
// uses the sub-generator `FOLD_BASE + f` and, inside it, the same streams a
// plain training run uses.
const SPLIT_STREAM: u64 = 1;
const BOUNDS_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const FOLD_PLAN_STREAM: u64 = 4;
const FOLD_BASE: u64 = 100;

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub fit: FitResult,
    pub train: Dataset,
    pub valid: Dataset,
    pub ruleset: RuleSet,
}

/// Splits `ds` 95/5, samples bounds from the training part, builds and fits
/// a model, and extracts the rule set of the selected snapshot.
pub fn train_run(
    ds: &Dataset,
    settings: &Settings,
    rng: &Rng,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainRun> {
    let (train, valid) = split_train_validation(ds, TRAIN_FRACTION, &mut rng.derive(SPLIT_STREAM))?;
    let bounds = sample_bounds(&train, settings.bounds_k, &mut rng.derive(BOUNDS_STREAM))?;
    let model = RrlModel::new(ds.schema().clone(), bounds, &settings.model, &mut rng.derive(INIT_STREAM))?;
    let fit = fit_with(model, &train, Some(&valid), &settings.train, on_epoch)?;
    let ruleset = extract(&fit.model, &ExtractOptions::default())?;
    Ok(TrainRun {
        fit,
        train,
        valid,
        ruleset,
    })
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    /// Rows of the full dataset held out in this fold.
    pub test_indices: Vec<usize>,
    pub train_size: usize,
    pub macro_f1: f64,
    pub edges: usize,
    pub best_epoch: usize,
    pub model: RrlModel,
    pub ruleset: RuleSet,
}

impl FoldResult {
    /// Natural log of the edge count, with an empty rule set counted as one
    /// edge so the value stays finite.
    pub fn log_edges(&self) -> f64 {
        (self.edges.max(1) as f64).ln()
    }
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
}

impl CvResult {
    pub fn mean_f1(&self) -> f64 {
        mean(self.folds.iter().map(|f| f.macro_f1))
    }

    /// Sample standard deviation of the fold scores.
    pub fn std_f1(&self) -> f64 {
        let n = self.folds.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_f1();
        let ss: f64 = self.folds.iter().map(|f| (f.macro_f1 - m).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    pub fn mean_log_edges(&self) -> f64 {
        mean(self.folds.iter().map(FoldResult::log_edges))
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n.max(1) as f64
}

/// Stratified `k`-fold cross-validation. Every fold samples its own bounds
/// from its training portion and is scored with the discrete model.
pub fn cross_validate(
    ds: &Dataset,
    settings: &Settings,
    k: usize,
    seed: u64,
    mut on_fold: impl FnMut(&FoldResult),
) -> Result<CvResult> {
    let master = Rng::new(seed);
    let plan = stratified_kfold(ds, k, &mut master.derive(FOLD_PLAN_STREAM))?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (train_idx, test_idx) = plan.train_test(fold);
        let train = ds.subset(&train_idx);
        let test = ds.subset(&test_idx);
        let run = train_run(&train, settings, &master.derive(FOLD_BASE + fold as u64), |_| {})?;
        let pred = run.fit.model.predict(&test)?;
        let result = FoldResult {
            fold,
            test_indices: test_idx,
            train_size: train.len(),
            macro_f1: macro_f1(test.classes(), &pred, ds.class_count())?,
            edges: run.ruleset.edge_count,
            best_epoch: run.fit.best_epoch,
            model: run.fit.model,
            ruleset: run.ruleset,
        };
        on_fold(&result);
        folds.push(result);
    }
    Ok(CvResult { folds })
}
