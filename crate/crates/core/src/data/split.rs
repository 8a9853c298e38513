use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, RrlError};
use crate::numerics::Rng;

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Indices of the training rows and test rows of `fold`.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        assert!(fold < self.k, "fold {fold} out of range for k={}", self.k);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

fn indices_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.class_count()];
    for (i, &c) in ds.classes().iter().enumerate() {
        by_class[c].push(i);
    }
    by_class
}

/// Stratified k-fold plan. Each class is shuffled and dealt round-robin,
/// with the dealing position carried over between classes so that fold sizes
/// also stay within one of each other.
pub fn stratified_kfold(ds: &Dataset, k: usize, rng: &mut Rng) -> Result<FoldPlan> {
    if k < 2 {
        return Err(RrlError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let names = ds.schema().class_names();
    let mut by_class = indices_by_class(ds);
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(RrlError::InvalidArgument(format!(
                "class `{}` has {} instances, fewer than k={k}",
                names[c],
                idx.len()
            )));
        }
    }
    let mut assignments = vec![0; ds.len()];
    let mut next = 0;
    for idx in &mut by_class {
        rng.shuffle(idx);
        for &i in idx.iter() {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignments })
}

/// Stratified split into a training part holding `fraction` of the rows and
/// a validation part holding the rest.
pub fn split_train_validation(
    ds: &Dataset,
    fraction: f64,
    rng: &mut Rng,
) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(RrlError::InvalidArgument(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = ds.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(RrlError::InvalidArgument(format!(
            "fraction {fraction} of {n} rows leaves an empty split"
        )));
    }
    // Largest-remainder allocation of the training quota over classes.
    let by_class = indices_by_class(ds);
    let exact: Vec<f64> = by_class
        .iter()
        .map(|idx| idx.len() as f64 * n_train as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..by_class.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = n_train - quota.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            missing -= 1;
        }
    }

    let mut train = Vec::with_capacity(n_train);
    let mut valid = Vec::with_capacity(n - n_train);
    for (mut idx, q) in by_class.into_iter().zip(quota) {
        rng.shuffle(&mut idx);
        train.extend_from_slice(&idx[..q]);
        valid.extend_from_slice(&idx[q..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&valid)))
}
