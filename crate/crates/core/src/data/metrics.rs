use crate::error::{Result, RrlError};

/// `M × M` confusion matrix, rows indexed by the true class.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], m: usize) -> Result<Vec<Vec<usize>>> {
    if y_true.len() != y_pred.len() {
        return Err(RrlError::Shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = vec![vec![0; m]; m];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= m || p >= m {
            return Err(RrlError::OutOfRange(format!(
                "class index {} with only {m} classes",
                t.max(p)
            )));
        }
        cm[t][p] += 1;
    }
    Ok(cm)
}

/// Unweighted mean of the per-class F1 scores. A class whose F1 has a zero
/// denominator scores 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(RrlError::InvalidArgument("no classes".into()));
    }
    let cm = confusion_matrix(y_true, y_pred, m)?;
    let mut total = 0.0;
    for c in 0..m {
        let tp = cm[c][c];
        let fp: usize = (0..m).filter(|&r| r != c).map(|r| cm[r][c]).sum();
        let fneg: usize = (0..m).filter(|&p| p != c).map(|p| cm[c][p]).sum();
        let denom = 2 * tp + fp + fneg;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(total / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_scores() {
        assert_eq!(macro_f1(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 1.0);
        assert_abs_diff_eq!(
            macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap(),
            (2.0 / 3.0 + 4.0 / 5.0) / 2.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(macro_f1(&[0, 1], &[0, 0], 2).unwrap(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn contract_errors() {
        assert!(macro_f1(&[0, 1], &[0], 2).is_err());
        assert!(macro_f1(&[0, 2], &[0, 1], 2).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
            seed in any::<u64>(),
        ) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let base = macro_f1(&t, &p, 4).unwrap();
            let mut shuffled = pairs.clone();
            crate::numerics::Rng::new(seed).shuffle(&mut shuffled);
            let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            prop_assert_eq!(base, macro_f1(&t2, &p2, 4).unwrap());
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
