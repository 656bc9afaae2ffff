//! Regression and classification metrics.

use crate::error::{Error, Result};
use crate::synthgen::N_LEVELS;

/// Mean absolute and mean squared error.
pub fn mae_mse(y: &[f64], yhat: &[f64]) -> Result<(f64, f64)> {
    if y.is_empty() {
        return Err(Error::EmptyInput("regression metric input"));
    }
    if y.len() != yhat.len() {
        return Err(Error::DimMismatch(format!(
            "{} ground truth values vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    let n = y.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (a, b) in y.iter().zip(yhat) {
        let d = a - b;
        abs += d.abs();
        sq += d * d;
    }
    Ok((abs / n, sq / n))
}

/// Macro-averaged precision, recall, and F1 over `n_classes` labels in
/// `1..=n_classes`.
///
/// Per class, zero denominators follow the 0-convention: a class with no
/// predictions has precision 0, a class with no true members has recall 0,
/// and a class absent from both contributes 0 to every macro mean.
pub fn macro_prf1(y: &[u8], yhat: &[u8], n_classes: usize) -> Result<(f64, f64, f64)> {
    if y.is_empty() {
        return Err(Error::EmptyInput("classification metric input"));
    }
    if y.len() != yhat.len() {
        return Err(Error::DimMismatch(format!(
            "{} labels vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    for &l in y.iter().chain(yhat) {
        if l == 0 || l as usize > n_classes {
            return Err(Error::InvalidArgument(format!("label {l} outside 1..={n_classes}")));
        }
    }

    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in y.iter().zip(yhat) {
        let (t, p) = ((t - 1) as usize, (p - 1) as usize);
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }

    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut f1_sum = 0.0;
    for k in 0..n_classes {
        let prec = if tp[k] + fp[k] > 0 { tp[k] as f64 / (tp[k] + fp[k]) as f64 } else { 0.0 };
        let rec = if tp[k] + fn_[k] > 0 { tp[k] as f64 / (tp[k] + fn_[k]) as f64 } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        prec_sum += prec;
        rec_sum += rec;
        f1_sum += f1;
    }
    let k = n_classes as f64;
    Ok((prec_sum / k, rec_sum / k, f1_sum / k))
}

/// The full evaluation record of one experiment run: imputation error over
/// the target's regions plus macro task metrics on the held-out split.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Ground-truth label counts of the evaluated rows, per level.
    pub support: [usize; N_LEVELS],
}

impl MetricsReport {
    pub fn support_of(labels: &[u8]) -> [usize; N_LEVELS] {
        let mut support = [0usize; N_LEVELS];
        for &l in labels {
            if (1..=N_LEVELS as u8).contains(&l) {
                support[(l - 1) as usize] += 1;
            }
        }
        support
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_vanish_on_perfect_predictions() {
        let (mae, mse) = mae_mse(&[0.5, 1.5], &[0.5, 1.5]).unwrap();
        assert_eq!((mae, mse), (0.0, 0.0));
    }

    #[test]
    fn error_hand_cases() {
        let (mae, mse) = mae_mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((mae, mse), (1.0, 1.0));
        let (mae, mse) = mae_mse(&[0.0], &[3.0]).unwrap();
        assert_eq!((mae, mse), (3.0, 9.0));
    }

    #[test]
    fn errors_reject_bad_input() {
        assert!(mae_mse(&[], &[]).is_err());
        assert!(mae_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn perfect_classification_scores_one() {
        let y = [1u8, 2, 3, 4, 5, 1];
        let (p, r, f1) = macro_prf1(&y, &y, 5).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_class_confusion_hand_case() {
        // Confusion [[1, 1], [0, 2]]: true 1 predicted (1, 2); true 2
        // predicted (2, 2). Class F1s are 2/3 and 4/5.
        let y = [1u8, 1, 2, 2];
        let yhat = [1u8, 2, 2, 2];
        let (p, r, f1) = macro_prf1(&y, &yhat, 2).unwrap();
        assert!((p - (1.0 + 2.0 / 3.0) / 2.0).abs() <= 1e-12);
        assert!((r - (0.5 + 1.0) / 2.0).abs() <= 1e-12);
        assert!((f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() <= 1e-12);
        assert!((f1 - 0.73333333).abs() <= 1e-6);
    }

    #[test]
    fn absent_class_contributes_zero() {
        // Class 3 never appears in truth or prediction; classes 1 and 2 are
        // perfect, so every macro metric is 2/3.
        let y = [1u8, 2];
        let (p, r, f1) = macro_prf1(&y, &y, 3).unwrap();
        assert!((p - 2.0 / 3.0).abs() <= 1e-12);
        assert!((r - 2.0 / 3.0).abs() <= 1e-12);
        assert!((f1 - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        assert!(macro_prf1(&[0], &[1], 5).is_err());
        assert!(macro_prf1(&[1], &[6], 5).is_err());
        assert!(macro_prf1(&[], &[], 5).is_err());
    }

    #[test]
    fn support_counts_levels() {
        let s = MetricsReport::support_of(&[1, 1, 2, 5, 5, 5]);
        assert_eq!(s, [2, 1, 0, 0, 3]);
    }
}
