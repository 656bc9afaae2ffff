//! Loss functions shared by the two modules.

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

/// Clamp added inside every `ln` so a zero probability at a true label stays
/// finite. The gradient uses the same clamped form, so analytic and numeric
/// derivatives agree.
pub const CE_EPSILON: f64 = 1e-12;

/// Mean squared error `(1/N) sum (a_i - pred_i)^2`.
pub fn mean_squared_error(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyInput("regression batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::DimMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, a)| (a - p) * (a - p)).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean cross-entropy `(1/N) sum_i sum_j -y_ij ln(p_ij + eps)` over one-hot
/// (or soft) label rows.
pub fn mean_cross_entropy(probs: &Tensor2D, labels: &Tensor2D) -> Result<f64> {
    if probs.rows() == 0 {
        return Err(Error::EmptyInput("classification batch"));
    }
    if probs.rows() != labels.rows() || probs.cols() != labels.cols() {
        return Err(Error::DimMismatch(format!(
            "probabilities are {}x{}, labels are {}x{}",
            probs.rows(),
            probs.cols(),
            labels.rows(),
            labels.cols()
        )));
    }
    let mut sum = 0.0;
    for (p, y) in probs.data().iter().zip(labels.data()) {
        if *y != 0.0 {
            sum -= y * (p + CE_EPSILON).ln();
        }
    }
    Ok(sum / probs.rows() as f64)
}

/// Gradient of [`mean_squared_error`] with respect to the predictions,
/// shaped as an `N x 1` tensor: `2 (pred_i - a_i) / N`.
pub(crate) fn mse_grad(pred: &[f64], target: &[f64]) -> Tensor2D {
    let n = pred.len() as f64;
    let values = pred.iter().zip(target).map(|(p, a)| 2.0 * (p - a) / n).collect();
    Tensor2D::from_vec(pred.len(), 1, values).expect("sized by construction")
}

/// Gradient of [`mean_cross_entropy`] with respect to the probabilities:
/// `-y_ij / (p_ij + eps) / N`.
pub(crate) fn cross_entropy_grad(probs: &Tensor2D, labels: &Tensor2D) -> Tensor2D {
    let n = probs.rows() as f64;
    let mut grad = Tensor2D::zeros(probs.rows(), probs.cols());
    for ((g, p), y) in grad.data_mut().iter_mut().zip(probs.data()).zip(labels.data()) {
        if *y != 0.0 {
            *g = -y / (p + CE_EPSILON) / n;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::batch::one_hot_from_labels;

    #[test]
    fn mse_of_perfect_predictions_is_zero() {
        assert_eq!(mean_squared_error(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn mse_hand_case() {
        // a = [0, 1], pred = [1, 0] -> ((0-1)^2 + (1-0)^2) / 2 = 1.
        assert_eq!(mean_squared_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn mse_is_quadratic_in_the_residual() {
        // Base residuals (0.3, -0.3); tripled residuals (0.9, -0.9) must
        // multiply the loss by 9.
        let base = mean_squared_error(&[0.2, 0.4], &[0.5, 0.1]).unwrap();
        let tripled = mean_squared_error(&[0.5 - 0.9, 0.1 + 0.9], &[0.5, 0.1]).unwrap();
        assert!((tripled - 9.0 * base).abs() <= 1e-12);
    }

    #[test]
    fn mse_rejects_empty_and_ragged_input() {
        assert!(mean_squared_error(&[], &[]).is_err());
        assert!(mean_squared_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cross_entropy_of_perfect_one_hot_predictions_is_zero() {
        let y = one_hot_from_labels(&[1, 2], 2).unwrap();
        let ce = mean_cross_entropy(&y, &y).unwrap();
        assert!(ce.abs() <= 1e-10);
    }

    #[test]
    fn cross_entropy_of_uniform_two_class_predictions_is_ln2() {
        let probs = Tensor2D::from_vec(2, 2, vec![0.5; 4]).unwrap();
        let y = one_hot_from_labels(&[1, 2], 2).unwrap();
        let ce = mean_cross_entropy(&probs, &y).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() <= 1e-9);
    }

    #[test]
    fn cross_entropy_hand_case() {
        let probs = Tensor2D::from_vec(1, 2, vec![0.9, 0.1]).unwrap();
        let y = one_hot_from_labels(&[1], 2).unwrap();
        let ce = mean_cross_entropy(&probs, &y).unwrap();
        assert!((ce - (-(0.9f64).ln())).abs() <= 1e-9);
        assert!((ce - 0.105361).abs() <= 1e-6);
    }

    #[test]
    fn cross_entropy_guards_zero_probability() {
        let probs = Tensor2D::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let y = one_hot_from_labels(&[1], 2).unwrap();
        let ce = mean_cross_entropy(&probs, &y).unwrap();
        assert!(ce.is_finite());
    }
}
