//! Layer activation functions and their backward rules.

/// Element-wise (or, for softmax, row-wise) activation applied after the
/// affine part of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Row-wise softmax, computed with max-subtraction for stability.
    Softmax,
    Identity,
}

impl Activation {
    /// A stable tag used by checkpoint files and error messages.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Softmax => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Softmax),
            3 => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    /// Applies the activation to one row of pre-activations, writing outputs.
    pub fn apply_row(self, pre: &[f64], out: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (o, &z) in out.iter_mut().zip(pre) {
                    *o = if z > 0.0 { z } else { 0.0 };
                }
            }
            Activation::Sigmoid => {
                for (o, &z) in out.iter_mut().zip(pre) {
                    *o = 1.0 / (1.0 + (-z).exp());
                }
            }
            Activation::Softmax => {
                let max = pre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (o, &z) in out.iter_mut().zip(pre) {
                    let e = (z - max).exp();
                    *o = e;
                    sum += e;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
            }
            Activation::Identity => out.copy_from_slice(pre),
        }
    }

    /// Converts one row of upstream gradients dL/da into dL/dz, given the
    /// row's pre-activations `pre` and outputs `act`.
    ///
    /// ReLU uses the subgradient 0 at z = 0. Softmax applies the full
    /// Jacobian-vector product `dz_j = a_j (g_j - sum_k g_k a_k)` so it
    /// composes with any loss.
    pub fn backward_row(self, pre: &[f64], act: &[f64], grad_out: &[f64], grad_pre: &mut [f64]) {
        match self {
            Activation::Relu => {
                for ((d, &z), &g) in grad_pre.iter_mut().zip(pre).zip(grad_out) {
                    *d = if z > 0.0 { g } else { 0.0 };
                }
            }
            Activation::Sigmoid => {
                for ((d, &a), &g) in grad_pre.iter_mut().zip(act).zip(grad_out) {
                    *d = g * a * (1.0 - a);
                }
            }
            Activation::Softmax => {
                let dot: f64 = grad_out.iter().zip(act).map(|(&g, &a)| g * a).sum();
                for ((d, &a), &g) in grad_pre.iter_mut().zip(act).zip(grad_out) {
                    *d = a * (g - dot);
                }
            }
            Activation::Identity => grad_pre.copy_from_slice(grad_out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut out = [0.0];
        Activation::Sigmoid.apply_row(&[0.0], &mut out);
        assert_eq!(out[0], 0.5);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let pre = [3.0, -1.0, 700.0, 0.25];
        let mut out = [0.0; 4];
        Activation::Softmax.apply_row(&pre, &mut out);
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(out.iter().all(|p| p.is_finite() && *p >= 0.0));
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut out = [0.0; 3];
        Activation::Relu.apply_row(&[-2.0, 0.0, 2.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 2.0]);
    }

    #[test]
    fn tags_round_trip() {
        for a in [Activation::Relu, Activation::Sigmoid, Activation::Softmax, Activation::Identity] {
            assert_eq!(Activation::from_tag(a.tag()), Some(a));
        }
        assert_eq!(Activation::from_tag(9), None);
    }
}
