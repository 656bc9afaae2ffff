//! Flat parameter vectors.
//!
//! A [`ParamVector`] is the unit of aggregation, encryption, and transfer.
//! Its layout is a documented total order: for each layer in network order,
//! the weight matrix in row-major order (output-major), then the bias vector.
//! Composite models concatenate their sub-networks in a fixed order
//! documented at the model type.

use crate::error::{Error, Result};

/// Flat, deterministically ordered vector of all weights and biases of one
/// model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Concatenates several vectors in the given order.
    pub fn concat(parts: &[&ParamVector]) -> Self {
        let mut values = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            values.extend_from_slice(&p.values);
        }
        Self { values }
    }

    /// Scales every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Largest absolute coordinate-wise difference to another vector.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "comparing vectors of unequal length");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// One plain SGD step: `out[i] = params[i] - lr * grads[i]`, exactly.
pub fn sgd_step(params: &ParamVector, grads: &ParamVector, lr: f64) -> Result<ParamVector> {
    if params.len() != grads.len() {
        return Err(Error::DimMismatch(format!(
            "sgd_step: {} parameters vs {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
    }
    if grads.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("sgd_step gradients".into()));
    }
    let values = params
        .as_slice()
        .iter()
        .zip(grads.as_slice())
        .map(|(p, g)| p - lr * g)
        .collect();
    Ok(ParamVector::new(values))
}
