//! The task classifier: consumption-power level prediction over five
//! classes, on the full feature vector including the (true or imputed)
//! consumption population.

use crate::error::{Error, Result};
use crate::models::batch::TrainBatch;
use crate::models::loss::{cross_entropy_grad, mean_cross_entropy};
use crate::nn::{Activation, Mlp, ParamVector, Tensor2D};
use crate::synthgen::N_LEVELS;

/// Task predictor wrapping a single dense stack with a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct UtpModel {
    net: Mlp,
}

impl UtpModel {
    /// Standard hidden widths.
    pub const STANDARD_HIDDEN: [usize; 3] = [256, 64, 32];

    /// Builds the classifier: `input -> hidden... -> 5`, ReLU hidden layers
    /// and a softmax head.
    pub fn init(input: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(N_LEVELS);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Softmax);
        Ok(Self { net: Mlp::init(&dims, &acts, seed)? })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.output_dim() != N_LEVELS {
            return Err(Error::DimMismatch(format!(
                "task net must output {N_LEVELS} classes, got {}",
                net.output_dim()
            )));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Class probabilities, one row per input row.
    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        let (probs, _) = self.net.forward(x)?;
        Ok(probs)
    }

    /// Mean cross-entropy over the five levels plus its parameter gradient.
    pub fn loss_and_grads(&self, batch: &TrainBatch) -> Result<(f64, ParamVector)> {
        batch.validate()?;
        let labels = batch
            .task_label
            .as_ref()
            .ok_or_else(|| Error::MissingLabels("task batch needs task_label".into()))?;
        let (probs, cache) = self.net.forward(&batch.x)?;
        let loss = mean_cross_entropy(&probs, labels)?;
        let (grads, _) = self.net.backward(&cache, &cross_entropy_grad(&probs, labels))?;
        Ok((loss, grads))
    }

    pub fn flatten_params(&self) -> ParamVector {
        self.net.flatten_params()
    }

    pub fn unflatten_params(&self, vec: &ParamVector) -> Result<UtpModel> {
        Ok(UtpModel { net: self.net.unflatten_params(vec)? })
    }

    pub fn sgd_step_inplace(&mut self, grads: &ParamVector, lr: f64) -> Result<()> {
        self.net.sgd_step_inplace(grads, lr)
    }
}
