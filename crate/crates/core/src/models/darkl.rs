//! The relational-knowledge module: a shared feature extractor feeding a
//! data regressor and an adversarial domain classifier.
//!
//! The domain classifier itself minimizes its cross-entropy, while the
//! feature extractor receives that gradient through a reversal layer: during
//! the backward pass the classifier's input gradient is multiplied by
//! `-lambda` before entering the extractor. The extractor therefore descends
//! `L_dr - lambda * L_dc` while the classifier keeps learning to tell
//! domains apart.

use crate::error::{Error, Result};
use crate::models::batch::TrainBatch;
use crate::models::loss::{
    cross_entropy_grad, mean_cross_entropy, mean_squared_error, mse_grad,
};
use crate::nn::{Activation, Mlp, ParamVector, Tensor2D};
use crate::seeding::derive_seed;

/// Layer widths of the three sub-networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DarklDims {
    pub input: usize,
    pub fe_hidden: Vec<usize>,
    pub dr_hidden: Vec<usize>,
    pub dc_hidden: Vec<usize>,
    pub n_domains: usize,
}

impl DarklDims {
    /// The standard widths: extractor 256/128, regressor 64/32 with a scalar
    /// sigmoid head, classifier 64 with a softmax head over the domains.
    pub fn standard(input: usize, n_domains: usize) -> Self {
        Self {
            input,
            fe_hidden: vec![256, 128],
            dr_hidden: vec![64, 32],
            dc_hidden: vec![64],
            n_domains,
        }
    }
}

/// Domain-adaptive relational-knowledge model.
///
/// Parameter vectors concatenate the three sub-networks in the fixed order
/// feature extractor, data regressor, domain classifier, each in
/// [`Mlp::flatten_params`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DarklModel {
    feature_extractor: Mlp,
    data_regressor: Mlp,
    domain_classifier: Mlp,
    lambda: f64,
}

impl DarklModel {
    /// Initializes the three sub-networks from `seed` (each from its own
    /// derived sub-seed).
    pub fn init(dims: &DarklDims, lambda: f64, seed: u64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if dims.n_domains == 0 {
            return Err(Error::InvalidArgument("n_domains must be > 0".into()));
        }

        let mut fe_dims = vec![dims.input];
        fe_dims.extend_from_slice(&dims.fe_hidden);
        let fe_acts = vec![Activation::Relu; dims.fe_hidden.len()];
        let feature_extractor = Mlp::init(&fe_dims, &fe_acts, derive_seed(seed, 0))?;
        let latent = *fe_dims.last().expect("non-empty");

        let mut dr_dims = vec![latent];
        dr_dims.extend_from_slice(&dims.dr_hidden);
        dr_dims.push(1);
        let mut dr_acts = vec![Activation::Relu; dims.dr_hidden.len()];
        dr_acts.push(Activation::Sigmoid);
        let data_regressor = Mlp::init(&dr_dims, &dr_acts, derive_seed(seed, 1))?;

        let mut dc_dims = vec![latent];
        dc_dims.extend_from_slice(&dims.dc_hidden);
        dc_dims.push(dims.n_domains);
        let mut dc_acts = vec![Activation::Relu; dims.dc_hidden.len()];
        dc_acts.push(Activation::Softmax);
        let domain_classifier = Mlp::init(&dc_dims, &dc_acts, derive_seed(seed, 2))?;

        Ok(Self { feature_extractor, data_regressor, domain_classifier, lambda })
    }

    /// Assembles a model from explicit sub-networks (checkpoint loading).
    pub fn from_parts(
        feature_extractor: Mlp,
        data_regressor: Mlp,
        domain_classifier: Mlp,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        let latent = feature_extractor.output_dim();
        if data_regressor.input_dim() != latent || domain_classifier.input_dim() != latent {
            return Err(Error::DimMismatch(format!(
                "heads expect inputs {} and {}, extractor emits {latent}",
                data_regressor.input_dim(),
                domain_classifier.input_dim()
            )));
        }
        if data_regressor.output_dim() != 1 {
            return Err(Error::DimMismatch("regression head must output one value".into()));
        }
        Ok(Self { feature_extractor, data_regressor, domain_classifier, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn feature_extractor(&self) -> &Mlp {
        &self.feature_extractor
    }

    pub fn data_regressor(&self) -> &Mlp {
        &self.data_regressor
    }

    pub fn domain_classifier(&self) -> &Mlp {
        &self.domain_classifier
    }

    pub fn input_dim(&self) -> usize {
        self.feature_extractor.input_dim()
    }

    pub fn n_domains(&self) -> usize {
        self.domain_classifier.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.feature_extractor.param_count()
            + self.data_regressor.param_count()
            + self.domain_classifier.param_count()
    }

    /// Runs the extractor once and both heads on its output.
    pub fn forward(&self, x: &Tensor2D) -> Result<(Vec<f64>, Tensor2D)> {
        let (latent, _) = self.feature_extractor.forward(x)?;
        let (cp, _) = self.data_regressor.forward(&latent)?;
        let (domain_probs, _) = self.domain_classifier.forward(&latent)?;
        Ok((cp.data().to_vec(), domain_probs))
    }

    /// Regression head only: predicts the normalized consumption value for
    /// each row. Pure, the model is not modified.
    pub fn impute(&self, x: &Tensor2D) -> Result<Vec<f64>> {
        let (latent, _) = self.feature_extractor.forward(x)?;
        let (cp, _) = self.data_regressor.forward(&latent)?;
        Ok(cp.data().to_vec())
    }

    /// Computes `l1 = L_dr - lambda * L_dc` and the full parameter gradient
    /// with gradient-reversal semantics:
    ///
    /// - regressor parameters get `dL_dr`
    /// - classifier parameters get `+dL_dc` (the classifier keeps learning)
    /// - extractor parameters get `dL_dr - lambda * dL_dc`
    pub fn loss_and_grads(&self, batch: &TrainBatch) -> Result<(f64, ParamVector)> {
        batch.validate()?;
        let cp_target = batch
            .cp_target
            .as_ref()
            .ok_or_else(|| Error::MissingLabels("relational batch needs cp_target".into()))?;
        let domain_label = batch
            .domain_label
            .as_ref()
            .ok_or_else(|| Error::MissingLabels("relational batch needs domain_label".into()))?;
        if domain_label.cols() != self.n_domains() {
            return Err(Error::DimMismatch(format!(
                "domain one-hot has {} columns, model has {} domains",
                domain_label.cols(),
                self.n_domains()
            )));
        }

        let (latent, fe_cache) = self.feature_extractor.forward(&batch.x)?;
        let (cp_out, dr_cache) = self.data_regressor.forward(&latent)?;
        let (domain_probs, dc_cache) = self.domain_classifier.forward(&latent)?;

        let cp_hat = cp_out.data();
        let l_dr = mean_squared_error(cp_hat, cp_target)?;
        let l_dc = mean_cross_entropy(&domain_probs, domain_label)?;
        let l1 = l_dr - self.lambda * l_dc;

        let (dr_grads, dr_input_grad) =
            self.data_regressor.backward(&dr_cache, &mse_grad(cp_hat, cp_target))?;
        let (dc_grads, dc_input_grad) = self
            .domain_classifier
            .backward(&dc_cache, &cross_entropy_grad(&domain_probs, domain_label))?;

        // Reversal layer: the classifier's contribution to the extractor is
        // scaled by -lambda.
        let mut fe_out_grad = dr_input_grad;
        for (g, &d) in fe_out_grad.data_mut().iter_mut().zip(dc_input_grad.data()) {
            *g -= self.lambda * d;
        }
        let (fe_grads, _) = self.feature_extractor.backward(&fe_cache, &fe_out_grad)?;

        Ok((l1, ParamVector::concat(&[&fe_grads, &dr_grads, &dc_grads])))
    }

    /// Flattens extractor, regressor, classifier in that order.
    pub fn flatten_params(&self) -> ParamVector {
        ParamVector::concat(&[
            &self.feature_extractor.flatten_params(),
            &self.data_regressor.flatten_params(),
            &self.domain_classifier.flatten_params(),
        ])
    }

    /// Inverse of [`DarklModel::flatten_params`] against this model's shape.
    pub fn unflatten_params(&self, vec: &ParamVector) -> Result<DarklModel> {
        if vec.len() != self.param_count() {
            return Err(Error::DimMismatch(format!(
                "parameter vector has {} values, model needs {}",
                vec.len(),
                self.param_count()
            )));
        }
        let v = vec.as_slice();
        let fe_len = self.feature_extractor.param_count();
        let dr_len = self.data_regressor.param_count();
        let fe = self
            .feature_extractor
            .unflatten_params(&ParamVector::new(v[..fe_len].to_vec()))?;
        let dr = self
            .data_regressor
            .unflatten_params(&ParamVector::new(v[fe_len..fe_len + dr_len].to_vec()))?;
        let dc = self
            .domain_classifier
            .unflatten_params(&ParamVector::new(v[fe_len + dr_len..].to_vec()))?;
        Ok(DarklModel {
            feature_extractor: fe,
            data_regressor: dr,
            domain_classifier: dc,
            lambda: self.lambda,
        })
    }

    /// One SGD step over the concatenated layout.
    pub fn sgd_step_inplace(&mut self, grads: &ParamVector, lr: f64) -> Result<()> {
        if grads.len() != self.param_count() {
            return Err(Error::DimMismatch(format!(
                "gradient vector has {} values, model needs {}",
                grads.len(),
                self.param_count()
            )));
        }
        let g = grads.as_slice();
        let fe_len = self.feature_extractor.param_count();
        let dr_len = self.data_regressor.param_count();
        self.feature_extractor
            .sgd_step_inplace(&ParamVector::new(g[..fe_len].to_vec()), lr)?;
        self.data_regressor
            .sgd_step_inplace(&ParamVector::new(g[fe_len..fe_len + dr_len].to_vec()), lr)?;
        self.domain_classifier
            .sgd_step_inplace(&ParamVector::new(g[fe_len + dr_len..].to_vec()), lr)?;
        Ok(())
    }

    /// Splits a concatenated gradient or parameter vector into the
    /// (extractor, regressor, classifier) parts.
    pub fn split_params<'a>(&self, vec: &'a ParamVector) -> Result<(&'a [f64], &'a [f64], &'a [f64])> {
        if vec.len() != self.param_count() {
            return Err(Error::DimMismatch(format!(
                "parameter vector has {} values, model needs {}",
                vec.len(),
                self.param_count()
            )));
        }
        let v = vec.as_slice();
        let fe_len = self.feature_extractor.param_count();
        let dr_len = self.data_regressor.param_count();
        Ok((&v[..fe_len], &v[fe_len..fe_len + dr_len], &v[fe_len + dr_len..]))
    }
}
