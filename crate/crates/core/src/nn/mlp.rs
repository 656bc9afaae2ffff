//! Dense feed-forward networks with manual backpropagation.

use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::nn::kernels;
use crate::nn::{Activation, ParamVector, Tensor2D};
use crate::seeding::rng_from_seed;

/// One dense layer: `a = activation(W x + b)` with `W` of shape
/// `(out_dim, in_dim)` in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor2D,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Tensor2D {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.out_dim() * self.in_dim() + self.out_dim()
    }
}

/// Per-layer pre-activations and activations recorded during one forward
/// pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor2D,
    pre: Vec<Tensor2D>,
    act: Vec<Tensor2D>,
}

impl ForwardCache {
    pub fn batch_rows(&self) -> usize {
        self.input.rows()
    }

    /// Output of the final layer.
    pub fn output(&self) -> &Tensor2D {
        self.act.last().expect("cache holds at least one layer")
    }

    /// Pre-activations per layer.
    pub fn pre_activations(&self) -> &[Tensor2D] {
        &self.pre
    }

    /// Activations per layer.
    pub fn activations(&self) -> &[Tensor2D] {
        &self.act
    }
}

/// A stack of dense layers whose dimensions chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Builds a network with the given layer widths and activations.
    ///
    /// `dims` lists `[input, hidden..., output]`, so `dims.len() - 1` layers
    /// are created and `activations` must have that length. Weights are drawn
    /// uniformly from `[-limit, limit)` with
    /// `limit = sqrt(6 / (fan_in + fan_out))`; biases start at zero. The draw
    /// order (layers in order, each weight matrix row-major) is fixed, and the
    /// generator is ChaCha8 keyed by `seed`, so identical `(dims, activations,
    /// seed)` produce bitwise-identical networks.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "a network needs at least an input and an output dimension".into(),
            ));
        }
        if let Some(&d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidArgument(format!("layer dimension must be > 0, got {d}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }

        let mut rng = rng_from_seed(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new(-limit, limit)
                .map_err(|e| Error::InvalidArgument(format!("init distribution: {e}")))?;
            let mut w = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                w.push(dist.sample(&mut rng));
            }
            layers.push(DenseLayer {
                weights: Tensor2D::from_vec(fan_out, fan_in, w)?,
                bias: vec![0.0; fan_out],
                activation: act,
            });
        }
        Ok(Mlp { layers })
    }

    /// Builds a network from explicit layers (mainly for tests and loaders).
    pub fn from_layers_raw(
        shapes: &[(usize, usize, Activation)],
        mut values: impl FnMut(usize) -> (Vec<f64>, Vec<f64>),
    ) -> Result<Mlp> {
        let mut layers = Vec::with_capacity(shapes.len());
        for (l, &(in_dim, out_dim, act)) in shapes.iter().enumerate() {
            if l > 0 && shapes[l - 1].1 != in_dim {
                return Err(Error::DimMismatch(format!(
                    "layer {l} input {in_dim} does not chain with previous output {}",
                    shapes[l - 1].1
                )));
            }
            let (w, b) = values(l);
            if w.len() != out_dim * in_dim || b.len() != out_dim {
                return Err(Error::DimMismatch(format!("layer {l} buffer sizes are wrong")));
            }
            layers.push(DenseLayer {
                weights: Tensor2D::from_vec(out_dim, in_dim, w)?,
                bias: b,
                activation: act,
            });
        }
        if layers.is_empty() {
            return Err(Error::EmptyInput("network layers"));
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// `[input, hidden..., output]` widths.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.layers.len() + 1);
        dims.push(self.input_dim());
        dims.extend(self.layers.iter().map(|l| l.out_dim()));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation()).collect()
    }

    /// Runs the batch through every layer, returning the output and the
    /// cache needed for [`Mlp::backward`].
    pub fn forward(&self, batch: &Tensor2D) -> Result<(Tensor2D, ForwardCache)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimMismatch(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        if !batch.is_finite() {
            return Err(Error::NonFinite("forward input batch".into()));
        }

        let rows = batch.rows();
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len());
        let mut current = batch;
        for layer in &self.layers {
            let mut z = Tensor2D::zeros(rows, layer.out_dim());
            kernels::affine_forward(
                current.data(),
                layer.weights.data(),
                &layer.bias,
                z.data_mut(),
                rows,
                layer.in_dim(),
                layer.out_dim(),
            );
            let mut a = Tensor2D::zeros(rows, layer.out_dim());
            for r in 0..rows {
                layer.activation.apply_row(z.row(r), a.row_mut(r));
            }
            pre.push(z);
            act.push(a);
            current = act.last().expect("just pushed");
        }

        let output = act.last().expect("non-empty").clone();
        Ok((output, ForwardCache { input: batch.clone(), pre, act }))
    }

    /// Backpropagates `output_grad` (dL/d output) through the cached forward
    /// pass. Returns the parameter gradients in [`ParamVector`] layout and
    /// the gradient with respect to the input batch. Gradients are summed
    /// over the batch; any mean reduction belongs to the loss gradient.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &Tensor2D,
    ) -> Result<(ParamVector, Tensor2D)> {
        if cache.act.len() != self.layers.len() {
            return Err(Error::DimMismatch(format!(
                "cache has {} layers, network has {}",
                cache.act.len(),
                self.layers.len()
            )));
        }
        let rows = cache.batch_rows();
        if output_grad.rows() != rows || output_grad.cols() != self.output_dim() {
            return Err(Error::DimMismatch(format!(
                "output_grad is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                rows,
                self.output_dim()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if cache.act[l].cols() != layer.out_dim() || cache.act[l].rows() != rows {
                return Err(Error::DimMismatch(format!("cache does not match network at layer {l}")));
            }
        }
        if cache.input.cols() != self.input_dim() {
            return Err(Error::DimMismatch("cache input width does not match network".into()));
        }

        // Per-layer weight/bias gradients, filled back to front.
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.out_dim() * l.in_dim()], vec![0.0; l.out_dim()]))
            .collect();

        let mut grad_out = output_grad.clone();
        let mut grad_in = Tensor2D::zeros(rows, self.input_dim());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut dz = Tensor2D::zeros(rows, layer.out_dim());
            for r in 0..rows {
                layer.activation.backward_row(
                    cache.pre[l].row(r),
                    cache.act[l].row(r),
                    grad_out.row(r),
                    dz.row_mut(r),
                );
            }

            let layer_input: &Tensor2D = if l == 0 { &cache.input } else { &cache.act[l - 1] };
            let (dw, db) = &mut grads[l];
            kernels::grad_params(
                dz.data(),
                layer_input.data(),
                dw,
                db,
                rows,
                layer.in_dim(),
                layer.out_dim(),
            );

            let mut dx = Tensor2D::zeros(rows, layer.in_dim());
            kernels::grad_input(
                dz.data(),
                layer.weights.data(),
                dx.data_mut(),
                rows,
                layer.in_dim(),
                layer.out_dim(),
            );
            if l == 0 {
                grad_in = dx;
            } else {
                grad_out = dx;
            }
        }

        let mut flat = Vec::with_capacity(self.param_count());
        for (dw, db) in grads {
            flat.extend_from_slice(&dw);
            flat.extend_from_slice(&db);
        }
        Ok((ParamVector::new(flat), grad_in))
    }

    /// Flattens all parameters: layers in order, each weight matrix
    /// row-major, then its bias. Deterministic for structurally equal models.
    pub fn flatten_params(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            values.extend_from_slice(layer.weights.data());
            values.extend_from_slice(&layer.bias);
        }
        ParamVector::new(values)
    }

    /// Rebuilds a model with this network's shape and the given parameters;
    /// the exact inverse of [`Mlp::flatten_params`].
    pub fn unflatten_params(&self, vec: &ParamVector) -> Result<Mlp> {
        if vec.len() != self.param_count() {
            return Err(Error::DimMismatch(format!(
                "parameter vector has {} values, model needs {}",
                vec.len(),
                self.param_count()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        let values = vec.as_slice();
        for layer in &self.layers {
            let w_len = layer.out_dim() * layer.in_dim();
            let w = values[offset..offset + w_len].to_vec();
            offset += w_len;
            let b = values[offset..offset + layer.out_dim()].to_vec();
            offset += layer.out_dim();
            layers.push(DenseLayer {
                weights: Tensor2D::from_vec(layer.out_dim(), layer.in_dim(), w)?,
                bias: b,
                activation: layer.activation,
            });
        }
        Ok(Mlp { layers })
    }

    /// In-place SGD update over the flattened layout: `p -= lr * g`.
    pub fn sgd_step_inplace(&mut self, grads: &ParamVector, lr: f64) -> Result<()> {
        if grads.len() != self.param_count() {
            return Err(Error::DimMismatch(format!(
                "gradient vector has {} values, model needs {}",
                grads.len(),
                self.param_count()
            )));
        }
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
        }
        let g = grads.as_slice();
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.data_mut() {
                *w -= lr * g[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b -= lr * g[offset];
                offset += 1;
            }
        }
        Ok(())
    }
}
