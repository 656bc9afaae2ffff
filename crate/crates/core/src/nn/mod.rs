//! Minimal dense-network engine: layer forward/backward with manual
//! differentiation, SGD, and deterministic parameter (de)serialization.
//!
//! Everything is 64-bit floats and plain values; operations are
//! deterministic functions of their inputs, so models can be trained
//! concurrently as long as each instance has a single writer.

mod activation;
mod kernels;
mod mlp;
mod params;
mod tensor;

pub use activation::Activation;
pub use mlp::{DenseLayer, ForwardCache, Mlp};
pub use params::{sgd_step, ParamVector};
pub use tensor::Tensor2D;
