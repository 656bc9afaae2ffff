//! The two trainable modules and their local training loop.

mod batch;
mod darkl;
mod loss;
mod training;
mod utp;

pub use batch::{one_hot_from_labels, uniform_one_hot, TrainBatch};
pub use darkl::{DarklDims, DarklModel};
pub use loss::{mean_cross_entropy, mean_squared_error, CE_EPSILON};
pub use training::{local_train_epoch, ClientData};
pub use utp::UtpModel;
