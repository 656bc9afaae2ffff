//! Desk-scale simulator for cross-city federated transfer learning.
//!
//! The crate trains a domain-adversarial relational-knowledge regressor and a
//! task classifier across simulated "source city" clients with federated
//! averaging (optionally over Paillier-encrypted parameter uploads), then
//! transfers both to a data-poor "target city": the regressor imputes the
//! target's missing feature and the classifier is fine-tuned on its few
//! labels. Synthetic city generators stand in for proprietary urban data.
//!
//! Module map:
//! - [`nn`]: dense networks with manual backprop, SGD, flat parameter vectors
//! - [`features`]: spatial context features (POI entropy, min-max scaling)
//! - [`synthgen`]: multi-city synthetic data with a shared relational rule
//! - [`models`]: the DARKL (regressor + domain classifier with gradient
//!   reversal) and UTP (task classifier) networks and their local training
//! - [`federation`]: FedAvg, fixed-point encoding, Paillier encryption, and
//!   the round loop
//! - [`transfer`]: target-city imputation, fine-tuning, metrics, experiments
//! - [`io`]: versioned CSV and checkpoint formats

pub mod error;
pub mod features;
pub mod federation;
pub mod io;
pub mod models;
pub mod nn;
pub mod seeding;
pub mod synthgen;
pub mod transfer;

pub use error::{Error, Result};
