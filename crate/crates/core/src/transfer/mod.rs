//! Stage II: transferring the trained modules to the target city.
//!
//! The relational model stays frozen and imputes the target's missing
//! consumption values; the task model is fine-tuned on the target's small
//! labeled split with the imputed value appended to the features.

pub mod experiments;
pub mod metrics;

pub use experiments::{
    default_scenario, run_ablation, run_variant, sweep, ExperimentParams, ExperimentVariant,
    Scenario, SweepKind, SweepRow,
};
pub use metrics::{macro_prf1, mae_mse, MetricsReport};

use crate::error::{Error, Result};
use crate::features::{
    apply_normalizer, fit_normalizer, CityId, FeatureLayout, Normalizer, SpatialContextVector,
};
use crate::models::{one_hot_from_labels, DarklModel, TrainBatch, UtpModel};
use crate::nn::Tensor2D;
use crate::seeding::rng_from_seed;
use crate::synthgen::{CityDataset, N_LEVELS};
use rand::Rng;

/// Deterministic split of the target's regions into the labeled fine-tune
/// set and the unlabeled evaluation set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSplit {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl TargetSplit {
    /// Shuffles `0..n_regions` with a ChaCha8 stream keyed by `seed` and
    /// takes `round(label_fraction * n)` regions (at least 1, at most n - 1)
    /// as the labeled set.
    pub fn new(n_regions: usize, label_fraction: f64, seed: u64) -> Result<Self> {
        if n_regions < 2 {
            return Err(Error::InvalidArgument(
                "target split needs at least two regions".into(),
            ));
        }
        if !(label_fraction > 0.0 && label_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "label fraction must be inside (0, 1), got {label_fraction}"
            )));
        }
        let mut order: Vec<usize> = (0..n_regions).collect();
        let mut rng = rng_from_seed(seed);
        for i in (1..n_regions).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let n_labeled =
            ((label_fraction * n_regions as f64).round() as usize).clamp(1, n_regions - 1);
        let labeled = order[..n_labeled].to_vec();
        let unlabeled = order[n_labeled..].to_vec();
        Ok(Self { labeled, unlabeled })
    }
}

/// The target city's prepared view: normalized base features (the target's
/// own normalizer, fitted on all of its rows; labels are not needed for
/// min-max fitting) plus evaluation-only ground truth.
#[derive(Debug, Clone)]
pub struct TargetData {
    city_id: CityId,
    layout: FeatureLayout,
    normalizer: Normalizer,
    x_base: Tensor2D,
    labels: Vec<Option<u8>>,
    /// Ground-truth consumption normalized by min-max over the truth values
    /// themselves; used only to score imputation.
    cp_true_norm: Option<Vec<f64>>,
}

impl TargetData {
    pub fn from_city(city: &CityDataset) -> Result<Self> {
        if city.n_regions() == 0 {
            return Err(Error::EmptyInput("target city dataset"));
        }
        if !city.is_target() {
            return Err(Error::InvalidArgument(format!(
                "city {} still carries consumption data; not a target",
                city.city_id
            )));
        }
        let first = &city.raw[0];
        let layout =
            FeatureLayout { n_poi: first.poi_counts.len(), n_road: first.road_counts.len() };
        let rows = city.feature_vectors()?;
        let normalizer = fit_normalizer(&rows)?;
        let n = rows.len();
        let mut x_base = Tensor2D::zeros(n, layout.base_len());
        for (i, row) in rows.iter().enumerate() {
            let scaled = apply_normalizer(&normalizer, row)?;
            x_base.row_mut(i).copy_from_slice(&scaled.values);
        }

        let cp_true_norm = match &city.ground_truth_cp {
            Some(truth) => {
                if truth.len() != n {
                    return Err(Error::DimMismatch(format!(
                        "{} ground truth values for {} regions",
                        truth.len(),
                        n
                    )));
                }
                let as_rows: Vec<SpatialContextVector> = truth
                    .iter()
                    .map(|&v| SpatialContextVector { values: vec![v], has_cp: false })
                    .collect();
                let norm = fit_normalizer(&as_rows)?;
                Some(truth.iter().map(|&v| norm.scale_value(0, v)).collect())
            }
            None => None,
        };

        Ok(Self {
            city_id: city.city_id,
            layout,
            normalizer,
            x_base,
            labels: city.labels.clone(),
            cp_true_norm,
        })
    }

    pub fn city_id(&self) -> CityId {
        self.city_id
    }

    pub fn n_regions(&self) -> usize {
        self.x_base.rows()
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn x_base(&self) -> &Tensor2D {
        &self.x_base
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn cp_true_norm(&self) -> Option<&[f64]> {
        self.cp_true_norm.as_deref()
    }
}

/// Imputes the missing consumption value for every feature row. The model
/// is frozen: this is a pure read.
pub fn impute_missing(darkl: &DarklModel, target_features: &Tensor2D) -> Result<Vec<f64>> {
    darkl.impute(target_features)
}

/// Appends one imputed (or true) consumption value per row to the base
/// features, producing task-model inputs.
pub fn build_task_inputs(x_base: &Tensor2D, cp: &[f64]) -> Result<Tensor2D> {
    if cp.len() != x_base.rows() {
        return Err(Error::DimMismatch(format!(
            "{} consumption values for {} rows",
            cp.len(),
            x_base.rows()
        )));
    }
    let mut out = Tensor2D::zeros(x_base.rows(), x_base.cols() + 1);
    for r in 0..x_base.rows() {
        let row = out.row_mut(r);
        row[..x_base.cols()].copy_from_slice(x_base.row(r));
        row[x_base.cols()] = cp[r];
    }
    Ok(out)
}

/// Fine-tunes the task model on the labeled split only. Returns a new
/// model; only task parameters are updated (the relational model is not even
/// reachable from here). `epochs = 0` returns the input model unchanged.
pub fn fine_tune(
    utp: &UtpModel,
    x_task: &Tensor2D,
    labels: &[Option<u8>],
    split: &TargetSplit,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<UtpModel> {
    if split.labeled.is_empty() {
        return Err(Error::EmptyInput("labeled fine-tune split"));
    }
    if labels.len() != x_task.rows() {
        return Err(Error::DimMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            x_task.rows()
        )));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be > 0".into()));
    }
    let mut picked_labels = Vec::with_capacity(split.labeled.len());
    for &i in &split.labeled {
        let l = labels
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| Error::MissingLabels(format!("labeled split row {i} has no label")))?;
        picked_labels.push(l);
    }

    let mut model = utp.clone();
    let n = split.labeled.len();
    let mut rng = rng_from_seed(seed);
    for _ in 0..epochs {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch_size) {
            let rows: Vec<usize> = chunk.iter().map(|&i| split.labeled[i]).collect();
            let chunk_labels: Vec<u8> = chunk.iter().map(|&i| picked_labels[i]).collect();
            let batch = TrainBatch {
                x: x_task.gather_rows(&rows),
                cp_target: None,
                domain_label: None,
                task_label: Some(one_hot_from_labels(&chunk_labels, N_LEVELS)?),
            };
            let (_, grads) = model.loss_and_grads(&batch)?;
            model.sgd_step_inplace(&grads, lr)?;
        }
    }
    Ok(model)
}

/// Predicted level per row: argmax of the class probabilities, ties broken
/// toward the lowest class index.
pub fn predict(utp: &UtpModel, x_task: &Tensor2D) -> Result<Vec<u8>> {
    let probs = utp.forward(x_task)?;
    let mut out = Vec::with_capacity(probs.rows());
    for r in 0..probs.rows() {
        let row = probs.row(r);
        let mut best = 0usize;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        out.push((best + 1) as u8);
    }
    Ok(out)
}
