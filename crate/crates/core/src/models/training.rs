//! Per-client data preparation and local training.

use crate::error::{Error, Result};
use crate::features::{apply_normalizer, fit_normalizer, CityId, FeatureLayout, Normalizer};
use crate::models::batch::{one_hot_from_labels, uniform_one_hot, TrainBatch};
use crate::models::darkl::DarklModel;
use crate::models::utp::UtpModel;
use crate::nn::Tensor2D;
use crate::seeding::rng_from_seed;
use crate::synthgen::{CityDataset, N_LEVELS};
use rand::Rng;

/// One source city's training view: normalized feature tensors plus targets.
///
/// The normalizer is fitted on this city's own rows only (including the
/// consumption column, which doubles as the regression target), never pooled
/// across cities.
#[derive(Debug, Clone)]
pub struct ClientData {
    city_id: CityId,
    layout: FeatureLayout,
    normalizer: Normalizer,
    /// `N x base_len` normalized features without the consumption column.
    x_base: Tensor2D,
    /// Normalized consumption target per region.
    cp_norm: Vec<f64>,
    /// `N x (base_len + 1)` normalized features including consumption.
    x_task: Tensor2D,
    labels: Vec<u8>,
}

impl ClientData {
    /// Prepares a source city: all rows must carry the consumption value and
    /// a task label.
    pub fn from_source_city(city: &CityDataset) -> Result<Self> {
        if city.n_regions() == 0 {
            return Err(Error::EmptyInput("source city dataset"));
        }
        let first = &city.raw[0];
        let layout =
            FeatureLayout { n_poi: first.poi_counts.len(), n_road: first.road_counts.len() };

        let rows = city.feature_vectors()?;
        if rows.iter().any(|r| !r.has_cp) {
            return Err(Error::InvalidArgument(format!(
                "source city {} has regions without consumption data",
                city.city_id
            )));
        }
        let labels: Vec<u8> = city
            .labels
            .iter()
            .map(|l| {
                l.ok_or_else(|| {
                    Error::MissingLabels(format!("source city {} has unlabeled regions", city.city_id))
                })
            })
            .collect::<Result<_>>()?;

        let normalizer = fit_normalizer(&rows)?;
        let n = rows.len();
        let mut x_base = Tensor2D::zeros(n, layout.base_len());
        let mut x_task = Tensor2D::zeros(n, layout.full_len());
        let mut cp_norm = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            let scaled = apply_normalizer(&normalizer, row)?;
            x_base.row_mut(i).copy_from_slice(&scaled.values[..layout.base_len()]);
            x_task.row_mut(i).copy_from_slice(&scaled.values);
            cp_norm.push(scaled.values[layout.idx_consumption_pop()]);
        }

        Ok(Self { city_id: city.city_id, layout, normalizer, x_base, cp_norm, x_task, labels })
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

    pub fn x_task(&self) -> &Tensor2D {
        &self.x_task
    }

    pub fn cp_norm(&self) -> &[f64] {
        &self.cp_norm
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// One shuffled pass of mini-batch SGD over the client's data.
///
/// The relational model always trains (loss `l1` via gradient reversal);
/// the task model trains when given. The index order is a Fisher-Yates
/// shuffle of the ChaCha8 stream keyed by `seed`, the trailing partial batch
/// is processed, and the returned losses are sample-weighted epoch means.
pub fn local_train_epoch(
    darkl: &mut DarklModel,
    mut utp: Option<&mut UtpModel>,
    data: &ClientData,
    domain_index: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(f64, Option<f64>)> {
    let n = data.n_regions();
    if n == 0 {
        return Err(Error::EmptyInput("client dataset"));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be > 0".into()));
    }
    let n_domains = darkl.n_domains();
    if domain_index >= n_domains {
        return Err(Error::InvalidArgument(format!(
            "domain index {domain_index} out of range for {n_domains} domains"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }

    let mut l1_sum = 0.0;
    let mut l2_sum = 0.0;
    for chunk in order.chunks(batch_size) {
        let rows = chunk.len();

        let darkl_batch = TrainBatch {
            x: data.x_base.gather_rows(chunk),
            cp_target: Some(chunk.iter().map(|&i| data.cp_norm[i]).collect()),
            domain_label: Some(uniform_one_hot(rows, n_domains, domain_index)),
            task_label: None,
        };
        let (l1, grads) = darkl.loss_and_grads(&darkl_batch)?;
        darkl.sgd_step_inplace(&grads, lr)?;
        l1_sum += l1 * rows as f64;

        if let Some(utp) = utp.as_deref_mut() {
            let labels: Vec<u8> = chunk.iter().map(|&i| data.labels[i]).collect();
            let task_batch = TrainBatch {
                x: data.x_task.gather_rows(chunk),
                cp_target: None,
                domain_label: None,
                task_label: Some(one_hot_from_labels(&labels, N_LEVELS)?),
            };
            let (l2, grads) = utp.loss_and_grads(&task_batch)?;
            utp.sgd_step_inplace(&grads, lr)?;
            l2_sum += l2 * rows as f64;
        }
    }

    let l1_mean = l1_sum / n as f64;
    let l2_mean = utp.map(|_| l2_sum / n as f64);
    Ok((l1_mean, l2_mean))
}
