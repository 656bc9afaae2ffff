//! Training batches.

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

/// One mini-batch: the feature rows plus whichever supervision signals the
/// consuming loss needs. The relational regressor wants `cp_target` and
/// `domain_label`; the task classifier wants `task_label`.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub x: Tensor2D,
    /// Normalized consumption targets in `[0, 1]`, one per row.
    pub cp_target: Option<Vec<f64>>,
    /// One-hot domain rows, one per row.
    pub domain_label: Option<Tensor2D>,
    /// One-hot task rows over the five levels, one per row.
    pub task_label: Option<Tensor2D>,
}

impl TrainBatch {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.x.rows() == 0 {
            return Err(Error::EmptyInput("training batch"));
        }
        if let Some(cp) = &self.cp_target {
            if cp.len() != self.x.rows() {
                return Err(Error::DimMismatch(format!(
                    "{} consumption targets for {} rows",
                    cp.len(),
                    self.x.rows()
                )));
            }
        }
        for (name, t) in [("domain", &self.domain_label), ("task", &self.task_label)] {
            if let Some(t) = t {
                if t.rows() != self.x.rows() {
                    return Err(Error::DimMismatch(format!(
                        "{} one-hot rows: {} for {} inputs",
                        name,
                        t.rows(),
                        self.x.rows()
                    )));
                }
                for r in 0..t.rows() {
                    let row = t.row(r);
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
                        return Err(Error::InvalidArgument(format!(
                            "{name} label row {r} is not one-hot (sum = {sum})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds a one-hot tensor with every row pointing at `index`.
pub fn uniform_one_hot(rows: usize, classes: usize, index: usize) -> Tensor2D {
    let mut t = Tensor2D::zeros(rows, classes);
    for r in 0..rows {
        t.set(r, index, 1.0);
    }
    t
}

/// Builds a one-hot tensor from labels in `1..=classes`.
pub fn one_hot_from_labels(labels: &[u8], classes: usize) -> Result<Tensor2D> {
    let mut t = Tensor2D::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        if l == 0 || l as usize > classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} outside 1..={classes}"
            )));
        }
        t.set(r, (l - 1) as usize, 1.0);
    }
    Ok(t)
}
