//! Versioned file formats: dataset CSVs, model checkpoints, report CSVs.

mod checkpoint;
mod dataset_csv;
mod reports;

pub use checkpoint::{
    read_darkl_checkpoint, read_utp_checkpoint, write_darkl_checkpoint, write_utp_checkpoint,
};
pub use dataset_csv::{
    apply_truth_csv, read_city_csv, write_city_csv, write_truth_csv, DATASET_VERSION_LINE,
    TRUTH_VERSION_LINE,
};
pub use reports::{
    read_predictions_csv, write_metrics_csv, write_predictions_csv, write_round_log,
    write_sweep_csv, MetricsRow, METRICS_VERSION_LINE, PREDICTIONS_VERSION_LINE,
    ROUND_LOG_VERSION_LINE, SWEEP_VERSION_LINE,
};
