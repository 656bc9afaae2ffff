//! Report CSVs: round logs, metrics, sweeps, and per-region predictions.
//!
//! Every file starts with a versioned comment line; the readers in this
//! module reject unknown versions. Wall-clock columns are written only when
//! timing is explicitly enabled, so default outputs stay byte-reproducible.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::Region;
use crate::federation::RoundRecord;
use crate::synthgen::CityDataset;
use crate::transfer::{MetricsReport, SweepRow};

pub const ROUND_LOG_VERSION_LINE: &str = "# cityfed round-log v1";
pub const METRICS_VERSION_LINE: &str = "# cityfed metrics v1";
pub const SWEEP_VERSION_LINE: &str = "# cityfed sweep v1";
pub const PREDICTIONS_VERSION_LINE: &str = "# cityfed predictions v1";

fn format_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), msg: msg.into() }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One round log row per (round, client).
pub fn write_round_log(path: &Path, rounds: &[RoundRecord], record_timing: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str(ROUND_LOG_VERSION_LINE);
    out.push('\n');
    out.push_str("round,city_id,l1,l2,round_wall_secs\n");
    for record in rounds {
        for loss in &record.client_losses {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                record.round,
                loss.city_id,
                loss.l1,
                opt_f64(loss.l2),
                opt_f64(record_timing.then_some(record.wall_secs)),
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// One metrics row: a variant evaluated on a scenario under one seed.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub variant: String,
    pub scenario: String,
    pub seed: u64,
    pub report: MetricsReport,
    pub epoch_time_s: Option<f64>,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_VERSION_LINE);
    out.push('\n');
    out.push_str("variant,scenario,seed,mae,mse,precision,recall,f1,epoch_time_s\n");
    for row in rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.variant,
            row.scenario,
            row.seed,
            r.mae,
            r.mse,
            r.precision,
            r.recall,
            r.f1,
            opt_f64(row.epoch_time_s),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], record_timing: bool) -> Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_VERSION_LINE);
    out.push('\n');
    out.push_str("sweep,value,seed,mae,mse,precision,recall,f1,epoch_time_s\n");
    for row in rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.kind.name(),
            row.value,
            row.seed,
            r.mae,
            r.mse,
            r.precision,
            r.recall,
            r.f1,
            opt_f64(record_timing.then_some(row.mean_epoch_secs)),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-region predictions for the target city: the data behind a heat map.
pub fn write_predictions_csv(
    path: &Path,
    city: &CityDataset,
    predicted: &[u8],
    cp_hat: &[f64],
) -> Result<()> {
    if predicted.len() != city.n_regions() || cp_hat.len() != city.n_regions() {
        return Err(Error::DimMismatch(format!(
            "{} predictions and {} imputations for {} regions",
            predicted.len(),
            cp_hat.len(),
            city.n_regions()
        )));
    }
    let mut out = String::new();
    out.push_str(PREDICTIONS_VERSION_LINE);
    out.push('\n');
    out.push_str("city_id,row,col,predicted_level,cp_hat\n");
    for ((region, &level), &cp) in city.regions.iter().zip(predicted).zip(cp_hat) {
        out.push_str(&format!("{},{},{},{},{}\n", region.city_id, region.row, region.col, level, cp));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a predictions file back as `(region, predicted_level, cp_hat)`.
pub fn read_predictions_csv(path: &Path) -> Result<Vec<(Region, u8, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(format!("predictions file {} does not exist", path.display()))
        } else {
            Error::Io(e)
        }
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == PREDICTIONS_VERSION_LINE => {}
        Some(line) => {
            return Err(format_error(path, format!("unknown schema version line: {line:?}")))
        }
        None => return Err(format_error(path, "empty file")),
    }
    match lines.next() {
        Some("city_id,row,col,predicted_level,cp_hat") => {}
        other => return Err(format_error(path, format!("unexpected header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format_error(path, format!("line {}: expected 5 fields", lineno + 3)));
        }
        let bad = |what: &str| format_error(path, format!("line {}: bad {what}", lineno + 3));
        let region = Region {
            city_id: fields[0].parse().map_err(|_| bad("city_id"))?,
            row: fields[1].parse().map_err(|_| bad("row"))?,
            col: fields[2].parse().map_err(|_| bad("col"))?,
        };
        let level: u8 = fields[3].parse().map_err(|_| bad("predicted_level"))?;
        if !(1..=5).contains(&level) {
            return Err(bad("predicted_level (outside 1..=5)"));
        }
        let cp: f64 = fields[4].parse().map_err(|_| bad("cp_hat"))?;
        rows.push((region, level, cp));
    }
    Ok(rows)
}
