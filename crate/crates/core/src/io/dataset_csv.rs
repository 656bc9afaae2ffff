//! The city-dataset CSV format (schema v1) and the evaluation-truth sidecar.
//!
//! Main file layout: a version comment line, a header, then one row per
//! region:
//!
//! ```text
//! # cityfed city-dataset v1
//! city_id,row,col,poi_c1,...,poi_c8,road_c1,...,road_c4,wp,rp,cp,label
//! ```
//!
//! The `cp` cell is empty when the consumption population is missing (target
//! cities) and `label` is empty for unlabeled regions. The sidecar carries
//! the generator's ground-truth consumption for target cities so imputation
//! can be scored after a round trip:
//!
//! ```text
//! # cityfed city-truth v1
//! city_id,row,col,cp_true
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{RawRegionData, Region};
use crate::synthgen::CityDataset;

pub const DATASET_VERSION_LINE: &str = "# cityfed city-dataset v1";
pub const TRUTH_VERSION_LINE: &str = "# cityfed city-truth v1";

const N_POI: usize = 8;
const N_ROAD: usize = 4;

fn dataset_header() -> String {
    let mut cols = vec!["city_id".to_string(), "row".to_string(), "col".to_string()];
    cols.extend((1..=N_POI).map(|k| format!("poi_c{k}")));
    cols.extend((1..=N_ROAD).map(|k| format!("road_c{k}")));
    cols.extend(["wp", "rp", "cp", "label"].map(str::to_string));
    cols.join(",")
}

fn format_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), msg: msg.into() }
}

/// Writes a city dataset. The schema supports exactly 8 POI and 4 road
/// categories.
pub fn write_city_csv(path: &Path, city: &CityDataset) -> Result<()> {
    let mut out = String::new();
    out.push_str(DATASET_VERSION_LINE);
    out.push('\n');
    out.push_str(&dataset_header());
    out.push('\n');
    for i in 0..city.n_regions() {
        let region = &city.regions[i];
        let raw = &city.raw[i];
        if raw.poi_counts.len() != N_POI || raw.road_counts.len() != N_ROAD {
            return Err(format_error(
                path,
                format!(
                    "schema v1 requires {N_POI} POI and {N_ROAD} road categories, got {} and {}",
                    raw.poi_counts.len(),
                    raw.road_counts.len()
                ),
            ));
        }
        out.push_str(&format!("{},{},{}", region.city_id, region.row, region.col));
        for v in raw.poi_counts.iter().chain(raw.road_counts.iter()) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{}", raw.working_pop, raw.residential_pop));
        match raw.consumption_pop {
            Some(cp) => out.push_str(&format!(",{cp}")),
            None => out.push(','),
        }
        match city.labels[i] {
            Some(l) => out.push_str(&format!(",{l}")),
            None => out.push(','),
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a city dataset. When every region carries a consumption value the
/// ground truth is taken from that column; otherwise it stays `None` until a
/// truth sidecar is applied.
pub fn read_city_csv(path: &Path) -> Result<CityDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == DATASET_VERSION_LINE => {}
        Some(line) => {
            return Err(format_error(path, format!("unknown schema version line: {line:?}")))
        }
        None => return Err(format_error(path, "empty file")),
    }
    let expected_header = dataset_header();
    match lines.next() {
        Some(line) if line == expected_header => {}
        other => return Err(format_error(path, format!("unexpected header: {other:?}"))),
    }

    let mut city_id = None;
    let mut regions = Vec::new();
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 3 + N_POI + N_ROAD + 4;
        if fields.len() != expected {
            return Err(format_error(
                path,
                format!("line {}: {} fields, expected {expected}", lineno + 3, fields.len()),
            ));
        }
        let parse_count = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| format_error(path, format!("line {}: bad {what}: {s:?}", lineno + 3)))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format_error(
                    path,
                    format!("line {}: {what} must be finite and >= 0, got {s}", lineno + 3),
                ));
            }
            Ok(v)
        };
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad city_id", lineno + 3)))?;
        match city_id {
            None => city_id = Some(id),
            Some(existing) if existing == id => {}
            Some(existing) => {
                return Err(format_error(
                    path,
                    format!("line {}: city_id {id} differs from {existing}", lineno + 3),
                ))
            }
        }
        let row: usize = fields[1]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad row index", lineno + 3)))?;
        let col: usize = fields[2]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad col index", lineno + 3)))?;
        regions.push(Region { city_id: id, row, col });

        let mut poi = Vec::with_capacity(N_POI);
        for k in 0..N_POI {
            poi.push(parse_count(fields[3 + k], "POI count")?);
        }
        let mut road = Vec::with_capacity(N_ROAD);
        for k in 0..N_ROAD {
            road.push(parse_count(fields[3 + N_POI + k], "road count")?);
        }
        let wp = parse_count(fields[3 + N_POI + N_ROAD], "working population")?;
        let rp = parse_count(fields[3 + N_POI + N_ROAD + 1], "residential population")?;
        let cp_field = fields[3 + N_POI + N_ROAD + 2];
        let cp = if cp_field.is_empty() {
            None
        } else {
            Some(parse_count(cp_field, "consumption population")?)
        };
        let label_field = fields[3 + N_POI + N_ROAD + 3];
        let label = if label_field.is_empty() {
            None
        } else {
            let l: u8 = label_field.parse().map_err(|_| {
                format_error(path, format!("line {}: bad label {label_field:?}", lineno + 3))
            })?;
            if !(1..=5).contains(&l) {
                return Err(format_error(
                    path,
                    format!("line {}: label {l} outside 1..=5", lineno + 3),
                ));
            }
            Some(l)
        };
        raw.push(RawRegionData {
            poi_counts: poi,
            road_counts: road,
            working_pop: wp,
            residential_pop: rp,
            consumption_pop: cp,
        });
        labels.push(label);
    }
    let city_id = city_id.ok_or_else(|| format_error(path, "no data rows"))?;

    let ground_truth_cp = if raw.iter().all(|r| r.consumption_pop.is_some()) {
        Some(raw.iter().map(|r| r.consumption_pop.expect("checked")).collect())
    } else {
        None
    };
    Ok(CityDataset { city_id, regions, raw, labels, ground_truth_cp })
}

/// Writes the evaluation-truth sidecar for a dataset that has ground truth.
pub fn write_truth_csv(path: &Path, city: &CityDataset) -> Result<()> {
    let truth = city
        .ground_truth_cp
        .as_ref()
        .ok_or_else(|| Error::MissingArtifact("dataset carries no ground-truth consumption".into()))?;
    let mut out = String::new();
    out.push_str(TRUTH_VERSION_LINE);
    out.push('\n');
    out.push_str("city_id,row,col,cp_true\n");
    for (region, cp) in city.regions.iter().zip(truth) {
        out.push_str(&format!("{},{},{},{}\n", region.city_id, region.row, region.col, cp));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Loads a truth sidecar into the dataset's `ground_truth_cp`. Regions must
/// match one-to-one, in order.
pub fn apply_truth_csv(path: &Path, city: &mut CityDataset) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == TRUTH_VERSION_LINE => {}
        Some(line) => {
            return Err(format_error(path, format!("unknown schema version line: {line:?}")))
        }
        None => return Err(format_error(path, "empty file")),
    }
    match lines.next() {
        Some("city_id,row,col,cp_true") => {}
        other => return Err(format_error(path, format!("unexpected header: {other:?}"))),
    }
    let mut truth = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format_error(path, format!("line {}: expected 4 fields", lineno + 3)));
        }
        let idx = truth.len();
        let region = city.regions.get(idx).ok_or_else(|| {
            format_error(path, format!("more truth rows than dataset regions ({idx})"))
        })?;
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad city_id", lineno + 3)))?;
        let row: usize = fields[1].parse().unwrap_or(usize::MAX);
        let col: usize = fields[2].parse().unwrap_or(usize::MAX);
        if id != region.city_id || row != region.row || col != region.col {
            return Err(format_error(
                path,
                format!("line {}: region key mismatch against the dataset", lineno + 3),
            ));
        }
        let cp: f64 = fields[3]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad cp_true", lineno + 3)))?;
        truth.push(cp);
    }
    if truth.len() != city.n_regions() {
        return Err(format_error(
            path,
            format!("{} truth rows for {} regions", truth.len(), city.n_regions()),
        ));
    }
    city.ground_truth_cp = Some(truth);
    Ok(())
}
