//! Spatial context features.
//!
//! Raw per-region counts (POIs by category, roads by category, population
//! figures) are turned into a fixed-order feature vector, and per-city
//! min-max normalizers map every feature into `[0, 1]`.
//!
//! Feature ordering, which is identical across cities, modules, and runs:
//!
//! ```text
//! [poi_1 .. poi_K, poi_total, poi_entropy, road_1 .. road_R,
//!  working_pop, residential_pop, (consumption_pop)]
//! ```
//!
//! The consumption population is appended last and only present for source
//! cities; `has_cp` records its presence.

use crate::error::{Error, Result};

/// City identifier. Cities are ordered by id wherever a canonical order is
/// needed (aggregation, output files).
pub type CityId = u32;

/// Number of POI and road categories in the fixed vector layout, and the
/// derived index map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_poi: usize,
    pub n_road: usize,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self { n_poi: 8, n_road: 4 }
    }
}

impl FeatureLayout {
    pub fn idx_poi(&self, k: usize) -> usize {
        debug_assert!(k < self.n_poi);
        k
    }

    pub fn idx_poi_total(&self) -> usize {
        self.n_poi
    }

    pub fn idx_poi_entropy(&self) -> usize {
        self.n_poi + 1
    }

    pub fn idx_road(&self, k: usize) -> usize {
        debug_assert!(k < self.n_road);
        self.n_poi + 2 + k
    }

    pub fn idx_working_pop(&self) -> usize {
        self.n_poi + 2 + self.n_road
    }

    pub fn idx_residential_pop(&self) -> usize {
        self.idx_working_pop() + 1
    }

    pub fn idx_consumption_pop(&self) -> usize {
        self.idx_residential_pop() + 1
    }

    /// Vector length without the consumption-population feature.
    pub fn base_len(&self) -> usize {
        self.n_poi + 2 + self.n_road + 2
    }

    /// Vector length with the consumption-population feature appended.
    pub fn full_len(&self) -> usize {
        self.base_len() + 1
    }
}

/// One grid cell of a city.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub city_id: CityId,
    pub row: usize,
    pub col: usize,
}

/// Raw per-region counts before feature extraction. `consumption_pop` is
/// `None` exactly when the region belongs to a target city.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRegionData {
    pub poi_counts: Vec<f64>,
    pub road_counts: Vec<f64>,
    pub working_pop: f64,
    pub residential_pop: f64,
    pub consumption_pop: Option<f64>,
}

impl RawRegionData {
    fn validate(&self) -> Result<()> {
        let all = self
            .poi_counts
            .iter()
            .chain(self.road_counts.iter())
            .chain([&self.working_pop, &self.residential_pop])
            .chain(self.consumption_pop.iter());
        for &v in all {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "region counts must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A per-region feature vector in the documented ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialContextVector {
    pub values: Vec<f64>,
    pub has_cp: bool,
}

impl SpatialContextVector {
    /// The vector without the consumption-population entry.
    pub fn base(&self, layout: &FeatureLayout) -> &[f64] {
        &self.values[..layout.base_len()]
    }
}

/// POI entropy over category counts, natural logarithm.
///
/// Zero-count categories contribute nothing (`0 * ln 0 := 0`) and an
/// all-zero region has entropy 0, so empty regions never produce NaN.
pub fn poi_entropy(poi_counts: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &c in poi_counts {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidArgument(format!("POI counts must be >= 0, got {c}")));
        }
        total += c;
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut entropy = 0.0;
    for &c in poi_counts {
        if c > 0.0 {
            let p = c / total;
            entropy -= p * p.ln();
        }
    }
    // Guard against a tiny negative result from rounding when one category
    // holds all the mass.
    Ok(entropy.max(0.0))
}

/// Builds the feature vector for one region. The POI total is the sum of the
/// per-category counts and the entropy follows [`poi_entropy`].
pub fn build_feature_vector(raw: &RawRegionData) -> Result<SpatialContextVector> {
    raw.validate()?;
    let total: f64 = raw.poi_counts.iter().sum();
    let entropy = poi_entropy(&raw.poi_counts)?;

    let mut values =
        Vec::with_capacity(raw.poi_counts.len() + raw.road_counts.len() + 5);
    values.extend_from_slice(&raw.poi_counts);
    values.push(total);
    values.push(entropy);
    values.extend_from_slice(&raw.road_counts);
    values.push(raw.working_pop);
    values.push(raw.residential_pop);
    let has_cp = raw.consumption_pop.is_some();
    if let Some(cp) = raw.consumption_pop {
        values.push(cp);
    }
    Ok(SpatialContextVector { values, has_cp })
}

/// Per-feature min and max observed on one city's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// Maps one feature value into `[0, 1]`. Degenerate features
    /// (`min == max`) map to 0.
    pub fn scale_value(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[feature], self.max[feature]);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Computes per-feature min/max over the given rows.
///
/// Normalizers are fitted per city on that city's own rows only; feature
/// tables are never pooled across cities.
pub fn fit_normalizer(rows: &[SpatialContextVector]) -> Result<Normalizer> {
    let first = rows.first().ok_or(Error::EmptyInput("normalizer rows"))?;
    let dim = first.values.len();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for row in rows {
        if row.values.len() != dim {
            return Err(Error::DimMismatch(format!(
                "normalizer rows have {} and {} features",
                dim,
                row.values.len()
            )));
        }
        for (j, &v) in row.values.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(Normalizer { min, max })
}

/// Applies min-max scaling feature-wise: `clamp((x - min) / (max - min), 0, 1)`.
pub fn apply_normalizer(n: &Normalizer, v: &SpatialContextVector) -> Result<SpatialContextVector> {
    if v.values.len() != n.dim() {
        return Err(Error::DimMismatch(format!(
            "vector has {} features, normalizer {}",
            v.values.len(),
            n.dim()
        )));
    }
    let values = v
        .values
        .iter()
        .enumerate()
        .map(|(j, &x)| n.scale_value(j, x))
        .collect();
    Ok(SpatialContextVector { values, has_cp: v.has_cp })
}

/// A city's grid: origin in map coordinates, square cell size in the same
/// units, and the grid extent in cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    /// Default grid cell edge in meters.
    pub const DEFAULT_CELL_SIZE_M: f64 = 152.0;

    /// Maps a point to its `(row, col)` cell via floor division.
    /// Points outside the declared extent are an error.
    pub fn assign_grid_cell(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !(self.cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be > 0, got {}",
                self.cell_size
            )));
        }
        let col = ((x - self.origin_x) / self.cell_size).floor();
        let row = ((y - self.origin_y) / self.cell_size).floor();
        if row < 0.0 || col < 0.0 || row >= self.height as f64 || col >= self.width as f64 {
            return Err(Error::InvalidArgument(format!(
                "point ({x}, {y}) falls outside the {}x{} grid",
                self.width, self.height
            )));
        }
        Ok((row as usize, col as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(poi: &[f64], road: &[f64], wp: f64, rp: f64, cp: Option<f64>) -> RawRegionData {
        RawRegionData {
            poi_counts: poi.to_vec(),
            road_counts: road.to_vec(),
            working_pop: wp,
            residential_pop: rp,
            consumption_pop: cp,
        }
    }

    #[test]
    fn entropy_of_single_category_is_zero() {
        assert_eq!(poi_entropy(&[10.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_uniform_two_categories_is_ln2() {
        let e = poi_entropy(&[5.0, 5.0]).unwrap();
        assert!((e - std::f64::consts::LN_2).abs() <= 1e-12);
    }

    #[test]
    fn entropy_matches_direct_formula_evaluation() {
        // Frozen from the direct formula: -(0.75 ln 0.75 + 0.25 ln 0.25).
        let e = poi_entropy(&[3.0, 1.0]).unwrap();
        assert!((e - 0.5623351446188083).abs() <= 1e-12);
    }

    #[test]
    fn entropy_of_all_zero_counts_is_zero() {
        assert_eq!(poi_entropy(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_rejects_negative_counts() {
        assert!(poi_entropy(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn feature_vector_follows_documented_order() {
        let v = build_feature_vector(&raw(&[2.0, 3.0], &[1.0], 10.0, 20.0, Some(5.0))).unwrap();
        // Frozen entropy from the direct formula on shares (0.4, 0.6).
        let expected = [2.0, 3.0, 5.0, 0.6730116670092565, 1.0, 10.0, 20.0, 5.0];
        assert_eq!(v.values.len(), expected.len());
        for (a, b) in v.values.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        assert!(v.has_cp);
    }

    #[test]
    fn missing_cp_shortens_the_vector() {
        let v = build_feature_vector(&raw(&[2.0, 3.0], &[1.0], 10.0, 20.0, None)).unwrap();
        assert_eq!(v.values.len(), 7);
        assert!(!v.has_cp);
    }

    #[test]
    fn all_zero_region_builds_an_all_zero_vector() {
        let v = build_feature_vector(&raw(&[0.0; 3], &[0.0; 2], 0.0, 0.0, None)).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn negative_counts_are_rejected() {
        assert!(build_feature_vector(&raw(&[-1.0], &[0.0], 0.0, 0.0, None)).is_err());
    }

    #[test]
    fn single_row_normalizer_is_degenerate() {
        let row = build_feature_vector(&raw(&[1.0, 2.0], &[3.0], 4.0, 5.0, None)).unwrap();
        let n = fit_normalizer(std::slice::from_ref(&row)).unwrap();
        assert_eq!(n.min(), n.max());
        // Degenerate features map to 0.
        let scaled = apply_normalizer(&n, &row).unwrap();
        assert!(scaled.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalizer_endpoints_and_clamping() {
        let lo = SpatialContextVector { values: vec![0.0], has_cp: false };
        let hi = SpatialContextVector { values: vec![10.0], has_cp: false };
        let n = fit_normalizer(&[lo.clone(), hi.clone()]).unwrap();
        assert_eq!(n.min(), &[0.0]);
        assert_eq!(n.max(), &[10.0]);
        assert_eq!(apply_normalizer(&n, &lo).unwrap().values, vec![0.0]);
        assert_eq!(apply_normalizer(&n, &hi).unwrap().values, vec![1.0]);
        let beyond = SpatialContextVector { values: vec![25.0], has_cp: false };
        assert_eq!(apply_normalizer(&n, &beyond).unwrap().values, vec![1.0]);
    }

    #[test]
    fn normalizer_rejects_empty_and_mismatched_input() {
        assert!(fit_normalizer(&[]).is_err());
        let a = SpatialContextVector { values: vec![1.0, 2.0], has_cp: false };
        let b = SpatialContextVector { values: vec![1.0], has_cp: false };
        assert!(fit_normalizer(&[a.clone(), b.clone()]).is_err());
        let n = fit_normalizer(&[a]).unwrap();
        assert!(apply_normalizer(&n, &b).is_err());
    }

    #[test]
    fn normalization_is_idempotent_on_fitted_rows() {
        let rows: Vec<SpatialContextVector> = (0..5)
            .map(|i| SpatialContextVector {
                values: vec![i as f64, 10.0 - i as f64, 7.0],
                has_cp: false,
            })
            .collect();
        let n = fit_normalizer(&rows).unwrap();
        let once: Vec<_> =
            rows.iter().map(|r| apply_normalizer(&n, r).unwrap()).collect();
        let n2 = fit_normalizer(&once).unwrap();
        for r in &once {
            let twice = apply_normalizer(&n2, r).unwrap();
            for (a, b) in twice.values.iter().zip(&r.values) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn grid_cell_assignment_uses_floor() {
        let g = GridSpec { origin_x: 0.0, origin_y: 0.0, cell_size: 152.0, width: 10, height: 10 };
        assert_eq!(g.assign_grid_cell(0.0, 0.0).unwrap(), (0, 0));
        assert_eq!(g.assign_grid_cell(1.5 * 152.0, 0.5 * 152.0).unwrap(), (0, 1));
        assert!(g.assign_grid_cell(-1.0, 0.0).is_err());
        assert!(g.assign_grid_cell(0.0, 10.0 * 152.0).is_err());
    }

    #[test]
    fn layout_indices_are_the_golden_ordering() {
        let layout = FeatureLayout::default();
        assert_eq!(layout.idx_poi(0), 0);
        assert_eq!(layout.idx_poi_total(), 8);
        assert_eq!(layout.idx_poi_entropy(), 9);
        assert_eq!(layout.idx_road(0), 10);
        assert_eq!(layout.idx_working_pop(), 14);
        assert_eq!(layout.idx_residential_pop(), 15);
        assert_eq!(layout.idx_consumption_pop(), 16);
        assert_eq!(layout.base_len(), 16);
        assert_eq!(layout.full_len(), 17);

        // The golden vector: a region built with default category counts
        // must place every field at the index the layout promises.
        let raw = RawRegionData {
            poi_counts: (1..=8).map(f64::from).collect(),
            road_counts: (21..=24).map(f64::from).collect(),
            working_pop: 31.0,
            residential_pop: 32.0,
            consumption_pop: Some(33.0),
        };
        let v = build_feature_vector(&raw).unwrap();
        assert_eq!(v.values[layout.idx_poi(3)], 4.0);
        assert_eq!(v.values[layout.idx_poi_total()], 36.0);
        assert_eq!(v.values[layout.idx_road(2)], 23.0);
        assert_eq!(v.values[layout.idx_working_pop()], 31.0);
        assert_eq!(v.values[layout.idx_residential_pop()], 32.0);
        assert_eq!(v.values[layout.idx_consumption_pop()], 33.0);
    }
}
