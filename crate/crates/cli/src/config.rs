//! Experiment configuration: a flat, typed key-value file with one level of
//! per-city blocks.
//!
//! ```text
//! # comment
//! seeds = 42
//! lambda = 0.6
//! rounds = 200
//!
//! [city 1]
//! role = source
//! n_regions = 3000
//! poi_weights = 0.30,0.22,0.16,0.11,0.08,0.06,0.04,0.03
//! ```
//!
//! An empty file yields the full default configuration (standard
//! hyperparameters plus the built-in 2-source + 1-target scenario). Unknown
//! keys are rejected; every range violation names the offending key.

use std::path::{Path, PathBuf};

use cityfed_core::federation::AggregationMode;
use cityfed_core::seeding::{derive_seed, SALT_CITY};
use cityfed_core::synthgen::{standard_city_configs, CityGenConfig};
use cityfed_core::transfer::ExperimentParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CityRole {
    Source,
    Target,
}

/// One `[city N]` block.
#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    pub city_id: u32,
    pub role: CityRole,
    pub n_regions: usize,
    pub poi_weights: Vec<f64>,
    pub poi_volume_scale: f64,
    pub pop_scale: f64,
    pub noise_sigma: f64,
    pub label_skew: f64,
}

impl CityConfig {
    /// The generator config for this city under a given run seed.
    pub fn gen_config(&self, run_seed: u64) -> CityGenConfig {
        CityGenConfig {
            city_id: self.city_id,
            n_regions: self.n_regions,
            poi_category_weights: self.poi_weights.clone(),
            poi_volume_scale: self.poi_volume_scale,
            pop_scale: self.pop_scale,
            noise_sigma: self.noise_sigma,
            label_skew: self.label_skew,
            seed: derive_seed(derive_seed(run_seed, SALT_CITY), u64::from(self.city_id)),
        }
    }
}

/// The full experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub fine_tune_epochs: usize,
    pub label_fraction: f64,
    pub mode: AggregationMode,
    pub key_bits: u32,
    pub scale_bits: u32,
    pub record_timing: bool,
    pub out_dir: PathBuf,
    pub fe_dims: Vec<usize>,
    pub dr_dims: Vec<usize>,
    pub dc_dims: Vec<usize>,
    pub utp_dims: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub fraction_grid: Vec<f64>,
    pub client_grid: Vec<f64>,
    pub cities: Vec<CityConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // The built-in scenario mirrors the standard generator configs;
        // per-city seeds are derived from the run seed at generation time.
        let cities = standard_city_configs(3000, 0.05, 0)
            .into_iter()
            .map(|c| CityConfig {
                city_id: c.city_id,
                role: if c.city_id == 3 { CityRole::Target } else { CityRole::Source },
                n_regions: c.n_regions,
                poi_weights: c.poi_category_weights,
                poi_volume_scale: c.poi_volume_scale,
                pop_scale: c.pop_scale,
                noise_sigma: c.noise_sigma,
                label_skew: c.label_skew,
            })
            .collect();
        Self {
            seeds: vec![42],
            lambda: 0.6,
            lr: 0.01,
            batch_size: 128,
            rounds: 200,
            local_epochs: 1,
            fine_tune_epochs: 50,
            label_fraction: 0.20,
            mode: AggregationMode::Plaintext,
            key_bits: 2048,
            scale_bits: 16,
            record_timing: false,
            out_dir: PathBuf::from("out"),
            fe_dims: vec![256, 128],
            dr_dims: vec![64, 32],
            dc_dims: vec![64],
            utp_dims: vec![256, 64, 32],
            lambda_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            fraction_grid: vec![0.05, 0.10, 0.15, 0.20, 0.25],
            client_grid: vec![2.0],
            cities,
        }
    }
}

impl ExperimentConfig {
    /// Training hyperparameters in core form.
    pub fn experiment_params(&self) -> ExperimentParams {
        ExperimentParams {
            lambda: self.lambda,
            lr: self.lr,
            batch_size: self.batch_size,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            fine_tune_epochs: self.fine_tune_epochs,
            label_fraction: self.label_fraction,
            mode: self.mode,
            scale_bits: self.scale_bits,
            key_bits: self.key_bits,
            fe_hidden: self.fe_dims.clone(),
            dr_hidden: self.dr_dims.clone(),
            dc_hidden: self.dc_dims.clone(),
            utp_hidden: self.utp_dims.clone(),
        }
    }

    pub fn sources(&self) -> impl Iterator<Item = &CityConfig> {
        self.cities.iter().filter(|c| c.role == CityRole::Source)
    }

    pub fn target(&self) -> &CityConfig {
        self.cities
            .iter()
            .find(|c| c.role == CityRole::Target)
            .expect("validated: exactly one target")
    }

    fn validate(&self) -> Result<(), CliError> {
        let err = |key: &str, msg: String| Err(CliError::Config(format!("key '{key}': {msg}")));
        if self.seeds.is_empty() {
            return err("seeds", "at least one seed is required".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return err("lambda", format!("{} is outside [0, 1]", self.lambda));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return err("lr", format!("{} must be a positive number", self.lr));
        }
        if self.batch_size == 0 {
            return err("batch_size", "must be >= 1".into());
        }
        if self.rounds == 0 {
            return err("rounds", "must be >= 1".into());
        }
        if self.local_epochs == 0 {
            return err("local_epochs", "must be >= 1".into());
        }
        if !(self.label_fraction > 0.0 && self.label_fraction < 1.0) {
            return err("label_fraction", format!("{} is outside (0, 1)", self.label_fraction));
        }
        if self.key_bits < 128 {
            return err("key_bits", format!("{} is below the 128-bit minimum", self.key_bits));
        }
        if !(1..=30).contains(&self.scale_bits) {
            return err("scale_bits", format!("{} is outside 1..=30", self.scale_bits));
        }
        for (key, dims) in [
            ("fe_dims", &self.fe_dims),
            ("dr_dims", &self.dr_dims),
            ("dc_dims", &self.dc_dims),
            ("utp_dims", &self.utp_dims),
        ] {
            if dims.is_empty() || dims.iter().any(|&d| d == 0) {
                return err(key, "layer widths must be non-empty and positive".into());
            }
        }
        for &v in &self.lambda_grid {
            if !(0.0..=1.0).contains(&v) {
                return err("lambda_grid", format!("{v} is outside [0, 1]"));
            }
        }
        for &v in &self.fraction_grid {
            if !(v > 0.0 && v < 1.0) {
                return err("fraction_grid", format!("{v} is outside (0, 1)"));
            }
        }
        for &v in &self.client_grid {
            if v < 1.0 || v.fract() != 0.0 {
                return err("client_grid", format!("{v} must be a positive integer"));
            }
        }

        if self.cities.is_empty() {
            return err("cities", "at least one [city N] block (or none for defaults)".into());
        }
        let n_targets = self.cities.iter().filter(|c| c.role == CityRole::Target).count();
        let n_sources = self.cities.len() - n_targets;
        if n_targets != 1 {
            return err("role", format!("exactly one target city is required, found {n_targets}"));
        }
        if n_sources == 0 {
            return err("role", "at least one source city is required".into());
        }
        let mut ids: Vec<u32> = self.cities.iter().map(|c| c.city_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return err("city", "duplicate city ids".into());
        }
        for c in &self.cities {
            let city = format!("[city {}]", c.city_id);
            if c.n_regions < 10 {
                return err("n_regions", format!("{city}: {} is below the minimum of 10", c.n_regions));
            }
            if c.poi_weights.len() != 8 {
                return err(
                    "poi_weights",
                    format!("{city}: schema v1 requires exactly 8 weights, got {}", c.poi_weights.len()),
                );
            }
            let sum: f64 = c.poi_weights.iter().sum();
            if c.poi_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return err("poi_weights", format!("{city}: weights must be >= 0 and sum to 1"));
            }
            if !(c.poi_volume_scale > 0.0) {
                return err("poi_volume_scale", format!("{city}: must be > 0"));
            }
            if !(c.pop_scale > 0.0) {
                return err("pop_scale", format!("{city}: must be > 0"));
            }
            if !(c.noise_sigma >= 0.0) || !c.noise_sigma.is_finite() {
                return err("noise_sigma", format!("{city}: must be >= 0"));
            }
            if !(c.label_skew > 1.0) {
                return err("label_skew", format!("{city}: must be > 1"));
            }
        }
        Ok(())
    }
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| {
        CliError::Config(format!("line {line}: key '{key}': cannot parse {value:?}"))
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|part| parse_scalar(key, part, line))
        .collect()
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config_str(&text)
}

/// Parses a configuration from text (exposed for tests).
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    let mut explicit_cities: Vec<CityConfig> = Vec::new();
    let mut current_city: Option<CityConfig> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: unterminated section header")))?
                .trim();
            let id_str = header.strip_prefix("city").ok_or_else(|| {
                CliError::Config(format!("line {line_no}: unknown section {header:?} (expected [city N])"))
            })?;
            let city_id: u32 = parse_scalar("city", id_str, line_no)?;
            if let Some(done) = current_city.take() {
                explicit_cities.push(done);
            }
            // Block defaults: a generic mid-size city with uniform POI mix.
            current_city = Some(CityConfig {
                city_id,
                role: CityRole::Source,
                n_regions: 3000,
                poi_weights: vec![0.125; 8],
                poi_volume_scale: 20.0,
                pop_scale: 100.0,
                noise_sigma: 0.05,
                label_skew: 2.5,
            });
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {line_no}: expected 'key = value', got {line:?}"))
        })?;
        let key = key.trim();
        let value = value.trim();

        if let Some(city) = current_city.as_mut() {
            match key {
                "role" => {
                    city.role = match value {
                        "source" => CityRole::Source,
                        "target" => CityRole::Target,
                        other => {
                            return Err(CliError::Config(format!(
                                "line {line_no}: key 'role': {other:?} is not 'source' or 'target'"
                            )))
                        }
                    }
                }
                "n_regions" => city.n_regions = parse_scalar(key, value, line_no)?,
                "poi_weights" => city.poi_weights = parse_list(key, value, line_no)?,
                "poi_volume_scale" => city.poi_volume_scale = parse_scalar(key, value, line_no)?,
                "pop_scale" => city.pop_scale = parse_scalar(key, value, line_no)?,
                "noise_sigma" => city.noise_sigma = parse_scalar(key, value, line_no)?,
                "label_skew" => city.label_skew = parse_scalar(key, value, line_no)?,
                other => {
                    return Err(CliError::Config(format!(
                        "line {line_no}: unknown city key '{other}'"
                    )))
                }
            }
            continue;
        }

        match key {
            "seeds" => cfg.seeds = parse_list(key, value, line_no)?,
            "lambda" => cfg.lambda = parse_scalar(key, value, line_no)?,
            "lr" => cfg.lr = parse_scalar(key, value, line_no)?,
            "batch_size" => cfg.batch_size = parse_scalar(key, value, line_no)?,
            "rounds" => cfg.rounds = parse_scalar(key, value, line_no)?,
            "local_epochs" => cfg.local_epochs = parse_scalar(key, value, line_no)?,
            "fine_tune_epochs" => cfg.fine_tune_epochs = parse_scalar(key, value, line_no)?,
            "label_fraction" => cfg.label_fraction = parse_scalar(key, value, line_no)?,
            "mode" => {
                cfg.mode = match value {
                    "plaintext" => AggregationMode::Plaintext,
                    "encrypted" => AggregationMode::Encrypted,
                    other => {
                        return Err(CliError::Config(format!(
                            "line {line_no}: key 'mode': {other:?} is not 'plaintext' or 'encrypted'"
                        )))
                    }
                }
            }
            "key_bits" => cfg.key_bits = parse_scalar(key, value, line_no)?,
            "scale_bits" => cfg.scale_bits = parse_scalar(key, value, line_no)?,
            "record_timing" => cfg.record_timing = parse_scalar(key, value, line_no)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "fe_dims" => cfg.fe_dims = parse_list(key, value, line_no)?,
            "dr_dims" => cfg.dr_dims = parse_list(key, value, line_no)?,
            "dc_dims" => cfg.dc_dims = parse_list(key, value, line_no)?,
            "utp_dims" => cfg.utp_dims = parse_list(key, value, line_no)?,
            "lambda_grid" => cfg.lambda_grid = parse_list(key, value, line_no)?,
            "fraction_grid" => cfg.fraction_grid = parse_list(key, value, line_no)?,
            "client_grid" => cfg.client_grid = parse_list(key, value, line_no)?,
            other => return Err(CliError::Config(format!("line {line_no}: unknown key '{other}'"))),
        }
    }
    if let Some(done) = current_city.take() {
        explicit_cities.push(done);
    }
    if !explicit_cities.is_empty() {
        cfg.cities = explicit_cities;
    }

    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_yields_all_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.lambda, 0.6);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.rounds, 200);
        assert_eq!(cfg.local_epochs, 1);
        assert_eq!(cfg.fine_tune_epochs, 50);
        assert_eq!(cfg.label_fraction, 0.20);
        assert_eq!(cfg.mode, AggregationMode::Plaintext);
        assert_eq!(cfg.cities.len(), 3);
        assert_eq!(cfg.target().city_id, 3);
        assert_eq!(cfg.sources().count(), 2);
    }

    #[test]
    fn out_of_range_lambda_names_the_key() {
        let err = parse_config_str("lambda = 1.5").unwrap_err();
        match err {
            CliError::Config(msg) => assert!(msg.contains("lambda"), "{msg}"),
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_str("lamda = 0.5").is_err());
        assert!(parse_config_str("[city 1]\nrole = source\nbogus = 1").is_err());
    }

    #[test]
    fn parsing_is_deterministic() {
        let text = "seeds = 1,2,3\nlambda = 0.4\n[city 7]\nrole = target\n[city 8]\nrole = source\n";
        let a = parse_config_str(text).unwrap();
        let b = parse_config_str(text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seeds, vec![1, 2, 3]);
        assert_eq!(a.cities.len(), 2);
    }

    #[test]
    fn city_blocks_need_exactly_one_target() {
        assert!(parse_config_str("[city 1]\nrole = source").is_err());
        assert!(parse_config_str("[city 1]\nrole = target").is_err());
        let two = "[city 1]\nrole = target\n[city 2]\nrole = target";
        assert!(parse_config_str(two).is_err());
        let ok = "[city 1]\nrole = source\n[city 2]\nrole = target";
        assert!(parse_config_str(ok).is_ok());
    }

    #[test]
    fn city_weights_are_validated() {
        let bad = "[city 1]\nrole = source\npoi_weights = 0.5,0.5\n[city 2]\nrole = target";
        assert!(parse_config_str(bad).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config_str("# header\n\nlambda = 0.2 # trailing\n").unwrap();
        assert_eq!(cfg.lambda, 0.2);
    }
}
