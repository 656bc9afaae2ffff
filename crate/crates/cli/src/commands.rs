//! Command implementations, shared by the binary and the tests.
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! data/city_<id>.csv           generated datasets (+ city_<id>_truth.csv
//!                              for the target city)
//! checkpoints/darkl.bin        global relational model
//! checkpoints/utp.bin          global task model
//! checkpoints/round_log.csv    per-round client losses
//! transfer/utp_finetuned.bin   fine-tuned task model
//! transfer/predictions.csv     per-region level predictions and imputations
//! metrics.csv                  evaluation of the pipeline run
//! ablation.csv                 all six variants per seed
//! sweep_<kind>.csv             sweep rows
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use cityfed_core::features::CityId;
use cityfed_core::federation::{run_federated_training, FederationConfig};
use cityfed_core::io;
use cityfed_core::models::{ClientData, DarklDims, DarklModel, UtpModel};
use cityfed_core::seeding::{
    derive_seed, SALT_DARKL_INIT, SALT_FINE_TUNE, SALT_TARGET_SPLIT, SALT_UTP_INIT,
};
use cityfed_core::synthgen::{generate_city, CityDataset, RelationalGroundTruth, N_LEVELS};
use cityfed_core::transfer::{
    build_task_inputs, fine_tune, impute_missing, macro_prf1, mae_mse, predict, run_ablation,
    sweep as run_sweep, MetricsReport, Scenario, SweepKind, TargetData, TargetSplit,
};

use crate::config::{CityRole, ExperimentConfig};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("data")
}

pub fn city_csv_path(cfg: &ExperimentConfig, id: CityId) -> PathBuf {
    data_dir(cfg).join(format!("city_{id}.csv"))
}

pub fn truth_csv_path(cfg: &ExperimentConfig, id: CityId) -> PathBuf {
    data_dir(cfg).join(format!("city_{id}_truth.csv"))
}

pub fn checkpoint_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("checkpoints")
}

pub fn transfer_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("transfer")
}

/// `c1+c2->c3`-style scenario label for report rows.
fn scenario_label(cfg: &ExperimentConfig) -> String {
    let mut sources: Vec<CityId> = cfg.sources().map(|c| c.city_id).collect();
    sources.sort_unstable();
    let src: Vec<String> = sources.iter().map(|id| format!("c{id}")).collect();
    format!("{}->c{}", src.join("+"), cfg.target().city_id)
}

fn run_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

/// Generates every configured city and writes the dataset CSVs. The target
/// city is written without its consumption column plus a truth sidecar.
pub fn generate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = data_dir(cfg);
    fs::create_dir_all(&dir).map_err(cityfed_core::Error::from)?;
    let g = RelationalGroundTruth::default();
    let seed = run_seed(cfg);
    for city_cfg in &cfg.cities {
        let mut city = generate_city(&city_cfg.gen_config(seed), &g)?;
        if city_cfg.role == CityRole::Target {
            city.strip_consumption();
            io::write_truth_csv(&truth_csv_path(cfg, city.city_id), &city)?;
        }
        io::write_city_csv(&city_csv_path(cfg, city.city_id), &city)?;
        log::info!("wrote {} regions for city {}", city.n_regions(), city.city_id);
    }
    Ok(())
}

fn load_city(cfg: &ExperimentConfig, id: CityId, want_truth: bool) -> Result<CityDataset> {
    let path = city_csv_path(cfg, id);
    if !path.exists() {
        return Err(CliError::MissingArtifact(format!(
            "dataset {} (run `generate` first)",
            path.display()
        )));
    }
    let mut city = io::read_city_csv(&path)?;
    let truth = truth_csv_path(cfg, id);
    if truth.exists() {
        io::apply_truth_csv(&truth, &mut city)?;
    } else if want_truth && city.ground_truth_cp.is_none() {
        return Err(CliError::MissingArtifact(format!(
            "truth sidecar {} (run `generate` first)",
            truth.display()
        )));
    }
    Ok(city)
}

fn load_scenario(cfg: &ExperimentConfig, want_truth: bool) -> Result<Scenario> {
    let sources = cfg
        .sources()
        .map(|c| load_city(cfg, c.city_id, false))
        .collect::<Result<Vec<_>>>()?;
    let target = load_city(cfg, cfg.target().city_id, want_truth)?;
    Ok(Scenario { sources, target })
}

/// Federated stage-I training over the generated source cities; writes the
/// two global checkpoints and the round log.
pub fn train(cfg: &ExperimentConfig) -> Result<()> {
    let scenario = load_scenario(cfg, false)?;
    let clients: Vec<ClientData> = scenario
        .sources
        .iter()
        .map(ClientData::from_source_city)
        .collect::<cityfed_core::Result<_>>()?;
    let layout = *clients[0].layout();
    let seed = run_seed(cfg);

    let dims = DarklDims {
        input: layout.base_len(),
        fe_hidden: cfg.fe_dims.clone(),
        dr_hidden: cfg.dr_dims.clone(),
        dc_hidden: cfg.dc_dims.clone(),
        n_domains: clients.len(),
    };
    let darkl0 = DarklModel::init(&dims, cfg.lambda, derive_seed(seed, SALT_DARKL_INIT))?;
    let utp0 = UtpModel::init(layout.full_len(), &cfg.utp_dims, derive_seed(seed, SALT_UTP_INIT))?;
    let fed_cfg = FederationConfig {
        rounds: cfg.rounds,
        local_epochs: cfg.local_epochs,
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        mode: cfg.mode,
        scale_bits: cfg.scale_bits,
        key_bits: cfg.key_bits,
        train_task: true,
        seed,
    };
    let outcome = run_federated_training(&clients, &darkl0, &utp0, &fed_cfg)?;

    let dir = checkpoint_dir(cfg);
    fs::create_dir_all(&dir).map_err(cityfed_core::Error::from)?;
    io::write_darkl_checkpoint(&dir.join("darkl.bin"), &outcome.darkl)?;
    io::write_utp_checkpoint(&dir.join("utp.bin"), &outcome.utp)?;
    io::write_round_log(&dir.join("round_log.csv"), &outcome.round_log, cfg.record_timing)?;
    Ok(())
}

/// Stage II: impute the target's consumption, fine-tune the task model on
/// the labeled split, and write predictions for every region.
pub fn transfer(cfg: &ExperimentConfig) -> Result<()> {
    let ckpt = checkpoint_dir(cfg);
    let darkl = io::read_darkl_checkpoint(&ckpt.join("darkl.bin"))?;
    let utp = io::read_utp_checkpoint(&ckpt.join("utp.bin"))?;
    let target_city = load_city(cfg, cfg.target().city_id, false)?;
    let target = TargetData::from_city(&target_city)?;
    let seed = run_seed(cfg);

    let cp_hat = impute_missing(&darkl, target.x_base())?;
    let x_task = build_task_inputs(target.x_base(), &cp_hat)?;
    let split = TargetSplit::new(
        target.n_regions(),
        cfg.label_fraction,
        derive_seed(seed, SALT_TARGET_SPLIT),
    )?;
    let tuned = fine_tune(
        &utp,
        &x_task,
        target.labels(),
        &split,
        cfg.fine_tune_epochs,
        cfg.lr,
        cfg.batch_size,
        derive_seed(seed, SALT_FINE_TUNE),
    )?;
    let predictions = predict(&tuned, &x_task)?;

    let dir = transfer_dir(cfg);
    fs::create_dir_all(&dir).map_err(cityfed_core::Error::from)?;
    io::write_utp_checkpoint(&dir.join("utp_finetuned.bin"), &tuned)?;
    io::write_predictions_csv(&dir.join("predictions.csv"), &target_city, &predictions, &cp_hat)?;
    Ok(())
}

/// Scores the transfer artifacts: imputation error over all target regions
/// and macro task metrics on the held-out split.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let target_city = load_city(cfg, cfg.target().city_id, true)?;
    let target = TargetData::from_city(&target_city)?;
    let rows = io::read_predictions_csv(&transfer_dir(cfg).join("predictions.csv"))?;
    if rows.len() != target.n_regions() {
        return Err(CliError::Other(cityfed_core::Error::DimMismatch(format!(
            "{} prediction rows for {} target regions",
            rows.len(),
            target.n_regions()
        ))));
    }
    for (i, (region, _, _)) in rows.iter().enumerate() {
        if region != &target_city.regions[i] {
            return Err(CliError::Other(cityfed_core::Error::Format {
                path: "predictions.csv".into(),
                msg: format!("row {i} does not match the dataset's region order"),
            }));
        }
    }

    let seed = run_seed(cfg);
    let split = TargetSplit::new(
        target.n_regions(),
        cfg.label_fraction,
        derive_seed(seed, SALT_TARGET_SPLIT),
    )?;

    let cp_hat: Vec<f64> = rows.iter().map(|(_, _, cp)| *cp).collect();
    let cp_true = target.cp_true_norm().ok_or_else(|| {
        CliError::MissingArtifact("target ground-truth consumption values".into())
    })?;
    let (mae, mse) = mae_mse(cp_true, &cp_hat)?;

    let mut truth = Vec::with_capacity(split.unlabeled.len());
    let mut preds = Vec::with_capacity(split.unlabeled.len());
    for &i in &split.unlabeled {
        let label = target.labels()[i].ok_or_else(|| {
            CliError::Other(cityfed_core::Error::MissingLabels(format!(
                "evaluation region {i} has no ground-truth label"
            )))
        })?;
        truth.push(label);
        preds.push(rows[i].1);
    }
    let (precision, recall, f1) = macro_prf1(&truth, &preds, N_LEVELS)?;

    let report = MetricsReport {
        mae,
        mse,
        precision,
        recall,
        f1,
        support: MetricsReport::support_of(&truth),
    };
    let row = io::MetricsRow {
        variant: "full".into(),
        scenario: scenario_label(cfg),
        seed,
        report,
        epoch_time_s: None,
    };
    io::write_metrics_csv(&cfg.out_dir.join("metrics.csv"), &[row])?;
    Ok(())
}

/// Runs all six experiment variants for every configured seed.
pub fn ablate(cfg: &ExperimentConfig) -> Result<()> {
    let scenario = load_scenario(cfg, true)?;
    let params = cfg.experiment_params();
    let label = scenario_label(cfg);
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        for (variant, report) in run_ablation(&scenario, &params, seed)? {
            rows.push(io::MetricsRow {
                variant: variant.name().into(),
                scenario: label.clone(),
                seed,
                report,
                epoch_time_s: None,
            });
        }
    }
    io::write_metrics_csv(&cfg.out_dir.join("ablation.csv"), &rows)?;
    Ok(())
}

/// Runs one hyperparameter sweep over the configured grid and seeds.
pub fn sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<()> {
    let scenario = load_scenario(cfg, true)?;
    let params = cfg.experiment_params();
    let grid = match kind {
        SweepKind::Lambda => &cfg.lambda_grid,
        SweepKind::LabelFraction => &cfg.fraction_grid,
        SweepKind::ClientCount => &cfg.client_grid,
    };
    let rows = run_sweep(kind, grid, &scenario, &params, &cfg.seeds)?;
    let path = cfg.out_dir.join(format!("sweep_{}.csv", kind.name()));
    io::write_sweep_csv(&path, &rows, cfg.record_timing)?;
    Ok(())
}

/// The full pipeline: generate, train, transfer, evaluate.
pub fn all(cfg: &ExperimentConfig) -> Result<()> {
    generate(cfg)?;
    train(cfg)?;
    transfer(cfg)?;
    evaluate(cfg)
}

/// Dispatch by command name (the binary's entry point).
pub fn run_command(command: &str, sweep_kind: Option<&str>, cfg: &ExperimentConfig) -> Result<()> {
    match command {
        "generate" => generate(cfg),
        "train" => train(cfg),
        "transfer" => transfer(cfg),
        "evaluate" => evaluate(cfg),
        "ablate" => ablate(cfg),
        "sweep" => {
            let kind_name = sweep_kind.ok_or_else(|| {
                CliError::Config("sweep needs a kind: lambda, label_fraction, or client_count".into())
            })?;
            let kind = SweepKind::from_name(kind_name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown sweep kind {kind_name:?} (expected lambda, label_fraction, or client_count)"
                ))
            })?;
            sweep(cfg, kind)
        }
        "all" => all(cfg),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}

/// Applies command-line overrides on top of a parsed config.
pub fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    out: Option<&Path>,
    mode: Option<&str>,
) -> Result<()> {
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = out {
        cfg.out_dir = out.to_path_buf();
    }
    if let Some(mode) = mode {
        cfg.mode = match mode {
            "plaintext" => cityfed_core::federation::AggregationMode::Plaintext,
            "encrypted" => cityfed_core::federation::AggregationMode::Encrypted,
            other => {
                return Err(CliError::Config(format!(
                    "--mode {other:?} is not 'plaintext' or 'encrypted'"
                )))
            }
        };
    }
    Ok(())
}
