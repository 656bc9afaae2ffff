//! Experiment variants, ablations, and hyperparameter sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::federation::{
    run_federated_training, AggregationMode, FederatedOutcome, FederationConfig,
};
use crate::models::{ClientData, DarklDims, DarklModel, UtpModel};
use crate::seeding::{
    derive_seed, SALT_DARKL_INIT, SALT_FINE_TUNE, SALT_TARGET_SPLIT, SALT_UTP_INIT,
    SALT_UTP_SCRATCH,
};
use crate::synthgen::{generate_city, standard_city_configs, CityDataset, RelationalGroundTruth};
use crate::transfer::metrics::{macro_prf1, mae_mse, MetricsReport};
use crate::transfer::{build_task_inputs, fine_tune, impute_missing, predict, TargetData, TargetSplit};

/// The ablations and baselines of the evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentVariant {
    /// Federated training of both modules, imputation, fine-tuning.
    Full,
    /// No relational transfer: the consumption feature is fixed at the
    /// uninformative prior 0.5 in normalized space.
    NoDarkl,
    /// No task-parameter transfer: the task model starts from scratch on the
    /// target's labeled split (the relational module still federates).
    NoUtp,
    /// Task parameters transferred without target updates.
    NoFinetune,
    /// Adversarial weight fixed at zero throughout training.
    NoDomainClassifier,
    /// No source data at all: a fresh task model on the labeled split with
    /// the consumption feature at 0.5.
    TargetOnly,
}

impl ExperimentVariant {
    pub const ALL: [ExperimentVariant; 6] = [
        ExperimentVariant::Full,
        ExperimentVariant::NoDarkl,
        ExperimentVariant::NoUtp,
        ExperimentVariant::NoFinetune,
        ExperimentVariant::NoDomainClassifier,
        ExperimentVariant::TargetOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentVariant::Full => "full",
            ExperimentVariant::NoDarkl => "no_darkl",
            ExperimentVariant::NoUtp => "no_utp",
            ExperimentVariant::NoFinetune => "no_finetune",
            ExperimentVariant::NoDomainClassifier => "no_domain_classifier",
            ExperimentVariant::TargetOnly => "target_only",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }
}

impl std::fmt::Display for ExperimentVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters of one experiment. The defaults are the standard
/// configuration: lambda 0.6, learning rate 0.01, batch 128, 200 rounds of
/// one local epoch, 50 fine-tune epochs, 20% target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub fine_tune_epochs: usize,
    pub label_fraction: f64,
    pub mode: AggregationMode,
    pub scale_bits: u32,
    pub key_bits: u32,
    pub fe_hidden: Vec<usize>,
    pub dr_hidden: Vec<usize>,
    pub dc_hidden: Vec<usize>,
    pub utp_hidden: Vec<usize>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            lambda: 0.6,
            lr: 0.01,
            batch_size: 128,
            rounds: 200,
            local_epochs: 1,
            fine_tune_epochs: 50,
            label_fraction: 0.20,
            mode: AggregationMode::Plaintext,
            scale_bits: 16,
            key_bits: 2048,
            fe_hidden: vec![256, 128],
            dr_hidden: vec![64, 32],
            dc_hidden: vec![64],
            utp_hidden: vec![256, 64, 32],
        }
    }
}

/// Source cities plus one target city.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: Vec<CityDataset>,
    pub target: CityDataset,
}

/// Generates the standard 2-source + 1-target synthetic scenario.
pub fn default_scenario(n_regions: usize, noise_sigma: f64, seed: u64) -> Result<Scenario> {
    let g = RelationalGroundTruth::default();
    let configs = standard_city_configs(n_regions, noise_sigma, seed);
    let mut cities: Vec<CityDataset> = configs
        .iter()
        .map(|cfg| generate_city(cfg, &g))
        .collect::<Result<_>>()?;
    let mut target = cities.pop().expect("three cities");
    target.strip_consumption();
    Ok(Scenario { sources: cities, target })
}

/// Prepared per-city views, shared by every variant of one scenario.
struct PreparedScenario {
    clients: Vec<ClientData>,
    target: TargetData,
}

impl PreparedScenario {
    fn new(scenario: &Scenario) -> Result<Self> {
        if scenario.sources.is_empty() {
            return Err(Error::EmptyInput("scenario sources"));
        }
        let mut clients: Vec<ClientData> = scenario
            .sources
            .iter()
            .map(ClientData::from_source_city)
            .collect::<Result<_>>()?;
        clients.sort_by_key(|c| c.city_id());
        let target = TargetData::from_city(&scenario.target)?;
        for c in &clients {
            if c.layout() != target.layout() {
                return Err(Error::DimMismatch(format!(
                    "source city {} and target city {} use different feature layouts",
                    c.city_id(),
                    target.city_id()
                )));
            }
        }
        Ok(Self { clients, target })
    }
}

/// Stage-I training with explicit lambda and task-training switches.
fn train_stage_one(
    prepared: &PreparedScenario,
    params: &ExperimentParams,
    lambda: f64,
    train_task: bool,
    seed: u64,
) -> Result<FederatedOutcome> {
    let layout = prepared.target.layout();
    let dims = DarklDims {
        input: layout.base_len(),
        fe_hidden: params.fe_hidden.clone(),
        dr_hidden: params.dr_hidden.clone(),
        dc_hidden: params.dc_hidden.clone(),
        n_domains: prepared.clients.len(),
    };
    let darkl0 = DarklModel::init(&dims, lambda, derive_seed(seed, SALT_DARKL_INIT))?;
    let utp0 = UtpModel::init(layout.full_len(), &params.utp_hidden, derive_seed(seed, SALT_UTP_INIT))?;
    let cfg = FederationConfig {
        rounds: params.rounds,
        local_epochs: params.local_epochs,
        lr: params.lr,
        batch_size: params.batch_size,
        mode: params.mode,
        scale_bits: params.scale_bits,
        key_bits: params.key_bits,
        train_task,
        seed,
    };
    run_federated_training(&prepared.clients, &darkl0, &utp0, &cfg)
}

/// Stage-II evaluation of one variant against a (possibly absent) stage-I
/// outcome.
fn stage_two(
    variant: ExperimentVariant,
    prepared: &PreparedScenario,
    outcome: Option<&FederatedOutcome>,
    params: &ExperimentParams,
    seed: u64,
) -> Result<MetricsReport> {
    use ExperimentVariant::*;

    let target = &prepared.target;
    let n = target.n_regions();
    let split = TargetSplit::new(n, params.label_fraction, derive_seed(seed, SALT_TARGET_SPLIT))?;

    let cp_hat = match variant {
        NoDarkl | TargetOnly => vec![0.5; n],
        _ => {
            let outcome = outcome.expect("stage one ran for this variant");
            impute_missing(&outcome.darkl, target.x_base())?
        }
    };
    let x_task = build_task_inputs(target.x_base(), &cp_hat)?;

    let tuned;
    let utp_final: &UtpModel = match variant {
        NoFinetune => &outcome.expect("stage one ran").utp,
        Full | NoDarkl | NoDomainClassifier => {
            tuned = fine_tune(
                &outcome.expect("stage one ran").utp,
                &x_task,
                target.labels(),
                &split,
                params.fine_tune_epochs,
                params.lr,
                params.batch_size,
                derive_seed(seed, SALT_FINE_TUNE),
            )?;
            &tuned
        }
        NoUtp | TargetOnly => {
            let scratch = UtpModel::init(
                target.layout().full_len(),
                &params.utp_hidden,
                derive_seed(seed, SALT_UTP_SCRATCH),
            )?;
            tuned = fine_tune(
                &scratch,
                &x_task,
                target.labels(),
                &split,
                params.fine_tune_epochs,
                params.lr,
                params.batch_size,
                derive_seed(seed, SALT_FINE_TUNE),
            )?;
            &tuned
        }
    };

    let x_eval = x_task.gather_rows(&split.unlabeled);
    let preds = predict(utp_final, &x_eval)?;
    let truth: Vec<u8> = split
        .unlabeled
        .iter()
        .map(|&i| {
            target.labels()[i].ok_or_else(|| {
                Error::MissingLabels(format!("evaluation region {i} has no ground-truth label"))
            })
        })
        .collect::<Result<_>>()?;
    let (precision, recall, f1) = macro_prf1(&truth, &preds, crate::synthgen::N_LEVELS)?;

    let cp_true = target.cp_true_norm().ok_or_else(|| {
        Error::MissingArtifact("target ground-truth consumption (needed for imputation metrics)".into())
    })?;
    let (mae, mse) = mae_mse(cp_true, &cp_hat)?;

    Ok(MetricsReport {
        mae,
        mse,
        precision,
        recall,
        f1,
        support: MetricsReport::support_of(&truth),
    })
}

/// Runs one variant end to end. Deterministic in `(scenario, params, seed)`.
pub fn run_variant(
    variant: ExperimentVariant,
    scenario: &Scenario,
    params: &ExperimentParams,
    seed: u64,
) -> Result<MetricsReport> {
    let prepared = PreparedScenario::new(scenario)?;
    let outcome = stage_one_for(variant, &prepared, params, seed)?;
    stage_two(variant, &prepared, outcome.as_ref(), params, seed)
}

fn stage_one_for(
    variant: ExperimentVariant,
    prepared: &PreparedScenario,
    params: &ExperimentParams,
    seed: u64,
) -> Result<Option<FederatedOutcome>> {
    use ExperimentVariant::*;
    Ok(match variant {
        TargetOnly => None,
        NoDomainClassifier => Some(train_stage_one(prepared, params, 0.0, true, seed)?),
        NoUtp => Some(train_stage_one(prepared, params, params.lambda, false, seed)?),
        Full | NoDarkl | NoFinetune => {
            Some(train_stage_one(prepared, params, params.lambda, true, seed)?)
        }
    })
}

/// Runs all six variants for one seed, sharing stage-I training where the
/// variants are defined to use identical training (the relational and task
/// modules train independently, so the joint run serves `full`, `no_darkl`,
/// `no_utp`, and `no_finetune`; `no_domain_classifier` retrains with lambda
/// 0). Each row equals the corresponding [`run_variant`] output bit for bit.
pub fn run_ablation(
    scenario: &Scenario,
    params: &ExperimentParams,
    seed: u64,
) -> Result<Vec<(ExperimentVariant, MetricsReport)>> {
    use ExperimentVariant::*;
    let prepared = PreparedScenario::new(scenario)?;
    let joint = train_stage_one(&prepared, params, params.lambda, true, seed)?;
    let no_dc = train_stage_one(&prepared, params, 0.0, true, seed)?;
    ExperimentVariant::ALL
        .into_iter()
        .map(|variant| {
            let outcome = match variant {
                TargetOnly => None,
                NoDomainClassifier => Some(&no_dc),
                _ => Some(&joint),
            };
            Ok((variant, stage_two(variant, &prepared, outcome, params, seed)?))
        })
        .collect()
}

/// The sweepable axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    LabelFraction,
    ClientCount,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Lambda => "lambda",
            SweepKind::LabelFraction => "label_fraction",
            SweepKind::ClientCount => "client_count",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [SweepKind::Lambda, SweepKind::LabelFraction, SweepKind::ClientCount]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

/// One sweep measurement. `mean_epoch_secs` is the mean wall time of one
/// client epoch during stage-I training (0 when no training ran).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub value: f64,
    pub seed: u64,
    pub report: MetricsReport,
    pub mean_epoch_secs: f64,
}

fn mean_epoch_secs(outcome: Option<&FederatedOutcome>, local_epochs: usize) -> f64 {
    match outcome {
        None => 0.0,
        Some(o) if o.round_log.is_empty() => 0.0,
        Some(o) => {
            let total: f64 = o.round_log.iter().map(|r| r.wall_secs).sum();
            total / (o.round_log.len() as f64 * local_epochs as f64)
        }
    }
}

/// Runs the `full` variant over a grid of one hyperparameter, for every
/// seed. Rows come back ordered by seed, then grid value. Label-fraction
/// sweeps reuse one stage-I training per seed, since stage I does not depend
/// on the fraction; the rows are identical to independent runs.
pub fn sweep(
    kind: SweepKind,
    grid: &[f64],
    scenario: &Scenario,
    params: &ExperimentParams,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput("sweep seeds"));
    }
    for &v in grid {
        match kind {
            SweepKind::Lambda if !(0.0..=1.0).contains(&v) => {
                return Err(Error::InvalidArgument(format!("lambda {v} outside [0, 1]")));
            }
            SweepKind::LabelFraction if !(v > 0.0 && v < 1.0) => {
                return Err(Error::InvalidArgument(format!(
                    "label fraction {v} outside (0, 1)"
                )));
            }
            SweepKind::ClientCount if v < 1.0 || v.fract() != 0.0 => {
                return Err(Error::InvalidArgument(format!(
                    "client count {v} must be a positive integer"
                )));
            }
            SweepKind::ClientCount if (v as usize) > scenario.sources.len() => {
                return Err(Error::InvalidArgument(format!(
                    "client count {v} exceeds the {} available source cities",
                    scenario.sources.len()
                )));
            }
            _ => {}
        }
    }

    let jobs: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| grid.iter().map(move |&v| (s, v)))
        .collect();

    match kind {
        SweepKind::LabelFraction => {
            // One stage-I per seed; fractions only change stage II.
            let per_seed: Vec<Vec<SweepRow>> = seeds
                .par_iter()
                .map(|&seed| -> Result<Vec<SweepRow>> {
                    let prepared = PreparedScenario::new(scenario)?;
                    let outcome =
                        train_stage_one(&prepared, params, params.lambda, true, seed)?;
                    let epoch_secs = mean_epoch_secs(Some(&outcome), params.local_epochs);
                    grid.iter()
                        .map(|&fraction| {
                            let mut p = params.clone();
                            p.label_fraction = fraction;
                            let report = stage_two(
                                ExperimentVariant::Full,
                                &prepared,
                                Some(&outcome),
                                &p,
                                seed,
                            )?;
                            Ok(SweepRow {
                                kind,
                                value: fraction,
                                seed,
                                report,
                                mean_epoch_secs: epoch_secs,
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok(per_seed.into_iter().flatten().collect())
        }
        SweepKind::Lambda | SweepKind::ClientCount => jobs
            .par_iter()
            .map(|&(seed, value)| -> Result<SweepRow> {
                let mut p = params.clone();
                let scenario_view;
                let scenario_ref = match kind {
                    SweepKind::Lambda => {
                        p.lambda = value;
                        scenario
                    }
                    SweepKind::ClientCount => {
                        let mut sources = scenario.sources.clone();
                        sources.sort_by_key(|c| c.city_id);
                        sources.truncate(value as usize);
                        scenario_view =
                            Scenario { sources, target: scenario.target.clone() };
                        &scenario_view
                    }
                    SweepKind::LabelFraction => unreachable!(),
                };
                let prepared = PreparedScenario::new(scenario_ref)?;
                let outcome = train_stage_one(&prepared, &p, p.lambda, true, seed)?;
                let report =
                    stage_two(ExperimentVariant::Full, &prepared, Some(&outcome), &p, seed)?;
                Ok(SweepRow {
                    kind,
                    value,
                    seed,
                    report,
                    mean_epoch_secs: mean_epoch_secs(Some(&outcome), p.local_epochs),
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A deliberately small setup so variant plumbing tests stay quick; the
    /// statistical trend checks live in the acceptance suite.
    fn small_setup() -> (Scenario, ExperimentParams) {
        let scenario = default_scenario(120, 0.05, 4242).unwrap();
        let params = ExperimentParams {
            rounds: 3,
            fine_tune_epochs: 4,
            batch_size: 32,
            fe_hidden: vec![16, 8],
            dr_hidden: vec![6],
            dc_hidden: vec![4],
            utp_hidden: vec![12, 6],
            ..ExperimentParams::default()
        };
        (scenario, params)
    }

    #[test]
    fn defaults_match_the_standard_configuration() {
        let p = ExperimentParams::default();
        assert_eq!(p.lambda, 0.6);
        assert_eq!(p.lr, 0.01);
        assert_eq!(p.batch_size, 128);
        assert_eq!(p.rounds, 200);
        assert_eq!(p.local_epochs, 1);
        assert_eq!(p.fine_tune_epochs, 50);
        assert_eq!(p.label_fraction, 0.20);
        assert_eq!(p.fe_hidden, vec![256, 128]);
        assert_eq!(p.dr_hidden, vec![64, 32]);
        assert_eq!(p.dc_hidden, vec![64]);
        assert_eq!(p.utp_hidden, vec![256, 64, 32]);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ExperimentVariant::ALL {
            assert_eq!(ExperimentVariant::from_name(v.name()), Some(v));
        }
        assert_eq!(ExperimentVariant::from_name("nope"), None);
    }

    #[test]
    fn default_scenario_shapes() {
        let s = default_scenario(80, 0.05, 7).unwrap();
        assert_eq!(s.sources.len(), 2);
        assert!(s.target.is_target());
        assert!(s.sources.iter().all(|c| !c.is_target()));
        assert_eq!(s.sources[0].n_regions(), 80);
    }

    #[test]
    fn run_variant_is_deterministic() {
        let (scenario, params) = small_setup();
        let a = run_variant(ExperimentVariant::Full, &scenario, &params, 11).unwrap();
        let b = run_variant(ExperimentVariant::Full, &scenario, &params, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ablation_rows_match_independent_variant_runs() {
        let (scenario, params) = small_setup();
        let rows = run_ablation(&scenario, &params, 5).unwrap();
        assert_eq!(rows.len(), 6);
        for (variant, report) in &rows {
            let solo = run_variant(*variant, &scenario, &params, 5).unwrap();
            assert_eq!(&solo, report, "variant {variant} differs from its ablation row");
        }
    }

    #[test]
    fn target_only_and_no_darkl_use_the_prior_consumption() {
        let (scenario, params) = small_setup();
        // Both variants fill cp with 0.5; their imputation MAE must agree
        // exactly with the 0.5-prior error.
        let a = run_variant(ExperimentVariant::TargetOnly, &scenario, &params, 3).unwrap();
        let b = run_variant(ExperimentVariant::NoDarkl, &scenario, &params, 3).unwrap();
        assert_eq!(a.mae, b.mae);
        assert_eq!(a.mse, b.mse);
    }

    #[test]
    fn label_fraction_sweep_matches_independent_runs() {
        let (scenario, params) = small_setup();
        let rows = sweep(SweepKind::LabelFraction, &[0.1, 0.3], &scenario, &params, &[2]).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let mut p = params.clone();
            p.label_fraction = row.value;
            let solo = run_variant(ExperimentVariant::Full, &scenario, &p, row.seed).unwrap();
            assert_eq!(solo, row.report);
        }
    }

    #[test]
    fn sweep_validates_grids() {
        let (scenario, params) = small_setup();
        assert!(sweep(SweepKind::Lambda, &[], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::Lambda, &[1.5], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::LabelFraction, &[0.0], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::ClientCount, &[0.0], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::ClientCount, &[2.5], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::ClientCount, &[3.0], &scenario, &params, &[1]).is_err());
        assert!(sweep(SweepKind::Lambda, &[0.5], &scenario, &params, &[]).is_err());
    }
}
