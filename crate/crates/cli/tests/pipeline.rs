//! End-to-end command plumbing on a miniature scenario.

use std::fs;
use std::path::PathBuf;

use cityfed_cli::commands;
use cityfed_cli::config::parse_config_str;
use cityfed_cli::CliError;

fn small_config(out: &std::path::Path) -> cityfed_cli::config::ExperimentConfig {
    let text = format!(
        "seeds = 7\n\
         rounds = 2\n\
         fine_tune_epochs = 3\n\
         batch_size = 32\n\
         fe_dims = 16,8\n\
         dr_dims = 6\n\
         dc_dims = 4\n\
         utp_dims = 12,6\n\
         out_dir = {}\n\
         lambda_grid = 0.0,0.6\n\
         fraction_grid = 0.1,0.2\n\
         client_grid = 1,2\n\
         [city 1]\n\
         role = source\n\
         n_regions = 80\n\
         poi_weights = 0.45,0.25,0.12,0.07,0.05,0.03,0.02,0.01\n\
         [city 2]\n\
         role = source\n\
         n_regions = 90\n\
         poi_weights = 0.16,0.15,0.14,0.13,0.12,0.11,0.10,0.09\n\
         [city 3]\n\
         role = target\n\
         n_regions = 100\n\
         poi_weights = 0.28,0.20,0.14,0.11,0.09,0.07,0.06,0.05\n",
        out.display()
    );
    parse_config_str(&text).unwrap()
}

fn temp_out(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("cityfed-pipeline-tests").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn pipeline_runs_end_to_end() {
    let out = temp_out("chain");
    let cfg = small_config(&out);

    commands::generate(&cfg).unwrap();
    for id in [1, 2, 3] {
        assert!(out.join(format!("data/city_{id}.csv")).exists());
    }
    assert!(out.join("data/city_3_truth.csv").exists());
    // The target CSV must have empty consumption cells.
    let target_csv = fs::read_to_string(out.join("data/city_3.csv")).unwrap();
    let data_line = target_csv.lines().nth(2).unwrap();
    let fields: Vec<&str> = data_line.split(',').collect();
    assert_eq!(fields[fields.len() - 2], "", "target cp cell should be empty");

    commands::train(&cfg).unwrap();
    assert!(out.join("checkpoints/darkl.bin").exists());
    assert!(out.join("checkpoints/utp.bin").exists());
    let round_log = fs::read_to_string(out.join("checkpoints/round_log.csv")).unwrap();
    assert!(round_log.starts_with("# cityfed round-log v1"));
    // 2 rounds x 2 clients.
    assert_eq!(round_log.lines().count(), 2 + 4);

    commands::transfer(&cfg).unwrap();
    assert!(out.join("transfer/utp_finetuned.bin").exists());
    let predictions = fs::read_to_string(out.join("transfer/predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 2 + 100);

    commands::evaluate(&cfg).unwrap();
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("# cityfed metrics v1"));
    assert!(metrics.contains("full,c1+c2->c3,7,"));
}

#[test]
fn transfer_before_train_is_a_missing_artifact() {
    let out = temp_out("missing");
    let cfg = small_config(&out);
    commands::generate(&cfg).unwrap();
    match commands::transfer(&cfg) {
        Err(CliError::MissingArtifact(msg)) => assert!(msg.contains("checkpoint"), "{msg}"),
        other => panic!("expected a missing-artifact error, got {other:?}"),
    }
}

#[test]
fn train_before_generate_is_a_missing_artifact() {
    let out = temp_out("missing2");
    let cfg = small_config(&out);
    match commands::train(&cfg) {
        Err(CliError::MissingArtifact(msg)) => assert!(msg.contains("generate"), "{msg}"),
        other => panic!("expected a missing-artifact error, got {other:?}"),
    }
}

#[test]
fn ablate_emits_six_rows_per_seed() {
    let out = temp_out("ablate");
    let mut cfg = small_config(&out);
    cfg.seeds = vec![1, 2];
    commands::generate(&cfg).unwrap();
    commands::ablate(&cfg).unwrap();
    let text = fs::read_to_string(out.join("ablation.csv")).unwrap();
    // Version line + header + 6 variants x 2 seeds.
    assert_eq!(text.lines().count(), 2 + 12);
    for name in ["full", "no_darkl", "no_utp", "no_finetune", "no_domain_classifier", "target_only"] {
        assert_eq!(
            text.lines().filter(|l| l.starts_with(&format!("{name},"))).count(),
            2,
            "{name} should appear once per seed"
        );
    }
}

#[test]
fn sweep_writes_one_row_per_grid_point_and_seed() {
    let out = temp_out("sweep");
    let cfg = small_config(&out);
    commands::generate(&cfg).unwrap();
    commands::sweep(&cfg, cityfed_core::transfer::SweepKind::ClientCount).unwrap();
    let text = fs::read_to_string(out.join("sweep_client_count.csv")).unwrap();
    assert!(text.starts_with("# cityfed sweep v1"));
    assert_eq!(text.lines().count(), 2 + 2); // grid {1, 2} x seed {7}
}

#[test]
fn unknown_sweep_kind_is_a_config_error() {
    let out = temp_out("sweepbad");
    let cfg = small_config(&out);
    match commands::run_command("sweep", Some("bogus"), &cfg) {
        Err(CliError::Config(msg)) => assert!(msg.contains("bogus")),
        other => panic!("expected a config error, got {other:?}"),
    }
}
