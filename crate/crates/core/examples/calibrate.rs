// Scratch harness. Times desk-scale runs and prints the trend metrics the
// acceptance suite will assert.
//
// Usage: calibrate <mode> [n_regions] [rounds] [n_seeds]
//   mode = ablate | lambda | fraction

use std::time::Instant;

use cityfed_core::federation::{run_federated_training, AggregationMode, FederationConfig};
use cityfed_core::models::{ClientData, DarklDims, DarklModel, UtpModel};
use cityfed_core::transfer::{
    default_scenario, run_ablation, sweep, ExperimentParams, ExperimentVariant, SweepKind,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).cloned().unwrap_or_else(|| "ablate".into());
    let n_regions: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let rounds: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
    let n_seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);
    let noise: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.05);

    let params = ExperimentParams { rounds, ..ExperimentParams::default() };

    match mode.as_str() {
        "ablate" => ablate(n_regions, n_seeds, noise, &params),
        "lambda" => lambda_sweep(n_regions, n_seeds, noise, &params),
        "fraction" => fraction_sweep(n_regions, n_seeds, noise, &params),
        "encdiff" => encdiff(n_regions, rounds),
        "duel" => duel(n_regions, rounds, n_seeds, noise),
        other => eprintln!("unknown mode {other}"),
    }
}

// Source-fit vs target-fit diagnosis for lambda 0 vs 0.6.
fn duel(n_regions: usize, rounds: usize, n_seeds: u64, noise: f64) {
    use cityfed_core::transfer::{build_task_inputs, TargetData};
    for seed in 0..n_seeds {
        let scenario = default_scenario(n_regions, noise, 700 + seed).unwrap();
        let clients: Vec<ClientData> = scenario
            .sources
            .iter()
            .map(ClientData::from_source_city)
            .collect::<cityfed_core::Result<_>>()
            .unwrap();
        let target = TargetData::from_city(&scenario.target).unwrap();
        for lambda in [0.0, 0.6] {
            let dims = DarklDims {
                input: 16,
                fe_hidden: vec![256, 128],
                dr_hidden: vec![64, 32],
                dc_hidden: vec![64],
                n_domains: clients.len(),
            };
            let darkl0 = DarklModel::init(&dims, lambda, cityfed_core::seeding::derive_seed(seed, 1)).unwrap();
            let utp0 = UtpModel::init(17, &[16, 8], 2).unwrap();
            let cfg = FederationConfig {
                rounds,
                local_epochs: 1,
                lr: 0.01,
                batch_size: 128,
                mode: AggregationMode::Plaintext,
                scale_bits: 16,
                key_bits: 512,
                train_task: false,
                seed,
            };
            let out = run_federated_training(&clients, &darkl0, &utp0, &cfg).unwrap();
            // Source in-sample MAE.
            let mut src_mae = 0.0;
            let mut dc_correct = 0usize;
            let mut dc_total = 0usize;
            for (idx, c) in clients.iter().enumerate() {
                let cp_hat = out.darkl.impute(c.x_base()).unwrap();
                let mae: f64 = cp_hat
                    .iter()
                    .zip(c.cp_norm())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / cp_hat.len() as f64;
                src_mae += mae / clients.len() as f64;
                let (_, probs) = out.darkl.forward(c.x_base()).unwrap();
                for r in 0..probs.rows() {
                    let row = probs.row(r);
                    let argmax = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    dc_correct += (argmax == idx) as usize;
                    dc_total += 1;
                }
            }
            let cp_hat = out.darkl.impute(target.x_base()).unwrap();
            let truth = target.cp_true_norm().unwrap();
            let tgt_mae: f64 = cp_hat
                .iter()
                .zip(truth)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / cp_hat.len() as f64;
            let _ = build_task_inputs(target.x_base(), &cp_hat).unwrap();
            println!(
                "seed {seed} lambda {lambda}: src_mae {src_mae:.4} tgt_mae {tgt_mae:.4} dc_acc {:.3}",
                dc_correct as f64 / dc_total as f64
            );
        }
    }
}

// Per-round divergence between encrypted and plaintext aggregation over two
// independently evolving runs.
fn encdiff(n_regions: usize, rounds: usize) {
    let scenario = default_scenario(n_regions, 0.05, 550).unwrap();
    let clients: Vec<ClientData> = scenario
        .sources
        .iter()
        .map(ClientData::from_source_city)
        .collect::<cityfed_core::Result<_>>()
        .unwrap();
    let dims = DarklDims {
        input: 16,
        fe_hidden: vec![32, 16],
        dr_hidden: vec![8],
        dc_hidden: vec![6],
        n_domains: clients.len(),
    };
    let darkl0 = DarklModel::init(&dims, 0.6, 1).unwrap();
    let utp0 = UtpModel::init(17, &[16, 8], 2).unwrap();
    let bound = clients.len() as f64 * 2f64.powi(-16);
    for r in 1..=rounds {
        let mk = |mode| FederationConfig {
            rounds: r,
            local_epochs: 1,
            lr: 0.01,
            batch_size: 128,
            mode,
            scale_bits: 16,
            key_bits: 512,
            train_task: true,
            seed: 7,
        };
        let plain =
            run_federated_training(&clients, &darkl0, &utp0, &mk(AggregationMode::Plaintext))
                .unwrap();
        let enc =
            run_federated_training(&clients, &darkl0, &utp0, &mk(AggregationMode::Encrypted))
                .unwrap();
        let d_rk = plain.global_rk.max_abs_diff(&enc.global_rk);
        let d_task = plain.global_task.max_abs_diff(&enc.global_task);
        println!(
            "round {r:2}: rk {d_rk:.3e} task {d_task:.3e} bound {bound:.3e} {}",
            if d_rk <= bound && d_task <= bound { "ok" } else { "OVER" }
        );
    }
}

fn ablate(n_regions: usize, n_seeds: u64, noise: f64, params: &ExperimentParams) {
    let mut sums: std::collections::BTreeMap<&str, (f64, f64)> = Default::default();
    let mut order_ok = 0;
    for seed in 0..n_seeds {
        let scenario = default_scenario(n_regions, noise, 1000 + seed).unwrap();
        let t1 = Instant::now();
        let rows = run_ablation(&scenario, params, seed).unwrap();
        let abl_secs = t1.elapsed().as_secs_f64();

        let f1 = |v: ExperimentVariant| rows.iter().find(|(x, _)| *x == v).unwrap().1.f1;
        let mae = |v: ExperimentVariant| rows.iter().find(|(x, _)| *x == v).unwrap().1.mae;
        for (variant, report) in &rows {
            let e = sums.entry(variant.name()).or_insert((0.0, 0.0));
            e.0 += report.f1;
            e.1 += report.mae;
        }
        let ordered = f1(ExperimentVariant::Full) >= f1(ExperimentVariant::NoFinetune) - 0.005
            && f1(ExperimentVariant::NoFinetune) >= f1(ExperimentVariant::NoDarkl) - 0.005;
        order_ok += ordered as u32;
        println!(
            "seed {seed} ({abl_secs:.0}s): gap {:.3} | {:.3} / {:.3} / {:.3} ({}) | mae .6 {:.4} vs 0 {:.4}",
            f1(ExperimentVariant::Full) - f1(ExperimentVariant::TargetOnly),
            f1(ExperimentVariant::Full),
            f1(ExperimentVariant::NoFinetune),
            f1(ExperimentVariant::NoDarkl),
            if ordered { "ok" } else { "BAD" },
            mae(ExperimentVariant::Full),
            mae(ExperimentVariant::NoDomainClassifier),
        );
    }
    println!("== means over {n_seeds} seeds (order ok {order_ok}/{n_seeds}) ==");
    for (name, (f1, mae)) in sums {
        println!("  {:22} F1 {:.4} mae {:.4}", name, f1 / n_seeds as f64, mae / n_seeds as f64);
    }
}

fn lambda_sweep(n_regions: usize, n_seeds: u64, noise: f64, params: &ExperimentParams) {
    let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let scenario = default_scenario(n_regions, noise, 900).unwrap();
    let t = Instant::now();
    let rows = sweep(SweepKind::Lambda, &grid, &scenario, params, &seeds).unwrap();
    println!("sweep took {:.0}s", t.elapsed().as_secs_f64());
    let mut interior = 0;
    for &seed in &seeds {
        let curve: Vec<f64> = grid
            .iter()
            .map(|&v| {
                rows.iter()
                    .find(|r| r.seed == seed && r.value == v)
                    .unwrap()
                    .report
                    .mae
            })
            .collect();
        let min_idx = curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let is_interior = min_idx != 0 && min_idx != grid.len() - 1;
        interior += is_interior as u32;
        println!(
            "seed {seed}: {:?} min at lambda={} {}",
            curve.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            grid[min_idx],
            if is_interior { "interior" } else { "EDGE" }
        );
    }
    // Seed-mean curve.
    let mean: Vec<f64> = grid
        .iter()
        .map(|&v| {
            rows.iter().filter(|r| r.value == v).map(|r| r.report.mae).sum::<f64>()
                / n_seeds as f64
        })
        .collect();
    println!("mean curve {:?}", mean.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("interior minima: {interior}/{n_seeds}");
}

fn fraction_sweep(n_regions: usize, n_seeds: u64, noise: f64, params: &ExperimentParams) {
    let grid = [0.05, 0.10, 0.15, 0.20, 0.25];
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let scenario = default_scenario(n_regions, noise, 800).unwrap();
    let t = Instant::now();
    let rows = sweep(SweepKind::LabelFraction, &grid, &scenario, params, &seeds).unwrap();
    println!("sweep took {:.0}s", t.elapsed().as_secs_f64());
    let mean: Vec<f64> = grid
        .iter()
        .map(|&v| {
            rows.iter().filter(|r| r.value == v).map(|r| r.report.f1).sum::<f64>()
                / n_seeds as f64
        })
        .collect();
    println!("mean F1 by fraction {:?}", mean);
    let monotone = mean.windows(2).all(|w| w[1] >= w[0] - 0.01);
    println!("non-decreasing within 0.01: {monotone}");
}
