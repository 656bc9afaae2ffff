//! Acceptance suite: every criterion prints one pass line, in order.
//!
//! Criteria 1-6 and 12 are exact or tolerance-pinned oracle checks; the
//! trend criteria (7-11) reproduce the expected orderings on the standard
//! synthetic scenario and live in `acceptance_trends.rs` because of their
//! runtime.

use std::time::Instant;

use rand::Rng;

use cityfed_core::features::poi_entropy;
use cityfed_core::federation::{
    add_cipher, decrypt_value, decrypt_vector, encrypt_value, encrypt_vector, fedavg, fp_decode,
    fp_encode, keygen, run_federated_training, train_centralized, AggregationMode,
    FederationConfig, Keypair,
};
use cityfed_core::models::{
    local_train_epoch, mean_cross_entropy, mean_squared_error, one_hot_from_labels,
    uniform_one_hot, ClientData, DarklDims, DarklModel, TrainBatch, UtpModel,
};
use cityfed_core::nn::{Activation, Mlp, ParamVector, Tensor2D};
use cityfed_core::seeding::{derive_seed, epoch_seed, rng_from_seed};
use cityfed_core::synthgen::{generate_city, standard_city_configs, RelationalGroundTruth};
use cityfed_core::transfer::macro_prf1;
use num_bigint::BigUint;

// ---------------------------------------------------------------------------
// Criterion 1: gradient suite
// ---------------------------------------------------------------------------

/// Central finite difference of a scalar function of the parameter vector.
fn central_diff(f: &dyn Fn(&ParamVector) -> f64, params: &ParamVector, i: usize, eps: f64) -> f64 {
    let mut plus = params.clone();
    plus.as_mut_slice()[i] += eps;
    let mut minus = params.clone();
    minus.as_mut_slice()[i] -= eps;
    (f(&plus) - f(&minus)) / (2.0 * eps)
}

/// Relative error with a floor: coordinates below the floor are compared on
/// the absolute scale of the floor (central differences resolve ~1e-10).
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor2D {
    Tensor2D::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
}

/// Smallest |pre-activation| across a network's ReLU layers. Central
/// differences are only valid away from the kinks, so test cases are
/// re-drawn until every ReLU unit has a safe margin.
fn relu_margin(net: &Mlp, x: &Tensor2D) -> f64 {
    let (_, cache) = net.forward(x).unwrap();
    let mut margin = f64::INFINITY;
    for (layer, pre) in net.layers().iter().zip(cache.pre_activations()) {
        if layer.activation() == Activation::Relu {
            for &z in pre.data() {
                margin = margin.min(z.abs());
            }
        }
    }
    margin
}

const KINK_MARGIN: f64 = 1e-3;

#[test]
fn criterion_01_gradient_suite() {
    let start = Instant::now();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rng = rng_from_seed(0xACCE01);
    let mut checked = 0usize;

    for case in 0..100u32 {
        let rows = rng.random_range(2..=5);
        match case % 10 {
            // Relational model: l1 for extractor/regressor coordinates,
            // the classifier loss for classifier coordinates.
            0..=3 => {
                let n_domains = rng.random_range(2..=4);
                let dims = DarklDims {
                    input: rng.random_range(2..=6),
                    fe_hidden: vec![rng.random_range(2..=8), rng.random_range(2..=8)],
                    dr_hidden: vec![rng.random_range(2..=6)],
                    dc_hidden: vec![rng.random_range(2..=5)],
                    n_domains,
                };
                let lambda = [0.0, 0.3, 0.6, 1.0][(case % 4) as usize];
                let (m, batch) = loop {
                    let salt = rng.random::<u64>();
                    let m = DarklModel::init(&dims, lambda, salt).unwrap();
                    let batch = TrainBatch {
                        x: random_tensor(&mut rng, rows, dims.input),
                        cp_target: Some((0..rows).map(|_| rng.random_range(0.05..0.95)).collect()),
                        domain_label: Some(uniform_one_hot(
                            rows,
                            n_domains,
                            rng.random_range(0..n_domains),
                        )),
                        task_label: None,
                    };
                    let (latent, _) = m.feature_extractor().forward(&batch.x).unwrap();
                    let margin = relu_margin(m.feature_extractor(), &batch.x)
                        .min(relu_margin(m.data_regressor(), &latent))
                        .min(relu_margin(m.domain_classifier(), &latent));
                    if margin > KINK_MARGIN {
                        break (m, batch);
                    }
                };
                let (_, grads) = m.loss_and_grads(&batch).unwrap();
                let params = m.flatten_params();
                let fe_dr_len =
                    m.feature_extractor().param_count() + m.data_regressor().param_count();

                let l1_of = |p: &ParamVector| {
                    let m2 = m.unflatten_params(p).unwrap();
                    let (cp, probs) = m2.forward(&batch.x).unwrap();
                    mean_squared_error(&cp, batch.cp_target.as_ref().unwrap()).unwrap()
                        - lambda
                            * mean_cross_entropy(&probs, batch.domain_label.as_ref().unwrap())
                                .unwrap()
                };
                let ldc_of = |p: &ParamVector| {
                    let m2 = m.unflatten_params(p).unwrap();
                    let (_, probs) = m2.forward(&batch.x).unwrap();
                    mean_cross_entropy(&probs, batch.domain_label.as_ref().unwrap()).unwrap()
                };
                for i in 0..params.len() {
                    let numeric = if i < fe_dr_len {
                        central_diff(&l1_of, &params, i, eps)
                    } else {
                        central_diff(&ldc_of, &params, i, eps)
                    };
                    worst = worst.max(rel_err(grads.as_slice()[i], numeric));
                    checked += 1;
                }
            }
            // Task model: five-class cross-entropy.
            4..=6 => {
                let input = rng.random_range(2..=7);
                let (m, batch) = loop {
                    let salt = rng.random::<u64>();
                    let m = UtpModel::init(input, &[rng.random_range(3..=8)], salt).unwrap();
                    let labels: Vec<u8> = (0..rows).map(|_| rng.random_range(1..=5)).collect();
                    let batch = TrainBatch {
                        x: random_tensor(&mut rng, rows, input),
                        cp_target: None,
                        domain_label: None,
                        task_label: Some(one_hot_from_labels(&labels, 5).unwrap()),
                    };
                    if relu_margin(m.net(), &batch.x) > KINK_MARGIN {
                        break (m, batch);
                    }
                };
                let (_, grads) = m.loss_and_grads(&batch).unwrap();
                let params = m.flatten_params();
                let loss_of = |p: &ParamVector| {
                    let m2 = m.unflatten_params(p).unwrap();
                    mean_cross_entropy(
                        &m2.forward(&batch.x).unwrap(),
                        batch.task_label.as_ref().unwrap(),
                    )
                    .unwrap()
                };
                for i in 0..params.len() {
                    let numeric = central_diff(&loss_of, &params, i, eps);
                    worst = worst.max(rel_err(grads.as_slice()[i], numeric));
                    checked += 1;
                }
            }
            // Plain network with mixed activations under the squared-error
            // loss, checking the backward pass in isolation.
            _ => {
                let acts = [Activation::Relu, Activation::Sigmoid, Activation::Identity];
                let dims = vec![
                    rng.random_range(1..=6),
                    rng.random_range(2..=8),
                    rng.random_range(1..=4),
                ];
                let chosen = vec![
                    acts[rng.random_range(0..acts.len())],
                    acts[rng.random_range(0..acts.len())],
                ];
                let (m, x) = loop {
                    let salt = rng.random::<u64>();
                    let m = Mlp::init(&dims, &chosen, salt).unwrap();
                    let x = random_tensor(&mut rng, rows, dims[0]);
                    if relu_margin(&m, &x) > KINK_MARGIN {
                        break (m, x);
                    }
                };
                let target = random_tensor(&mut rng, rows, dims[2]);

                let (y, cache) = m.forward(&x).unwrap();
                let n_out = (rows * dims[2]) as f64;
                let grad_out = Tensor2D::from_vec(
                    rows,
                    dims[2],
                    y.data()
                        .iter()
                        .zip(target.data())
                        .map(|(p, t)| 2.0 * (p - t) / n_out)
                        .collect(),
                )
                .unwrap();
                let (grads, _) = m.backward(&cache, &grad_out).unwrap();
                let params = m.flatten_params();
                let loss_of = |p: &ParamVector| {
                    let m2 = m.unflatten_params(p).unwrap();
                    let (y2, _) = m2.forward(&x).unwrap();
                    y2.data()
                        .iter()
                        .zip(target.data())
                        .map(|(p, t)| (p - t) * (p - t))
                        .sum::<f64>()
                        / n_out
                };
                for i in 0..params.len() {
                    let numeric = central_diff(&loss_of, &params, i, eps);
                    worst = worst.max(rel_err(grads.as_slice()[i], numeric));
                    checked += 1;
                }
            }
        }
    }

    let elapsed = start.elapsed();
    assert!(worst <= 1e-4, "max relative gradient error {worst:.3e} exceeds 1e-4");
    assert!(elapsed.as_secs() < 30, "gradient suite took {elapsed:?}, budget is 30 s");
    println!(
        "[PASS] criterion 01: gradient suite, 100 nets / {checked} coordinates, max rel err {worst:.3e} in {elapsed:.2?}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: reversal identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_reversal_identity() {
    let mut rng = rng_from_seed(0xACCE02);
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let lambda = match case % 4 {
            0 => 0.0,
            1 => 0.6,
            2 => 1.0,
            _ => rng.random_range(0.0..1.0),
        };
        let n_domains = rng.random_range(2..=4);
        let dims = DarklDims {
            input: rng.random_range(2..=8),
            fe_hidden: vec![rng.random_range(3..=10), rng.random_range(3..=10)],
            dr_hidden: vec![rng.random_range(2..=8)],
            dc_hidden: vec![rng.random_range(2..=6)],
            n_domains,
        };
        let m = DarklModel::init(&dims, lambda, case + 7).unwrap();
        let rows = rng.random_range(2..=6);
        let batch = TrainBatch {
            x: random_tensor(&mut rng, rows, dims.input),
            cp_target: Some((0..rows).map(|_| rng.random_range(0.05..0.95)).collect()),
            domain_label: Some(uniform_one_hot(rows, n_domains, rng.random_range(0..n_domains))),
            task_label: None,
        };
        let (_, grads) = m.loss_and_grads(&batch).unwrap();

        // Oracle: two independent vanilla backward passes.
        let (latent, fe_cache) = m.feature_extractor().forward(&batch.x).unwrap();
        let (cp_out, dr_cache) = m.data_regressor().forward(&latent).unwrap();
        let (probs, dc_cache) = m.domain_classifier().forward(&latent).unwrap();
        let n = rows as f64;
        let mse_grad = Tensor2D::from_vec(
            rows,
            1,
            cp_out
                .data()
                .iter()
                .zip(batch.cp_target.as_ref().unwrap())
                .map(|(p, a)| 2.0 * (p - a) / n)
                .collect(),
        )
        .unwrap();
        let ce_grad = {
            let labels = batch.domain_label.as_ref().unwrap();
            let mut g = Tensor2D::zeros(rows, n_domains);
            for r in 0..rows {
                for c in 0..n_domains {
                    let y = labels.get(r, c);
                    if y != 0.0 {
                        g.set(r, c, -y / (probs.get(r, c) + 1e-12) / n);
                    }
                }
            }
            g
        };
        let (_, dr_in) = m.data_regressor().backward(&dr_cache, &mse_grad).unwrap();
        let (_, dc_in) = m.domain_classifier().backward(&dc_cache, &ce_grad).unwrap();
        let (g_dr_fe, _) = m.feature_extractor().backward(&fe_cache, &dr_in).unwrap();
        let (g_dc_fe, _) = m.feature_extractor().backward(&fe_cache, &dc_in).unwrap();

        let fe_len = m.feature_extractor().param_count();
        for ((a, dr), dc) in grads.as_slice()[..fe_len]
            .iter()
            .zip(g_dr_fe.as_slice())
            .zip(g_dc_fe.as_slice())
        {
            worst = worst.max((a - (dr - lambda * dc)).abs());
        }
    }
    assert!(worst <= 1e-12, "reversal identity violated by {worst:.3e}");
    println!("[PASS] criterion 02: reversal identity over 20 cases, max deviation {worst:.3e}");
}

// ---------------------------------------------------------------------------
// Criterion 3: weighted averaging oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_fedavg_oracle() {
    let mut rng = rng_from_seed(0xACCE03);
    for case in 0..50 {
        let k = rng.random_range(1..=6);
        let len = rng.random_range(1..=40);
        let mut city_ids: Vec<u32> = (0..k as u32).collect();
        // Scatter the ids so sorting matters.
        for i in (1..city_ids.len()).rev() {
            let j = rng.random_range(0..=i);
            city_ids.swap(i, j);
        }
        let params: Vec<ParamVector> = (0..k)
            .map(|_| ParamVector::new((0..len).map(|_| rng.random_range(-5.0..5.0)).collect()))
            .collect();
        let weights: Vec<u64> = (0..k).map(|_| rng.random_range(1..1000)).collect();

        let entries: Vec<(u32, &ParamVector, u64)> = city_ids
            .iter()
            .zip(&params)
            .zip(&weights)
            .map(|((&c, p), &w)| (c, p, w))
            .collect();
        let got = fedavg(&entries).unwrap();

        // Hand-computed oracle: same weighted mean, accumulated in ascending
        // city-id order.
        let total: u64 = weights.iter().sum();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| city_ids[i]);
        let mut expected = vec![0.0f64; len];
        for &i in &order {
            let w = weights[i] as f64 / total as f64;
            for (acc, &v) in expected.iter_mut().zip(params[i].as_slice()) {
                *acc += w * v;
            }
        }
        assert_eq!(got.as_slice(), expected.as_slice(), "case {case} mismatch");

        // Permutation invariance, bit for bit.
        let mut shuffled = entries.clone();
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let got2 = fedavg(&shuffled).unwrap();
        assert_eq!(got.as_slice(), got2.as_slice(), "case {case} not permutation-invariant");
    }
    println!("[PASS] criterion 03: weighted averaging matches the oracle exactly on 50 cases, permutation-invariant");
}

// ---------------------------------------------------------------------------
// Criterion 4: homomorphic encryption correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_he_correctness() {
    let start = Instant::now();

    // 1,000 random pairs at a 512-bit key, exact sums.
    let kp = keygen(512, 0xACCE04).unwrap();
    let mut rng = rng_from_seed(0xACCE04 + 1);
    let half = kp.public.modulus() >> 1;
    let mut enc_rng = rng_from_seed(0xACCE04 + 2);
    for _ in 0..1000 {
        let a = random_below(&mut rng, &half);
        let b = random_below(&mut rng, &half);
        let ca = encrypt_value(&kp.public, &a, &mut enc_rng).unwrap();
        let cb = encrypt_value(&kp.public, &b, &mut enc_rng).unwrap();
        let sum = (ca * cb) % kp.public.modulus_squared();
        assert_eq!(decrypt_value(&kp.secret, &sum).unwrap(), &a + &b);
    }

    // Exhaustive at the toy modulus 35.
    let toy = Keypair::from_primes(&BigUint::from(5u32), &BigUint::from(7u32)).unwrap();
    let mut toy_rng = rng_from_seed(0xACCE04 + 3);
    let n = 35u32;
    for a in 0..n {
        for b in 0..n {
            let ca = encrypt_value(&toy.public, &BigUint::from(a), &mut toy_rng).unwrap();
            let cb = encrypt_value(&toy.public, &BigUint::from(b), &mut toy_rng).unwrap();
            let sum = (ca * cb) % toy.public.modulus_squared();
            assert_eq!(
                decrypt_value(&toy.secret, &sum).unwrap(),
                BigUint::from((a + b) % n),
                "toy pair ({a}, {b})"
            );
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "HE suite took {elapsed:?}, budget is 60 s");
    println!(
        "[PASS] criterion 04: 1,000 random 512-bit pairs and the exhaustive 35-modulus grid decrypt to exact sums in {elapsed:.2?}"
    );
}

fn random_below(rng: &mut rand_chacha::ChaCha8Rng, bound: &BigUint) -> BigUint {
    use rand::RngCore;
    let bytes = (bound.bits() as usize).div_ceil(8);
    loop {
        let mut buf = vec![0u8; bytes];
        rng.fill_bytes(&mut buf);
        let v = BigUint::from_bytes_be(&buf);
        if &v < bound {
            return v;
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 5: encrypted aggregation tracks plaintext aggregation
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_encrypted_equals_plaintext() {
    // Ten federated rounds; every round, the same client uploads are
    // aggregated through both paths and must agree within |C| * 2^-16 per
    // coordinate (the fixed-point quantization bound). The encrypted
    // aggregate drives the next round. Finally the hand-driven loop must
    // reproduce `run_federated_training`'s encrypted outcome bit for bit.
    let rounds = 10;
    let scale_bits = 16u32;
    let seed = 0xACCE05u64;

    let configs = standard_city_configs(250, 0.05, seed);
    let g = RelationalGroundTruth::default();
    let clients: Vec<ClientData> = configs[..2]
        .iter()
        .map(|c| ClientData::from_source_city(&generate_city(c, &g).unwrap()).unwrap())
        .collect();
    let n_clients = clients.len();
    let bound = n_clients as f64 * 2f64.powi(-(scale_bits as i32));

    let dims = DarklDims {
        input: 16,
        fe_hidden: vec![20, 10],
        dr_hidden: vec![8],
        dc_hidden: vec![6],
        n_domains: n_clients,
    };
    let darkl0 = DarklModel::init(&dims, 0.6, derive_seed(seed, 1)).unwrap();
    let utp0 = UtpModel::init(17, &[16, 8], derive_seed(seed, 2)).unwrap();
    let kp = keygen(512, derive_seed(seed, cityfed_core::seeding::SALT_KEYGEN)).unwrap();

    let total: u64 = clients.iter().map(|c| c.n_regions() as u64).sum();
    let mut global_rk = darkl0.flatten_params();
    let mut global_task = utp0.flatten_params();
    let mut max_diff: f64 = 0.0;

    for round in 0..rounds {
        // Local updates from the encrypted-mode globals.
        let mut uploads = Vec::new();
        for client in &clients {
            let mut darkl = darkl0.unflatten_params(&global_rk).unwrap();
            let mut utp = utp0.unflatten_params(&global_task).unwrap();
            let domain_index = uploads.len();
            let s = epoch_seed(seed, round, client.city_id(), 0);
            local_train_epoch(&mut darkl, Some(&mut utp), client, domain_index, 0.01, 128, s)
                .unwrap();
            uploads.push((client.city_id(), darkl.flatten_params(), utp.flatten_params(), client.n_regions() as u64));
        }

        for family in 0..2u64 {
            // Plaintext reference on these exact uploads.
            let entries: Vec<(u32, &ParamVector, u64)> = uploads
                .iter()
                .map(|(c, rk, task, n)| (*c, if family == 0 { rk } else { task }, *n))
                .collect();
            let plain = fedavg(&entries).unwrap();

            // Encrypted path: pre-scale, encode, encrypt, homomorphic sum.
            let mut cipher_sum: Option<cityfed_core::federation::CipherVector> = None;
            for (city, rk, task, n) in &uploads {
                let weight = *n as f64 / total as f64;
                let params = if family == 0 { rk } else { task };
                let encoded = fp_encode(&params.scaled(weight), scale_bits).unwrap();
                let enc_seed = derive_seed(
                    derive_seed(
                        derive_seed(seed, cityfed_core::seeding::SALT_ENCRYPT),
                        (round as u64) * 2 + family,
                    ),
                    u64::from(*city),
                );
                let cipher = encrypt_vector(&kp.public, &encoded, enc_seed).unwrap();
                cipher_sum = Some(match cipher_sum {
                    None => cipher,
                    Some(acc) => add_cipher(&kp.public, &acc, &cipher).unwrap(),
                });
            }
            let encrypted = fp_decode(&decrypt_vector(&kp.secret, &cipher_sum.unwrap()).unwrap());

            let diff = plain.max_abs_diff(&encrypted);
            assert!(
                diff <= bound,
                "round {round}, family {family}: |enc - plain| = {diff:.3e} exceeds {bound:.3e}"
            );
            max_diff = max_diff.max(diff);

            if family == 0 {
                global_rk = encrypted;
            } else {
                global_task = encrypted;
            }
        }
    }

    // The hand-driven loop equals the encrypted runner exactly.
    let cfg = FederationConfig {
        rounds,
        local_epochs: 1,
        lr: 0.01,
        batch_size: 128,
        mode: AggregationMode::Encrypted,
        scale_bits,
        key_bits: 512,
        train_task: true,
        seed,
    };
    let outcome = run_federated_training(&clients, &darkl0, &utp0, &cfg).unwrap();
    assert_eq!(outcome.global_rk, global_rk, "runner diverged from the reference loop");
    assert_eq!(outcome.global_task, global_task, "runner diverged from the reference loop");

    println!(
        "[PASS] criterion 05: encrypted aggregation within {bound:.3e} of plaintext every round for 10 rounds (max diff {max_diff:.3e}), runner matches bit for bit"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: single-client reduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_single_client_reduction() {
    let seed = 0xACCE06u64;
    let cfg = &standard_city_configs(120, 0.05, seed)[0];
    let city = generate_city(cfg, &RelationalGroundTruth::default()).unwrap();
    let client = ClientData::from_source_city(&city).unwrap();

    let dims = DarklDims {
        input: 16,
        fe_hidden: vec![14, 8],
        dr_hidden: vec![6],
        dc_hidden: vec![4],
        n_domains: 1,
    };
    let darkl0 = DarklModel::init(&dims, 0.6, 3).unwrap();
    let utp0 = UtpModel::init(17, &[12, 6], 4).unwrap();

    let fed_cfg = FederationConfig {
        rounds: 50,
        local_epochs: 1,
        lr: 0.01,
        batch_size: 32,
        mode: AggregationMode::Plaintext,
        scale_bits: 16,
        key_bits: 512,
        train_task: true,
        seed,
    };
    let fed = run_federated_training(std::slice::from_ref(&client), &darkl0, &utp0, &fed_cfg)
        .unwrap();
    let (darkl_c, utp_c) =
        train_centralized(&client, &darkl0, &utp0, 50, 1, 0.01, 32, seed).unwrap();

    let d_rk = fed.darkl.flatten_params().max_abs_diff(&darkl_c.flatten_params());
    let d_task = fed.utp.flatten_params().max_abs_diff(&utp_c.flatten_params());
    assert!(d_rk <= 1e-12 && d_task <= 1e-12, "single-client reduction: rk {d_rk:.3e}, task {d_task:.3e}");
    println!(
        "[PASS] criterion 06: 50-round single-client federation equals centralized training (max diff rk {d_rk:.1e}, task {d_task:.1e})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 12: metric oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_metric_oracles() {
    let mut rng = rng_from_seed(0xACCE12);

    // Macro metrics versus a brute-force confusion-matrix computation.
    for case in 0..1000 {
        let n = rng.random_range(1..=200);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(1..=5)).collect();
        let yhat: Vec<u8> = (0..n).map(|_| rng.random_range(1..=5)).collect();
        let (p, r, f1) = macro_prf1(&y, &yhat, 5).unwrap();

        let mut confusion = [[0usize; 5]; 5];
        for (&t, &pr) in y.iter().zip(&yhat) {
            confusion[(t - 1) as usize][(pr - 1) as usize] += 1;
        }
        let (mut ps, mut rs, mut f1s) = (0.0, 0.0, 0.0);
        for k in 0..5 {
            let tp = confusion[k][k];
            let col: usize = (0..5).map(|t| confusion[t][k]).sum();
            let row: usize = confusion[k].iter().sum();
            let prec = if col > 0 { tp as f64 / col as f64 } else { 0.0 };
            let rec = if row > 0 { tp as f64 / row as f64 } else { 0.0 };
            let f = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            ps += prec;
            rs += rec;
            f1s += f;
        }
        assert_eq!(p, ps / 5.0, "case {case} precision");
        assert_eq!(r, rs / 5.0, "case {case} recall");
        assert_eq!(f1, f1s / 5.0, "case {case} f1");
    }

    // Entropy versus a direct evaluation through an independent route
    // (log-quotient form).
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=10);
        let counts: Vec<f64> = (0..k).map(|_| rng.random_range(0..50) as f64).collect();
        let got = poi_entropy(&counts).unwrap();
        let total: f64 = counts.iter().sum();
        let direct = if total == 0.0 {
            0.0
        } else {
            counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| -(c / total) * (c.ln() - total.ln()))
                .sum::<f64>()
        };
        worst = worst.max((got - direct).abs());
    }
    assert!(worst <= 1e-12, "entropy deviates from the direct formula by {worst:.3e}");
    println!("[PASS] criterion 12: macro metrics match the brute-force oracle exactly on 1,000 vectors; entropy within {worst:.1e} of the direct formula");
}
