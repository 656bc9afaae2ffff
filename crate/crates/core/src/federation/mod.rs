//! Federated training: weighted parameter averaging, the server/client
//! round loop, and encrypted aggregation.
//!
//! One round follows the four-step protocol: broadcast the global
//! parameters, train locally for `local_epochs`, upload (encrypted uploads
//! are pre-scaled by `N_i / N`, fixed-point encoded, and Paillier
//! encrypted), aggregate, repeat. Clients are processed in ascending city-id
//! order regardless of how the caller lists them, so results do not depend
//! on list order or scheduling.
//!
//! In encrypted mode the server only ever touches ciphertexts, the public
//! key, and the public sample counts; decryption of the aggregate happens at
//! the key authority (modeled as the client coalition), which returns the
//! plaintext global model for redistribution.

mod fixedpoint;
mod paillier;

pub use fixedpoint::{fp_decode, fp_encode, FixedPointVector, CLAMP_BITS, DEFAULT_SCALE_BITS};
pub use paillier::{
    add_cipher, add_ciphertexts, decrypt_value, decrypt_vector, encrypt_value,
    encrypt_value_with_randomness, encrypt_vector, keygen, CipherVector, Keypair, PublicKey,
    SecretKey, MIN_KEY_BITS, OFFSET_BITS,
};

use rayon::prelude::*;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::CityId;
use crate::models::{local_train_epoch, ClientData, DarklModel, UtpModel};
use crate::nn::ParamVector;
use crate::seeding::{derive_seed, epoch_seed, SALT_ENCRYPT, SALT_KEYGEN};

/// How parameter uploads travel to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    Plaintext,
    Encrypted,
}

/// Round-loop parameters.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub mode: AggregationMode,
    pub scale_bits: u32,
    pub key_bits: u32,
    /// When false, only the relational model trains (the task model is
    /// broadcast back unchanged).
    pub train_task: bool,
    pub seed: u64,
}

/// One client's standing state in the federation.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub city_id: CityId,
    pub data: ClientData,
    pub darkl: DarklModel,
    pub utp: UtpModel,
}

impl ClientState {
    pub fn n_samples(&self) -> u64 {
        self.data.n_regions() as u64
    }
}

/// Server-side state. It never holds a secret key: in encrypted mode its
/// inputs are ciphertext uploads, the public key, and the public sample
/// counts.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global_rk: ParamVector,
    pub global_task: ParamVector,
    pub round: usize,
    pub public_key: Option<PublicKey>,
}

/// Per-client losses observed during one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientRoundLoss {
    pub city_id: CityId,
    pub l1: f64,
    pub l2: Option<f64>,
}

/// One aggregation round in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub client_losses: Vec<ClientRoundLoss>,
    pub wall_secs: f64,
}

/// Result of a federated run: final global parameters, materialized models,
/// and the per-round loss log.
#[derive(Debug, Clone)]
pub struct FederatedOutcome {
    pub darkl: DarklModel,
    pub utp: UtpModel,
    pub global_rk: ParamVector,
    pub global_task: ParamVector,
    pub round_log: Vec<RoundRecord>,
}

/// Sample-count-weighted mean of parameter vectors:
/// `sum_i (N_i / N) * params_i` with `N = sum_i N_i`.
///
/// Summation runs in ascending city-id order whatever the slice order, so
/// the result is permutation-invariant bit for bit.
pub fn fedavg(entries: &[(CityId, &ParamVector, u64)]) -> Result<ParamVector> {
    if entries.is_empty() {
        return Err(Error::EmptyInput("fedavg entries"));
    }
    let len = entries[0].1.len();
    for (city, params, weight) in entries {
        if params.len() != len {
            return Err(Error::DimMismatch(format!(
                "client {city} uploads {} parameters, expected {len}",
                params.len()
            )));
        }
        if *weight == 0 {
            return Err(Error::InvalidArgument(format!("client {city} has weight 0")));
        }
    }

    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by_key(|&i| entries[i].0);
    for w in order.windows(2) {
        if entries[w[0]].0 == entries[w[1]].0 {
            return Err(Error::InvalidArgument(format!(
                "duplicate city id {} in aggregation",
                entries[w[0]].0
            )));
        }
    }

    let total: u64 = entries.iter().map(|(_, _, w)| w).sum();
    let mut out = vec![0.0f64; len];
    for &i in &order {
        let (_, params, weight) = entries[i];
        let w = weight as f64 / total as f64;
        for (acc, &p) in out.iter_mut().zip(params.as_slice()) {
            *acc += w * p;
        }
    }
    Ok(ParamVector::new(out))
}

struct ClientUpdate {
    city_id: CityId,
    n_samples: u64,
    rk: ParamVector,
    task: ParamVector,
    l1: f64,
    l2: Option<f64>,
}

/// Runs the full round loop and returns the trained global models.
///
/// `darkl_init` and `utp_init` are the server's initial global models (their
/// shapes define every client's networks; the relational model's domain head
/// must match the client count). The outcome is a pure function of the
/// inputs: clients may train in parallel, but uploads are aggregated in
/// city-id order.
pub fn run_federated_training(
    clients: &[ClientData],
    darkl_init: &DarklModel,
    utp_init: &UtpModel,
    cfg: &FederationConfig,
) -> Result<FederatedOutcome> {
    if clients.is_empty() {
        return Err(Error::EmptyInput("federation clients"));
    }
    if cfg.rounds == 0 || cfg.local_epochs == 0 {
        return Err(Error::InvalidArgument("rounds and local_epochs must be > 0".into()));
    }
    let mut order: Vec<usize> = (0..clients.len()).collect();
    order.sort_by_key(|&i| clients[i].city_id());
    for w in order.windows(2) {
        if clients[w[0]].city_id() == clients[w[1]].city_id() {
            return Err(Error::InvalidArgument(format!(
                "duplicate city id {} among clients",
                clients[w[0]].city_id()
            )));
        }
    }
    let ordered: Vec<&ClientData> = order.iter().map(|&i| &clients[i]).collect();
    if darkl_init.n_domains() != ordered.len() {
        return Err(Error::DimMismatch(format!(
            "domain classifier expects {} domains, {} clients given",
            darkl_init.n_domains(),
            ordered.len()
        )));
    }
    for c in &ordered {
        if c.layout().base_len() != darkl_init.input_dim()
            || c.layout().full_len() != utp_init.input_dim()
        {
            return Err(Error::DimMismatch(format!(
                "client {} feature widths do not match the models",
                c.city_id()
            )));
        }
    }

    let keypair = match cfg.mode {
        AggregationMode::Plaintext => None,
        AggregationMode::Encrypted => {
            Some(keygen(cfg.key_bits, derive_seed(cfg.seed, SALT_KEYGEN))?)
        }
    };
    let mut server = ServerState {
        global_rk: darkl_init.flatten_params(),
        global_task: utp_init.flatten_params(),
        round: 0,
        public_key: keypair.as_ref().map(|kp| kp.public.clone()),
    };

    let total_samples: u64 = ordered.iter().map(|c| c.n_regions() as u64).sum();
    let mut round_log = Vec::with_capacity(cfg.rounds);

    for round in 0..cfg.rounds {
        let start = Instant::now();
        let global_rk = &server.global_rk;
        let global_task = &server.global_task;

        let updates: Vec<ClientUpdate> = ordered
            .par_iter()
            .enumerate()
            .map(|(domain_index, client)| -> Result<ClientUpdate> {
                let mut darkl = darkl_init.unflatten_params(global_rk)?;
                let mut utp = utp_init.unflatten_params(global_task)?;
                let mut l1 = 0.0;
                let mut l2 = None;
                for epoch in 0..cfg.local_epochs {
                    let seed = epoch_seed(cfg.seed, round, client.city_id(), epoch);
                    let utp_ref = cfg.train_task.then_some(&mut utp);
                    let (e1, e2) =
                        local_train_epoch(&mut darkl, utp_ref, client, domain_index, cfg.lr, cfg.batch_size, seed)?;
                    l1 = e1;
                    l2 = e2;
                }
                Ok(ClientUpdate {
                    city_id: client.city_id(),
                    n_samples: client.n_regions() as u64,
                    rk: darkl.flatten_params(),
                    task: utp.flatten_params(),
                    l1,
                    l2,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        match (&cfg.mode, &keypair) {
            (AggregationMode::Plaintext, _) => {
                let rk_entries: Vec<(CityId, &ParamVector, u64)> =
                    updates.iter().map(|u| (u.city_id, &u.rk, u.n_samples)).collect();
                server.global_rk = fedavg(&rk_entries)?;
                let task_entries: Vec<(CityId, &ParamVector, u64)> =
                    updates.iter().map(|u| (u.city_id, &u.task, u.n_samples)).collect();
                server.global_task = fedavg(&task_entries)?;
            }
            (AggregationMode::Encrypted, Some(kp)) => {
                server.global_rk = aggregate_encrypted(
                    kp,
                    &updates,
                    total_samples,
                    cfg,
                    round,
                    ParamFamily::Relational,
                )?;
                server.global_task = aggregate_encrypted(
                    kp,
                    &updates,
                    total_samples,
                    cfg,
                    round,
                    ParamFamily::Task,
                )?;
            }
            (AggregationMode::Encrypted, None) => unreachable!("keypair exists in encrypted mode"),
        }
        server.round = round + 1;

        round_log.push(RoundRecord {
            round,
            client_losses: updates
                .iter()
                .map(|u| ClientRoundLoss { city_id: u.city_id, l1: u.l1, l2: u.l2 })
                .collect(),
            wall_secs: start.elapsed().as_secs_f64(),
        });
    }

    Ok(FederatedOutcome {
        darkl: darkl_init.unflatten_params(&server.global_rk)?,
        utp: utp_init.unflatten_params(&server.global_task)?,
        global_rk: server.global_rk,
        global_task: server.global_task,
        round_log,
    })
}

#[derive(Clone, Copy)]
enum ParamFamily {
    Relational,
    Task,
}

/// Encrypted aggregation of one parameter family: clients pre-scale by
/// `N_i / N`, encode, and encrypt; the server folds ciphertexts together;
/// the key authority decrypts the single aggregate.
fn aggregate_encrypted(
    kp: &Keypair,
    updates: &[ClientUpdate],
    total_samples: u64,
    cfg: &FederationConfig,
    round: usize,
    family: ParamFamily,
) -> Result<ParamVector> {
    let family_tag = match family {
        ParamFamily::Relational => 0u64,
        ParamFamily::Task => 1u64,
    };

    // Client side: scale, encode, encrypt. Deterministic per
    // (seed, round, family, city).
    let uploads: Vec<CipherVector> = updates
        .par_iter()
        .map(|u| -> Result<CipherVector> {
            let weight = u.n_samples as f64 / total_samples as f64;
            let params = match family {
                ParamFamily::Relational => &u.rk,
                ParamFamily::Task => &u.task,
            };
            let encoded = fp_encode(&params.scaled(weight), cfg.scale_bits)?;
            let enc_seed = derive_seed(
                derive_seed(derive_seed(cfg.seed, SALT_ENCRYPT), (round as u64) * 2 + family_tag),
                u64::from(u.city_id),
            );
            encrypt_vector(&kp.public, &encoded, enc_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    // Server side: public key and ciphertexts only.
    let mut iter = uploads.into_iter();
    let mut sum = iter.next().expect("at least one client");
    for upload in iter {
        sum = add_cipher(&kp.public, &sum, &upload)?;
    }

    // Key authority: decrypt the aggregate and hand the plaintext back.
    Ok(fp_decode(&decrypt_vector(&kp.secret, &sum)?))
}

/// Plain sequential training of one client, without any federation
/// machinery. Uses the same per-epoch seed schedule as the round loop, so a
/// single-client federation must match it exactly.
pub fn train_centralized(
    client: &ClientData,
    darkl_init: &DarklModel,
    utp_init: &UtpModel,
    rounds: usize,
    local_epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(DarklModel, UtpModel)> {
    let mut darkl = darkl_init.clone();
    let mut utp = utp_init.clone();
    for round in 0..rounds {
        for epoch in 0..local_epochs {
            let s = epoch_seed(seed, round, client.city_id(), epoch);
            local_train_epoch(&mut darkl, Some(&mut utp), client, 0, lr, batch_size, s)?;
        }
    }
    Ok((darkl, utp))
}
