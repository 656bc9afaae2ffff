//! Textbook additive homomorphic encryption (Paillier with the `g = n + 1`
//! simplification).
//!
//! Key generation, encryption, and decryption follow the classic
//! construction: `Enc(m, r) = (1 + m n) r^n mod n^2`, ciphertext products
//! decrypt to plaintext sums. Parameter vectors are offset-encoded before
//! encryption (`+2^OFFSET_BITS` per coordinate) so negative fixed-point
//! values become valid plaintexts; the offset is removed after decryption
//! using the tracked addend count.
//!
//! This is a simulator component, not a hardened cryptographic library: the
//! randomness is a seeded ChaCha8 stream so runs stay reproducible.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::federation::fixedpoint::FixedPointVector;
use crate::seeding::rng_from_seed;

/// Offset added to every fixed-point coordinate before encryption so the
/// plaintext is non-negative. With `CLAMP_BITS + scale_bits <= 31`, offset
/// plaintexts fit in `[0, 2^32)`.
pub const OFFSET_BITS: u32 = 31;

/// Smallest key size `keygen` accepts. Tests may go this low; the default
/// configuration uses 2048 bits.
pub const MIN_KEY_BITS: u32 = 128;

const MILLER_RABIN_ROUNDS: u32 = 32;
const SMALL_PRIMES: [u32; 24] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Public half of a keypair: the modulus and its square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    nn: BigUint,
}

impl PublicKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.nn
    }

    pub fn key_bits(&self) -> u64 {
        self.n.bits()
    }
}

/// Secret decryption parameters: `lambda = lcm(p-1, q-1)` and
/// `mu = lambda^-1 mod n`.
#[derive(Debug, Clone)]
pub struct SecretKey {
    lambda: BigUint,
    mu: BigUint,
    n: BigUint,
    nn: BigUint,
}

/// A full keypair. The server side of the protocol only ever sees the
/// [`PublicKey`] half.
#[derive(Debug, Clone)]
pub struct Keypair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

impl Keypair {
    /// Builds a keypair from two explicit primes. Intended for tests and
    /// diagnostics (e.g. the exhaustive {p=5, q=7} check); real keys come
    /// from [`keygen`].
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Keypair> {
        if p == q {
            return Err(Error::Crypto("primes must be distinct".into()));
        }
        if !is_prime(p) || !is_prime(q) {
            return Err(Error::Crypto("both factors must be prime".into()));
        }
        let n = p * q;
        let nn = &n * &n;
        let lambda = (p - 1u32).lcm(&(q - 1u32));
        if n.gcd(&lambda) != BigUint::one() {
            return Err(Error::Crypto("modulus and lambda are not coprime".into()));
        }
        let mu = mod_inverse(&lambda, &n)
            .ok_or_else(|| Error::Crypto("lambda has no inverse mod n".into()))?;
        Ok(Keypair { public: PublicKey { n: n.clone(), nn: nn.clone() }, secret: SecretKey { lambda, mu, n, nn } })
    }
}

/// Generates a keypair with a modulus of about `key_bits` bits,
/// deterministically from `seed`.
pub fn keygen(key_bits: u32, seed: u64) -> Result<Keypair> {
    if key_bits < MIN_KEY_BITS {
        return Err(Error::InvalidArgument(format!(
            "key_bits must be >= {MIN_KEY_BITS}, got {key_bits}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let half = key_bits / 2;
    let p = generate_prime(&mut rng, half)?;
    // Retry q until the pair yields a usable key.
    for _ in 0..64 {
        let q = generate_prime(&mut rng, half)?;
        if q == p {
            continue;
        }
        match Keypair::from_primes(&p, &q) {
            Ok(kp) => return Ok(kp),
            Err(_) => continue,
        }
    }
    Err(Error::Crypto("prime generation failed after bounded retries".into()))
}

/// Encrypts one plaintext in `[0, n)` with fresh randomness from `rng`.
pub fn encrypt_value(pk: &PublicKey, m: &BigUint, rng: &mut ChaCha8Rng) -> Result<BigUint> {
    let r = sample_unit(pk, rng);
    encrypt_value_with_randomness(pk, m, &r)
}

/// Deterministic encryption core: `(1 + m n) r^n mod n^2`.
pub fn encrypt_value_with_randomness(pk: &PublicKey, m: &BigUint, r: &BigUint) -> Result<BigUint> {
    if m >= &pk.n {
        return Err(Error::Crypto(format!("plaintext {m} out of range for modulus {}", pk.n)));
    }
    if r.is_zero() || r >= &pk.n || r.gcd(&pk.n) != BigUint::one() {
        return Err(Error::Crypto("randomness must be a unit mod n".into()));
    }
    let gm = (BigUint::one() + m * &pk.n) % &pk.nn;
    Ok((gm * r.modpow(&pk.n, &pk.nn)) % &pk.nn)
}

/// Decrypts one ciphertext: `L(c^lambda mod n^2) * mu mod n` with
/// `L(u) = (u - 1) / n`.
pub fn decrypt_value(sk: &SecretKey, c: &BigUint) -> Result<BigUint> {
    if c >= &sk.nn {
        return Err(Error::Crypto("ciphertext out of range".into()));
    }
    let u = c.modpow(&sk.lambda, &sk.nn);
    let l = (&u - 1u32) / &sk.n;
    Ok((l * &sk.mu) % &sk.n)
}

/// Multiplies two ciphertexts mod `n^2`; decrypts to the plaintext sum.
pub fn add_ciphertexts(pk: &PublicKey, a: &BigUint, b: &BigUint) -> BigUint {
    (a * b) % &pk.nn
}

/// An encrypted parameter vector. `addend_count` tracks how many fresh
/// encryptions have been folded in, which is what the offset removal and
/// the range check need.
#[derive(Debug, Clone)]
pub struct CipherVector {
    values: Vec<BigUint>,
    scale_bits: u32,
    addend_count: u32,
    modulus: BigUint,
}

impl CipherVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn addend_count(&self) -> u32 {
        self.addend_count
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }
}

/// Encrypts a fixed-point vector coordinate-wise, offsetting each value by
/// `2^OFFSET_BITS` first. Randomness is a ChaCha8 stream keyed by `seed`,
/// distinct per coordinate.
pub fn encrypt_vector(pk: &PublicKey, f: &FixedPointVector, seed: u64) -> Result<CipherVector> {
    let offset = BigInt::one() << OFFSET_BITS;
    let limit = BigInt::one() << (OFFSET_BITS + 1);
    if BigUint::from(2u32) * (BigUint::one() << (OFFSET_BITS + 1)) >= pk.n {
        return Err(Error::Crypto(format!(
            "modulus of {} bits is too small for offset-encoded vectors",
            pk.n.bits()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(f.len());
    for &v in f.values() {
        let shifted = BigInt::from(v) + &offset;
        if shifted.sign() == num_bigint::Sign::Minus || shifted >= limit {
            return Err(Error::Crypto(format!("fixed-point value {v} outside the offset range")));
        }
        let m = shifted.to_biguint().expect("non-negative by check");
        values.push(encrypt_value(pk, &m, &mut rng)?);
    }
    Ok(CipherVector { values, scale_bits: f.scale_bits(), addend_count: 1, modulus: pk.n.clone() })
}

/// Coordinate-wise homomorphic addition. Both vectors must come from the
/// same key and scale.
pub fn add_cipher(pk: &PublicKey, a: &CipherVector, b: &CipherVector) -> Result<CipherVector> {
    if a.modulus != b.modulus || a.modulus != pk.n {
        return Err(Error::Crypto("ciphertext vectors use different keys".into()));
    }
    if a.scale_bits != b.scale_bits {
        return Err(Error::InvalidArgument(format!(
            "scale mismatch: {} vs {}",
            a.scale_bits, b.scale_bits
        )));
    }
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!(
            "cipher vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let count = a.addend_count + b.addend_count;
    // The summed offset plaintexts live in [0, count * 2^(OFFSET_BITS+1));
    // they must stay below n for exact recovery.
    if BigUint::from(count) * (BigUint::one() << (OFFSET_BITS + 1)) >= pk.n {
        return Err(Error::Crypto("aggregate would overflow the plaintext modulus".into()));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| add_ciphertexts(pk, x, y))
        .collect();
    Ok(CipherVector { values, scale_bits: a.scale_bits, addend_count: count, modulus: a.modulus.clone() })
}

/// Decrypts an aggregated vector and removes the accumulated offset,
/// returning the summed fixed-point values.
///
/// A wrong key produces near-uniform plaintexts, which the range check
/// rejects.
pub fn decrypt_vector(sk: &SecretKey, c: &CipherVector) -> Result<FixedPointVector> {
    if sk.n != c.modulus {
        return Err(Error::Crypto("secret key does not match the ciphertext key".into()));
    }
    let count = c.addend_count;
    let max_sum = BigUint::from(count) << (OFFSET_BITS + 1);
    let offset_total = BigInt::from(count) << OFFSET_BITS;
    let mut values = Vec::with_capacity(c.len());
    for cipher in &c.values {
        let m = decrypt_value(sk, cipher)?;
        if m >= max_sum {
            return Err(Error::Crypto(
                "decrypted value out of range: wrong key or corrupted ciphertext".into(),
            ));
        }
        let signed = BigInt::from(m) - &offset_total;
        let v = signed
            .to_i64()
            .ok_or_else(|| Error::Crypto("decrypted value exceeds i64".into()))?;
        values.push(v);
    }
    Ok(FixedPointVector::from_raw(values, c.scale_bits))
}

/// Uniform unit mod n by rejection sampling.
fn sample_unit(pk: &PublicKey, rng: &mut ChaCha8Rng) -> BigUint {
    loop {
        let candidate = random_bits(rng, pk.n.bits());
        if !candidate.is_zero()
            && candidate < pk.n
            && candidate.gcd(&pk.n) == BigUint::one()
        {
            return candidate;
        }
    }
}

fn random_bits(rng: &mut ChaCha8Rng, bits: u64) -> BigUint {
    let n_bytes = bits.div_ceil(8) as usize;
    let mut bytes = vec![0u8; n_bytes];
    rng.fill_bytes(&mut bytes);
    let extra = (n_bytes as u64) * 8 - bits;
    if extra > 0 {
        bytes[0] &= 0xFF >> extra;
    }
    BigUint::from_bytes_be(&bytes)
}

fn generate_prime(rng: &mut ChaCha8Rng, bits: u32) -> Result<BigUint> {
    for _ in 0..100_000 {
        let mut candidate = random_bits(rng, u64::from(bits));
        // Force the top bit (exact size) and oddness.
        candidate.set_bit(u64::from(bits) - 1, true);
        candidate.set_bit(0, true);
        if is_prime(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::Crypto("prime generation failed after bounded retries".into()))
}

/// Deterministic trial division plus fixed-base Miller-Rabin.
fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    if n == &two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    // n - 1 = d * 2^s with d odd.
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    // Deterministic witness stream keyed by the candidate itself.
    let mut witness_rng = rng_from_seed(
        n.iter_u64_digits().fold(0x9E37u64, |acc, d| acc.rotate_left(7) ^ d),
    );
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = loop {
            let a = random_bits(&mut witness_rng, n.bits());
            if a >= two && a < n_minus_1 {
                break a;
            }
        };
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m = BigInt::from(modulus.clone());
    let e = a.extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    let mut x = e.x % &m;
    if x.sign() == num_bigint::Sign::Minus {
        x += &m;
    }
    x.to_biguint()
}
