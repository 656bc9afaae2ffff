//! Fixed-point encoding of parameter vectors.
//!
//! Model parameters must become integers before they can live in the
//! additive encryption scheme. A value `x` is encoded as
//! `round(x * 2^scale_bits)` and must satisfy `|x| < 2^CLAMP_BITS`, so the
//! encoded magnitude stays below `2^(CLAMP_BITS + scale_bits)`.

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// Default number of fractional bits.
pub const DEFAULT_SCALE_BITS: u32 = 16;

/// Encoded inputs must satisfy `|x| < 2^CLAMP_BITS`.
pub const CLAMP_BITS: u32 = 15;

/// Integer-encoded parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointVector {
    values: Vec<i64>,
    scale_bits: u32,
}

impl FixedPointVector {
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_raw(values: Vec<i64>, scale_bits: u32) -> Self {
        Self { values, scale_bits }
    }
}

/// Encodes `v` with `round(x * 2^scale_bits)` (ties away from zero).
pub fn fp_encode(v: &ParamVector, scale_bits: u32) -> Result<FixedPointVector> {
    if !(1..=30).contains(&scale_bits) {
        return Err(Error::InvalidArgument(format!(
            "scale_bits must be in 1..=30, got {scale_bits}"
        )));
    }
    let clamp = (1u64 << CLAMP_BITS) as f64;
    let scale = (1u64 << scale_bits) as f64;
    let mut values = Vec::with_capacity(v.len());
    for &x in v.as_slice() {
        if !x.is_finite() || x.abs() >= clamp {
            return Err(Error::FixedPointOverflow { value: x, clamp_bits: CLAMP_BITS });
        }
        values.push((x * scale).round() as i64);
    }
    Ok(FixedPointVector { values, scale_bits })
}

/// Decodes back to floats: `x = value / 2^scale_bits`. The round trip error
/// is at most `2^-(scale_bits + 1)` per coordinate.
pub fn fp_decode(f: &FixedPointVector) -> ParamVector {
    let scale = (1u64 << f.scale_bits) as f64;
    ParamVector::new(f.values.iter().map(|&v| v as f64 / scale).collect())
}
