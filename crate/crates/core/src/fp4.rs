//! Bit-exact FP4 (E2M1) value coding, E8M0 shared-exponent arithmetic, and
//! the two rounding modes used by every quantizer in this crate.
//!
//! The element format follows the OCP MX E2M1 convention: 1 sign bit, 2
//! exponent bits (bias 1), 1 mantissa bit, laid out `s|ee|m` with the sign
//! in the high bit. The 16 codes decode to
//! `{±0, ±0.5, ±1, ±1.5, ±2, ±3, ±4, ±6}`; there are no infinities or NaNs
//! and out-of-range values saturate to ±6.
//!
//! Scales are E8M0: a bare power-of-two exponent in `[-127, 127]` plus a
//! NaN sentinel. Multiplying or dividing by an in-range scale is exact in
//! binary floating point.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest representable E2M1 magnitude.
pub const FP4_MAX: f64 = 6.0;

/// A 4-bit E2M1 code, stored in the low nibble as `s|ee|m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp4Code(u8);

impl Fp4Code {
    pub const ZERO: Fp4Code = Fp4Code(0);

    /// Only the low 4 bits of `bits` are kept.
    #[inline]
    pub const fn from_bits(bits: u8) -> Self {
        Fp4Code(bits & 0x0F)
    }

    #[inline]
    pub const fn to_bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn sign_bit(self) -> bool {
        self.0 & 0b1000 != 0
    }

    #[inline]
    pub const fn exponent_bits(self) -> u8 {
        (self.0 >> 1) & 0b11
    }

    #[inline]
    pub const fn mantissa_bit(self) -> u8 {
        self.0 & 1
    }
}

/// Decodes an E2M1 code. Total over all 16 bit patterns; the negative-zero
/// code `0b1000` decodes to `-0.0`, which compares equal to zero.
pub fn decode_fp4(code: Fp4Code) -> f64 {
    let sign = if code.sign_bit() { -1.0 } else { 1.0 };
    let e = code.exponent_bits();
    let m = code.mantissa_bit() as f64;
    let mag = if e == 0 {
        // subnormal: 0 or 0.5
        0.5 * m
    } else {
        pow2(e as i32 - 1) * (1.0 + 0.5 * m)
    };
    sign * mag
}

/// An E8M0 power-of-two scale: exponent in `[-127, 127]`, or a NaN sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct E8M0Scale(i8);

impl E8M0Scale {
    pub const MIN_EXP: i32 = -127;
    pub const MAX_EXP: i32 = 127;
    /// The sentinel; its byte form is `-128`.
    pub const NAN: E8M0Scale = E8M0Scale(i8::MIN);

    /// Clamps `e` into the representable exponent range.
    pub fn new(e: i32) -> Self {
        E8M0Scale(e.clamp(Self::MIN_EXP, Self::MAX_EXP) as i8)
    }

    #[inline]
    pub fn is_nan(self) -> bool {
        self.0 == i8::MIN
    }

    /// The raw exponent. Meaningless for the NaN sentinel (returns -128).
    #[inline]
    pub fn exponent(self) -> i32 {
        self.0 as i32
    }

    /// The scale value `2^e`, exact in binary64; NaN for the sentinel.
    pub fn value(self) -> f64 {
        if self.is_nan() {
            f64::NAN
        } else {
            pow2(self.0 as i32)
        }
    }

    /// Signed-byte form used by the tensor serialization (`-128` = NaN).
    #[inline]
    pub fn to_byte(self) -> i8 {
        self.0
    }

    #[inline]
    pub fn from_byte(b: i8) -> Self {
        E8M0Scale(b)
    }
}

/// Rounding mode for scalar quantization. Stochastic rounding owns its
/// generator state; a given seed replays the identical code stream.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum RoundingMode {
    NearestEven,
    Stochastic(ChaCha8Rng),
}

impl RoundingMode {
    pub fn stochastic(seed: u64) -> Self {
        RoundingMode::Stochastic(ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Exact `2^e` for `e` within the binary64 normal range.
#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// `floor(log2(x))` for finite `x > 0`, computed from the bit pattern so
/// binade boundaries are exact.
pub(crate) fn floor_log2(x: f64) -> i32 {
    debug_assert!(x.is_finite() && x > 0.0);
    let exp_field = ((x.to_bits() >> 52) & 0x7FF) as i32;
    if exp_field == 0 {
        // subnormal: renormalize by an exact power-of-two multiply
        let lifted = x * pow2(120);
        let lifted_field = ((lifted.to_bits() >> 52) & 0x7FF) as i32;
        lifted_field - 1023 - 120
    } else {
        exp_field - 1023
    }
}

/// Grid spacing of the E2M1 value set around magnitude `ax <= 6`.
#[inline]
fn fp4_step(ax: f64) -> f64 {
    if ax < 2.0 {
        0.5
    } else if ax < 4.0 {
        1.0
    } else {
        2.0
    }
}

fn encode_magnitude(mag: f64, negative: bool) -> Fp4Code {
    // mag is one of {0, 0.5, 1, 1.5, 2, 3, 4, 6}; twice it is a small integer
    let low = match (mag * 2.0) as u32 {
        0 => 0b000,
        1 => 0b001,
        2 => 0b010,
        3 => 0b011,
        4 => 0b100,
        6 => 0b101,
        8 => 0b110,
        12 => 0b111,
        other => unreachable!("non-representable FP4 magnitude {other}/2"),
    };
    Fp4Code(low | if negative { 0b1000 } else { 0 })
}

fn nearest_even(x: f64) -> Fp4Code {
    let negative = x < 0.0;
    let ax = x.abs().min(FP4_MAX);
    // Within each binade the grid is uniform and values with an even step
    // count carry mantissa bit 0, so round-half-to-even on the step count
    // is exactly ties-to-even on the mantissa.
    let step = fp4_step(ax);
    let mag = (ax / step).round_ties_even() * step;
    encode_magnitude(mag, negative)
}

/// Sorted E2M1 value set (15 distinct values), used to bracket a value for
/// stochastic rounding.
const FP4_VALUES: [f64; 15] = [
    -6.0, -4.0, -3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0,
];

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stochastic(x: f64, rng: &mut ChaCha8Rng) -> Fp4Code {
    let v = x.clamp(-FP4_MAX, FP4_MAX);
    // index of the first grid value >= v
    let hi_idx = FP4_VALUES.partition_point(|&g| g < v);
    let hi = FP4_VALUES[hi_idx];
    if hi == v {
        return encode_magnitude(v.abs(), v < 0.0);
    }
    let lo = FP4_VALUES[hi_idx - 1];
    let p_up = (v - lo) / (hi - lo);
    let chosen = if unit_f64(rng) < p_up { hi } else { lo };
    encode_magnitude(chosen.abs(), chosen < 0.0)
}

/// Rounds a finite value to an FP4 code.
///
/// NearestEven clamps to `[-6, 6]` and resolves exact midpoints toward the
/// code with even mantissa bit. Stochastic rounds to one of the two
/// bracketing grid values with probability proportional to proximity;
/// values beyond the range saturate deterministically.
pub fn quantize_scalar(x: f64, mode: &mut RoundingMode) -> Result<Fp4Code> {
    if !x.is_finite() {
        return Err(Error::NonFinite("quantize_scalar"));
    }
    Ok(match mode {
        RoundingMode::NearestEven => nearest_even(x),
        RoundingMode::Stochastic(rng) => stochastic(x, rng),
    })
}

/// Shared block exponent per the MX rule: `floor(log2(amax)) - 2`, where 2
/// is the largest unbiased E2M1 exponent, clamped to the E8M0 range. After
/// dividing by the scale, the block maximum lands in `[4, 8)`. An all-zero
/// block gets the minimum exponent.
pub fn shared_exponent(block: &[f64]) -> Result<E8M0Scale> {
    if block.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let mut amax = 0.0f64;
    for &v in block {
        if !v.is_finite() {
            return Err(Error::NonFinite("shared_exponent"));
        }
        amax = amax.max(v.abs());
    }
    if amax == 0.0 {
        return Ok(E8M0Scale::new(E8M0Scale::MIN_EXP));
    }
    Ok(E8M0Scale::new(floor_log2(amax) - 2))
}
