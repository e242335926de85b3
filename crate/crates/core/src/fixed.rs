//! Two's-complement fixed-point values.
//!
//! Three widths appear in the datapath: SINT4 for streamed inputs and
//! weights, SINT16 for layer outputs, and SINT32 for accumulators. A
//! [`Format`] pairs a width with a count of fractional bits, so a raw
//! integer `q` stands for the real value `q * 2^-frac_bits`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width and scale of a fixed-point quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Format {
    pub bits: u32,
    pub frac_bits: u32,
}

impl Format {
    pub const SINT4_INPUT: Format = Format { bits: 4, frac_bits: 3 };
    pub const BINARY: Format = Format { bits: 4, frac_bits: 0 };

    pub fn new(bits: u32, frac_bits: u32) -> Result<Self> {
        if !matches!(bits, 4 | 8 | 16 | 32) {
            return Err(Error::InvalidFormat(format!("unsupported width {bits}")));
        }
        if frac_bits >= bits {
            return Err(Error::InvalidFormat(format!("{frac_bits} fractional bits in a {bits}-bit field")));
        }
        Ok(Format { bits, frac_bits })
    }

    /// Format of a 32-bit accumulator holding products of `a` and `b`.
    pub fn accumulator(a: Format, b: Format) -> Result<Self> {
        Format::new(32, a.frac_bits + b.frac_bits)
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    pub fn contains(self, raw: i64) -> bool {
        raw >= self.min_raw() && raw <= self.max_raw()
    }

    pub fn check(self, raw: i64) -> Result<i32> {
        if self.contains(raw) {
            Ok(raw as i32)
        } else {
            Err(Error::ValueOutOfRange { value: raw, bits: self.bits })
        }
    }

    /// Distance between adjacent representable values.
    pub fn step(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn to_real(self, raw: i32) -> f64 {
        raw as f64 * self.step()
    }
}

/// A single fixed-point scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub raw: i32,
    pub format: Format,
}

impl FixedPoint {
    pub fn new(raw: i64, format: Format) -> Result<Self> {
        Ok(FixedPoint { raw: format.check(raw)?, format })
    }

    pub fn from_real(value: f64, format: Format) -> Self {
        FixedPoint { raw: quantize_value(value, format).0, format }
    }

    pub fn to_real(self) -> f64 {
        self.format.to_real(self.raw)
    }
}

/// Rounds `value` to the nearest multiple of the format's step (ties to
/// even) and saturates at the range ends. The flag reports saturation.
pub fn quantize_value(value: f64, format: Format) -> (i32, bool) {
    if value.is_nan() {
        return (0, false);
    }
    let scaled = (value * (format.frac_bits as f64).exp2()).round_ties_even();
    if scaled > format.max_raw() as f64 {
        (format.max_raw() as i32, true)
    } else if scaled < format.min_raw() as f64 {
        (format.min_raw() as i32, true)
    } else {
        (scaled as i32, false)
    }
}

/// Divides by `2^shift`, rounding to nearest with ties to even.
pub fn shift_round_even(raw: i64, shift: u32) -> i64 {
    if shift == 0 {
        return raw;
    }
    if shift >= 63 {
        return 0;
    }
    let q = raw >> shift;
    let rem = raw - (q << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Re-expresses `raw` (scaled by `2^-from_frac`) in `to`, rounding ties to
/// even and saturating. The flag reports saturation.
pub fn requantize(raw: i64, from_frac: u32, to: Format) -> (i32, bool) {
    let value = if from_frac >= to.frac_bits {
        shift_round_even(raw, from_frac - to.frac_bits)
    } else {
        let up = to.frac_bits - from_frac;
        raw.checked_shl(up).filter(|v| v >> up == raw).unwrap_or(if raw < 0 { i64::MIN } else { i64::MAX })
    };
    if value > to.max_raw() {
        (to.max_raw() as i32, true)
    } else if value < to.min_raw() {
        (to.min_raw() as i32, true)
    } else {
        (value as i32, false)
    }
}

/// Largest fractional bit count (at most `bits - 1`) for which a value of
/// magnitude `max_abs_raw * 2^-from_frac` still fits after rounding.
///
/// Falls back to zero fractional bits (with saturation) when nothing fits.
pub fn fit_frac_bits(max_abs_raw: u64, from_frac: u32, bits: u32) -> u32 {
    fit_frac_bits_capped(max_abs_raw, from_frac, bits, (1u64 << (bits - 1)) - 1)
}

/// As [`fit_frac_bits`], but the rounded magnitude must also stay at or
/// below `cap`.
pub fn fit_frac_bits_capped(max_abs_raw: u64, from_frac: u32, bits: u32, cap: u64) -> u32 {
    let limit = ((1i64 << (bits - 1)) - 1).min(cap.min(i64::MAX as u64) as i64);
    let magnitude = max_abs_raw.min(i64::MAX as u64) as i64;
    (0..bits)
        .rev()
        .find(|&frac| {
            let fmt = Format { bits, frac_bits: frac };
            let (q, sat) = requantize(magnitude, from_frac, fmt);
            !sat && (q as i64) <= limit
        })
        .unwrap_or(0)
}

/// Multiply-accumulate with the 32-bit accumulator trap: `None` when the
/// running sum leaves the SINT32 range.
#[inline]
pub fn mac(acc: i32, a: i32, b: i32) -> Option<i32> {
    let sum = acc as i64 + a as i64 * b as i64;
    i32::try_from(sum).ok()
}
