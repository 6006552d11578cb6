//! The floating-point abstraction the whole crate is generic over.
//!
//! All numeric code is written against [`Scalar`] so that every metric can run
//! in 64-bit (the default, needed for the tight identity tolerances) or 32-bit
//! (selectable for fidelity runs). Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar usable in every computation of this crate.
///
/// Implemented for `f32` and `f64` only; the bit-level accessors exist so
/// checkpoints can round-trip weights exactly.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssignOps
    + ScalarOperand
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Width of this scalar in bytes (4 or 8); stored in checkpoint headers.
    const BYTE_WIDTH: u8;

    /// Converts from `f64`, rounding to nearest representable value.
    ///
    /// All random draws and configuration constants are produced in `f64` and
    /// funneled through here, so a 32-bit run consumes the same underlying
    /// random stream as a 64-bit one.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("every f64 converts to a Scalar")
    }

    /// Raw IEEE-754 bits, widened to `u64` for uniform storage.
    fn to_bits_u64(self) -> u64;

    /// Inverse of [`Scalar::to_bits_u64`].
    fn from_bits_u64(bits: u64) -> Self;

    /// Widens to `f64` (exact for both supported scalar types).
    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    const BYTE_WIDTH: u8 = 8;

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }

    fn from_bits_u64(bits: u64) -> Self {
        f64::from_bits(bits)
    }

    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const BYTE_WIDTH: u8 = 4;

    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }

    fn from_bits_u64(bits: u64) -> Self {
        f32::from_bits(bits as u32)
    }

    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn of_converts_exactly_representable_values() {
        assert_eq!(<f64 as Scalar>::of(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::of(0.25), 0.25f32);
    }

    #[test]
    fn bits_round_trip() {
        for v in [0.0f64, -1.5, std::f64::consts::PI, f64::MIN_POSITIVE] {
            assert_eq!(f64::from_bits_u64(v.to_bits_u64()), v);
        }
        for v in [0.0f32, -1.5, std::f32::consts::E] {
            assert_eq!(f32::from_bits_u64(v.to_bits_u64()), v);
        }
    }
}
