//! Scalar abstraction the numeric core is generic over.
//!
//! Everything downstream (transfer functions, DFTs, spectra, certificates,
//! Monte Carlo harness) is written against [`Scalar`] so the same code runs in
//! `f32` or `f64`. Concrete `f64` aliases live at the crate root.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Signed, ToPrimitive};

/// Floating-point scalar type.
///
/// The supertrait list is exactly what the numeric kernels need: `Float` for
/// arithmetic, `FloatConst` for `PI`/`TAU`, the primitive conversions for
/// interop with configuration files (always IEEE-754 doubles on disk), and
/// `Signed + Send + Sync + Debug + 'static` so `rustfft` accepts the type.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Signed
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, rounding to the nearest representable value.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any float scalar")
    }

    /// Conversion to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }

    /// Conversion from an index or count.
    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).unwrap_or_else(|| Self::from_f64_lossy(value as f64))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand used throughout the crate to lift literals into the scalar type.
#[inline]
pub fn lit<T: Scalar>(value: f64) -> T {
    T::from_f64_lossy(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        let x: f64 = lit(0.7729);
        assert_eq!(x, 0.7729);
        let y: f32 = lit(0.5);
        assert_eq!(y, 0.5f32);
    }

    #[test]
    fn usize_conversion() {
        let n: f64 = f64::from_usize_lossy(1023);
        assert_eq!(n, 1023.0);
    }
}
