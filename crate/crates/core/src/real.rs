//! Scalar abstraction for the floating-point parts of the pipeline.
//!
//! Everything that touches LLRs, network weights, or path metrics is generic
//! over [`Real`], so the same code runs in `f32` or `f64`. Concrete aliases
//! for the common instantiations live at the crate root.

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the pipeline.
///
/// Beyond the arithmetic bounds this adds the three things the workbench
/// needs from a scalar: standard-normal sampling, a decimal rendering that
/// round-trips exactly, and parsing of that rendering back.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + LinalgScalar
    + Sum<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Draw one sample from the standard normal distribution.
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Render with enough significant digits that parsing recovers the exact
    /// bit pattern (17 for `f64`, 9 for `f32`).
    fn fmt_precise(self) -> String;

    /// Parse a decimal produced by [`Real::fmt_precise`] (or any plain float).
    fn parse_decimal(s: &str) -> Option<Self>;

    /// Lossy conversion from `f64`, for constants and configuration values.
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Widen to `f64` for reporting and accumulation.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f64 {
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn fmt_precise(self) -> String {
        format!("{:.16e}", self)
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Real for f32 {
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn fmt_precise(self) -> String {
        format!("{:.8e}", self)
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn precise_format_round_trips_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = f64::standard_normal(&mut rng) * 1e3;
            let s = x.fmt_precise();
            let back = f64::parse_decimal(&s).unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn precise_format_round_trips_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let x: f32 = f32::standard_normal(&mut rng) * 1e3;
            let back = f32::parse_decimal(&x.fmt_precise()).unwrap();
            assert_eq!(x.to_bits(), back.to_bits());
        }
    }
}
