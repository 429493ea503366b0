//! The scalar abstraction all numeric code is generic over.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssignOps + FromPrimitive + LowerExp + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics if the value is not representable.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal not representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Formats a scalar with 17 significant decimal digits, enough to round-trip
/// an `f64` value exactly.
pub fn full_precision<T: Scalar>(value: T) -> String {
    format!("{:.16e}", value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips_f64() {
        for &v in &[0.1, -1.0 / 3.0, 1e-300, 2.2250738585072014e-308, 12345.6789] {
            let s = full_precision(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn lit_converts_literals() {
        assert_eq!(f64::lit(0.9), 0.9);
        assert_eq!(f32::lit(0.5), 0.5f32);
    }
}
