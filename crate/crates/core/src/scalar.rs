//! Scalar abstraction shared by the formula-level modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the closed-form models are generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn third<T: Real>() -> T {
        T::one() / T::lit(3.0)
    }

    #[test]
    fn literal_conversion_roundtrips() {
        assert!((third::<f64>() - 1.0 / 3.0).abs() < 1e-16);
        assert!((third::<f32>() - 1.0f32 / 3.0).abs() < 1e-7);
        assert_eq!(f32::lit(0.5).to_f64_lossy(), 0.5);
    }
}
