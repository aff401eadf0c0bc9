//! Scalar abstraction for signal samples.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the signal math is generic over: `f32` or `f64`.
pub trait Sample: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    /// Convert a finite `f64` constant (strength, threshold, ...) into this type.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from(v).expect("finite f64 converts to any sample scalar")
    }

    /// Widen to `f64` for reporting and policy math.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("sample scalar converts to f64")
    }
}

impl Sample for f32 {}
impl Sample for f64 {}
