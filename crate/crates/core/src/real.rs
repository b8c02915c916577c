//! Scalar abstraction: the whole numeric kernel is generic over [`Real`],
//! instantiated as `f64` for the concrete aliases at the crate root.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the dense kernel: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Default + std::fmt::Debug + std::fmt::Display + 'static
{
    /// Lossy conversion from an `f64` literal (tolerances, table constants).
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 literal")
    }

    /// Round-trip into `f64` for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
