//! Controller synthesis and closed-loop simulation for singular networked
//! cascade control systems with mixed (time/event) triggering, actuator
//! saturation and faults, and randomly occurring deception attacks.
//!
//! The numeric kernel is generic over the scalar type via [`real::Real`];
//! the toolkit itself runs on the `f64` aliases below.

pub mod analysis;
pub mod cases;
pub mod error;
pub mod lmi;
pub mod model;
pub mod numerics;
pub mod real;
pub mod sdp;
pub mod sim;
pub mod synthesis;
pub mod trigger;

pub use error::{Error, Result};
pub use real::Real;

/// Concrete scalar used by the toolkit.
pub type Scalar = f64;
/// Dense matrix over the concrete scalar.
pub type Mat = numerics::DenseMat<Scalar>;
/// Differential/algebraic coordinate split over the concrete scalar.
pub type DaeSplit = numerics::DaeDecomposition<Scalar>;
