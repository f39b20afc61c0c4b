//! Scalar abstraction so the whole estimation stack runs on f32 or f64.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the road model.
///
/// `RealField` brings the transcendental functions and lets the fitter reuse
/// nalgebra's dense solvers; the num-traits bounds cover conversions from the
/// f64 literals that configuration values and tests are written in.
pub trait Real: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {}

/// Pulls an f64 literal into the working scalar type.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("literal must be representable")
}

/// Widens the working scalar back to f64 (reporting, diagnostics).
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar must widen to f64")
}
