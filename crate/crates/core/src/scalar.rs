//! Floating-point scalar abstraction for the geometry and estimation code.

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar the core math is generic over: `f32` or `f64`.
///
/// Everything geometric in this crate (camera projections, descriptors,
/// ICP, the pose graph) is written against this trait; the pipeline
/// instantiates it at `f64` via the aliases at the crate root.
pub trait Real:
    Float + FromPrimitive + NumCast + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("finite f64 literal converts to any Real")
    }

    /// Lossy conversion from a `usize` count.
    fn of_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("usize converts to any Real")
    }

    fn pi() -> Self {
        Self::of(std::f64::consts::PI)
    }

    fn two_pi() -> Self {
        Self::of(std::f64::consts::TAU)
    }

    /// Round-trip into `f64` (exact for `f32`/`f64`).
    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut r = a % two_pi;
    if r > T::pi() {
        r = r - two_pi;
    } else if r <= -T::pi() {
        r = r + two_pi;
    }
    r
}
