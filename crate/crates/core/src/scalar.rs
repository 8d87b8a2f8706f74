//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
///
/// The two tolerance hooks give the slack that an exact real-arithmetic
/// statement is allowed to lose to rounding at this precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Slack granted to inequalities that hold exactly over the reals.
    fn inequality_slack() -> Self;
    /// Tolerance for identities evaluated along two different routes.
    fn identity_tol() -> Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn inequality_slack() -> Self {
        1e-12
    }
    fn identity_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn inequality_slack() -> Self {
        1e-5
    }
    fn identity_tol() -> Self {
        1e-4
    }
}

/// Natural-log term `a * ln(a / b)` with the conventions `0 ln 0 = 0` and
/// `a ln(a / 0) = +inf` for `a > 0`.
#[inline]
pub(crate) fn xlogy_ratio<T: Real>(a: T, b: T) -> T {
    if a <= T::zero() {
        T::zero()
    } else if b <= T::zero() {
        T::infinity()
    } else {
        a * (a / b).ln()
    }
}
