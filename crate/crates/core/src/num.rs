use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar the geometry and statistics are generic over. Implemented for
/// `f32` and `f64`; everything downstream picks one via the aliases at the
/// crate root.
pub trait Real:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + Debug
    + Default
    + Copy
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from a literal. Panics on values a `f32` cannot hold,
    /// which never happens for the constants used here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    fn two() -> Self {
        Self::of(2.0)
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn pi() -> Self {
        Self::of(std::f64::consts::PI)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total order for scalars that are known to be non-NaN (distances,
/// filtration values). Panics on NaN rather than silently misordering.
pub(crate) fn fcmp<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).expect("NaN in ordered comparison")
}
