use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Field-like scalar: enough for ratios, products and means.
///
/// Implemented for `f32`, `f64` and `BigRational` through the blanket impl.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + Debug {}

/// Floating-point scalar, for routines that need logs or square roots.
pub trait Real: Scalar + Float + Send + Sync {}

impl<T> Real for T where T: Scalar + Float + Send + Sync {}
