//! Scalar abstraction shared by the numerical modules.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating-point type the solvers are generic over (`f32` or `f64`).
///
/// Only `RealField` methods are used for arithmetic; `num_traits` supplies
/// the lossy conversions to and from `f64` literals.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("representable count")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Machine epsilon of the concrete type.
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
