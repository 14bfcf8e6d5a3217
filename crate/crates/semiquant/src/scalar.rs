//! Scalar abstraction for the numerical kernels.
//!
//! Quadrature rules, the Runge-Kutta integrator, window transforms and
//! extrapolation are written once over [`Real`]; the operator layers use
//! `f64` through the aliases in the crate root.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::Debug;

pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
