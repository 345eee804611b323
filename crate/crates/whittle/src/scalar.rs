//! Scalar abstraction for the numerical kernels.
//!
//! All core math (factorization, pivoting, policy evaluation) is generic
//! over [`Scalar`], which bundles the traits needed throughout the crate.
//! `f32` and `f64` are the shipped instantiations; concrete `f64` aliases
//! live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by every kernel in this crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless (or nearest) conversion from an `f64` constant.
    fn from_f64_c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Conversion from a dimension/count.
    fn from_usize_c(x: usize) -> Self {
        Self::from_usize(x).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
