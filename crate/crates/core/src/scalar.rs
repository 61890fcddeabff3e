//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point type the algorithms are generic over.
///
/// Implemented for `f32` and `f64`. Everything the solver needs from the
/// scalar is bundled here so signatures stay short.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every finite `f64` is representable
    /// (possibly rounded) in the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// Machine epsilon of the type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerical tolerances used by the manifold and model contracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Maximum entry of `|XᵀX − I|` accepted for an orthonormal frame.
    pub orth_tol: T,
    /// Smallest singular value below which a retraction input is rank deficient.
    pub rank_tol: T,
    /// Maximum `‖UᵀV‖_F` accepted between global and local frames.
    pub cross_tol: T,
}

impl<T: Real> Default for Tolerances<T> {
    /// `orth_tol = 1e-10`, `rank_tol = 1e-12`, `cross_tol = 1e-8` for `f64`.
    /// Narrower types get floors proportional to their epsilon.
    fn default() -> Self {
        let eps = T::eps();
        Tolerances {
            orth_tol: T::lit(1e-10).max(eps * T::lit(1e3)),
            rank_tol: T::lit(1e-12).max(eps * T::lit(10.0)),
            cross_tol: T::lit(1e-8).max(eps * T::lit(1e3)),
        }
    }
}
