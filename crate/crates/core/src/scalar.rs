// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Signed, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the library can be instantiated with.
///
/// The associated constants carry the tolerances that depend on the
/// precision of the type.
pub trait Scalar:
    Float
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Allowed deviation of a probability vector's mass from 1.
    const MASS_TOLERANCE: f64;
    /// Probabilities at or below this value are structural zeros.
    const ZERO_THRESHOLD: f64 = 1e-12;
    /// Relative tolerance for geometric predicates evaluated in floating point.
    const GEOMETRY_TOLERANCE: f64;

    /// Converts an `f64` literal. Every finite `f64` is representable (possibly
    /// rounded) in the implementing types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const MASS_TOLERANCE: f64 = 1e-9;
    const GEOMETRY_TOLERANCE: f64 = 1e-9;
}

impl Scalar for f32 {
    const MASS_TOLERANCE: f64 = 1e-5;
    const GEOMETRY_TOLERANCE: f64 = 1e-5;
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn norm1<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|x| x.abs()).sum()
}

pub(crate) fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub(crate) fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// `n!` as a scalar; used for the Gamma-function normaliser `Γ(n + 1)`.
pub(crate) fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::lit(k as f64))
}
