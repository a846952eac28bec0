// SPDX-License-Identifier: Apache-2.0

//! K-norm and Laplace perturbation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MeasurementQuery, Polytope};
use crate::policy::PolicyGraph;
use crate::scalar::{factorial, norm1, sub, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    #[default]
    KNorm,
    Laplace,
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knorm" | "k-norm" => Ok(MechanismKind::KNorm),
            "laplace" => Ok(MechanismKind::Laplace),
            other => Err(Error::InvalidParameter(format!("unknown mechanism `{other}`"))),
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::KNorm => "knorm",
            MechanismKind::Laplace => "laplace",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MechanismConfig<T> {
    pub epsilon: T,
    pub kind: MechanismKind,
}

impl<T: Scalar> MechanismConfig<T> {
    pub fn new(epsilon: T, kind: MechanismKind) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { epsilon, kind })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct NoisyAnswer<T> {
    pub z: Vec<T>,
    pub timestamp: usize,
    pub epsilon_spent: T,
    /// Fingerprint of the polytope the noise was shaped by.
    pub hull_fingerprint: u64,
    /// Set when no noise could be added and `z` is the true answer.
    pub exact: bool,
}

fn check_epsilon<T: Scalar>(epsilon: T) -> Result<()> {
    if epsilon > T::zero() && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// `max_{ {j,k} ∈ E } ‖f(s_j) − f(s_k)‖₁`, or 0 without edges.
pub fn l1_sensitivity<T: Scalar>(graph: &PolicyGraph, query: &MeasurementQuery<T>) -> T {
    graph
        .edges()
        .map(|(j, k)| norm1(&query.difference(j, k)))
        .fold(T::zero(), T::max)
}

/// One K-norm noise draw: `offset = radius · direction`, with `direction`
/// uniform in `K` and `radius ~ Gamma(d' + 1, ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KNormNoise<T> {
    pub radius: T,
    pub direction: Vec<T>,
    pub offset: Vec<T>,
}

/// `Gamma(shape, rate)` for integer shape, as a sum of unit exponentials.
pub fn gamma_integer<T: Scalar, R: Rng + ?Sized>(shape: usize, rate: T, rng: &mut R) -> T {
    let s: f64 = (0..shape).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    T::lit(s) / rate
}

pub fn knorm_noise<T: Scalar, R: Rng + ?Sized>(
    polytope: &Polytope<T>,
    epsilon: T,
    rng: &mut R,
) -> Result<KNormNoise<T>> {
    check_epsilon(epsilon)?;
    let radius = gamma_integer(polytope.intrinsic_dim() + 1, epsilon, rng);
    let direction = polytope.sample_uniform(rng)?;
    let offset = direction.iter().map(|&u| radius * u).collect();
    Ok(KNormNoise {
        radius,
        direction,
        offset,
    })
}

/// `z = x + r·u`. A zero-dimensional hull releases `x` unchanged and marks
/// the answer exact.
pub fn knorm_sample<T: Scalar, R: Rng + ?Sized>(
    true_answer: &[T],
    polytope: &Polytope<T>,
    epsilon: T,
    rng: &mut R,
) -> Result<NoisyAnswer<T>> {
    check_dim(true_answer.len(), polytope.dim())?;
    check_epsilon(epsilon)?;
    let exact = polytope.intrinsic_dim() == 0;
    let z = if exact {
        true_answer.to_vec()
    } else {
        let noise = knorm_noise(polytope, epsilon, rng)?;
        true_answer.iter().zip(&noise.offset).map(|(&x, &o)| x + o).collect()
    };
    Ok(NoisyAnswer {
        z,
        timestamp: 0,
        epsilon_spent: epsilon,
        hull_fingerprint: polytope.fingerprint(),
        exact,
    })
}

/// `ε^{d'} / (d'! · |K|) · exp(−ε ‖z − x‖_K)` with `d'` the intrinsic
/// dimension and `|K|` the intrinsic measure. Off-span offsets have density
/// 0; a point hull gives the indicator of `z = x`.
pub fn knorm_density<T: Scalar>(z: &[T], true_answer: &[T], polytope: &Polytope<T>, epsilon: T) -> Result<T> {
    check_dim(z.len(), polytope.dim())?;
    check_dim(true_answer.len(), polytope.dim())?;
    check_epsilon(epsilon)?;
    let norm = polytope.k_norm(&sub(z, true_answer));
    if norm.is_infinite() {
        return Ok(T::zero());
    }
    let d = polytope.intrinsic_dim();
    if d == 0 {
        return Ok(T::one());
    }
    let measure = polytope.measure()?;
    Ok(epsilon.powi(d as i32) / (factorial::<T>(d) * measure) * (-epsilon * norm).exp())
}

/// Adds `(s_f / ε) · n` with `n` standard double-exponential per coordinate.
pub fn laplace_sample<T: Scalar, R: Rng + ?Sized>(
    true_answer: &[T],
    s_f: T,
    epsilon: T,
    rng: &mut R,
) -> Result<NoisyAnswer<T>> {
    check_epsilon(epsilon)?;
    if !(s_f >= T::zero()) || !s_f.is_finite() {
        return Err(Error::InvalidParameter(format!("sensitivity must be nonnegative, got {s_f}")));
    }
    let exact = s_f == T::zero();
    let scale = s_f / epsilon;
    let z = if exact {
        true_answer.to_vec()
    } else {
        true_answer
            .iter()
            .map(|&x| {
                let e = T::lit(rng.sample::<f64, _>(Exp1));
                let n = if rng.random::<bool>() { e } else { -e };
                x + scale * n
            })
            .collect()
    };
    Ok(NoisyAnswer {
        z,
        timestamp: 0,
        epsilon_spent: epsilon,
        hull_fingerprint: 0,
        exact,
    })
}

/// `(ε / 2s_f)^d · exp(−ε ‖z − x‖₁ / s_f)`; the indicator of `z = x` when
/// `s_f = 0`.
pub fn laplace_density<T: Scalar>(z: &[T], true_answer: &[T], s_f: T, epsilon: T) -> Result<T> {
    check_dim(z.len(), true_answer.len())?;
    check_epsilon(epsilon)?;
    let dist = norm1(&sub(z, true_answer));
    if s_f == T::zero() {
        return Ok(if dist == T::zero() { T::one() } else { T::zero() });
    }
    if !(s_f > T::zero()) || !s_f.is_finite() {
        return Err(Error::InvalidParameter(format!("sensitivity must be nonnegative, got {s_f}")));
    }
    let d = z.len() as i32;
    Ok((epsilon / (T::lit(2.0) * s_f)).powi(d) * (-epsilon * dist / s_f).exp())
}

/// The ℓ1 ball `{ x : ‖x‖₁ ≤ radius }`.
pub fn cross_polytope<T: Scalar>(radius: T, dim: usize) -> Result<Polytope<T>> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let mut points = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [radius, -radius] {
            let mut p = vec![T::zero(); dim];
            p[i] = s;
            points.push(p);
        }
    }
    Polytope::from_points(dim, points)
}

fn check_dim(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "answer vector",
            expected,
            found,
        })
    }
}
