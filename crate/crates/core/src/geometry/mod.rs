// SPDX-License-Identifier: Apache-2.0

//! Measurement queries, difference sets and the sensitivity hull.

pub mod planar;
mod polytope;
pub mod qp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyGraph;
use crate::scalar::{sub, Scalar};

pub use polytope::Polytope;

/// Query `f: S -> R^d`, stored per state.
///
/// Serialises as the `d × N` matrix whose column `i` is `f(s_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MeasurementQuery<T> {
    dim: usize,
    answers: Vec<Vec<T>>,
}

impl<T: Scalar> MeasurementQuery<T> {
    /// From `d` rows of length `N`.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyInput("query rows"));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::EmptyInput("query columns"));
        }
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "query row",
                    expected: n,
                    found: r.len(),
                });
            }
        }
        let answers = (0..n).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
        Self::from_answers(answers)
    }

    /// From `N` answer vectors of length `d`.
    pub fn from_answers(answers: Vec<Vec<T>>) -> Result<Self> {
        let Some(first) = answers.first() else {
            return Err(Error::EmptyInput("query answers"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::EmptyInput("query dimension"));
        }
        for a in &answers {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "query answer",
                    expected: dim,
                    found: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite query answer".into()));
            }
        }
        Ok(Self { dim, answers })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.answers.len()
    }

    pub fn answer(&self, state: usize) -> &[T] {
        &self.answers[state]
    }

    pub fn answers(&self) -> &[Vec<T>] {
        &self.answers
    }

    /// `f(s_j) - f(s_k)`.
    pub fn difference(&self, j: usize, k: usize) -> Vec<T> {
        sub(&self.answers[j], &self.answers[k])
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim)
            .map(|k| self.answers.iter().map(|a| a[k]).collect())
            .collect()
    }
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for MeasurementQuery<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl<T: Scalar> From<MeasurementQuery<T>> for Vec<Vec<T>> {
    fn from(q: MeasurementQuery<T>) -> Self {
        q.to_rows()
    }
}

/// Where a difference column came from: `f(minuend) - f(subtrahend)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub minuend: usize,
    pub subtrahend: usize,
}

impl Provenance {
    /// The underlying edge in canonical `(min, max)` order.
    pub fn edge(&self) -> (usize, usize) {
        (self.minuend.min(self.subtrahend), self.minuend.max(self.subtrahend))
    }

    /// True for the `f(low) - f(high)` column of an edge.
    pub fn is_forward(&self) -> bool {
        self.minuend < self.subtrahend
    }
}

/// Signed answer differences over the edges of a policy graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSet<T> {
    dim: usize,
    columns: Vec<Vec<T>>,
    provenance: Vec<Provenance>,
}

impl<T: Scalar> DifferenceSet<T> {
    /// Raw columns without edge provenance.
    pub fn from_columns(dim: usize, columns: Vec<Vec<T>>) -> Result<Self> {
        for c in &columns {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "difference column",
                    expected: dim,
                    found: c.len(),
                });
            }
        }
        Ok(Self {
            dim,
            columns,
            provenance: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    /// One entry per column; empty for sets built from raw columns.
    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// The `d × 2m` matrix view.
    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim)
            .map(|k| self.columns.iter().map(|c| c[k]).collect())
            .collect()
    }
}

/// For each edge `{j, k}` with `j < k`, in canonical order: `f(j) - f(k)`
/// followed by `f(k) - f(j)`.
pub fn difference_set<T: Scalar>(graph: &PolicyGraph, query: &MeasurementQuery<T>) -> Result<DifferenceSet<T>> {
    if graph.n_states() != query.n_states() {
        return Err(Error::DimensionMismatch {
            what: "policy graph states",
            expected: query.n_states(),
            found: graph.n_states(),
        });
    }
    let mut columns = Vec::with_capacity(2 * graph.n_edges());
    let mut provenance = Vec::with_capacity(2 * graph.n_edges());
    for (j, k) in graph.edges() {
        columns.push(query.difference(j, k));
        provenance.push(Provenance { minuend: j, subtrahend: k });
        columns.push(query.difference(k, j));
        provenance.push(Provenance { minuend: k, subtrahend: j });
    }
    Ok(DifferenceSet {
        dim: query.dim(),
        columns,
        provenance,
    })
}

/// `K = Conv(Δf)`; the origin alone when the set is empty.
pub fn sensitivity_hull<T: Scalar>(diffs: &DifferenceSet<T>) -> Polytope<T> {
    Polytope::build(diffs.dim, diffs.columns.clone(), &diffs.columns)
}

pub fn k_norm<T: Scalar>(polytope: &Polytope<T>, v: &[T]) -> T {
    polytope.k_norm(v)
}

/// Boundary-inclusive membership of `v` in the hull of the columns.
pub fn contains<T: Scalar>(diffs: &DifferenceSet<T>, v: &[T]) -> bool {
    sensitivity_hull(diffs).contains(v)
}

pub fn hull_measure<T: Scalar>(polytope: &Polytope<T>) -> Result<T> {
    polytope.measure()
}

pub fn sample_uniform<T: Scalar, R: Rng + ?Sized>(polytope: &Polytope<T>, rng: &mut R) -> Result<Vec<T>> {
    polytope.sample_uniform(rng)
}
