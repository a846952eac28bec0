// SPDX-License-Identifier: Apache-2.0

//! Policy graphs over state indices.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MeasurementQuery;
use crate::markov::{Constraint, MarkovModel};
use crate::scalar::{norm1, norm2, sub, Scalar};

/// Undirected simple graph; edges are kept as `(min, max)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyGraph {
    n_states: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl PolicyGraph {
    /// Self-loops are dropped; `(j, i)` and `(i, j)` denote the same edge.
    pub fn new(n_states: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self {
            n_states,
            edges: BTreeSet::new(),
        };
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn complete(n_states: usize) -> Self {
        let edges = (0..n_states)
            .flat_map(|i| (i + 1..n_states).map(move |j| (i, j)))
            .collect();
        Self { n_states, edges }
    }

    /// Cliques within each category; `labels[i]` is the category of state `i`.
    pub fn categorical(labels: &[usize]) -> Self {
        let n = labels.len();
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| labels[i] == labels[j])
            .collect();
        Self { n_states: n, edges }
    }

    /// Edge iff the answers are within `radius`.
    pub fn utility<T: Scalar>(query: &MeasurementQuery<T>, radius: T, distance: Distance) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "utility radius must be positive, got {radius}"
            )));
        }
        let n = query.n_states();
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| distance.eval(query.answer(i), query.answer(j)) <= radius)
            .collect();
        Ok(Self { n_states: n, edges })
    }

    /// Edge `{j, k}` iff some row has positive probability on both.
    pub fn transition<T: Scalar>(model: &MarkovModel<T>) -> Self {
        let n = model.n_states();
        let mut edges = BTreeSet::new();
        for i in 0..n {
            let succ: Vec<usize> = model.successors(i).collect();
            for (a, &j) in succ.iter().enumerate() {
                for &k in &succ[a + 1..] {
                    edges.insert((j.min(k), j.max(k)));
                }
            }
        }
        Self { n_states: n, edges }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == state {
                Some(b)
            } else if b == state {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Inserts `{a, b}`; returns whether the edge is new. Self-loops are a no-op.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        for s in [a, b] {
            if s >= self.n_states {
                return Err(Error::StateOutOfRange {
                    index: s,
                    n_states: self.n_states,
                });
            }
        }
        if a == b {
            return Ok(false);
        }
        Ok(self.edges.insert((a.min(b), a.max(b))))
    }

    /// Subgraph keeping edges with both endpoints in `constraint`; state
    /// indices are unchanged.
    pub fn restrict(&self, constraint: &Constraint) -> Self {
        Self {
            n_states: self.n_states,
            edges: self
                .edges
                .iter()
                .copied()
                .filter(|&(a, b)| constraint.contains(a) && constraint.contains(b))
                .collect(),
        }
    }

    pub fn is_supergraph_of(&self, other: &Self) -> bool {
        self.n_states == other.n_states && other.edges.is_subset(&self.edges)
    }

    /// Edges present here but not in `base`, in canonical order.
    pub fn added_edges(&self, base: &Self) -> Vec<(usize, usize)> {
        self.edges.difference(&base.edges).copied().collect()
    }
}

/// Distance between answers for utility graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    L1,
    #[default]
    L2,
    Linf,
}

impl Distance {
    pub fn eval<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        let d = sub(a, b);
        match self {
            Distance::L1 => norm1(&d),
            Distance::L2 => norm2(&d),
            Distance::Linf => d.iter().map(|x| x.abs()).fold(T::zero(), T::max),
        }
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(Distance::L1),
            "l2" | "euclidean" => Ok(Distance::L2),
            "linf" | "chebyshev" => Ok(Distance::Linf),
            other => Err(Error::InvalidParameter(format!("unknown distance `{other}`"))),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::L1 => "l1",
            Distance::L2 => "l2",
            Distance::Linf => "linf",
        })
    }
}

/// Category assignment: a label per state, or an explicit list of groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Categories {
    Labels(Vec<usize>),
    Groups(Vec<Vec<usize>>),
}

impl Categories {
    /// Per-state labels; groups must partition `0..n_states`.
    pub fn labels(&self, n_states: usize) -> Result<Vec<usize>> {
        match self {
            Categories::Labels(l) => {
                if l.len() != n_states {
                    return Err(Error::DimensionMismatch {
                        what: "category labels",
                        expected: n_states,
                        found: l.len(),
                    });
                }
                Ok(l.clone())
            }
            Categories::Groups(groups) => {
                let mut labels = vec![usize::MAX; n_states];
                for (g, members) in groups.iter().enumerate() {
                    for &s in members {
                        if s >= n_states {
                            return Err(Error::StateOutOfRange { index: s, n_states });
                        }
                        if labels[s] != usize::MAX {
                            return Err(Error::InvalidParameter(format!(
                                "state {s} appears in more than one category"
                            )));
                        }
                        labels[s] = g;
                    }
                }
                if let Some(s) = labels.iter().position(|&l| l == usize::MAX) {
                    return Err(Error::InvalidParameter(format!("state {s} has no category")));
                }
                Ok(labels)
            }
        }
    }
}

/// Which policy family to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum GraphSpec<T> {
    Complete,
    Categorical {
        categories: Categories,
    },
    #[serde(alias = "util")]
    Utility {
        radius: T,
        #[serde(default)]
        distance: Distance,
    },
    Transition,
}

impl<T: Scalar> GraphSpec<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            GraphSpec::Complete => "complete",
            GraphSpec::Categorical { .. } => "categorical",
            GraphSpec::Utility { .. } => "utility",
            GraphSpec::Transition => "transition",
        }
    }
}

/// Builds the policy graph. The query is needed for utility graphs and the
/// model for transition graphs; whichever is present fixes the state count.
pub fn build_policy<T: Scalar>(
    spec: &GraphSpec<T>,
    query: Option<&MeasurementQuery<T>>,
    model: Option<&MarkovModel<T>>,
) -> Result<PolicyGraph> {
    if let (Some(q), Some(m)) = (query, model) {
        if q.n_states() != m.n_states() {
            return Err(Error::DimensionMismatch {
                what: "query vs model states",
                expected: m.n_states(),
                found: q.n_states(),
            });
        }
    }
    let n = query.map(|q| q.n_states()).or(model.map(|m| m.n_states()));
    let need_n = |kind| {
        n.ok_or(Error::MissingInput {
            kind,
            missing: "a query or a model",
        })
    };
    match spec {
        GraphSpec::Complete => Ok(PolicyGraph::complete(need_n("complete")?)),
        GraphSpec::Categorical { categories } => {
            let n = need_n("categorical")?;
            Ok(PolicyGraph::categorical(&categories.labels(n)?))
        }
        GraphSpec::Utility { radius, distance } => {
            let q = query.ok_or(Error::MissingInput {
                kind: "utility",
                missing: "a measurement query",
            })?;
            PolicyGraph::utility(q, *radius, *distance)
        }
        GraphSpec::Transition => {
            let m = model.ok_or(Error::MissingInput {
                kind: "transition",
                missing: "a transition model",
            })?;
            Ok(PolicyGraph::transition(m))
        }
    }
}
