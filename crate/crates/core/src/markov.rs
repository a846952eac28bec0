// SPDX-License-Identifier: Apache-2.0

//! State space, transition dynamics and Bayesian belief tracking.
//!
//! Beliefs are row vectors over the `N` states. One step of the chain maps a
//! posterior `p⁺_{t-1}` to the prior `p⁻_t = p⁺_{t-1} M`; observing a released
//! answer `z_t` maps the prior to the posterior through Bayes' rule
//!
//! ```text
//! p⁺_t[i] ∝ Pr(z_t | s_i) · p⁻_t[i]
//! ```
//!
//! The constraint `C_t` is the support of the prior. Both updates renormalise.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// First-order, time-homogeneous Markov chain over `n_states` abstract states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel<T>", into = "RawModel<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MarkovModel<T> {
    n_states: usize,
    // row-major, entry (i, j) = Pr(i -> j)
    transition: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct RawModel<T> {
    n_states: usize,
    transition: Vec<Vec<T>>,
}

impl<T: Scalar> TryFrom<RawModel<T>> for MarkovModel<T> {
    type Error = Error;

    fn try_from(raw: RawModel<T>) -> Result<Self> {
        MarkovModel::new(raw.n_states, raw.transition)
    }
}

impl<T: Scalar> From<MarkovModel<T>> for RawModel<T> {
    fn from(model: MarkovModel<T>) -> Self {
        RawModel {
            n_states: model.n_states,
            transition: model.rows().map(<[T]>::to_vec).collect(),
        }
    }
}

impl<T: Scalar> MarkovModel<T> {
    /// Builds a model from its rows, rejecting anything that is not a
    /// row-stochastic `n × n` matrix.
    pub fn new(n_states: usize, rows: Vec<Vec<T>>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        if rows.len() != n_states {
            return Err(Error::DimensionMismatch {
                what: "transition rows",
                expected: n_states,
                found: rows.len(),
            });
        }
        let mut transition = Vec::with_capacity(n_states * n_states);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::DimensionMismatch {
                    what: "transition row length",
                    expected: n_states,
                    found: row.len(),
                });
            }
            let mut sum = T::zero();
            for (j, &p) in row.iter().enumerate() {
                if !(p >= T::zero() && p <= T::one()) {
                    return Err(Error::InvalidModel(format!(
                        "entry ({i}, {j}) = {p} is not a probability"
                    )));
                }
                sum = sum + p;
            }
            if (sum - T::one()).abs() > T::lit(T::MASS_TOLERANCE) {
                return Err(Error::InvalidModel(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
            transition.extend(row);
        }
        Ok(Self {
            n_states,
            transition,
        })
    }

    pub fn identity(n_states: usize) -> Self {
        let mut transition = vec![T::zero(); n_states * n_states];
        for i in 0..n_states {
            transition[i * n_states + i] = T::one();
        }
        Self {
            n_states,
            transition,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Pr(i -> j).
    pub fn prob(&self, from: usize, to: usize) -> T {
        self.transition[from * self.n_states + to]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.transition[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.transition.chunks(self.n_states)
    }

    /// States reachable from `i` in one step with probability above the
    /// structural-zero threshold.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let threshold = T::lit(T::ZERO_THRESHOLD);
        self.row(i)
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p > threshold)
            .map(|(j, _)| j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefKind {
    Prior,
    Posterior,
}

/// Probability vector over the states at a timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BeliefState<T> {
    probs: Vec<T>,
    kind: BeliefKind,
    timestamp: usize,
}

impl<T: Scalar> BeliefState<T> {
    /// Validates and wraps a probability vector. The vector must have unit
    /// mass within [`Scalar::MASS_TOLERANCE`]; it is renormalised exactly.
    pub fn new(probs: Vec<T>, kind: BeliefKind, timestamp: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("belief vector"));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= T::zero() && p <= T::one() + T::lit(T::MASS_TOLERANCE)) {
                return Err(Error::InvalidBelief(format!(
                    "entry {i} = {p} is not a probability"
                )));
            }
        }
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(T::MASS_TOLERANCE) {
            return Err(Error::InvalidBelief(format!("mass {sum} is not 1")));
        }
        Ok(Self {
            probs: normalized(probs, sum),
            kind,
            timestamp,
        })
    }

    pub fn point_mass(n_states: usize, state: usize, kind: BeliefKind, timestamp: usize) -> Result<Self> {
        if state >= n_states {
            return Err(Error::StateOutOfRange {
                index: state,
                n_states,
            });
        }
        let mut probs = vec![T::zero(); n_states];
        probs[state] = T::one();
        Ok(Self {
            probs,
            kind,
            timestamp,
        })
    }

    pub fn uniform(n_states: usize, kind: BeliefKind, timestamp: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::EmptyInput("belief vector"));
        }
        let p = T::one() / T::lit(n_states as f64);
        Ok(Self {
            probs: vec![p; n_states],
            kind,
            timestamp,
        })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn kind(&self) -> BeliefKind {
        self.kind
    }

    pub fn timestamp(&self) -> usize {
        self.timestamp
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    /// Indices with probability above the structural-zero threshold.
    pub fn support(&self) -> BTreeSet<usize> {
        let threshold = T::lit(T::ZERO_THRESHOLD);
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

fn normalized<T: Scalar>(mut probs: Vec<T>, sum: T) -> Vec<T> {
    for p in &mut probs {
        *p = *p / sum;
    }
    probs
}

/// Ordered set of states with positive prior probability.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Constraint {
    states: Vec<usize>,
}

impl Constraint {
    /// Sorts and deduplicates `states`.
    pub fn new(states: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = states.into_iter().collect();
        Self {
            states: set.into_iter().collect(),
        }
    }

    pub fn full(n_states: usize) -> Self {
        Self {
            states: (0..n_states).collect(),
        }
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.states.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.states.len() == 1
    }
}

/// Index of the hidden true state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrueState(pub usize);

impl TrueState {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Markov transition `p⁻_t = p⁺_{t-1} M`, renormalised.
pub fn propagate<T: Scalar>(belief: &BeliefState<T>, model: &MarkovModel<T>) -> Result<BeliefState<T>> {
    let n = model.n_states();
    if belief.n_states() != n {
        return Err(Error::DimensionMismatch {
            what: "belief vs model",
            expected: n,
            found: belief.n_states(),
        });
    }
    let mut next = vec![T::zero(); n];
    for (i, &p) in belief.probs.iter().enumerate() {
        if p == T::zero() {
            continue;
        }
        for (j, &m) in model.row(i).iter().enumerate() {
            next[j] = next[j] + p * m;
        }
    }
    let sum: T = next.iter().copied().sum();
    if !(sum > T::zero()) {
        return Err(Error::InvalidBelief("propagated belief has no mass".into()));
    }
    Ok(BeliefState {
        probs: normalized(next, sum),
        kind: BeliefKind::Prior,
        timestamp: belief.timestamp + 1,
    })
}

/// `C_t = { i : p⁻_t[i] > threshold }`.
pub fn extract_constraint<T: Scalar>(prior: &BeliefState<T>) -> Result<Constraint> {
    let support = prior.support();
    if support.is_empty() {
        return Err(Error::InvalidBelief(
            "every state is below the zero threshold".into(),
        ));
    }
    Ok(Constraint::new(support))
}

/// Bayesian update of `prior` after observing `z`.
///
/// `density(z, i)` is the likelihood `Pr(z | s_i)`. States outside the
/// prior's constraint receive zero posterior mass.
pub fn posterior_update<T, F>(prior: &BeliefState<T>, z: &[T], density: F) -> Result<BeliefState<T>>
where
    T: Scalar,
    F: Fn(&[T], usize) -> T,
{
    let constraint = extract_constraint(prior)?;
    let mut post = vec![T::zero(); prior.n_states()];
    let mut sum = T::zero();
    for i in constraint.iter() {
        let likelihood = density(z, i);
        if !(likelihood >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "likelihood of state {i} is {likelihood}"
            )));
        }
        post[i] = likelihood * prior.probs[i];
        sum = sum + post[i];
    }
    if !(sum > T::zero()) || !sum.is_finite() {
        return Err(Error::ImpossibleObservation);
    }
    Ok(BeliefState {
        probs: normalized(post, sum),
        kind: BeliefKind::Posterior,
        timestamp: prior.timestamp,
    })
}

/// Maximum-likelihood transition estimate with additive smoothing.
///
/// Rows without observed outgoing transitions and zero smoothing become
/// self-loops.
pub fn learn_model<T: Scalar>(
    trajectories: &[Vec<usize>],
    n_states: usize,
    smoothing: T,
) -> Result<MarkovModel<T>> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("trajectory list"));
    }
    if n_states == 0 {
        return Err(Error::InvalidModel("model has no states".into()));
    }
    if !(smoothing >= T::zero()) || !smoothing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "smoothing must be a finite nonnegative number, got {smoothing}"
        )));
    }
    let mut counts = vec![0u64; n_states * n_states];
    for (k, traj) in trajectories.iter().enumerate() {
        if traj.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "trajectory {k} has fewer than two steps"
            )));
        }
        if let Some(&bad) = traj.iter().find(|&&s| s >= n_states) {
            return Err(Error::StateOutOfRange {
                index: bad,
                n_states,
            });
        }
        for w in traj.windows(2) {
            counts[w[0] * n_states + w[1]] += 1;
        }
    }
    let rows = (0..n_states)
        .map(|i| {
            let row = &counts[i * n_states..(i + 1) * n_states];
            let total = T::lit(row.iter().sum::<u64>() as f64) + smoothing * T::lit(n_states as f64);
            if total == T::zero() {
                let mut r = vec![T::zero(); n_states];
                r[i] = T::one();
                r
            } else {
                row.iter()
                    .map(|&c| (T::lit(c as f64) + smoothing) / total)
                    .collect()
            }
        })
        .collect();
    MarkovModel::new(n_states, rows)
}
