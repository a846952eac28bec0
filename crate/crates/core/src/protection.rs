// SPDX-License-Identifier: Apache-2.0

//! Degree of protection, exposure and graph repair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{difference_set, sensitivity_hull, MeasurementQuery, Polytope};
use crate::markov::Constraint;
use crate::policy::PolicyGraph;
use crate::scalar::{dist2, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectionReport {
    pub dop: BTreeMap<usize, usize>,
    pub exposed: BTreeSet<usize>,
    pub protectable: bool,
}

/// `1 + #{ j ∈ C, j ≠ i : f(s_j) - f(s_i) ∈ K }`.
pub fn degree_of_protection<T: Scalar>(
    state: usize,
    hull: &Polytope<T>,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<usize> {
    if !constraint.contains(state) {
        return Err(Error::NotInConstraint { state });
    }
    let others = constraint
        .iter()
        .filter(|&j| j != state && hull.contains(&query.difference(j, state)))
        .count();
    Ok(1 + others)
}

/// DoP of every constraint state against a given hull.
pub fn report_for_hull<T: Scalar>(
    hull: &Polytope<T>,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<ProtectionReport> {
    let mut dop = BTreeMap::new();
    for s in constraint.iter() {
        if s >= query.n_states() {
            return Err(Error::StateOutOfRange {
                index: s,
                n_states: query.n_states(),
            });
        }
        dop.insert(s, degree_of_protection(s, hull, constraint, query)?);
    }
    let exposed: BTreeSet<usize> = dop.iter().filter(|&(_, &d)| d == 1).map(|(&s, _)| s).collect();
    Ok(ProtectionReport {
        protectable: exposed.is_empty(),
        dop,
        exposed,
    })
}

/// DoP report for `graph` restricted to `constraint`.
pub fn protection_report<T: Scalar>(
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<ProtectionReport> {
    let hull = restricted_hull(graph, constraint, query)?;
    report_for_hull(&hull, constraint, query)
}

pub(crate) fn restricted_hull<T: Scalar>(
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<Polytope<T>> {
    let diffs = difference_set(&graph.restrict(constraint), query)?;
    Ok(sensitivity_hull(&diffs))
}

fn check_repairable(constraint: &Constraint) -> Result<()> {
    match constraint.len() {
        0 => Err(Error::EmptyInput("constraint")),
        1 => Err(Error::CannotProtect {
            state: constraint.states()[0],
        }),
        _ => Ok(()),
    }
}

/// Connects every exposed state to its ℓ2-nearest constraint state; ties go
/// to the lowest index.
pub fn greedy_repair<T: Scalar>(
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<PolicyGraph> {
    check_repairable(constraint)?;
    let report = protection_report(graph, constraint, query)?;
    let mut repaired = graph.clone();
    for &i in &report.exposed {
        let mut best: Option<(usize, T)> = None;
        for j in constraint.iter().filter(|&j| j != i) {
            let d = dist2(query.answer(i), query.answer(j));
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("constraint has another state");
        repaired.add_edge(i, j)?;
    }
    Ok(repaired)
}

/// Hull area after adding each candidate edge `{state, j}`, for every
/// constraint state `j` not already joined to `state`, in ascending `j`.
pub fn candidate_areas<T: Scalar>(
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
    state: usize,
) -> Result<Vec<(usize, T)>> {
    if query.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: query.dim(),
            intrinsic_dim: query.dim(),
        });
    }
    if !constraint.contains(state) {
        return Err(Error::NotInConstraint { state });
    }
    let hull = restricted_hull(graph, constraint, query)?;
    candidates_against(&hull, graph, constraint, query, state)
}

fn candidates_against<T: Scalar>(
    hull: &Polytope<T>,
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
    state: usize,
) -> Result<Vec<(usize, T)>> {
    let candidates: Vec<usize> = constraint
        .iter()
        .filter(|&j| j != state && !graph.has_edge(state, j))
        .collect();
    candidates
        .par_iter()
        .map(|&j| {
            let extra = [query.difference(state, j), query.difference(j, state)];
            Ok((j, hull.with_points(&extra)?.measure()?))
        })
        .collect()
}

/// Per exposed state in ascending order, commits the candidate edge with the
/// smallest resulting hull area (ties to the lowest index). A state that an
/// earlier commit already protected is skipped.
pub fn min_repair_2d<T: Scalar>(
    graph: &PolicyGraph,
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
) -> Result<PolicyGraph> {
    if query.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: query.dim(),
            intrinsic_dim: query.dim(),
        });
    }
    check_repairable(constraint)?;
    let mut repaired = graph.clone();
    let mut hull = restricted_hull(graph, constraint, query)?;
    let initially_exposed = report_for_hull(&hull, constraint, query)?.exposed;
    for &i in &initially_exposed {
        if degree_of_protection(i, &hull, constraint, query)? > 1 {
            continue;
        }
        let areas = candidates_against(&hull, &repaired, constraint, query, i)?;
        let mut best: Option<(usize, T)> = None;
        for (j, a) in areas {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((j, a));
            }
        }
        let (j, _) = best.ok_or(Error::CannotProtect { state: i })?;
        repaired.add_edge(i, j)?;
        hull = hull.with_points(&[query.difference(i, j), query.difference(j, i)])?;
    }
    Ok(repaired)
}

/// Repair algorithm used when a restricted graph is not protectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairStrategy {
    #[default]
    Greedy,
    Min2d,
}

impl RepairStrategy {
    pub fn repair<T: Scalar>(
        self,
        graph: &PolicyGraph,
        constraint: &Constraint,
        query: &MeasurementQuery<T>,
    ) -> Result<PolicyGraph> {
        match self {
            RepairStrategy::Greedy => greedy_repair(graph, constraint, query),
            RepairStrategy::Min2d => min_repair_2d(graph, constraint, query),
        }
    }
}

impl FromStr for RepairStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(RepairStrategy::Greedy),
            "min2d" => Ok(RepairStrategy::Min2d),
            other => Err(Error::InvalidParameter(format!("unknown repair strategy `{other}`"))),
        }
    }
}

impl fmt::Display for RepairStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairStrategy::Greedy => "greedy",
            RepairStrategy::Min2d => "min2d",
        })
    }
}
