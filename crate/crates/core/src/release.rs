// SPDX-License-Identifier: Apache-2.0

//! Per-timestep release loop and privacy accounting.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{difference_set, sensitivity_hull, MeasurementQuery, Polytope};
use crate::markov::{
    extract_constraint, posterior_update, propagate, BeliefState, Constraint, MarkovModel, TrueState,
};
use crate::mechanisms::{
    cross_polytope, knorm_sample, l1_sensitivity, laplace_density, laplace_sample, MechanismConfig,
    MechanismKind, NoisyAnswer,
};
use crate::policy::PolicyGraph;
use crate::protection::{report_for_hull, ProtectionReport, RepairStrategy};
use crate::scalar::{norm1, sub, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LedgerRecord<T> {
    pub t: usize,
    pub epsilon: T,
    /// Constrained-DP multiplier of the step (`+∞` when some pair is off-span).
    pub factor: T,
    pub query_id: usize,
    /// The exact answer was released because the constraint was a singleton.
    pub exact: bool,
}

/// Append-only record of every released answer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PrivacyLedger<T> {
    records: Vec<LedgerRecord<T>>,
}

impl<T: Scalar> PrivacyLedger<T> {
    pub fn new() -> Self {
        Self { records: Vec::new() }
    }

    pub fn push(&mut self, record: LedgerRecord<T>) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[LedgerRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `Σ ε_t`, accumulated in release order.
    pub fn total_epsilon(&self) -> T {
        self.records.iter().fold(T::zero(), |acc, r| acc + r.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct TimestampTotal<T> {
    pub t: usize,
    pub epsilon: T,
    pub constrained: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct CompositionSummary<T> {
    pub per_timestamp: Vec<TimestampTotal<T>>,
    /// `Σ ε_i`.
    pub dphmm_total: T,
    /// `Σ factor_i · ε_i`.
    pub constrained_total: T,
}

/// Sequential composition over every record in the ledger.
pub fn compose<T: Scalar>(ledger: &PrivacyLedger<T>) -> CompositionSummary<T> {
    let mut by_t: BTreeMap<usize, (T, T)> = BTreeMap::new();
    let mut dphmm_total = T::zero();
    let mut constrained_total = T::zero();
    for r in ledger.records() {
        let weighted = if r.factor == T::zero() { T::zero() } else { r.factor * r.epsilon };
        let e = by_t.entry(r.t).or_insert((T::zero(), T::zero()));
        e.0 = e.0 + r.epsilon;
        e.1 = e.1 + weighted;
        dphmm_total = dphmm_total + r.epsilon;
        constrained_total = constrained_total + weighted;
    }
    CompositionSummary {
        per_timestamp: by_t
            .into_iter()
            .map(|(t, (epsilon, constrained))| TimestampTotal { t, epsilon, constrained })
            .collect(),
        dphmm_total,
        constrained_total,
    }
}

/// `max_{j,k ∈ C} ‖f(s_j) − f(s_k)‖_K`; 0 for a singleton.
pub fn constrained_dp_factor<T: Scalar>(
    constraint: &Constraint,
    query: &MeasurementQuery<T>,
    hull: &Polytope<T>,
) -> Result<T> {
    if constraint.is_empty() {
        return Err(Error::EmptyInput("constraint"));
    }
    let states = constraint.states();
    let mut factor = T::zero();
    for (a, &j) in states.iter().enumerate() {
        for &k in &states[a + 1..] {
            factor = factor.max(hull.k_norm(&query.difference(j, k)));
            if factor.is_infinite() {
                return Ok(factor);
            }
        }
    }
    Ok(factor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct AuditResult<T> {
    pub levels: Vec<T>,
    pub overall: T,
}

/// Effective privacy level per secret, `ε · ‖f(D ∪ s_i) − f(D)‖_K`.
pub fn audit_blowfish_database<T: Scalar>(
    differences: &[Vec<T>],
    hull: &Polytope<T>,
    epsilon: T,
) -> Result<AuditResult<T>> {
    let mut levels = Vec::with_capacity(differences.len());
    for d in differences {
        if d.len() != hull.dim() {
            return Err(Error::DimensionMismatch {
                what: "secret difference",
                expected: hull.dim(),
                found: d.len(),
            });
        }
        let n = hull.k_norm(d);
        levels.push(if n == T::zero() { T::zero() } else { epsilon * n });
    }
    let overall = levels.iter().copied().fold(T::zero(), T::max);
    Ok(AuditResult { levels, overall })
}

/// Everything observable about one release.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub t: usize,
    pub answer: NoisyAnswer<T>,
    pub constraint: Constraint,
    /// Protection of the graph actually used; a singleton constraint reports
    /// DoP 1 for its only state.
    pub protection: ProtectionReport,
    pub dop_true_state: usize,
    pub repaired_edges: Vec<(usize, usize)>,
    pub factor: T,
    pub posterior_support: BTreeSet<usize>,
}

/// Single-owner release context for one trajectory.
#[derive(Debug, Clone)]
pub struct ReleaseSession<'a, T: Scalar> {
    model: &'a MarkovModel<T>,
    query: &'a MeasurementQuery<T>,
    graph: &'a PolicyGraph,
    config: MechanismConfig<T>,
    repair: RepairStrategy,
    belief: BeliefState<T>,
    ledger: PrivacyLedger<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Scalar> ReleaseSession<'a, T> {
    /// `initial` is the belief before the first release (timestamp 0).
    pub fn new(
        model: &'a MarkovModel<T>,
        query: &'a MeasurementQuery<T>,
        graph: &'a PolicyGraph,
        config: MechanismConfig<T>,
        repair: RepairStrategy,
        initial: BeliefState<T>,
        seed: u64,
    ) -> Result<Self> {
        let n = model.n_states();
        for (what, found) in [
            ("query states", query.n_states()),
            ("policy graph states", graph.n_states()),
            ("initial belief", initial.n_states()),
        ] {
            if found != n {
                return Err(Error::DimensionMismatch { what, expected: n, found });
            }
        }
        Ok(Self {
            model,
            query,
            graph,
            config,
            repair,
            belief: initial,
            ledger: PrivacyLedger::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn belief(&self) -> &BeliefState<T> {
        &self.belief
    }

    pub fn ledger(&self) -> &PrivacyLedger<T> {
        &self.ledger
    }

    pub fn into_ledger(self) -> PrivacyLedger<T> {
        self.ledger
    }

    pub fn config(&self) -> &MechanismConfig<T> {
        &self.config
    }

    /// Timestamp of the most recent release (0 before the first).
    pub fn timestamp(&self) -> usize {
        self.belief.timestamp()
    }

    /// Releases with the configured ε.
    pub fn step(&mut self, true_state: TrueState) -> Result<StepReport<T>> {
        let eps = self.config.epsilon;
        self.release_step(true_state, eps)
    }

    /// Propagate, constrain, restrict, repair, perturb, update, record.
    ///
    /// On error the session is left unchanged.
    pub fn release_step(&mut self, true_state: TrueState, epsilon_t: T) -> Result<StepReport<T>> {
        let state = true_state.index();
        if state >= self.model.n_states() {
            return Err(Error::StateOutOfRange {
                index: state,
                n_states: self.model.n_states(),
            });
        }
        if !(epsilon_t > T::zero()) || !epsilon_t.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon_t}")));
        }
        let prior = propagate(&self.belief, self.model)?;
        let t = prior.timestamp();
        let constraint = extract_constraint(&prior)?;
        if !constraint.contains(state) {
            return Err(Error::ModelInconsistency { t, state });
        }
        let x = self.query.answer(state).to_vec();

        if constraint.is_singleton() {
            let answer = NoisyAnswer {
                z: x,
                timestamp: t,
                epsilon_spent: epsilon_t,
                hull_fingerprint: 0,
                exact: true,
            };
            let posterior = posterior_update(&prior, &answer.z, |_, _| T::one())?;
            self.ledger.push(LedgerRecord {
                t,
                epsilon: epsilon_t,
                factor: T::zero(),
                query_id: 0,
                exact: true,
            });
            let report = StepReport {
                t,
                constraint,
                protection: ProtectionReport {
                    dop: BTreeMap::from([(state, 1)]),
                    exposed: BTreeSet::from([state]),
                    protectable: false,
                },
                dop_true_state: 1,
                repaired_edges: Vec::new(),
                factor: T::zero(),
                posterior_support: posterior.support(),
                answer,
            };
            self.belief = posterior;
            return Ok(report);
        }

        let restricted = self.graph.restrict(&constraint);
        let hull = sensitivity_hull(&difference_set(&restricted, self.query)?);
        let before = report_for_hull(&hull, &constraint, self.query)?;
        let (graph, hull, protection) = if before.protectable {
            (restricted.clone(), hull, before)
        } else {
            let g = self.repair.repair(&restricted, &constraint, self.query)?;
            let h = sensitivity_hull(&difference_set(&g, self.query)?);
            let p = report_for_hull(&h, &constraint, self.query)?;
            (g, h, p)
        };
        let repaired_edges = graph.added_edges(&restricted);

        // The posterior only needs likelihoods up to a common constant, so the
        // K-norm kernel skips the normaliser.
        let (mut answer, posterior, factor) = match self.config.kind {
            MechanismKind::KNorm => {
                let answer = knorm_sample(&x, &hull, epsilon_t, &mut self.rng)?;
                let posterior = posterior_update(&prior, &answer.z, |z, i| {
                    let n = hull.k_norm(&sub(z, self.query.answer(i)));
                    if n.is_infinite() {
                        T::zero()
                    } else {
                        (-epsilon_t * n).exp()
                    }
                })?;
                let factor = constrained_dp_factor(&constraint, self.query, &hull)?;
                (answer, posterior, factor)
            }
            MechanismKind::Laplace => {
                let s_f = l1_sensitivity(&graph, self.query);
                let answer = laplace_sample(&x, s_f, epsilon_t, &mut self.rng)?;
                let posterior = posterior_update(&prior, &answer.z, |z, i| {
                    if s_f == T::zero() {
                        return laplace_density(z, self.query.answer(i), s_f, epsilon_t).unwrap_or(T::zero());
                    }
                    (-epsilon_t * norm1(&sub(z, self.query.answer(i))) / s_f).exp()
                })?;
                let factor = if s_f == T::zero() {
                    T::zero()
                } else {
                    let ball = cross_polytope(s_f, self.query.dim())?;
                    constrained_dp_factor(&constraint, self.query, &ball)?
                };
                (answer, posterior, factor)
            }
        };
        answer.timestamp = t;

        self.ledger.push(LedgerRecord {
            t,
            epsilon: epsilon_t,
            factor,
            query_id: 0,
            exact: answer.exact,
        });
        let report = StepReport {
            t,
            dop_true_state: protection.dop[&state],
            constraint,
            protection,
            repaired_edges,
            factor,
            posterior_support: posterior.support(),
            answer,
        };
        self.belief = posterior;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::BeliefKind;

    fn query() -> MeasurementQuery<f64> {
        MeasurementQuery::from_rows(vec![
            vec![1.0, 2.0, 3.0, 0.0, 4.0, 1.0],
            vec![0.0, 1.0, 0.0, 1.0, 2.0, 2.0],
        ])
        .unwrap()
    }

    #[test]
    fn composition_examples() {
        let mut l = PrivacyLedger::new();
        assert_eq!(compose(&l).dphmm_total, 0.0);
        for (t, f) in [(1, 1.0), (2, 2.0)] {
            l.push(LedgerRecord { t, epsilon: 1.0, factor: f, query_id: 0, exact: false });
        }
        let s = compose(&l);
        assert_eq!(s.dphmm_total, 2.0);
        assert_eq!(s.constrained_total, 3.0);
        assert_eq!(s.per_timestamp.len(), 2);
        let mut l = PrivacyLedger::new();
        for t in [1, 2] {
            l.push(LedgerRecord { t, epsilon: 0.5, factor: 1.0, query_id: 0, exact: false });
        }
        assert_eq!(compose(&l).dphmm_total, 1.0);
        assert_eq!(l.total_epsilon(), 1.0);
    }

    #[test]
    fn factor_examples() {
        let q = query();
        let g = PolicyGraph::new(6, [(1, 2)]).unwrap();
        let hull = sensitivity_hull(&difference_set(&g, &q).unwrap());
        let c = Constraint::new([1, 2, 4]);
        assert_eq!(constrained_dp_factor(&c, &q, &hull).unwrap(), f64::INFINITY);
        assert_eq!(constrained_dp_factor(&Constraint::new([3]), &q, &hull).unwrap(), 0.0);
        let c = Constraint::new([0, 1, 2]);
        let complete = PolicyGraph::complete(6).restrict(&c);
        let hull = sensitivity_hull(&difference_set(&complete, &q).unwrap());
        assert_eq!(constrained_dp_factor(&c, &q, &hull).unwrap(), 1.0);
    }

    #[test]
    fn audit_levels() {
        let hull = Polytope::from_points(
            2,
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, -1.0], vec![-1.0, 1.0]],
        )
        .unwrap();
        let diffs = vec![
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let eps = 0.3;
        let a = audit_blowfish_database(&diffs, &hull, eps).unwrap();
        assert_eq!(a.levels, vec![eps, 0.0, eps, 2.0 * eps, eps, 2.0 * eps]);
        assert_eq!(a.overall, 2.0 * eps);
    }

    #[test]
    fn deterministic_chain_releases_exactly() {
        let model = MarkovModel::new(3, vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let q = MeasurementQuery::from_answers(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = PolicyGraph::complete(3);
        let init = BeliefState::point_mass(3, 0, BeliefKind::Posterior, 0).unwrap();
        let cfg = MechanismConfig::new(1.0, MechanismKind::KNorm).unwrap();
        let mut s = ReleaseSession::new(&model, &q, &g, cfg, RepairStrategy::Greedy, init, 7).unwrap();
        for (k, state) in [1, 2, 0, 1].into_iter().enumerate() {
            let r = s.step(TrueState(state)).unwrap();
            assert!(r.answer.exact);
            assert_eq!(r.t, k + 1);
            assert_eq!(r.answer.z, q.answer(state));
        }
        assert!(s.ledger().records().iter().all(|r| r.exact));
        assert_eq!(s.ledger().total_epsilon(), 4.0);
    }

    #[test]
    fn inconsistent_true_state_is_rejected_without_side_effects() {
        let model = MarkovModel::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = MeasurementQuery::from_answers(vec![vec![0.0], vec![1.0]]).unwrap();
        let g = PolicyGraph::complete(2);
        let init = BeliefState::point_mass(2, 0, BeliefKind::Posterior, 0).unwrap();
        let cfg = MechanismConfig::new(1.0, MechanismKind::Laplace).unwrap();
        let mut s = ReleaseSession::new(&model, &q, &g, cfg, RepairStrategy::Greedy, init, 1).unwrap();
        assert!(matches!(
            s.step(TrueState(1)),
            Err(Error::ModelInconsistency { t: 1, state: 1 })
        ));
        assert!(s.ledger().is_empty());
        assert_eq!(s.timestamp(), 0);
    }
}
