// SPDX-License-Identifier: Apache-2.0

//! Differentially private release of per-timestep query answers over a
//! hidden Markov model.
//!
//! Modules, lowest layer first:
//!
//! * [`markov`]: transition model and belief updates.
//! * [`policy`]: policy graphs and their restriction to a constraint set.
//! * [`geometry`]: difference sets, sensitivity hulls and Minkowski norms.
//! * [`protection`]: degree of protection and graph repair.
//! * [`mechanisms`]: K-norm and Laplace samplers with their densities.
//! * [`release`]: the per-timestep release loop and privacy accounting.
//! * [`harness`]: synthetic grid worlds, sweeps and metric files.
//!
//! All numeric code is generic over [`Scalar`] (implemented for `f32` and
//! `f64`). Planar hull predicates additionally run on exact integer lattices
//! whenever the inputs are dyadic. The aliases below fix the scalar to
//! `f64`, as used by the CLI and the experiment harness.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod markov;
pub mod mechanisms;
pub mod policy;
pub mod protection;
pub mod release;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MarkovModel = markov::MarkovModel<f64>;
pub type BeliefState = markov::BeliefState<f64>;
pub type MeasurementQuery = geometry::MeasurementQuery<f64>;
pub type DifferenceSet = geometry::DifferenceSet<f64>;
pub type Polytope = geometry::Polytope<f64>;
pub type GraphSpec = policy::GraphSpec<f64>;
pub type NoisyAnswer = mechanisms::NoisyAnswer<f64>;
pub type MechanismConfig = mechanisms::MechanismConfig<f64>;
pub type PrivacyLedger = release::PrivacyLedger<f64>;
pub type AuditResult = release::AuditResult<f64>;
pub type ReleaseSession<'a> = release::ReleaseSession<'a, f64>;

pub type MarkovModelF32 = markov::MarkovModel<f32>;
pub type MeasurementQueryF32 = geometry::MeasurementQuery<f32>;
pub type PolytopeF32 = geometry::Polytope<f32>;

pub use markov::{BeliefKind, Constraint, TrueState};
pub use mechanisms::MechanismKind;
pub use policy::{Distance, PolicyGraph};
pub use protection::{ProtectionReport, RepairStrategy};
