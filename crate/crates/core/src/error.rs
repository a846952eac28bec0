// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid Markov model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("observation has zero likelihood under every state in the constraint")]
    ImpossibleObservation,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("state index {index} out of range for {n_states} states")]
    StateOutOfRange { index: usize, n_states: usize },

    #[error("policy kind `{kind}` requires {missing}")]
    MissingInput {
        kind: &'static str,
        missing: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state {state} is not in the constraint")]
    NotInConstraint { state: usize },

    #[error("state {state} cannot be protected: the constraint has no other state")]
    CannotProtect { state: usize },

    #[error("unsupported dimension: ambient {dim}, intrinsic {intrinsic_dim}")]
    UnsupportedDimension { dim: usize, intrinsic_dim: usize },

    #[error("model inconsistency at t={t}: true state {state} has zero prior probability")]
    ModelInconsistency { t: usize, state: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
