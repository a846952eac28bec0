// SPDX-License-Identifier: Apache-2.0

//! Model and trajectory files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MeasurementQuery;
use crate::markov::MarkovModel;
use crate::policy::GraphSpec;

/// On-disk model: the transition matrix, optionally with the query
/// (`d × N` rows) and a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub transition: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<GraphSpec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: MarkovModel<f64>,
    pub query: Option<MeasurementQuery<f64>>,
    pub policy: Option<GraphSpec<f64>>,
}

impl ModelFile {
    pub fn validate(self) -> Result<LoadedModel> {
        let model = MarkovModel::new(self.n_states, self.transition)?;
        let query = self.query.map(MeasurementQuery::from_rows).transpose()?;
        if let Some(q) = &query {
            if q.n_states() != model.n_states() {
                return Err(Error::DimensionMismatch {
                    what: "query columns",
                    expected: model.n_states(),
                    found: q.n_states(),
                });
            }
        }
        Ok(LoadedModel {
            model,
            query,
            policy: self.policy,
        })
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    file.validate()
}

#[derive(Debug, Deserialize, Serialize)]
struct TrajectoryRow {
    trajectory_id: usize,
    t: usize,
    state_index: usize,
}

/// Reads `trajectory_id,t,state_index` rows. Trajectories come back in
/// ascending id order; each must cover `t = 0, 1, …` without gaps.
pub fn read_trajectories(path: &Path, n_states: usize) -> Result<Vec<Vec<usize>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["trajectory_id", "t", "state_index"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `trajectory_id,t,state_index`".into(),
        });
    }
    let mut by_id: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (k, record) in reader.deserialize::<TrajectoryRow>().enumerate() {
        let line = k + 2;
        let row = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if row.state_index >= n_states {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("state {} out of range for {n_states} states", row.state_index),
            });
        }
        if by_id.entry(row.trajectory_id).or_default().insert(row.t, row.state_index).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate step t={} in trajectory {}", row.t, row.trajectory_id),
            });
        }
    }
    by_id
        .into_iter()
        .map(|(id, steps)| {
            if steps.keys().copied().ne(0..steps.len()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("trajectory {id} does not cover t = 0..{}", steps.len()),
                });
            }
            Ok(steps.into_values().collect())
        })
        .collect()
}

pub fn write_trajectories(path: &Path, trajectories: &[Vec<usize>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, &s) in traj.iter().enumerate() {
            w.serialize(TrajectoryRow {
                trajectory_id: id,
                t,
                state_index: s,
            })
            .map_err(csv_err)?;
        }
    }
    if trajectories.iter().all(|t| t.is_empty()) {
        w.write_record(["trajectory_id", "t", "state_index"]).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
