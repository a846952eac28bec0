// SPDX-License-Identifier: Apache-2.0

//! Synthetic worlds, parameter sweeps and metric files.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::MeasurementQuery;
use crate::io;
use crate::markov::{BeliefKind, BeliefState, MarkovModel, TrueState};
use crate::mechanisms::{MechanismConfig, MechanismKind};
use crate::policy::{build_policy, Categories, Distance, GraphSpec, PolicyGraph};
use crate::protection::RepairStrategy;
use crate::release::{PrivacyLedger, ReleaseSession, StepReport};
use crate::scalar::dist2;

/// Model, query and ground-truth trajectories for an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub model: MarkovModel<f64>,
    pub query: MeasurementQuery<f64>,
    pub trajectories: Vec<Vec<usize>>,
    /// Category labels used when a categorical policy is requested.
    pub categories: Option<Categories>,
}

/// `side × side` grid with a uniform random walk over 4-neighbours.
///
/// State `y · side + x` answers with its cell centre `(x + 0.5, y + 0.5)`.
/// Each trajectory has `length + 1` states (`t = 0..=length`) and starts
/// from a uniformly random cell. Categories are 2×2 blocks.
pub fn generate_grid_world(side: usize, n_trajectories: usize, length: usize, seed: u64) -> Result<World> {
    if side < 2 {
        return Err(Error::InvalidParameter(format!("grid side must be at least 2, got {side}")));
    }
    let n = side * side;
    let mut rows = vec![vec![0.0; n]; n];
    let mut answers = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let blocks = side.div_ceil(2);
    for y in 0..side {
        for x in 0..side {
            let i = y * side + x;
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(i - 1);
            }
            if x + 1 < side {
                nbrs.push(i + 1);
            }
            if y > 0 {
                nbrs.push(i - side);
            }
            if y + 1 < side {
                nbrs.push(i + side);
            }
            let p = 1.0 / nbrs.len() as f64;
            for j in nbrs {
                rows[i][j] = p;
            }
            answers.push(vec![x as f64 + 0.5, y as f64 + 0.5]);
            labels.push((y / 2) * blocks + x / 2);
        }
    }
    let model = MarkovModel::new(n, rows)?;
    let query = MeasurementQuery::from_answers(answers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..n_trajectories)
        .map(|_| sample_trajectory(&model, rng.random_range(0..n), length, &mut rng))
        .collect();
    Ok(World {
        model,
        query,
        trajectories,
        categories: Some(Categories::Labels(labels)),
    })
}

/// Walks `length` steps from `start`.
pub fn sample_trajectory<R: Rng + ?Sized>(model: &MarkovModel<f64>, start: usize, length: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(length + 1);
    path.push(start);
    let mut s = start;
    for _ in 0..length {
        let u: f64 = rng.random();
        let row = model.row(s);
        let mut acc = 0.0;
        let mut next = None;
        for (j, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            next = Some(j);
            if u < acc {
                break;
            }
        }
        s = next.expect("rows have positive mass");
        path.push(s);
    }
    path
}

/// Policy family requested on the command line or in a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyChoice {
    Complete,
    Categorical,
    /// Utility graph; without a radius the sweep's radius list is used.
    Utility(Option<f64>),
    Transition,
}

impl FromStr for PolicyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "complete" => return Ok(PolicyChoice::Complete),
            "categorical" => return Ok(PolicyChoice::Categorical),
            "transition" => return Ok(PolicyChoice::Transition),
            "util" | "utility" => return Ok(PolicyChoice::Utility(None)),
            _ => {}
        }
        if let Some(r) = s.strip_prefix("util:").or_else(|| s.strip_prefix("utility:")) {
            let r: f64 = r
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad utility radius `{r}`")))?;
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameter(format!("utility radius must be positive, got {r}")));
            }
            return Ok(PolicyChoice::Utility(Some(r)));
        }
        Err(Error::InvalidParameter(format!("unknown policy `{s}`")))
    }
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyChoice::Complete => f.write_str("complete"),
            PolicyChoice::Categorical => f.write_str("categorical"),
            PolicyChoice::Utility(None) => f.write_str("util"),
            PolicyChoice::Utility(Some(r)) => write!(f, "util:{r}"),
            PolicyChoice::Transition => f.write_str("transition"),
        }
    }
}

impl Serialize for PolicyChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicyChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldSpec {
    Grid {
        side: usize,
    },
    Model {
        path: PathBuf,
        /// Ground-truth trajectories; sampled from the model when absent.
        #[serde(default)]
        trajectories: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub policies: Vec<PolicyChoice>,
    pub epsilons: Vec<f64>,
    pub radii: Vec<f64>,
    pub timesteps: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub repair: RepairStrategy,
    pub mechanism: MechanismKind,
    /// Report zero step runtimes so that repeated runs are byte-identical.
    pub deterministic_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::Grid { side: 8 },
            policies: vec![PolicyChoice::Complete],
            epsilons: vec![1.0],
            radii: vec![1.0],
            timesteps: 100,
            trajectories: 20,
            seed: 0,
            repair: RepairStrategy::Greedy,
            mechanism: MechanismKind::KNorm,
            deterministic_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::InvalidParameter("timesteps must be at least 1".into()));
        }
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("trajectory count must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::EmptyInput("policy list"));
        }
        if self.epsilons.is_empty() {
            return Err(Error::EmptyInput("epsilon list"));
        }
        for &v in self.epsilons.iter().chain(&self.radii) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("sweep values must be positive, got {v}")));
            }
        }
        if self
            .policies
            .iter()
            .any(|p| *p == PolicyChoice::Utility(None))
            && self.radii.is_empty()
        {
            return Err(Error::EmptyInput("radius list"));
        }
        Ok(())
    }

    /// Generates or loads the world described by the config.
    pub fn build_world(&self) -> Result<World> {
        self.validate()?;
        match &self.world {
            WorldSpec::Grid { side } => generate_grid_world(*side, self.trajectories, self.timesteps, self.seed),
            WorldSpec::Model { path, trajectories } => {
                let loaded = io::load_model(path)?;
                let query = loaded.query.ok_or_else(|| Error::InvalidParameter(format!(
                    "{} has no `query`; experiments need answers per state",
                    path.display()
                )))?;
                let categories = match loaded.policy {
                    Some(GraphSpec::Categorical { categories }) => Some(categories),
                    _ => None,
                };
                let trajectories = match trajectories {
                    Some(p) => io::read_trajectories(p, loaded.model.n_states())?,
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                        let n = loaded.model.n_states();
                        (0..self.trajectories)
                            .map(|_| sample_trajectory(&loaded.model, rng.random_range(0..n), self.timesteps, &mut rng))
                            .collect()
                    }
                };
                Ok(World {
                    model: loaded.model,
                    query,
                    trajectories,
                    categories,
                })
            }
        }
    }

    /// Sweep cells in canonical order: policy, then radius (utility only),
    /// then ε.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for &policy in &self.policies {
            let radii: Vec<Option<f64>> = match policy {
                PolicyChoice::Utility(Some(r)) => vec![Some(r)],
                PolicyChoice::Utility(None) => self.radii.iter().map(|&r| Some(r)).collect(),
                _ => vec![None],
            };
            for radius in radii {
                for &epsilon in &self.epsilons {
                    cells.push(CellSpec { policy, radius, epsilon });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub policy: PolicyChoice,
    pub radius: Option<f64>,
    pub epsilon: f64,
}

impl CellSpec {
    /// File-name friendly identifier, e.g. `util-r1.5_eps0.5`.
    pub fn label(&self) -> String {
        let base = match self.policy {
            PolicyChoice::Complete => "complete".to_string(),
            PolicyChoice::Categorical => "categorical".to_string(),
            PolicyChoice::Transition => "transition".to_string(),
            PolicyChoice::Utility(_) => format!("util-r{}", self.radius.unwrap_or(f64::NAN)),
        };
        format!("{base}_eps{}", self.epsilon)
    }

    pub fn graph_spec(&self, world: &World) -> Result<GraphSpec<f64>> {
        Ok(match self.policy {
            PolicyChoice::Complete => GraphSpec::Complete,
            PolicyChoice::Transition => GraphSpec::Transition,
            PolicyChoice::Utility(_) => GraphSpec::Utility {
                radius: self.radius.ok_or(Error::EmptyInput("utility radius"))?,
                distance: Distance::L2,
            },
            PolicyChoice::Categorical => GraphSpec::Categorical {
                categories: world.categories.clone().ok_or(Error::MissingInput {
                    kind: "categorical",
                    missing: "category labels",
                })?,
            },
        })
    }
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn fmt_sig9(x: f64) -> String {
    format!("{}", round_sig9(x))
}

fn ser_float<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.collect_str(x)
    }
}

fn de_float<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(x) => Ok(x),
        Num::S(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

/// One released step, with floats already rounded to 9 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub trajectory: usize,
    pub t: usize,
    pub dop: usize,
    pub error: f64,
    pub epsilon: f64,
    /// `+∞` serialises as the string `"inf"` in JSON.
    #[serde(serialize_with = "ser_float", deserialize_with = "de_float")]
    pub factor: f64,
    pub runtime_ms: f64,
}

/// Per-step JSON-lines record of the `release` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub trajectory: usize,
    pub t: usize,
    pub z: Vec<f64>,
    pub dop_true_state: usize,
    pub error_l2: f64,
    pub epsilon_spent: f64,
    #[serde(serialize_with = "ser_float", deserialize_with = "de_float")]
    pub factor: f64,
    pub repaired_edges: Vec<(usize, usize)>,
    pub exact: bool,
}

/// Rows, step reports and the ledger of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub rows: Vec<MetricsRow>,
    pub records: Vec<ReleaseRecord>,
    pub steps: Vec<StepReport<f64>>,
    pub ledger: PrivacyLedger<f64>,
}

/// Session seed for a trajectory; depends only on the base seed and the id
/// so that cells of a sweep are paired.
pub fn session_seed(seed: u64, trajectory: usize) -> u64 {
    let mut z = seed ^ (trajectory as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub timesteps: usize,
    pub seed: u64,
    pub repair: RepairStrategy,
    pub deterministic_timing: bool,
}

/// Releases `timesteps` answers along `world.trajectories[id]`, starting
/// from a point-mass belief on its first state.
pub fn run_trajectory(
    world: &World,
    graph: &PolicyGraph,
    config: MechanismConfig<f64>,
    id: usize,
    opts: RunOptions,
) -> Result<TrajectoryRun> {
    let traj = world
        .trajectories
        .get(id)
        .ok_or_else(|| Error::InvalidParameter(format!("no trajectory {id}")))?;
    if traj.len() < opts.timesteps + 1 {
        return Err(Error::InvalidParameter(format!(
            "trajectory {id} has {} states, {} needed",
            traj.len(),
            opts.timesteps + 1
        )));
    }
    let init = BeliefState::point_mass(world.model.n_states(), traj[0], BeliefKind::Posterior, 0)?;
    let mut session = ReleaseSession::new(
        &world.model,
        &world.query,
        graph,
        config,
        opts.repair,
        init,
        session_seed(opts.seed, id),
    )?;
    let mut rows = Vec::with_capacity(opts.timesteps);
    let mut records = Vec::with_capacity(opts.timesteps);
    let mut steps = Vec::with_capacity(opts.timesteps);
    for &state in &traj[1..=opts.timesteps] {
        let start = Instant::now();
        let step = session.step(TrueState(state))?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let error = dist2(&step.answer.z, world.query.answer(state));
        rows.push(MetricsRow {
            trajectory: id,
            t: step.t,
            dop: step.dop_true_state,
            error: round_sig9(error),
            epsilon: round_sig9(step.answer.epsilon_spent),
            factor: round_sig9(step.factor),
            runtime_ms: if opts.deterministic_timing { 0.0 } else { round_sig9(elapsed) },
        });
        records.push(ReleaseRecord {
            trajectory: id,
            t: step.t,
            z: step.answer.z.clone(),
            dop_true_state: step.dop_true_state,
            error_l2: error,
            epsilon_spent: step.answer.epsilon_spent,
            factor: step.factor,
            repaired_edges: step.repaired_edges.clone(),
            exact: step.answer.exact,
        });
        steps.push(step);
    }
    Ok(TrajectoryRun {
        rows,
        records,
        steps,
        ledger: session.into_ledger(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub cell: CellSpec,
    pub rows: usize,
    pub mean_dop: f64,
    pub rms_error: f64,
    pub mean_runtime_ms: f64,
    /// Per-timestep means over trajectories, smoothed by a centred moving
    /// average of width 5.
    pub smoothed_dop: Vec<f64>,
    pub smoothed_error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: CellSpec,
    /// Session errors abort the cell only.
    pub outcome: std::result::Result<(Vec<MetricsRow>, CellSummary), String>,
}

/// Runs every sweep cell, trajectories in parallel within a cell.
pub fn run_experiment(config: &ExperimentConfig, world: &World) -> Result<Vec<CellResult>> {
    config.validate()?;
    if world.trajectories.len() < config.trajectories {
        return Err(Error::InvalidParameter(format!(
            "{} trajectories requested, {} available",
            config.trajectories,
            world.trajectories.len()
        )));
    }
    let opts = RunOptions {
        timesteps: config.timesteps,
        seed: config.seed,
        repair: config.repair,
        deterministic_timing: config.deterministic_timing,
    };
    Ok(config
        .cells()
        .into_iter()
        .map(|cell| CellResult {
            cell,
            outcome: run_cell(&cell, config, world, opts).map_err(|e| e.to_string()),
        })
        .collect())
}

fn run_cell(
    cell: &CellSpec,
    config: &ExperimentConfig,
    world: &World,
    opts: RunOptions,
) -> Result<(Vec<MetricsRow>, CellSummary)> {
    let spec = cell.graph_spec(world)?;
    let graph = build_policy(&spec, Some(&world.query), Some(&world.model))?;
    let mech = MechanismConfig::new(cell.epsilon, config.mechanism)?;
    let runs: Vec<TrajectoryRun> = (0..config.trajectories)
        .into_par_iter()
        .map(|id| run_trajectory(world, &graph, mech, id, opts))
        .collect::<Result<_>>()?;
    let rows: Vec<MetricsRow> = runs.into_iter().flat_map(|r| r.rows).collect();
    let summary = summarize(cell, &rows);
    Ok((rows, summary))
}

/// Aggregates of a cell's rows.
pub fn summarize(cell: &CellSpec, rows: &[MetricsRow]) -> CellSummary {
    let n = rows.len().max(1) as f64;
    let mean_dop = rows.iter().map(|r| r.dop as f64).sum::<f64>() / n;
    let rms_error = (rows.iter().map(|r| r.error * r.error).sum::<f64>() / n).sqrt();
    let mean_runtime_ms = rows.iter().map(|r| r.runtime_ms).sum::<f64>() / n;
    let t_max = rows.iter().map(|r| r.t).max().unwrap_or(0);
    let mut dop_t = vec![(0.0, 0usize); t_max];
    let mut err_t = vec![0.0; t_max];
    for r in rows {
        let k = r.t - 1;
        dop_t[k].0 += r.dop as f64;
        dop_t[k].1 += 1;
        err_t[k] += r.error;
    }
    let dop_means: Vec<f64> = dop_t.iter().map(|&(s, c)| s / c.max(1) as f64).collect();
    let err_means: Vec<f64> = err_t
        .iter()
        .zip(&dop_t)
        .map(|(&s, &(_, c))| s / c.max(1) as f64)
        .collect();
    CellSummary {
        label: cell.label(),
        cell: *cell,
        rows: rows.len(),
        mean_dop,
        rms_error,
        mean_runtime_ms,
        smoothed_dop: moving_average(&dop_means, 5),
        smoothed_error: moving_average(&err_means, 5),
    }
}

/// Centred moving average; the window shrinks at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricsFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for MetricsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MetricsFormat::Csv),
            "jsonl" => Ok(MetricsFormat::Jsonl),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

impl MetricsFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MetricsFormat::Csv => "csv",
            MetricsFormat::Jsonl => "jsonl",
        }
    }
}

pub const METRICS_HEADER: [&str; 7] = ["trajectory", "t", "dop", "error", "epsilon", "factor", "runtime_ms"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows sorted by `(trajectory, t)`.
pub fn write_metrics(rows: &[MetricsRow], path: &Path, format: MetricsFormat) -> Result<()> {
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.trajectory, r.t));
    match format {
        MetricsFormat::Csv => {
            let csv_err = |source| Error::Csv {
                path: path.to_path_buf(),
                source,
            };
            let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
            w.write_record(METRICS_HEADER).map_err(csv_err)?;
            for r in sorted {
                w.write_record([
                    r.trajectory.to_string(),
                    r.t.to_string(),
                    r.dop.to_string(),
                    fmt_sig9(r.error),
                    fmt_sig9(r.epsilon),
                    fmt_sig9(r.factor),
                    fmt_sig9(r.runtime_ms),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io_err(path))
        }
        MetricsFormat::Jsonl => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            for r in sorted {
                let rounded = MetricsRow {
                    error: round_sig9(r.error),
                    epsilon: round_sig9(r.epsilon),
                    factor: round_sig9(r.factor),
                    runtime_ms: round_sig9(r.runtime_ms),
                    ..r.clone()
                };
                let line = serde_json::to_string(&rounded).map_err(|source| Error::Json {
                    path: path.to_path_buf(),
                    source,
                })?;
                writeln!(w, "{line}").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
    }
}

pub fn read_metrics(path: &Path, format: MetricsFormat) -> Result<Vec<MetricsRow>> {
    match format {
        MetricsFormat::Csv => {
            let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
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
            if headers.iter().ne(METRICS_HEADER) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("expected header `{}`", METRICS_HEADER.join(",")),
                });
            }
            reader
                .records()
                .enumerate()
                .map(|(k, rec)| {
                    let line = k + 2;
                    let parse_err = |message: String| Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message,
                    };
                    let rec = rec.map_err(|e| parse_err(e.to_string()))?;
                    let field = |i: usize| rec.get(i).ok_or_else(|| parse_err(format!("missing column {i}")));
                    let int = |i: usize| -> Result<usize> { field(i)?.parse().map_err(|e| parse_err(format!("{e}"))) };
                    let float = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| parse_err(format!("{e}"))) };
                    Ok(MetricsRow {
                        trajectory: int(0)?,
                        t: int(1)?,
                        dop: int(2)?,
                        error: float(3)?,
                        epsilon: float(4)?,
                        factor: float(5)?,
                        runtime_ms: float(6)?,
                    })
                })
                .collect()
        }
        MetricsFormat::Jsonl => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            BufReader::new(file)
                .lines()
                .enumerate()
                .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
                .map(|(k, line)| {
                    let line_text = line.map_err(io_err(path))?;
                    serde_json::from_str(&line_text).map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        line: k + 1,
                        message: e.to_string(),
                    })
                })
                .collect()
        }
    }
}
