// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dphmm::geometry::{difference_set, sensitivity_hull};
use dphmm::harness::{
    self, ExperimentConfig, MetricsFormat, PolicyChoice, RunOptions, World, WorldSpec,
};
use dphmm::io::{load_model, read_trajectories, LoadedModel};
use dphmm::mechanisms::{l1_sensitivity, MechanismConfig};
use dphmm::policy::{build_policy, Distance, GraphSpec};
use dphmm::protection::{protection_report, ProtectionReport};
use dphmm::{Constraint, MechanismKind, RepairStrategy};

#[derive(Parser)]
#[command(name = "dphmm", version, about = "Private release of query answers over a hidden Markov model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the difference vectors, hull vertices, area and ℓ1 sensitivity.
    Hull(HullArgs),
    /// Degree of protection of every state in a constraint.
    Audit(AuditArgs),
    /// Release noisy answers along recorded trajectories (JSON lines).
    Release(ReleaseArgs),
    /// Run a parameter sweep and write per-step metrics.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct PolicyArgs {
    /// Model JSON with `n_states`, `transition`, `query` and optionally `policy`.
    #[arg(long)]
    model: PathBuf,
    /// complete | categorical | util:<r> | transition; defaults to the model file's policy.
    #[arg(long, alias = "graph")]
    policy: Option<PolicyChoice>,
}

#[derive(Args)]
struct HullArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Restrict the graph to these states (comma-separated, 0-based).
    #[arg(long, value_delimiter = ',')]
    constraint: Option<Vec<usize>>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    constraint: Vec<usize>,
    /// Also report the edges a repair would add.
    #[arg(long)]
    repair: Option<RepairStrategy>,
}

#[derive(Args)]
struct ReleaseArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// CSV with columns trajectory_id,t,state_index.
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value = "knorm")]
    mechanism: MechanismKind,
    #[arg(long, default_value = "greedy")]
    repair: RepairStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of releases per trajectory; defaults to every recorded step.
    #[arg(long)]
    timesteps: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "model")]
    grid: Option<usize>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth trajectories for --model (sampled from the model otherwise).
    #[arg(long, requires = "model")]
    trajectories_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    policy: Option<Vec<PolicyChoice>>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    radius: Option<Vec<f64>>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repair: Option<RepairStrategy>,
    #[arg(long)]
    mechanism: Option<MechanismKind>,
    /// Write zero runtimes so repeated runs produce identical files.
    #[arg(long)]
    deterministic: bool,
    /// Metrics file. With several sweep cells, one file per cell is written
    /// as `<stem>.<cell>.<ext>` next to a `<stem>.summary.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<MetricsFormat>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Hull(a) => hull(a),
        Command::Audit(a) => audit(a),
        Command::Release(a) => release(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn load(path: &Path) -> Result<(LoadedModel, dphmm::MeasurementQuery)> {
    let loaded = load_model(path)?;
    let query = loaded
        .query
        .clone()
        .with_context(|| format!("{} has no `query` field", path.display()))?;
    Ok((loaded, query))
}

fn resolve_spec(choice: Option<PolicyChoice>, loaded: &LoadedModel) -> Result<GraphSpec<f64>> {
    let file_categories = match &loaded.policy {
        Some(GraphSpec::Categorical { categories }) => Some(categories.clone()),
        _ => None,
    };
    Ok(match choice {
        None => loaded.policy.clone().unwrap_or(GraphSpec::Complete),
        Some(PolicyChoice::Complete) => GraphSpec::Complete,
        Some(PolicyChoice::Transition) => GraphSpec::Transition,
        Some(PolicyChoice::Utility(Some(radius))) => GraphSpec::Utility {
            radius,
            distance: Distance::L2,
        },
        Some(PolicyChoice::Utility(None)) => bail!("give the utility radius as util:<r>"),
        Some(PolicyChoice::Categorical) => GraphSpec::Categorical {
            categories: file_categories.context("categorical policy needs `categories` in the model file")?,
        },
    })
}

fn write_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct HullOutput {
    policy: String,
    edges: Vec<(usize, usize)>,
    /// `d × 2m` matrix of difference columns.
    differences: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    intrinsic_dim: usize,
    area: Option<f64>,
    l1_sensitivity: f64,
}

fn hull(a: HullArgs) -> Result<()> {
    let (loaded, query) = load(&a.policy.model)?;
    let spec = resolve_spec(a.policy.policy, &loaded)?;
    let mut graph = build_policy(&spec, Some(&query), Some(&loaded.model))?;
    if let Some(c) = a.constraint {
        check_states(&c, query.n_states())?;
        graph = graph.restrict(&Constraint::new(c));
    }
    let diffs = difference_set(&graph, &query)?;
    let k = sensitivity_hull(&diffs);
    write_json(&HullOutput {
        policy: spec.kind().to_string(),
        edges: graph.edges().collect(),
        differences: diffs.to_rows(),
        vertices: k.vertices().to_vec(),
        intrinsic_dim: k.intrinsic_dim(),
        area: k.measure().ok(),
        l1_sensitivity: l1_sensitivity(&graph, &query),
    })
}

#[derive(Serialize)]
struct AuditOutput {
    constraint: Vec<usize>,
    #[serde(flatten)]
    report: ProtectionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    repaired_edges: Option<Vec<(usize, usize)>>,
}

fn audit(a: AuditArgs) -> Result<()> {
    let (loaded, query) = load(&a.policy.model)?;
    let spec = resolve_spec(a.policy.policy, &loaded)?;
    check_states(&a.constraint, query.n_states())?;
    let constraint = Constraint::new(a.constraint);
    let graph = build_policy(&spec, Some(&query), Some(&loaded.model))?.restrict(&constraint);
    let report = protection_report(&graph, &constraint, &query)?;
    let repaired_edges = match a.repair {
        Some(s) if !report.protectable => Some(s.repair(&graph, &constraint, &query)?.added_edges(&graph)),
        Some(_) => Some(Vec::new()),
        None => None,
    };
    write_json(&AuditOutput {
        constraint: constraint.states().to_vec(),
        report,
        repaired_edges,
    })
}

fn release(a: ReleaseArgs) -> Result<()> {
    let (loaded, query) = load(&a.policy.model)?;
    let spec = resolve_spec(a.policy.policy, &loaded)?;
    let graph = build_policy(&spec, Some(&query), Some(&loaded.model))?;
    let trajectories = read_trajectories(&a.trajectories, loaded.model.n_states())?;
    let world = World {
        model: loaded.model,
        query,
        trajectories,
        categories: None,
    };
    let config = MechanismConfig::new(a.epsilon, a.mechanism)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for (id, traj) in world.trajectories.iter().enumerate() {
        let available = traj.len().saturating_sub(1);
        let timesteps = a.timesteps.unwrap_or(available);
        if timesteps == 0 {
            continue;
        }
        let opts = RunOptions {
            timesteps,
            seed: a.seed,
            repair: a.repair,
            deterministic_timing: true,
        };
        let run = harness::run_trajectory(&world, &graph, config, id, opts)
            .with_context(|| format!("trajectory {id}"))?;
        for r in &run.records {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(side) = a.grid {
        cfg.world = WorldSpec::Grid { side };
    }
    if let Some(path) = a.model {
        cfg.world = WorldSpec::Model {
            path,
            trajectories: a.trajectories_file,
        };
    }
    if let Some(p) = a.policy {
        cfg.policies = p;
    }
    if let Some(e) = a.epsilon {
        cfg.epsilons = e;
    }
    if let Some(r) = a.radius {
        cfg.radii = r;
    }
    if let Some(t) = a.timesteps {
        cfg.timesteps = t;
    }
    if let Some(n) = a.trajectories {
        cfg.trajectories = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.repair {
        cfg.repair = r;
    }
    if let Some(m) = a.mechanism {
        cfg.mechanism = m;
    }
    cfg.deterministic_timing |= a.deterministic;
    let format = a.format.unwrap_or_else(|| match a.out.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => MetricsFormat::Jsonl,
        _ => MetricsFormat::Csv,
    });

    let world = cfg.build_world()?;
    let results = harness::run_experiment(&cfg, &world)?;
    let single = results.len() == 1;
    let mut summaries = Vec::new();
    let mut failures = 0;
    for r in &results {
        match &r.outcome {
            Ok((rows, summary)) => {
                let path = if single { a.out.clone() } else { cell_path(&a.out, &summary.label, format) };
                harness::write_metrics(rows, &path, format)?;
                println!(
                    "{:<28} mean_dop={:<10.4} rms_error={:<10.4} mean_runtime_ms={:.4}  -> {}",
                    summary.label,
                    summary.mean_dop,
                    summary.rms_error,
                    summary.mean_runtime_ms,
                    path.display()
                );
                summaries.push(serde_json::to_value(summary)?);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", r.cell.label());
                summaries.push(serde_json::json!({ "label": r.cell.label(), "cell": r.cell, "error": e }));
            }
        }
    }
    if !single {
        let path = a.out.with_extension("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summaries)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if failures == results.len() {
        bail!("every sweep cell failed");
    }
    Ok(())
}

fn cell_path(out: &Path, label: &str, format: MetricsFormat) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    out.with_file_name(format!("{stem}.{label}.{}", format.extension()))
}

fn check_states(states: &[usize], n: usize) -> Result<()> {
    if let Some(&s) = states.iter().find(|&&s| s >= n) {
        bail!("state {s} out of range for {n} states");
    }
    Ok(())
}
