// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dphmm::geometry::{self, difference_set, sensitivity_hull};
use dphmm::harness::{self, ExperimentConfig, MetricsFormat, PolicyChoice, RunOptions, WorldSpec};
use dphmm::mechanisms::{
    cross_polytope, knorm_density, knorm_noise, knorm_sample, l1_sensitivity, laplace_density, laplace_sample,
    MechanismConfig,
};
use dphmm::policy::build_policy;
use dphmm::protection::{candidate_areas, degree_of_protection, min_repair_2d};
use dphmm::release::{audit_blowfish_database, compose};
use dphmm::{Constraint, MechanismKind, PolicyGraph, Polytope, RepairStrategy};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn hull_of(graph: &PolicyGraph, constraint: Option<&Constraint>) -> Polytope {
    let q = running_query();
    let g = match constraint {
        Some(c) => graph.restrict(c),
        None => graph.clone(),
    };
    sensitivity_hull(&difference_set(&g, &q).unwrap())
}

fn criterion_1() -> Outcome {
    let q = running_query();
    let g = PolicyGraph::categorical(&categorical_labels());
    let c = Constraint::new([1, 2, 4]);
    let start = Instant::now();
    let diffs = difference_set(&g, &q).map_err(|e| e.to_string())?;
    let s_full = l1_sensitivity(&g, &q);
    let s_restricted = l1_sensitivity(&g.restrict(&c), &q);
    let elapsed = start.elapsed();
    let expected = vec![
        vec![-1.0, 1.0, -4.0, 4.0, -1.0, 1.0, 3.0, -3.0],
        vec![1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 0.0, 0.0],
    ];
    ensure(diffs.to_rows() == expected, format!("difference matrix {:?}", diffs.to_rows()))?;
    ensure(s_full == 5.0, format!("l1 sensitivity {s_full}"))?;
    ensure(s_restricted == 2.0, format!("restricted l1 sensitivity {s_restricted}"))?;
    ensure(elapsed < Duration::from_millis(1), format!("took {:.3} ms", ms(elapsed)))?;
    Ok(format!("8 columns exact, S_f = 5 and 2, {:.3} ms", ms(elapsed)))
}

fn criterion_2() -> Outcome {
    let q = running_query();
    let squares = PolicyGraph::new(6, [(3, 4), (4, 5), (3, 5)]).unwrap();
    let start = Instant::now();
    let c_a = Constraint::new([1, 3, 4, 5]);
    let dop_a = degree_of_protection(1, &hull_of(&squares, Some(&c_a)), &c_a, &q).map_err(|e| e.to_string())?;
    let c_b = Constraint::new([2, 3, 4, 5]);
    let dop_b = degree_of_protection(2, &hull_of(&squares, Some(&c_b)), &c_b, &q).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(dop_a == 3, format!("DoP(s2) = {dop_a}"))?;
    ensure(dop_b == 1, format!("DoP(s3) = {dop_b}"))?;
    ensure(elapsed < Duration::from_millis(1), format!("took {:.3} ms", ms(elapsed)))?;
    Ok(format!("DoP(s2) = 3, DoP(s3) = 1, {:.3} ms", ms(elapsed)))
}

fn criterion_3() -> Outcome {
    let q = running_query();
    let squares = PolicyGraph::new(6, [(3, 4), (4, 5), (3, 5)]).unwrap();
    let c = Constraint::new([2, 3, 4, 5]);
    // Warm the thread pool so the timing measures the algorithm.
    let _ = min_repair_2d(&squares, &c, &q);
    let start = Instant::now();
    let repaired = min_repair_2d(&squares, &c, &q).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let added = repaired.added_edges(&squares);
    ensure(added == vec![(2, 3)], format!("added edges {added:?}"))?;

    let areas = candidate_areas(&squares, &c, &q, 2).map_err(|e| e.to_string())?;
    let answers: Vec<P> = (0..6).map(|i| [q.answer(i)[0] as i64, q.answer(i)[1] as i64]).collect();
    let base_edges = [(3, 4), (4, 5), (3, 5)];
    for &(j, area) in &areas {
        let mut gens = Vec::new();
        for &(a, b) in base_edges.iter().chain([(2, j)].iter()) {
            let (fa, fb) = (answers[a], answers[b]);
            gens.push([fa[0] - fb[0], fa[1] - fb[1]]);
            gens.push([fb[0] - fa[0], fb[1] - fa[1]]);
        }
        let ring: Vec<[f64; 2]> = wrap_ccw(&gens).iter().map(|p| [p[0] as f64, p[1] as f64]).collect();
        let oracle = shoelace(&ring);
        ensure((area - oracle).abs() <= 1e-12, format!("candidate s3-s{}: {area} vs oracle {oracle}", j + 1))?;
    }
    let a: Vec<f64> = areas.iter().map(|&(_, a)| a).collect();
    ensure(
        areas.iter().map(|&(j, _)| j).collect::<Vec<_>>() == vec![3, 4, 5] && a[0] < a[1] && a[1] < a[2],
        format!("candidate areas {areas:?}"),
    )?;
    ensure(elapsed < Duration::from_millis(10), format!("took {:.3} ms", ms(elapsed)))?;
    Ok(format!(
        "edge {{s3,s4}}, areas {} < {} < {} (shoelace oracle), {:.3} ms",
        a[0],
        a[1],
        a[2],
        ms(elapsed)
    ))
}

fn criterion_4() -> Outcome {
    let q = running_query();
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.5, 1.0, 2.0, 3.7] {
        let num = laplace_density(q.answer(4), q.answer(4), 2.0, eps).map_err(|e| e.to_string())?;
        let den = laplace_density(q.answer(4), q.answer(2), 2.0, eps).map_err(|e| e.to_string())?;
        let expected = (1.5 * eps).exp();
        worst = worst.max(((num / den) - expected).abs() / expected);
    }
    ensure(worst <= 1e-12, format!("relative error {worst:e}"))?;
    Ok(format!("ratio = exp(1.5 eps) for 5 budgets, max relative error {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let hull = Polytope::from_points(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, -1.0], vec![-1.0, 1.0]])
        .map_err(|e| e.to_string())?;
    let diffs = vec![
        vec![1.0, 0.0],
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
    ];
    for eps in [0.25, 1.0, 1.7] {
        let audit = audit_blowfish_database(&diffs, &hull, eps).map_err(|e| e.to_string())?;
        let expected = vec![eps, 0.0, eps, 2.0 * eps, eps, 2.0 * eps];
        ensure(audit.levels == expected, format!("levels {:?} at eps {eps}", audit.levels))?;
        ensure(audit.overall == 2.0 * eps, format!("overall {}", audit.overall))?;
    }
    Ok("levels {e, 0, e, 2e, e, 2e}, overall 2e (exact)".into())
}

fn random_query(rng: &mut ChaCha8Rng, n: usize, range: i64) -> dphmm::MeasurementQuery {
    let answers = (0..n)
        .map(|_| vec![rng.random_range(-range..=range) as f64, rng.random_range(-range..=range) as f64])
        .collect();
    dphmm::MeasurementQuery::from_answers(answers).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> PolicyGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    PolicyGraph::new(n, edges).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s_f: f64 = rng.random_range(0.25..6.0);
        let eps: f64 = rng.random_range(0.1..3.0);
        let ball = cross_polytope(s_f, 2).map_err(|e| e.to_string())?;
        let x: [f64; 2] = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let z = [x[0] + rng.random_range(-8.0..8.0), x[1] + rng.random_range(-8.0..8.0)];
        let l = laplace_density(&z, &x, s_f, eps).map_err(|e| e.to_string())?;
        let k = knorm_density(&z, &x, &ball, eps).map_err(|e| e.to_string())?;
        worst = worst.max((l - k).abs() / l);
    }
    ensure(worst <= 1e-12, format!("laplace vs cross-polytope relative error {worst:e}"))?;

    let mut vertices_checked = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let q = random_query(&mut rng, n, 6);
        let g = random_graph(&mut rng, n, 0.4);
        let s_f = l1_sensitivity(&g, &q);
        let k = sensitivity_hull(&difference_set(&g, &q).unwrap());
        for v in k.vertices() {
            let l1 = v[0].abs() + v[1].abs();
            ensure(l1 <= s_f, format!("vertex {v:?} has l1 norm {l1} > {s_f}"))?;
            vertices_checked += 1;
        }
    }
    Ok(format!(
        "max relative density gap {worst:.1e} over 1e4 points; {vertices_checked} hull vertices within S_f"
    ))
}

/// Two-state histogram ratio test: returns (qualifying cells, max ratio / e^eps).
fn ratio_histogram(
    n: usize,
    eps: f64,
    mut sample: impl FnMut(usize, &mut ChaCha8Rng) -> Vec<f64>,
    density: impl Fn(&[f64], usize) -> f64,
) -> (usize, f64) {
    const W: f64 = 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts: HashMap<(i64, i64), [u32; 2]> = HashMap::new();
    for which in 0..2 {
        for _ in 0..n {
            let z = sample(which, &mut rng);
            let key = ((z[0] / W).floor() as i64, (z[1] / W).floor() as i64);
            counts.entry(key).or_default()[which] += 1;
        }
    }
    let mut cells = 0;
    let mut worst: f64 = 0.0;
    for (&(i, j), c) in &counts {
        let centre = [(i as f64 + 0.5) * W, (j as f64 + 0.5) * W];
        let expected = [0, 1].map(|w| density(&centre, w) * W * W * n as f64);
        if expected[0] < 500.0 || expected[1] < 500.0 {
            continue;
        }
        cells += 1;
        let r = (c[0] as f64 / c[1] as f64).max(c[1] as f64 / c[0] as f64);
        worst = worst.max(r / eps.exp());
    }
    (cells, worst)
}

fn criterion_7() -> Outcome {
    let q = running_query();
    let full = PolicyGraph::categorical(&categorical_labels());
    let k = hull_of(&full, None);
    let eps = 1.0;
    let d = k.intrinsic_dim();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut radii = Vec::with_capacity(100_000);
    let mut norms = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let noise = knorm_noise(&k, eps, &mut rng).map_err(|e| e.to_string())?;
        norms.push(k.k_norm(&noise.offset));
        radii.push(noise.radius);
    }
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    let ks_radius = ks_statistic(&mut radii, |x| gamma_cdf(d + 1, eps, x));
    let ks_norm = ks_statistic(&mut norms, |x| gamma_cdf(d, eps, x));
    ensure(ks_radius < 0.01, format!("KS of radial draw vs Gamma({}, {eps}) = {ks_radius:.4}", d + 1))?;
    ensure(ks_norm < 0.01, format!("KS of ||z - x||_K vs Gamma({d}, {eps}) = {ks_norm:.4}"))?;

    // K-norm: states s4 and s5 differ by the hull vertex (-4, -1).
    let (x1, x2) = (q.answer(3).to_vec(), q.answer(4).to_vec());
    let xs = [x1.clone(), x2.clone()];
    let (cells_k, worst_k) = ratio_histogram(
        1_000_000,
        eps,
        |w, rng| knorm_sample(&xs[w], &k, eps, rng).unwrap().z,
        |z, w| knorm_density(z, &xs[w], &k, eps).unwrap(),
    );
    // Laplace: the single edge {s2, s3} with S_f = 2 is tight for this pair.
    let single = PolicyGraph::new(6, [(1, 2)]).unwrap();
    let s_f = l1_sensitivity(&single, &q);
    let ys = [q.answer(1).to_vec(), q.answer(2).to_vec()];
    let (cells_l, worst_l) = ratio_histogram(
        1_000_000,
        eps,
        |w, rng| laplace_sample(&ys[w], s_f, eps, rng).unwrap().z,
        |z, w| laplace_density(z, &ys[w], s_f, eps).unwrap(),
    );
    ensure(cells_k > 0 && cells_l > 0, format!("no qualifying cells ({cells_k}, {cells_l})"))?;
    ensure(worst_k <= 1.15, format!("K-norm cell ratio {worst_k:.3} x e^eps"))?;
    ensure(worst_l <= 1.15, format!("Laplace cell ratio {worst_l:.3} x e^eps"))?;
    Ok(format!(
        "KS radial {ks_radius:.4}, KS ||z-x||_K vs Gamma({d}) {ks_norm:.4} (mean {mean_norm:.3}); \
         max cell ratio/e^eps: K-norm {worst_k:.3} over {cells_k} cells, Laplace {worst_l:.3} over {cells_l} cells"
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut probes = 0usize;
    for instance in 0..1000 {
        let range = if instance % 3 == 0 { 3 } else { 20 };
        let m = rng.random_range(1..=24);
        let symmetric = instance % 2 == 0;
        let mut pts: Vec<P> = Vec::with_capacity(m);
        while pts.len() < m {
            let p = [rng.random_range(-range..=range), rng.random_range(-range..=range)];
            pts.push(p);
            if symmetric && pts.len() < m {
                pts.push([-p[0], -p[1]]);
            }
        }
        let diffs = dphmm::DifferenceSet::from_columns(2, to_f64(&pts)).unwrap();
        let k = sensitivity_hull(&diffs);
        let mut got: Vec<P> = k.vertices().iter().map(|v| [v[0] as i64, v[1] as i64]).collect();
        got.sort();
        let want = hull_vertices_bruteforce(&pts);
        ensure(got == want, format!("instance {instance}: hull {got:?} vs oracle {want:?}"))?;
        for _ in 0..40 {
            let v = [rng.random_range(-range - 2..=range + 2), rng.random_range(-range - 2..=range + 2)];
            let lib = geometry::contains(&diffs, &[v[0] as f64, v[1] as f64]);
            ensure(
                lib == in_hull_bruteforce(&pts, v),
                format!("instance {instance}: containment of {v:?} disagrees"),
            )?;
            probes += 1;
        }
    }
    Ok(format!("1000 instances: hull vertex sets and {probes} containment probes match exactly"))
}

fn grid_config(policies: Vec<PolicyChoice>, epsilons: Vec<f64>, repair: RepairStrategy) -> ExperimentConfig {
    ExperimentConfig {
        world: WorldSpec::Grid { side: 8 },
        policies,
        epsilons,
        radii: vec![1.0],
        timesteps: 100,
        trajectories: 20,
        seed: 2024,
        repair,
        mechanism: MechanismKind::KNorm,
        deterministic_timing: true,
    }
}

fn criterion_9() -> Outcome {
    let mut steps = 0usize;
    let mut repaired_steps = 0usize;
    for (policy, repair) in [
        (PolicyChoice::Categorical, RepairStrategy::Greedy),
        (PolicyChoice::Categorical, RepairStrategy::Min2d),
        (PolicyChoice::Utility(Some(1.0)), RepairStrategy::Greedy),
        (PolicyChoice::Transition, RepairStrategy::Greedy),
    ] {
        let cfg = grid_config(vec![policy], vec![1.0], repair);
        let world = cfg.build_world().map_err(|e| e.to_string())?;
        let cell = cfg.cells()[0];
        let spec = cell.graph_spec(&world).map_err(|e| e.to_string())?;
        let graph = build_policy(&spec, Some(&world.query), Some(&world.model)).map_err(|e| e.to_string())?;
        let mech = MechanismConfig::new(1.0, MechanismKind::KNorm).unwrap();
        let opts = RunOptions {
            timesteps: 100,
            seed: cfg.seed,
            repair,
            deterministic_timing: true,
        };
        for id in 0..20 {
            let run = harness::run_trajectory(&world, &graph, mech, id, opts).map_err(|e| e.to_string())?;
            let again = harness::run_trajectory(&world, &graph, mech, id, opts).map_err(|e| e.to_string())?;
            ensure(run.records == again.records, format!("{policy}: trajectory {id} not reproducible"))?;
            ensure(run.ledger == again.ledger, format!("{policy}: ledger {id} not reproducible"))?;
            let mut sum = 0.0;
            for s in &run.steps {
                steps += 1;
                sum += s.answer.epsilon_spent;
                if !s.repaired_edges.is_empty() {
                    repaired_steps += 1;
                }
                if !s.answer.exact {
                    let min = s.protection.dop.values().copied().min().unwrap_or(0);
                    ensure(
                        s.protection.protectable && min >= 2,
                        format!("{policy}: t={} unprotected (min DoP {min})", s.t),
                    )?;
                }
                ensure(
                    s.posterior_support.iter().all(|&i| s.constraint.contains(i)),
                    format!("{policy}: posterior support escapes constraint at t={}", s.t),
                )?;
            }
            ensure(run.ledger.total_epsilon() == sum, "ledger total differs from the step sum")?;
            ensure(compose(&run.ledger).dphmm_total == sum, "composition total differs")?;
        }
    }
    let cfg = grid_config(
        vec![PolicyChoice::Categorical, PolicyChoice::Utility(Some(1.0))],
        vec![1.0],
        RepairStrategy::Greedy,
    );
    let world = cfg.build_world().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for round in 0..2 {
        let results = harness::run_experiment(&cfg, &world).map_err(|e| e.to_string())?;
        let mut all = Vec::new();
        for (k, r) in results.iter().enumerate() {
            let (rows, _) = r.outcome.as_ref().map_err(|e| e.clone())?;
            let path = dir.path().join(format!("run{round}_{k}.csv"));
            harness::write_metrics(rows, &path, MetricsFormat::Csv).map_err(|e| e.to_string())?;
            all.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        bytes.push(all);
    }
    ensure(bytes[0] == bytes[1], "same-seed metric files differ")?;
    Ok(format!(
        "{steps} steps over 4 configurations ({repaired_steps} repaired): protectable, posterior within constraint, \
         ledger sums exact, reruns byte-identical"
    ))
}

fn criterion_10() -> Outcome {
    let cfg = grid_config(
        vec![PolicyChoice::Transition, PolicyChoice::Utility(Some(1.0)), PolicyChoice::Complete],
        vec![0.5, 1.0, 2.0],
        RepairStrategy::Greedy,
    );
    let world = cfg.build_world().map_err(|e| e.to_string())?;
    let results = harness::run_experiment(&cfg, &world).map_err(|e| e.to_string())?;
    let mut by_label = HashMap::new();
    for r in &results {
        let (_, s) = r.outcome.as_ref().map_err(|e| format!("{}: {e}", r.cell.label()))?;
        by_label.insert(s.label.clone(), s.clone());
    }
    let get = |l: &str| by_label.get(l).cloned().ok_or(format!("missing cell {l}"));
    let trs = get("transition_eps1")?;
    let util = get("util-r1_eps1")?;
    let cplt = get("complete_eps1")?;
    ensure(
        trs.mean_dop >= util.mean_dop,
        format!("mean DoP transition {} < util {}", trs.mean_dop, util.mean_dop),
    )?;
    ensure(
        util.rms_error <= cplt.rms_error,
        format!("RMS util {} > complete {}", util.rms_error, cplt.rms_error),
    )?;
    for base in ["transition", "util-r1", "complete"] {
        let s: Vec<_> = ["0.5", "1", "2"]
            .iter()
            .map(|e| get(&format!("{base}_eps{e}")))
            .collect::<Result<_, _>>()?;
        ensure(
            s[0].rms_error > s[1].rms_error && s[1].rms_error > s[2].rms_error,
            format!(
                "{base}: RMS not strictly decreasing ({}, {}, {})",
                s[0].rms_error, s[1].rms_error, s[2].rms_error
            ),
        )?;
        ensure(
            s[0].mean_dop == s[1].mean_dop && s[1].mean_dop == s[2].mean_dop,
            format!("{base}: mean DoP varies with eps"),
        )?;
    }
    Ok(format!(
        "mean DoP trs {:.3} >= util(r=1) {:.3}; RMS util {:.3} <= complete {:.3}; RMS strictly decreasing and DoP \
         constant over eps in {{0.5, 1, 2}} for all three policies",
        trs.mean_dop, util.mean_dop, util.rms_error, cplt.rms_error
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("worked-example geometry", criterion_1),
        ("degree of protection", criterion_2),
        ("minimum-area repair", criterion_3),
        ("Laplace density ratio", criterion_4),
        ("database audit levels", criterion_5),
        ("Laplace as cross-polytope K-norm", criterion_6),
        ("sampler correctness", criterion_7),
        ("hull and containment oracles", criterion_8),
        ("release-loop invariants", criterion_9),
        ("sweep ordering properties", criterion_10),
    ];
    // Keep the output to the verdict lines.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

