// SPDX-License-Identifier: Apache-2.0

//! Reference data and independent oracles shared by the integration tests.
//! Nothing here calls into the library's geometry.

#![allow(dead_code)]

use dphmm::{MarkovModel, MeasurementQuery};

/// Answers of the six-state fixture, one column per state.
pub fn running_query() -> MeasurementQuery {
    MeasurementQuery::from_rows(vec![
        vec![1.0, 2.0, 3.0, 0.0, 4.0, 1.0],
        vec![0.0, 1.0, 0.0, 1.0, 2.0, 2.0],
    ])
    .unwrap()
}

/// Random walk over the fixture's neighbourhood structure.
pub fn running_walk() -> MarkovModel {
    let t = 1.0 / 3.0;
    MarkovModel::new(
        6,
        vec![
            vec![0.0, 0.5, 0.0, 0.5, 0.0, 0.0],
            vec![t, 0.0, t, 0.0, t, 0.0],
            vec![0.0, 0.5, 0.0, 0.0, 0.5, 0.0],
            vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.5],
            vec![0.0, t, t, 0.0, 0.0, t],
            vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.0],
        ],
    )
    .unwrap()
}

pub fn categorical_labels() -> Vec<usize> {
    vec![0, 1, 1, 2, 2, 2]
}

pub type P = [i64; 2];

pub fn orient(o: P, a: P, b: P) -> i128 {
    (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
}

fn on_segment(p: P, a: P, b: P) -> bool {
    orient(a, b, p) == 0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn in_triangle(p: P, a: P, b: P, c: P) -> bool {
    let d1 = orient(a, b, p);
    let d2 = orient(b, c, p);
    let d3 = orient(c, a, p);
    let neg = d1 < 0 || d2 < 0 || d3 < 0;
    let pos = d1 > 0 || d2 > 0 || d3 > 0;
    !(neg && pos)
}

/// Membership in the convex hull of `pts` by Carathéodory: `p` is in the
/// hull iff it equals a point, lies on a segment between two points, or
/// lies in a closed triangle of three points.
pub fn in_hull_bruteforce(pts: &[P], p: P) -> bool {
    let n = pts.len();
    if pts.contains(&p) {
        return true;
    }
    for i in 0..n {
        for j in i + 1..n {
            if on_segment(p, pts[i], pts[j]) {
                return true;
            }
            for k in j + 1..n {
                if orient(pts[i], pts[j], pts[k]) != 0 && in_triangle(p, pts[i], pts[j], pts[k]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Extreme points: distinct points not in the hull of the others.
pub fn hull_vertices_bruteforce(pts: &[P]) -> Vec<P> {
    let mut distinct: Vec<P> = Vec::new();
    for &p in pts {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    let mut out: Vec<P> = distinct
        .iter()
        .enumerate()
        .filter(|&(i, &p)| {
            let others: Vec<P> = distinct
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| q)
                .collect();
            !in_hull_bruteforce(&others, p)
        })
        .map(|(_, &p)| p)
        .collect();
    out.sort();
    out
}

/// Half of the shoelace sum over vertices in boundary order.
pub fn shoelace(vs: &[[f64; 2]]) -> f64 {
    let n = vs.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    s.abs() / 2.0
}

/// Hull of integer points by gift wrapping, counterclockwise; used only as an
/// ordering oracle for the shoelace formula.
pub fn wrap_ccw(pts: &[P]) -> Vec<P> {
    let verts = hull_vertices_bruteforce(pts);
    if verts.len() < 3 {
        return verts;
    }
    let c = [
        verts.iter().map(|v| v[0] as f64).sum::<f64>() / verts.len() as f64,
        verts.iter().map(|v| v[1] as f64).sum::<f64>() / verts.len() as f64,
    ];
    let mut v = verts;
    v.sort_by(|a, b| {
        let ta = (a[1] as f64 - c[1]).atan2(a[0] as f64 - c[0]);
        let tb = (b[1] as f64 - c[1]).atan2(b[0] as f64 - c[0]);
        ta.partial_cmp(&tb).unwrap()
    });
    v
}

/// CDF of `Gamma(k, rate)` for integer shape `k`.
pub fn gamma_cdf(k: usize, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = rate * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..k {
        term *= y / i as f64;
        sum += term;
    }
    1.0 - (-y).exp() * sum
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn to_f64(v: &[P]) -> Vec<Vec<f64>> {
    v.iter().map(|p| vec![p[0] as f64, p[1] as f64]).collect()
}
