// SPDX-License-Identifier: Apache-2.0

//! Simplex-constrained least squares
//!
//! ```text
//! min ½‖G x − v‖²   subject to   1ᵀx = 1,  x ≥ 0
//! ```
//!
//! solved with Wolfe's minimum-norm-point method: a conditional-gradient
//! step picks the generator that most decreases the objective, then the
//! weights are fully re-optimised on the affine hull of the active set
//! ("corral"). The active set never exceeds `d + 1` points, so each
//! corrective solve is a tiny dense system. Unlike plain Frank-Wolfe the
//! method terminates with a residual at round-off level for targets on the
//! hull boundary.

use crate::scalar::{dot, Scalar};

/// Iteration cap for the major (conditional-gradient) loop.
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HullProjection<T> {
    /// Convex weights over the input points.
    pub weights: Vec<T>,
    /// `‖G x − v‖₂` at the returned weights.
    pub residual: T,
    pub iterations: usize,
}

/// Projects `target` onto the convex hull of `points`.
///
/// An empty point set has no hull; the residual is then `‖target‖` and the
/// weight vector is empty.
pub fn project_onto_hull<T: Scalar>(points: &[Vec<T>], target: &[T]) -> HullProjection<T> {
    if points.is_empty() {
        return HullProjection {
            weights: Vec::new(),
            residual: dot(target, target).sqrt(),
            iterations: 0,
        };
    }
    let shifted: Vec<Vec<T>> = points
        .iter()
        .map(|p| p.iter().zip(target).map(|(&a, &b)| a - b).collect())
        .collect();
    let max_sq = shifted
        .iter()
        .map(|q| dot(q, q))
        .fold(T::zero(), T::max);
    let eps = T::epsilon();
    let optimality_tol = eps * T::lit(64.0) * max_sq.max(T::min_positive_value());
    let weight_tol = eps * T::lit(64.0);

    let start = (0..shifted.len())
        .min_by(|&a, &b| {
            dot(&shifted[a], &shifted[a])
                .partial_cmp(&dot(&shifted[b], &shifted[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut lambda: Vec<T> = vec![T::one()];
    let mut x = shifted[start].clone();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let xx = dot(&x, &x);
        if xx <= optimality_tol {
            break;
        }
        let (j, xq) = (0..shifted.len())
            .map(|j| (j, dot(&x, &shifted[j])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if xx - xq <= optimality_tol || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(T::zero());

        loop {
            let Some(mu) = affine_minimizer(&shifted, &corral) else {
                // Numerically dependent corral: drop the newest point.
                corral.pop();
                lambda.pop();
                break;
            };
            if mu.iter().all(|&m| m > weight_tol) {
                lambda = mu;
                break;
            }
            let mut theta = T::one();
            for (&l, &m) in lambda.iter().zip(&mu) {
                if m <= weight_tol && l - m > T::zero() {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, &m) in lambda.iter_mut().zip(&mu) {
                *l = theta * m + (T::one() - theta) * *l;
            }
            let mut k = 0;
            let before = corral.len();
            while k < corral.len() {
                if lambda[k] <= weight_tol {
                    corral.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            if corral.len() == before {
                // No progress possible; keep the current convex combination.
                break;
            }
            if corral.len() == 1 {
                lambda[0] = T::one();
                break;
            }
        }
        let sum: T = lambda.iter().copied().sum();
        for l in &mut lambda {
            *l = *l / sum;
        }
        x = combine(&shifted, &corral, &lambda);
    }

    let mut weights = vec![T::zero(); points.len()];
    for (&i, &l) in corral.iter().zip(&lambda) {
        weights[i] = l;
    }
    HullProjection {
        residual: dot(&x, &x).sqrt(),
        weights,
        iterations,
    }
}

fn combine<T: Scalar>(points: &[Vec<T>], corral: &[usize], lambda: &[T]) -> Vec<T> {
    let dim = points[corral[0]].len();
    let mut out = vec![T::zero(); dim];
    for (&i, &l) in corral.iter().zip(lambda) {
        for (o, &p) in out.iter_mut().zip(&points[i]) {
            *o = *o + l * p;
        }
    }
    out
}

/// Weights `μ` with `Σμ = 1` minimising `‖Σ μ_i q_i‖` over the corral, from
/// the KKT system `[QᵀQ 1; 1ᵀ 0] [μ; ρ] = [0; 1]`.
fn affine_minimizer<T: Scalar>(points: &[Vec<T>], corral: &[usize]) -> Option<Vec<T>> {
    let k = corral.len();
    let n = k + 1;
    let mut a = vec![vec![T::zero(); n + 1]; n];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = dot(&points[corral[r]], &points[corral[c]]);
        }
        a[r][k] = T::one();
        a[k][r] = T::one();
    }
    a[k][n] = T::one();
    let sol = solve_dense(a)?;
    Some(sol[..k].to_vec())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>) -> Option<Vec<T>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(T::zero(), |m, &x| m.max(x.abs()));
    let tiny = scale * T::epsilon() * T::lit(n as f64 * 16.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for c in col..=n {
                let v = a[col][c];
                a[row][c] = a[row][c] - f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = a[row][n];
        for c in row + 1..n {
            s = s - a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
