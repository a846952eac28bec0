// SPDX-License-Identifier: Apache-2.0

//! Planar predicates over any signed ring: exact on integers and rationals,
//! plain floating point otherwise.
//!
//! Floating inputs are usually dyadic (grid coordinates, small integers),
//! so [`lift`] maps them onto an `i128` lattice where the predicates are
//! evaluated without rounding.

use std::cmp::Ordering;

use num_traits::{Float, Num, Signed};

pub trait PlanarCoord: Num + Signed + Copy + PartialOrd {}

impl<T: Num + Signed + Copy + PartialOrd> PlanarCoord for T {}

/// Twice the signed area of the triangle `(o, a, b)`; positive when the
/// turn `o -> a -> b` is counterclockwise.
#[inline]
pub fn cross<T: PlanarCoord>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn lex<T: PartialOrd>(a: &[T; 2], b: &[T; 2]) -> Ordering {
    a[0].partial_cmp(&b[0])
        .unwrap_or(Ordering::Equal)
        .then(a[1].partial_cmp(&b[1]).unwrap_or(Ordering::Equal))
}

/// Andrew's monotone chain.
///
/// Returns indices into `points` of the strict hull vertices in
/// counterclockwise order, starting from the lexicographically smallest
/// point. Collinear boundary points are dropped and duplicates resolve to
/// their lowest index. Collinear inputs yield the two endpoints, a single
/// distinct point yields one index.
pub fn convex_hull<T: PlanarCoord>(points: &[[T; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| lex(&points[i], &points[j]).then(i.cmp(&j)));
    idx.dedup_by(|later, kept| points[*later] == points[*kept]);
    if idx.len() <= 2 {
        return idx;
    }

    let mut lower: Vec<usize> = Vec::with_capacity(idx.len());
    for &i in &idx {
        while lower.len() >= 2
            && cross(points[lower[lower.len() - 2]], points[lower[lower.len() - 1]], points[i]) <= T::zero()
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::with_capacity(idx.len());
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && cross(points[upper[upper.len() - 2]], points[upper[upper.len() - 1]], points[i]) <= T::zero()
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Boundary-inclusive membership of `p` in the hull whose vertices are
/// given in the order produced by [`convex_hull`].
pub fn hull_contains<T: PlanarCoord>(hull: &[[T; 2]], p: [T; 2]) -> bool {
    match hull {
        [] => false,
        [a] => *a == p,
        [a, b] => on_segment(*a, *b, p),
        _ => (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= T::zero()),
    }
}

fn on_segment<T: PlanarCoord>(a: [T; 2], b: [T; 2], p: [T; 2]) -> bool {
    if cross(a, b, p) != T::zero() {
        return false;
    }
    let d1 = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
    let d2 = (p[0] - b[0]) * (a[0] - b[0]) + (p[1] - b[1]) * (a[1] - b[1]);
    d1 >= T::zero() && d2 >= T::zero()
}

/// Shoelace sum over counterclockwise vertices, i.e. twice the area.
pub fn twice_area<T: PlanarCoord>(hull: &[[T; 2]]) -> T {
    if hull.len() < 3 {
        return T::zero();
    }
    (0..hull.len()).fold(T::zero(), |acc, i| {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        acc + a[0] * b[1] - b[0] * a[1]
    })
}

/// Magnitude bound for lifted coordinates; keeps every cross product
/// comfortably inside `i128`.
const LATTICE_BITS: u32 = 60;

/// `x = m · 2^e` with `m` odd (or zero). `None` for non-finite values.
fn dyadic<T: Float>(x: T) -> Option<(i128, i32)> {
    if !x.is_finite() {
        return None;
    }
    let (mantissa, exponent, sign) = x.integer_decode();
    if mantissa == 0 {
        return Some((0, 0));
    }
    let tz = mantissa.trailing_zeros();
    let m = (mantissa >> tz) as i128 * sign as i128;
    Some((m, exponent as i32 + tz as i32))
}

/// Smallest shift `k ≥ 0` such that `x · 2^k` is an integer.
pub fn required_shift<T: Float>(x: T) -> Option<u32> {
    let (_, e) = dyadic(x)?;
    Some((-e).max(0) as u32)
}

/// `x · 2^shift` as an integer, if it is one and fits the lattice bound.
pub fn lift_at<T: Float>(x: T, shift: u32) -> Option<i128> {
    let (m, e) = dyadic(x)?;
    if m == 0 {
        return Some(0);
    }
    let total = e + shift as i32;
    if total < 0 {
        return None;
    }
    let bits = 128 - m.unsigned_abs().leading_zeros();
    if bits + total as u32 > LATTICE_BITS {
        return None;
    }
    Some(m << total)
}

/// Maps all `values` onto a common integer lattice `values · 2^shift`.
pub fn lift<T: Float>(values: &[T]) -> Option<(Vec<i128>, u32)> {
    let mut shift = 0;
    for &x in values {
        shift = shift.max(required_shift(x)?);
    }
    let lifted = values
        .iter()
        .map(|&x| lift_at(x, shift))
        .collect::<Option<Vec<_>>>()?;
    Some((lifted, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn example_points() -> Vec<[i64; 2]> {
        vec![
            [-1, 1],
            [1, -1],
            [-4, -1],
            [4, 1],
            [-1, -1],
            [1, 1],
            [3, 0],
            [-3, 0],
        ]
    }

    #[test]
    fn hull_of_worked_example() {
        let pts = example_points();
        let hull: Vec<[i64; 2]> = convex_hull(&pts).into_iter().map(|i| pts[i]).collect();
        assert_eq!(hull, vec![[-4, -1], [1, -1], [3, 0], [4, 1], [-1, 1], [-3, 0]]);
        assert_eq!(twice_area(&hull), 22);
    }

    #[test]
    fn degenerate_hulls() {
        let seg = [[-1i64, 1], [1, -1], [0, 0], [1, -1]];
        let h = convex_hull(&seg);
        assert_eq!(h.len(), 2);
        assert_eq!(twice_area(&[[0i64, 0]]), 0);
        assert_eq!(convex_hull(&[[2i64, 2], [2, 2]]), vec![0]);
        assert!(convex_hull::<i64>(&[]).is_empty());
    }

    #[test]
    fn containment_is_boundary_inclusive() {
        let pts = example_points();
        let hull: Vec<[i64; 2]> = convex_hull(&pts).into_iter().map(|i| pts[i]).collect();
        assert!(hull_contains(&hull, [0, 0]));
        assert!(hull_contains(&hull, [1, 1]));
        assert!(hull_contains(&hull, [4, 1]));
        assert!(!hull_contains(&hull, [0, 2]));
        let seg = [[-1i64, 1], [1, -1]];
        assert!(hull_contains(&seg, [0, 0]));
        assert!(!hull_contains(&seg, [2, -2]));
        assert!(!hull_contains(&seg, [1, 1]));
    }

    #[test]
    fn rational_coordinates() {
        let r = |n: i64, d: i64| Ratio::new(n, d);
        let pts = vec![
            [r(1, 3), r(0, 1)],
            [r(-1, 3), r(0, 1)],
            [r(0, 1), r(1, 7)],
            [r(0, 1), r(-1, 7)],
            [r(1, 6), r(1, 14)],
        ];
        let hull = convex_hull(&pts);
        // (1/6, 1/14) lies exactly on the edge between (1/3, 0) and (0, 1/7).
        assert_eq!(hull.len(), 4);
        assert!(!hull.contains(&4));
        let verts: Vec<_> = hull.iter().map(|&i| pts[i]).collect();
        assert!(hull_contains(&verts, pts[4]));
        assert_eq!(twice_area(&verts), r(4, 21));
    }

    #[test]
    fn lifting_dyadic_values() {
        let (ints, shift) = lift(&[0.5_f64, -3.25, 2.0, 0.0]).unwrap();
        assert_eq!(shift, 2);
        assert_eq!(ints, vec![2, -13, 8, 0]);
        assert_eq!(lift_at(0.125_f64, 2), None);
        assert_eq!(lift_at(0.125_f64, 3), Some(1));
        assert!(lift(&[f64::NAN]).is_none());
        // 0.1 needs 55 fractional bits; alongside 100 it overflows the lattice.
        assert!(lift(&[0.1_f64, 100.0]).is_none());
        assert_eq!(lift(&[1.5_f32]).unwrap(), (vec![3], 1));
    }
}
