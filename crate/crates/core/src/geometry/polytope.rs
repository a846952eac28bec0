// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::planar::{self, PlanarCoord};
use super::qp::project_onto_hull;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, sub, Scalar};

/// Convex hull of a finite point set, kept in ambient coordinates.
///
/// For the sensitivity hull the point set is closed under negation, so the
/// body is centrally symmetric and its affine span is a linear subspace.
/// Lower-dimensional bodies keep an orthonormal span basis; vectors off
/// that span have infinite Minkowski norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<T> {
    dim: usize,
    generators: Vec<Vec<T>>,
    vertices: Vec<Vec<T>>,
    intrinsic_dim: usize,
    basis: Vec<Vec<T>>,
    scale: T,
    lattice: Option<Lattice>,
    fan: Vec<T>,
}

/// Exact copy of a planar hull on the integer lattice `x · 2^shift`.
#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    shift: u32,
    vertices: Vec<[i128; 2]>,
}

impl<T: Scalar> Polytope<T> {
    /// Hull of `points`, each of length `dim`. An empty set gives the
    /// origin with intrinsic dimension 0.
    pub fn from_points(dim: usize, points: Vec<Vec<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("polytope dimension must be positive".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "polytope generator",
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite polytope generator".into()));
            }
        }
        Ok(Self::build(dim, points.clone(), &points))
    }

    /// Hull of the current vertices together with `extra`; the generator
    /// list is extended accordingly.
    pub fn with_points(&self, extra: &[Vec<T>]) -> Result<Self> {
        for p in extra {
            if p.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    what: "polytope generator",
                    expected: self.dim,
                    found: p.len(),
                });
            }
        }
        let mut candidates = if self.generators.is_empty() {
            Vec::new()
        } else {
            self.vertices.clone()
        };
        candidates.extend_from_slice(extra);
        let mut generators = self.generators.clone();
        generators.extend_from_slice(extra);
        Ok(Self::build(self.dim, generators, &candidates))
    }

    pub(crate) fn build(dim: usize, generators: Vec<Vec<T>>, candidates: &[Vec<T>]) -> Self {
        let scale = candidates
            .iter()
            .map(|p| norm2(p))
            .fold(T::zero(), T::max);
        if candidates.is_empty() {
            return Self {
                dim,
                generators,
                vertices: vec![vec![T::zero(); dim]],
                intrinsic_dim: 0,
                basis: Vec::new(),
                scale,
                lattice: None,
                fan: Vec::new(),
            };
        }
        let (vertices, lattice) = match dim {
            1 => (interval_vertices(candidates), None),
            2 => planar_vertices(candidates),
            _ => (general_vertices(candidates, scale), None),
        };
        let basis = if dim == 2 {
            match vertices.len() {
                1 => Vec::new(),
                2 => vec![unit(&sub(&vertices[1], &vertices[0]))],
                _ => vec![vec![T::one(), T::zero()], vec![T::zero(), T::one()]],
            }
        } else {
            span_basis(candidates, scale)
        };
        let intrinsic_dim = basis.len();
        let mut polytope = Self {
            dim,
            generators,
            vertices,
            intrinsic_dim,
            basis,
            scale,
            lattice,
            fan: Vec::new(),
        };
        if dim == 2 && intrinsic_dim == 2 {
            polytope.fan = polytope.fan_areas();
        }
        polytope
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn generators(&self) -> &[Vec<T>] {
        &self.generators
    }

    /// Extreme points; counterclockwise from the lexicographically smallest
    /// when `dim == 2`.
    pub fn vertices(&self) -> &[Vec<T>] {
        &self.vertices
    }

    /// Orthonormal basis of the linear span.
    pub fn span_basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// True when the hull was evaluated on an exact integer lattice.
    pub fn is_exact(&self) -> bool {
        self.lattice.is_some()
    }

    /// Minkowski functional `‖v‖_K = inf { r > 0 : v ∈ rK }`.
    ///
    /// Returns `+∞` for vectors outside the linear span of `K`. Assumes `K`
    /// is centrally symmetric, which holds for every sensitivity hull.
    ///
    /// # Panics
    ///
    /// If `v` does not have the ambient dimension.
    pub fn k_norm(&self, v: &[T]) -> T {
        assert_eq!(v.len(), self.dim, "vector dimension must match the polytope");
        if v.iter().all(|x| *x == T::zero()) {
            return T::zero();
        }
        if self.intrinsic_dim == 0 || !self.in_span(v) {
            return T::infinity();
        }
        if self.intrinsic_dim == 1 {
            let half: Vec<T> = sub(&self.vertices[1], &self.vertices[0])
                .into_iter()
                .map(|x| x / T::lit(2.0))
                .collect();
            return dot(v, &half).abs() / dot(&half, &half);
        }
        if self.dim == 2 {
            if let Some(g) = self.polygon_gauge(v) {
                return g;
            }
        }
        self.gauge_by_bisection(v)
    }

    fn in_span(&self, v: &[T]) -> bool {
        let mut residual = v.to_vec();
        for b in &self.basis {
            let c = dot(&residual, b);
            for (r, &bi) in residual.iter_mut().zip(b) {
                *r = *r - c * bi;
            }
        }
        norm2(&residual) <= T::lit(T::GEOMETRY_TOLERANCE) * (norm2(v) + self.scale)
    }

    /// `max_e (n_e · v) / (n_e · a_e)` over the edges `a_e -> b_e`, valid when
    /// the origin is interior.
    fn polygon_gauge(&self, v: &[T]) -> Option<T> {
        let n = self.vertices.len();
        let mut best = T::neg_infinity();
        for i in 0..n {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            let normal = [b[1] - a[1], a[0] - b[0]];
            let offset = normal[0] * a[0] + normal[1] * a[1];
            if !(offset > T::zero()) {
                return None;
            }
            best = best.max((normal[0] * v[0] + normal[1] * v[1]) / offset);
        }
        Some(best.max(T::zero()))
    }

    fn gauge_by_bisection(&self, v: &[T]) -> T {
        let scaled = |r: T| -> Vec<T> { v.iter().map(|&x| x / r).collect() };
        let two = T::lit(2.0);
        let mut hi = T::one();
        let mut steps = 0;
        while !self.contains_tight(&scaled(hi)) {
            hi = hi * two;
            steps += 1;
            if steps > 200 {
                return T::infinity();
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            if hi - lo <= T::epsilon() * T::lit(4.0) * hi {
                break;
            }
            let mid = (lo + hi) / two;
            if self.contains_tight(&scaled(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Boundary-inclusive membership test.
    ///
    /// Planar hulls use exact orientation tests when `v` and the vertices
    /// share a dyadic lattice; everything else goes through the
    /// simplex-constrained least-squares program.
    ///
    /// # Panics
    ///
    /// If `v` does not have the ambient dimension.
    pub fn contains(&self, v: &[T]) -> bool {
        assert_eq!(v.len(), self.dim, "vector dimension must match the polytope");
        if self.generators.is_empty() {
            return v.iter().all(|x| *x == T::zero());
        }
        match self.dim {
            1 => v[0] >= self.vertices[0][0] && v[0] <= self.vertices[self.vertices.len() - 1][0],
            2 => self
                .contains_exact(v)
                .unwrap_or_else(|| self.contains_tolerant_2d(v)),
            _ => self.contains_by_program(v),
        }
    }

    fn contains_exact(&self, v: &[T]) -> Option<bool> {
        let lattice = self.lattice.as_ref()?;
        let need = planar::required_shift(v[0])?.max(planar::required_shift(v[1])?);
        let shift = lattice.shift.max(need);
        let p = [planar::lift_at(v[0], shift)?, planar::lift_at(v[1], shift)?];
        let extra = shift - lattice.shift;
        let verts: Vec<[i128; 2]> = if extra == 0 {
            lattice.vertices.clone()
        } else {
            lattice
                .vertices
                .iter()
                .map(|q| rescale(*q, extra))
                .collect::<Option<Vec<_>>>()?
        };
        Some(planar::hull_contains(&verts, p))
    }

    fn contains_tolerant_2d(&self, v: &[T]) -> bool {
        let tol = T::lit(T::GEOMETRY_TOLERANCE);
        let p = [v[0], v[1]];
        let vs: Vec<[T; 2]> = self.vertices.iter().map(|q| [q[0], q[1]]).collect();
        match vs.len() {
            1 => norm2(&sub(v, &self.vertices[0])) <= tol * (T::one() + self.scale),
            2 => {
                let (a, b) = (vs[0], vs[1]);
                let len = norm2(&sub(&self.vertices[1], &self.vertices[0]));
                let c = planar::cross(a, b, p);
                if c.abs() > tol * len * (T::one() + norm2(v)) {
                    return false;
                }
                let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
                t >= -tol && t <= T::one() + tol
            }
            n => (0..n).all(|i| {
                let a = vs[i];
                let b = vs[(i + 1) % n];
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                planar::cross(a, b, p) >= -tol * len * (T::one() + norm2(v))
            }),
        }
    }

    /// Membership through the least-squares program, declared contained when
    /// the residual is at most `1e-9 · (1 + ‖v‖)`.
    pub fn contains_by_program(&self, v: &[T]) -> bool {
        let projection = project_onto_hull(&self.vertices, v);
        projection.residual <= T::lit(T::GEOMETRY_TOLERANCE) * (T::one() + norm2(v))
    }

    fn contains_tight(&self, v: &[T]) -> bool {
        let projection = project_onto_hull(&self.vertices, v);
        projection.residual <= T::epsilon() * T::lit(256.0) * (self.scale + norm2(v))
    }

    /// Intrinsic-dimension measure: 0 for a point, length for a segment and
    /// area for a planar polygon.
    pub fn measure(&self) -> Result<T> {
        match self.intrinsic_dim {
            0 => Ok(T::zero()),
            1 => Ok(norm2(&sub(&self.vertices[1], &self.vertices[0]))),
            2 if self.dim == 2 => Ok(self.area()),
            _ => Err(Error::UnsupportedDimension {
                dim: self.dim,
                intrinsic_dim: self.intrinsic_dim,
            }),
        }
    }

    fn area(&self) -> T {
        if let Some(lattice) = &self.lattice {
            let twice = planar::twice_area(&lattice.vertices);
            let denom = T::lit(2.0).powi(2 * lattice.shift as i32 + 1);
            return T::lit(twice as f64) / denom;
        }
        let vs: Vec<[T; 2]> = self.vertices.iter().map(|q| [q[0], q[1]]).collect();
        planar::twice_area(&vs).abs() / T::lit(2.0)
    }

    fn centroid(&self) -> Vec<T> {
        let n = T::lit(self.vertices.len() as f64);
        (0..self.dim)
            .map(|k| self.vertices.iter().map(|v| v[k]).sum::<T>() / n)
            .collect()
    }

    fn fan_areas(&self) -> Vec<T> {
        let c = self.centroid();
        let c = [c[0], c[1]];
        let n = self.vertices.len();
        let mut acc = T::zero();
        (0..n)
            .map(|i| {
                let a = &self.vertices[i];
                let b = &self.vertices[(i + 1) % n];
                acc = acc + planar::cross(c, [a[0], a[1]], [b[0], b[1]]).abs() / T::lit(2.0);
                acc
            })
            .collect()
    }

    /// Uniform draw from the polytope: a single uniform variate along a
    /// segment, or a centroid-fan triangle chosen by area followed by the
    /// folded uniform-in-triangle map for planar polygons.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        match self.intrinsic_dim {
            0 => Ok(self.vertices[0].clone()),
            1 => {
                let u = T::lit(rng.random::<f64>());
                Ok(self.vertices[0]
                    .iter()
                    .zip(&self.vertices[1])
                    .map(|(&a, &b)| a + u * (b - a))
                    .collect())
            }
            2 if self.dim == 2 => {
                let total = *self.fan.last().expect("polygon has a fan");
                let pick = T::lit(rng.random::<f64>()) * total;
                let i = self.fan.partition_point(|&w| w <= pick).min(self.fan.len() - 1);
                let c = self.centroid();
                let a = &self.vertices[i];
                let b = &self.vertices[(i + 1) % self.vertices.len()];
                let mut r1 = T::lit(rng.random::<f64>());
                let mut r2 = T::lit(rng.random::<f64>());
                if r1 + r2 > T::one() {
                    r1 = T::one() - r1;
                    r2 = T::one() - r2;
                }
                Ok((0..2)
                    .map(|k| c[k] + r1 * (a[k] - c[k]) + r2 * (b[k] - c[k]))
                    .collect())
            }
            _ => Err(Error::UnsupportedDimension {
                dim: self.dim,
                intrinsic_dim: self.intrinsic_dim,
            }),
        }
    }

    /// Stable 64-bit identity of the vertex set (FNV-1a over the IEEE bits).
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.dim as u64);
        for v in &self.vertices {
            for &x in v {
                feed(x.as_f64().to_bits());
            }
        }
        h
    }
}

fn rescale(q: [i128; 2], extra: u32) -> Option<[i128; 2]> {
    let bound = 1i128 << 60;
    let x = q[0].checked_shl(extra)?;
    let y = q[1].checked_shl(extra)?;
    if x.abs() > bound || y.abs() > bound || (x >> extra) != q[0] || (y >> extra) != q[1] {
        return None;
    }
    Some([x, y])
}

fn unit<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = norm2(v);
    v.iter().map(|&x| x / n).collect()
}

fn interval_vertices<T: Scalar>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    let lo = points.iter().map(|p| p[0]).fold(T::infinity(), T::min);
    let hi = points.iter().map(|p| p[0]).fold(T::neg_infinity(), T::max);
    if lo == hi {
        vec![vec![lo]]
    } else {
        vec![vec![lo], vec![hi]]
    }
}

fn planar_vertices<T: Scalar>(points: &[Vec<T>]) -> (Vec<Vec<T>>, Option<Lattice>) {
    let flat: Vec<T> = points.iter().flat_map(|p| [p[0], p[1]]).collect();
    if let Some((ints, shift)) = planar::lift(&flat) {
        let lattice_points: Vec<[i128; 2]> = ints.chunks(2).map(|c| [c[0], c[1]]).collect();
        let idx = planar::convex_hull(&lattice_points);
        let vertices = idx.iter().map(|&i| points[i].clone()).collect();
        let lattice = Lattice {
            shift,
            vertices: idx.iter().map(|&i| lattice_points[i]).collect(),
        };
        return (vertices, Some(lattice));
    }
    let pts: Vec<[T; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    let idx = hull_float(&pts);
    (idx.into_iter().map(|i| points[i].clone()).collect(), None)
}

fn hull_float<T: Scalar + PlanarCoord>(pts: &[[T; 2]]) -> Vec<usize> {
    planar::convex_hull(pts)
}

/// Orthonormal basis of the affine span (Gram-Schmidt on differences from
/// the first point, with a relative rank tolerance).
fn span_basis<T: Scalar>(points: &[Vec<T>], scale: T) -> Vec<Vec<T>> {
    let tol = T::lit(T::GEOMETRY_TOLERANCE) * scale.max(T::min_positive_value());
    let origin = &points[0];
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut residuals: Vec<Vec<T>> = points.iter().map(|p| sub(p, origin)).collect();
    loop {
        let Some((best, n)) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm2(r)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        else {
            break;
        };
        if n <= tol || basis.len() == origin.len() {
            break;
        }
        let b: Vec<T> = residuals[best].iter().map(|&x| x / n).collect();
        for r in &mut residuals {
            let c = dot(r, &b);
            for (ri, &bi) in r.iter_mut().zip(&b) {
                *ri = *ri - c * bi;
            }
        }
        basis.push(b);
    }
    basis
}

/// Extreme points in general dimension: a point is a vertex when it is not
/// in the hull of the remaining distinct points.
fn general_vertices<T: Scalar>(points: &[Vec<T>], scale: T) -> Vec<Vec<T>> {
    let mut distinct: Vec<Vec<T>> = Vec::new();
    for p in points {
        if !distinct.contains(p) {
            distinct.push(p.clone());
        }
    }
    let basis = span_basis(&distinct, scale);
    if basis.len() <= 1 {
        if basis.is_empty() {
            return vec![distinct[0].clone()];
        }
        let key = |p: &Vec<T>| dot(p, &basis[0]);
        let lo = distinct
            .iter()
            .min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let hi = distinct
            .iter()
            .max_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        return vec![lo.clone(), hi.clone()];
    }
    let tol = T::lit(T::GEOMETRY_TOLERANCE);
    (0..distinct.len())
        .filter(|&i| {
            let others: Vec<Vec<T>> = distinct
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.clone())
                .collect();
            project_onto_hull(&others, &distinct[i]).residual > tol * (T::one() + norm2(&distinct[i]))
        })
        .map(|i| distinct[i].clone())
        .collect()
}
