//! A convex body mapped into itself by the orthogonal projection onto each
//! hyperplane of a family, built by iterating
//! `Q <- conv(Q ∪ π_1(Q) ∪ ... ∪ π_n(Q))` on vertex sets in floating point.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use qhull::Qh;
use serde::{Deserialize, Serialize};

use crate::arrangements::Hyperplane;
use crate::error::{Error, Result};
use crate::geometry::{nearest_point_f64, Point, VPolytope};

/// Projections closer than this fraction of the round's largest distance
/// wait for a later round.
const ADMIT_FRACTION: f64 = 0.05;

/// Relative singular-value cutoff for the affine hull dimension.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantBodyResult {
    pub body: VPolytope,
    pub iterations: usize,
    /// Largest distance from a projected vertex to the body.
    pub residual: f64,
    pub converged: bool,
}

/// Convex hull of a finite point set in f64, reduced to its affine hull.
#[derive(Debug, Clone)]
pub struct Hull {
    origin: Vec<f64>,
    /// Orthonormal basis of the affine hull directions.
    basis: Vec<Vec<f64>>,
    /// Extreme points, in ambient coordinates.
    vertices: Vec<Vec<f64>>,
    local: Vec<Vec<f64>>,
    /// Outward facets `normal·y + offset <= 0` in local coordinates, with
    /// the indices (into `local`) of a simplex spanning each.
    facets: Vec<(Vec<f64>, f64, Vec<usize>)>,
    /// Facet normals and offsets packed with stride `k + 1`.
    packed: Vec<f64>,
    /// Center and radius of a ball around each facet simplex.
    spheres: Vec<(Vec<f64>, f64)>,
    /// Facet violations up to this are roundoff.
    slack: f64,
}

impl Hull {
    pub fn new(points: &[Vec<f64>]) -> Result<Hull> {
        let first = points.first().ok_or(Error::Empty("hull points"))?;
        let d = first.len();
        let m = points.len();
        let origin: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / m as f64).collect();
        let centered = DMatrix::from_fn(m, d, |i, j| points[i][j] - origin[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let scale = points.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
        let cutoff = RANK_TOL * scale * (m as f64).sqrt();
        let basis: Vec<Vec<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > cutoff)
            .map(|(i, _)| v_t.row(i).iter().copied().collect())
            .collect();
        let to_local = |p: &[f64]| -> Vec<f64> {
            basis.iter().map(|b| b.iter().zip(p).zip(&origin).map(|((bi, pi), oi)| bi * (pi - oi)).sum()).collect()
        };
        let local_all: Vec<Vec<f64>> = points.iter().map(|p| to_local(p)).collect();
        let k = basis.len();

        let (keep, facets) = match k {
            0 => (vec![0], Vec::new()),
            1 => {
                let (mut lo, mut hi) = (0, 0);
                for (i, y) in local_all.iter().enumerate() {
                    if y[0] < local_all[lo][0] {
                        lo = i;
                    }
                    if y[0] > local_all[hi][0] {
                        hi = i;
                    }
                }
                (vec![lo, hi], vec![(vec![-1.0], local_all[lo][0], vec![0]), (vec![1.0], -local_all[hi][0], vec![1])])
            }
            _ => {
                let qh = Qh::builder()
                    .compute(true)
                    .triangulate(true)
                    .build_from_iter(local_all.iter().cloned())
                    .map_err(|e| Error::Hull(e.to_string()))?;
                let mut keep: Vec<usize> = qh.vertices().filter_map(|v| v.index(&qh)).collect();
                keep.sort_unstable();
                let slot = |i: usize| keep.binary_search(&i).expect("facet vertex is a hull vertex");
                let mut facets = Vec::new();
                for f in qh.facets() {
                    let normal = f.normal().ok_or_else(|| Error::Hull("facet without normal".into()))?.to_vec();
                    let simplex: Vec<usize> = f
                        .vertices()
                        .ok_or_else(|| Error::Hull("facet without vertices".into()))?
                        .iter()
                        .filter_map(|v| v.index(&qh))
                        .map(slot)
                        .collect();
                    facets.push((normal, f.offset(), simplex));
                }
                (keep, facets)
            }
        };
        let local: Vec<Vec<f64>> = keep.iter().map(|&i| local_all[i].clone()).collect();
        let spheres = facets
            .iter()
            .map(|(_, _, simplex)| {
                let m = simplex.len() as f64;
                let c: Vec<f64> = (0..k).map(|j| simplex.iter().map(|&i| local[i][j]).sum::<f64>() / m).collect();
                let r = simplex.iter().map(|&i| sq_dist(&local[i], &c)).fold(0.0, f64::max).sqrt();
                (c, r)
            })
            .collect();
        let packed = facets.iter().flat_map(|(n, off, _)| n.iter().copied().chain(std::iter::once(*off))).collect();
        Ok(Hull {
            vertices: keep.iter().map(|&i| points[i].clone()).collect(),
            local,
            packed,
            origin,
            basis,
            facets,
            spheres,
            slack: 1e-13 * scale,
        })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn affine_dim(&self) -> usize {
        self.basis.len()
    }

    /// Euclidean distance from `x` to the hull.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let rel: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = self.basis.iter().map(|b| b.iter().zip(&rel).map(|(p, q)| p * q).sum()).collect();
        let perp_sq = if self.basis.len() == x.len() {
            0.0
        } else {
            let mut perp = rel.clone();
            for (b, yi) in self.basis.iter().zip(&y) {
                perp.iter_mut().zip(b).for_each(|(p, bi)| *p -= yi * bi);
            }
            perp.iter().map(|v| v * v).sum::<f64>()
        };
        let inner_sq = match self.basis.len() {
            0 => 0.0,
            1 => {
                let (lo, hi) = (self.local[0][0], self.local[1][0]);
                let gap = (lo - y[0]).max(y[0] - hi).max(0.0);
                gap * gap
            }
            _ => {
                // the nearest boundary point lies on a facet visible from y;
                // scan those in order of a lower bound on their distance
                let mut visible: Vec<(f64, usize)> = Vec::new();
                let mut outside = false;
                let stride = y.len() + 1;
                for (f, row) in self.packed.chunks_exact(stride).enumerate() {
                    let v = row[..stride - 1].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + row[stride - 1];
                    if v > 0.0 {
                        outside |= v > self.slack;
                        let (c, r) = &self.spheres[f];
                        visible.push((v.max(sq_dist(&y, c).sqrt() - r), f));
                    }
                }
                if outside {
                    visible.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut best = f64::INFINITY;
                    for (lb, f) in visible {
                        if lb > 0.0 && lb * lb >= best {
                            break;
                        }
                        best = best.min(self.facet_sq_dist(f, &y));
                    }
                    best
                } else {
                    0.0
                }
            }
        };
        (perp_sq + inner_sq).sqrt()
    }
}

impl Hull {
    fn facet_sq_dist(&self, f: usize, y: &[f64]) -> f64 {
        let s = &self.facets[f].2;
        match s.len() {
            2 => segment_sq_dist(&self.local[s[0]], &self.local[s[1]], y),
            3 => triangle_sq_dist(&self.local[s[0]], &self.local[s[1]], &self.local[s[2]], y),
            _ => {
                let verts: Vec<Vec<f64>> = s.iter().map(|&i| self.local[i].clone()).collect();
                nearest_point_f64(&verts, y).1
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a - b` for vectors of length at most 3, zero padded.
fn diff(a: &[f64], b: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
        *o = x - y;
    }
    out
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn segment_sq_dist(a: &[f64], b: &[f64], y: &[f64]) -> f64 {
    let (ab, ay) = (diff(b, a), diff(y, a));
    let len = dot3(&ab, &ab);
    let t = if len > 0.0 { (dot3(&ay, &ab) / len).clamp(0.0, 1.0) } else { 0.0 };
    (0..3).map(|i| (t * ab[i] - ay[i]).powi(2)).sum()
}

/// Closest point on a triangle by Voronoi-region tests.
fn triangle_sq_dist(a: &[f64], b: &[f64], c: &[f64], y: &[f64]) -> f64 {
    let (ab, ac, ap) = (diff(b, a), diff(c, a), diff(y, a));
    let (d1, d2) = (dot3(&ab, &ap), dot3(&ac, &ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return sq_dist(a, y);
    }
    let bp = diff(y, b);
    let (d3, d4) = (dot3(&ab, &bp), dot3(&ac, &bp));
    if d3 >= 0.0 && d4 <= d3 {
        return sq_dist(b, y);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return segment_sq_dist(a, b, y);
    }
    let cp = diff(y, c);
    let (d5, d6) = (dot3(&ab, &cp), dot3(&ac, &cp));
    if d6 >= 0.0 && d5 <= d6 {
        return sq_dist(c, y);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return segment_sq_dist(a, c, y);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return segment_sq_dist(b, c, y);
    }
    let denom = va + vb + vc;
    let (v, w) = (vb / denom, vc / denom);
    (0..3).map(|i| (v * ab[i] + w * ac[i] - ap[i]).powi(2)).sum()
}

/// A hyperplane in f64 with unit normal, for repeated projection.
struct PlaneF64 {
    normal: Vec<f64>,
    offset: f64,
}

impl PlaneF64 {
    fn new(h: &Hyperplane) -> Self {
        let a: Vec<f64> = h.normal().iter().map(crate::rational::to_f64).collect();
        let norm = dot(&a, &a).sqrt();
        PlaneF64 { normal: a.iter().map(|x| x / norm).collect(), offset: crate::rational::to_f64(h.offset()) / norm }
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let t = dot(&self.normal, x) - self.offset;
        x.iter().zip(&self.normal).map(|(xi, ai)| xi - t * ai).collect()
    }
}

fn check_planes(planes: &[Hyperplane], d: usize) -> Result<()> {
    if planes.is_empty() {
        return Err(Error::Empty("hyperplane list"));
    }
    planes.iter().try_for_each(|h| Error::check_dim(d, h.dim()))
}

/// Largest distance from `π_i(v)` to the hull, over planes `i` and hull
/// vertices `v`.
fn residual(hull: &Hull, planes: &[Hyperplane]) -> f64 {
    hull.vertices()
        .iter()
        .flat_map(|v| planes.iter().map(move |h| hull.distance(&h.project_f64(v))))
        .fold(0.0, f64::max)
}

/// Grows `seed` by projected vertices until no projection lies farther than
/// `tolerance` from the current body, or `max_iter` rounds have run.
pub fn projection_closure(
    planes: &[Hyperplane],
    seed: &VPolytope,
    tolerance: f64,
    max_iter: usize,
) -> Result<InvariantBodyResult> {
    check_planes(planes, seed.dim())?;
    if !(tolerance >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    let pts: Vec<Vec<f64>> = seed.vertices().iter().map(Point::to_f64).collect();
    let fplanes: Vec<PlaneF64> = planes.iter().map(PlaneF64::new).collect();
    let mut hull = Hull::new(&pts)?;
    let dists = |hull: &Hull, v: &[f64]| -> Vec<f64> { fplanes.iter().map(|h| hull.distance(&h.project(v))).collect() };
    let top = |b: &[f64]| b.iter().cloned().fold(0.0, f64::max);
    // pending vertices with per-plane upper bounds on dist(π_i(v), hull);
    // the hull only grows, so bounds stay valid and cleared vertices stay
    // cleared. The flag marks bounds computed against the current hull.
    let mut pending: Vec<(Vec<f64>, Vec<f64>, bool)> =
        hull.vertices().iter().map(|v| (v.clone(), dists(&hull, v), true)).collect();
    let mut iterations = 0;
    let mut increment = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        pending.sort_by(|a, b| top(&b.1).total_cmp(&top(&a.1)));
        // tighten bounds from the top until the largest is exact
        let mut i = 0;
        increment = 0.0f64;
        while i < pending.len() && top(&pending[i].1) > increment {
            if !pending[i].2 {
                pending[i].1 = dists(&hull, &pending[i].0);
                pending[i].2 = true;
            }
            increment = increment.max(top(&pending[i].1));
            i += 1;
        }
        if increment <= tolerance {
            break;
        }
        let admit = tolerance.max(ADMIT_FRACTION * increment);
        while i < pending.len() && top(&pending[i].1) > admit {
            if !pending[i].2 {
                pending[i].1 = dists(&hull, &pending[i].0);
                pending[i].2 = true;
            }
            i += 1;
        }
        let mut far = Vec::new();
        for (v, bounds, exact) in &pending {
            for (h, d) in fplanes.iter().zip(bounds) {
                if *exact && *d > admit {
                    far.push(h.project(v));
                }
            }
        }
        let added: HashSet<Vec<u64>> = far.iter().map(|q| bits(q)).collect();
        let carried: HashMap<Vec<u64>, Vec<f64>> = pending
            .drain(..)
            .filter(|(_, b, _)| top(b) > tolerance)
            .map(|(v, b, _)| (bits(&v), b))
            .collect();
        let mut next = hull.vertices().to_vec();
        next.extend(far);
        hull = Hull::new(&next)?;
        for v in hull.vertices() {
            let key = bits(v);
            if added.contains(&key) {
                pending.push((v.clone(), dists(&hull, v), true));
            } else if let Some(b) = carried.get(&key) {
                pending.push((v.clone(), b.clone(), false));
            }
        }
    }
    let residual = if increment <= tolerance { increment } else { residual(&hull, planes) };
    let body = to_polytope(hull.vertices())?;
    if residual > tolerance {
        log::info!("projection closure stopped after {iterations} iterations with residual {residual:e}");
    }
    Ok(InvariantBodyResult { body, iterations, residual, converged: residual <= tolerance })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn to_polytope(vertices: &[Vec<f64>]) -> Result<VPolytope> {
    VPolytope::new(vertices.iter().map(|v| Point::from_f64(v)).collect::<Result<Vec<_>>>()?)
}

/// Whether every plane's projection of `body` lies within `tolerance` of
/// it. Checking vertices suffices by convexity.
pub fn check_invariant(body: &VPolytope, planes: &[Hyperplane], tolerance: f64) -> Result<(bool, f64)> {
    check_planes(planes, body.dim())?;
    let pts: Vec<Vec<f64>> = body.vertices().iter().map(Point::to_f64).collect();
    let hull = Hull::new(&pts)?;
    let res = pts
        .iter()
        .flat_map(|v| planes.iter().map(|h| hull.distance(&h.project_f64(v))))
        .fold(0.0, f64::max);
    Ok((res <= tolerance, res))
}
