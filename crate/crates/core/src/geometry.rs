//! Points, rays and compact convex bodies, with exact predicates.
//!
//! Polytope predicates (containment, projection, ray hits, common points) are
//! exact over [`Rational`]. Ball projections are irrational; they are computed
//! in `f64`, converted back exactly, and tagged [`Mode::Approximate`].

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{self, LinearProgram, LpOutcome, Relation};
use crate::rational::{self, dot, rat, serde_rational, serde_rational_vec, sub, Rational};

/// Global floating tolerance for ball-involving results.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Approximate,
}

impl Mode {
    pub fn and(self, other: Mode) -> Mode {
        if self == Mode::Exact && other == Mode::Exact {
            Mode::Exact
        } else {
            Mode::Approximate
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PointRaw", into = "PointRaw")]
pub struct Point(Vec<Rational>);

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct PointRaw(#[serde(with = "serde_rational_vec")] Vec<Rational>);

impl TryFrom<PointRaw> for Point {
    type Error = Error;
    fn try_from(raw: PointRaw) -> Result<Self> {
        Point::new(raw.0)
    }
}

impl From<Point> for PointRaw {
    fn from(p: Point) -> Self {
        PointRaw(p.0)
    }
}

impl Point {
    pub fn new(coords: Vec<Rational>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        Ok(Point(coords))
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Point::new(coords.iter().map(|&c| rat(c)).collect()).expect("nonempty coordinates")
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Point::new(coords.iter().map(|&c| rational::from_f64(c)).collect::<Result<_>>()?)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![Rational::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<Rational> {
        self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }

    pub fn sq_dist(&self, other: &Point) -> Rational {
        let d = sub(&self.0, &other.0);
        dot(&d, &d)
    }

    pub fn offset(&self, dir: &[Rational], t: &Rational) -> Point {
        Point(self.0.iter().zip(dir).map(|(a, b)| a + b * t).collect())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Nonzero, unnormalized ray direction.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PointRaw", into = "PointRaw")]
pub struct Direction(Vec<Rational>);

impl TryFrom<PointRaw> for Direction {
    type Error = Error;
    fn try_from(raw: PointRaw) -> Result<Self> {
        Direction::new(raw.0)
    }
}

impl From<Direction> for PointRaw {
    fn from(d: Direction) -> Self {
        PointRaw(d.0)
    }
}

impl Direction {
    pub fn new(vec: Vec<Rational>) -> Result<Self> {
        if vec.is_empty() {
            return Err(Error::Empty("direction coordinates"));
        }
        if vec.iter().all(Zero::is_zero) {
            return Err(Error::invalid("direction must be nonzero"));
        }
        Ok(Direction(vec))
    }

    pub fn from_ints(v: &[i64]) -> Result<Self> {
        Direction::new(v.iter().map(|&c| rat(c)).collect())
    }

    pub fn from_f64(v: &[f64]) -> Result<Self> {
        Direction::new(v.iter().map(|&c| rational::from_f64(c)).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vec(&self) -> &[Rational] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }

    pub fn scaled(&self, s: &Rational) -> Result<Direction> {
        Direction::new(self.0.iter().map(|c| c * s).collect())
    }
}

impl fmt::Debug for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dir{:?}", Point(self.0.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BallRaw", into = "BallRaw")]
pub struct Ball {
    center: Point,
    radius: Rational,
}

#[derive(Serialize, Deserialize)]
struct BallRaw {
    center: Point,
    #[serde(with = "serde_rational")]
    radius: Rational,
}

impl TryFrom<BallRaw> for Ball {
    type Error = Error;
    fn try_from(raw: BallRaw) -> Result<Self> {
        Ball::new(raw.center, raw.radius)
    }
}

impl From<Ball> for BallRaw {
    fn from(b: Ball) -> Self {
        BallRaw { center: b.center, radius: b.radius }
    }
}

impl Ball {
    pub fn new(center: Point, radius: Rational) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::invalid("ball radius must be positive"));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> &Rational {
        &self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRaw", into = "PolytopeRaw")]
pub struct VPolytope {
    vertices: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRaw {
    vertices: Vec<Point>,
}

impl TryFrom<PolytopeRaw> for VPolytope {
    type Error = Error;
    fn try_from(raw: PolytopeRaw) -> Result<Self> {
        VPolytope::new(raw.vertices)
    }
}

impl From<VPolytope> for PolytopeRaw {
    fn from(p: VPolytope) -> Self {
        PolytopeRaw { vertices: p.vertices }
    }
}

impl VPolytope {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::Empty("polytope vertices"))?;
        let d = first.dim();
        for v in &vertices {
            Error::check_dim(d, v.dim())?;
        }
        Ok(VPolytope { vertices })
    }

    pub fn from_ints(vertices: &[&[i64]]) -> Result<Self> {
        VPolytope::new(vertices.iter().map(|v| Point::from_ints(v)).collect())
    }

    /// Axis-aligned box `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: &Rational, hi: &Rational) -> Self {
        let vertices = (0..1usize << dim)
            .map(|mask| {
                Point((0..dim).map(|k| if mask >> k & 1 == 1 { hi.clone() } else { lo.clone() }).collect())
            })
            .collect();
        VPolytope { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConvexBody {
    Ball(Ball),
    Polytope(VPolytope),
}

impl From<Ball> for ConvexBody {
    fn from(b: Ball) -> Self {
        ConvexBody::Ball(b)
    }
}

impl From<VPolytope> for ConvexBody {
    fn from(p: VPolytope) -> Self {
        ConvexBody::Polytope(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Point,
    pub sq_dist: Rational,
    pub mode: Mode,
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball(b) => b.center.dim(),
            ConvexBody::Polytope(p) => p.dim(),
        }
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self, ConvexBody::Polytope(_))
    }

    pub fn mode(&self) -> Mode {
        match self {
            ConvexBody::Ball(_) => Mode::Approximate,
            ConvexBody::Polytope(_) => Mode::Exact,
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        Error::check_dim(self.dim(), d)
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        self.check(x.dim())?;
        Ok(match self {
            ConvexBody::Ball(b) => b.center.sq_dist(x) <= &b.radius * &b.radius,
            ConvexBody::Polytope(p) => polytope_contains(p, x),
        })
    }

    pub fn project(&self, x: &Point) -> Result<Projection> {
        self.check(x.dim())?;
        match self {
            ConvexBody::Ball(b) => {
                let sq = b.center.sq_dist(x);
                let r2 = &b.radius * &b.radius;
                if sq <= r2 {
                    return Ok(Projection { point: x.clone(), sq_dist: Rational::zero(), mode: Mode::Exact });
                }
                let pf = project_ball_f64(&b.center.to_f64(), rational::to_f64(&b.radius), &x.to_f64());
                let point = Point::from_f64(&pf)?;
                let sq_dist = point.sq_dist(x);
                Ok(Projection { point, sq_dist, mode: Mode::Approximate })
            }
            ConvexBody::Polytope(p) => {
                let (point, sq_dist) = project_polytope_exact(p, x);
                Ok(Projection { point, sq_dist, mode: Mode::Exact })
            }
        }
    }

    pub fn project_f64(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexBody::Ball(b) => project_ball_f64(&b.center.to_f64(), rational::to_f64(&b.radius), x),
            ConvexBody::Polytope(p) => {
                let verts: Vec<Vec<f64>> = p.vertices.iter().map(Point::to_f64).collect();
                nearest_point_f64(&verts, x).0
            }
        }
    }

    /// Whether the ray `{p + t u : t >= 0}` meets the body.
    pub fn ray_intersects(&self, p: &Point, u: &Direction) -> Result<bool> {
        self.check(p.dim())?;
        self.check(u.dim())?;
        Ok(match self {
            ConvexBody::Ball(b) => ray_hits_ball(b, p, u),
            ConvexBody::Polytope(poly) => ray_hits_polytope(poly, p, u),
        })
    }

    /// Axis-aligned bounding box in floating point.
    pub fn bbox_f64(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexBody::Ball(b) => {
                let c = b.center.to_f64();
                let r = rational::to_f64(&b.radius);
                (c.iter().map(|x| x - r).collect(), c.iter().map(|x| x + r).collect())
            }
            ConvexBody::Polytope(p) => {
                let d = p.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in &p.vertices {
                    for (k, c) in v.to_f64().into_iter().enumerate() {
                        lo[k] = lo[k].min(c);
                        hi[k] = hi[k].max(c);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// A point of the body: the center or the vertex average.
    pub fn representative(&self) -> Point {
        match self {
            ConvexBody::Ball(b) => b.center.clone(),
            ConvexBody::Polytope(p) => {
                let n = rat(p.vertices.len() as i64);
                let d = p.dim();
                let mut acc = vec![Rational::zero(); d];
                for v in &p.vertices {
                    for (a, c) in acc.iter_mut().zip(v.coords()) {
                        *a += c;
                    }
                }
                Point(acc.into_iter().map(|a| a / &n).collect())
            }
        }
    }

    /// Applies an affine map `x -> m x + t` to the body. The map must be a
    /// similarity for balls (rows orthogonal with equal norm `scale`).
    pub fn map_affine(&self, m: &[Vec<Rational>], t: &[Rational], scale: &Rational) -> Result<ConvexBody> {
        let apply = |p: &Point| -> Point {
            Point(m.iter().zip(t).map(|(row, ti)| dot(row, p.coords()) + ti).collect())
        };
        Ok(match self {
            ConvexBody::Ball(b) => Ball::new(apply(&b.center), &b.radius * scale)?.into(),
            ConvexBody::Polytope(p) => VPolytope::new(p.vertices.iter().map(apply).collect())?.into(),
        })
    }
}

fn polytope_contains(p: &VPolytope, x: &Point) -> bool {
    let nv = p.vertices.len();
    let mut lp = LinearProgram::<Rational>::new(nv);
    for k in 0..x.dim() {
        lp.add(p.vertices.iter().map(|v| v.coords()[k].clone()).collect(), Relation::Eq, x.coords()[k].clone());
    }
    lp.add(vec![rat(1); nv], Relation::Eq, rat(1));
    lp.is_feasible()
}

fn ray_hits_polytope(p: &VPolytope, from: &Point, u: &Direction) -> bool {
    // sum λ_j v_j - t u = from, sum λ = 1, λ, t >= 0
    let nv = p.vertices.len();
    let mut lp = LinearProgram::<Rational>::new(nv + 1);
    for k in 0..from.dim() {
        let mut row: Vec<Rational> = p.vertices.iter().map(|v| v.coords()[k].clone()).collect();
        row.push(-u.vec()[k].clone());
        lp.add(row, Relation::Eq, from.coords()[k].clone());
    }
    let mut sum = vec![rat(1); nv];
    sum.push(rat(0));
    lp.add(sum, Relation::Eq, rat(1));
    lp.is_feasible()
}

fn ray_hits_ball(b: &Ball, p: &Point, u: &Direction) -> bool {
    // q(t) = a t^2 + bt t + c0 <= 0 for some t >= 0
    let w = sub(p.coords(), b.center.coords());
    let a = dot(u.vec(), u.vec());
    let bt = rat(2) * dot(u.vec(), &w);
    let c0 = dot(&w, &w) - &b.radius * &b.radius;
    if !c0.is_positive() {
        return true;
    }
    bt.is_negative() && &bt * &bt >= rat(4) * a * c0
}

fn project_ball_f64(center: &[f64], radius: f64, x: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        return x.to_vec();
    }
    center.iter().zip(&diff).map(|(c, d)| c + radius * d / norm).collect()
}

/// Nearest point of `aff(verts[subset])` to `x`, if it lies in the convex
/// hull of the subset. Returns the point and its barycentric weights.
fn nearest_on_subset<F: lp::Field>(verts: &[Vec<F>], subset: &[usize], x: &[F]) -> Option<(Vec<F>, Vec<F>)> {
    let v0 = &verts[subset[0]];
    let k = subset.len() - 1;
    let d = x.len();
    let diffs: Vec<Vec<F>> = subset[1..]
        .iter()
        .map(|&j| verts[j].iter().zip(v0).map(|(a, b)| a.sub(b)).collect())
        .collect();
    let xv: Vec<F> = x.iter().zip(v0).map(|(a, b)| a.sub(b)).collect();
    let fdot = |a: &[F], b: &[F]| a.iter().zip(b).fold(F::zero(), |acc, (p, q)| acc.add(&p.mul(q)));
    let mu = if k == 0 {
        Vec::new()
    } else {
        let gram: Vec<Vec<F>> = diffs.iter().map(|a| diffs.iter().map(|b| fdot(a, b)).collect()).collect();
        let rhs: Vec<F> = diffs.iter().map(|a| fdot(a, &xv)).collect();
        linalg::solve(&gram, &rhs)?
    };
    let mut lambda = Vec::with_capacity(k + 1);
    let sum_mu = mu.iter().fold(F::zero(), |acc, m| acc.add(m));
    lambda.push(F::one().sub(&sum_mu));
    lambda.extend(mu.iter().cloned());
    if lambda.iter().any(F::is_negative) {
        return None;
    }
    let mut point = v0.clone();
    for (m, dv) in mu.iter().zip(&diffs) {
        for c in 0..d {
            point[c] = point[c].add(&m.mul(&dv[c]));
        }
    }
    Some((point, lambda))
}

/// Visits every vertex subset of size `1..=max_size` in (size, lexicographic)
/// order.
pub fn for_each_subset(n: usize, max_size: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = Vec::new();
    for size in 1..=max_size.min(n) {
        idx.clear();
        idx.extend(0..size);
        loop {
            f(&idx);
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

/// Floating nearest point on `conv(verts)` by face enumeration. Also returns
/// the subset whose affine hull carries the minimizer.
pub fn nearest_point_f64(verts: &[Vec<f64>], x: &[f64]) -> (Vec<f64>, f64, Vec<usize>) {
    let d = x.len();
    let mut best: Option<(Vec<f64>, f64, Vec<usize>)> = None;
    for_each_subset(verts.len(), d + 1, |s| {
        if let Some((pt, _)) = nearest_on_subset(verts, s, x) {
            let sq: f64 = pt.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|b| sq < b.1 - 1e-15) {
                best = Some((pt, sq, s.to_vec()));
            }
        }
    });
    best.expect("singleton subsets are always feasible")
}

fn variational_ok(verts: &[Vec<Rational>], pi: &[Rational], x: &[Rational]) -> bool {
    let xp = sub(x, pi);
    verts.iter().all(|v| !dot(&sub(v, pi), &xp).is_positive())
}

/// Exact nearest point of a polytope. A floating face search proposes the
/// carrier subset; the exact candidate is accepted only if it passes the
/// variational inequality, otherwise every subset is enumerated exactly.
fn project_polytope_exact(p: &VPolytope, x: &Point) -> (Point, Rational) {
    let verts: Vec<Vec<Rational>> = p.vertices.iter().map(|v| v.coords().to_vec()).collect();
    let xs = x.coords();
    let vf: Vec<Vec<f64>> = p.vertices.iter().map(Point::to_f64).collect();
    let (_, _, guess) = nearest_point_f64(&vf, &x.to_f64());
    if let Some((pi, _)) = nearest_on_subset(&verts, &guess, xs) {
        if variational_ok(&verts, &pi, xs) {
            let d = sub(xs, &pi);
            let sq = dot(&d, &d);
            return (Point(pi), sq);
        }
    }
    let mut best: Option<(Vec<Rational>, Rational)> = None;
    for_each_subset(verts.len(), xs.len() + 1, |s| {
        if let Some((pi, _)) = nearest_on_subset(&verts, s, xs) {
            let d = sub(xs, &pi);
            let sq = dot(&d, &d);
            if best.as_ref().is_none_or(|b| sq < b.1) {
                best = Some((pi, sq));
            }
        }
    });
    let (pi, sq) = best.expect("singleton subsets are always feasible");
    (Point(pi), sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub nonempty: bool,
    pub mode: Mode,
    pub witness: Option<Point>,
}

/// Iteration cap of the alternating-projection fallback.
pub const ALTERNATING_PROJECTION_CAP: usize = 10_000;

/// Whether the bodies share a point. Exact for all-polytope input, otherwise
/// an alternating-projection verdict flagged approximate.
pub fn intersect_nonempty(bodies: &[&ConvexBody]) -> Result<Intersection> {
    let first = bodies.first().ok_or(Error::Empty("body list"))?;
    let d = first.dim();
    for b in bodies {
        b.check(d)?;
    }
    if bodies.iter().all(|b| b.is_polytope()) {
        return Ok(polytopes_intersect(bodies, d));
    }
    Ok(alternating_projection(bodies, d, DEFAULT_TOLERANCE))
}

fn polytopes_intersect(bodies: &[&ConvexBody], d: usize) -> Intersection {
    let polys: Vec<&VPolytope> = bodies
        .iter()
        .map(|b| match b {
            ConvexBody::Polytope(p) => p,
            ConvexBody::Ball(_) => unreachable!(),
        })
        .collect();
    let nvars = d + polys.iter().map(|p| p.vertices.len()).sum::<usize>();
    let mut lp = LinearProgram::<Rational>::new(nvars);
    for k in 0..d {
        lp.set_free(k);
    }
    let mut offset = d;
    for p in &polys {
        let nv = p.vertices.len();
        for k in 0..d {
            let mut row = vec![Rational::zero(); nvars];
            row[k] = rat(-1);
            for (j, v) in p.vertices.iter().enumerate() {
                row[offset + j] = v.coords()[k].clone();
            }
            lp.add(row, Relation::Eq, Rational::zero());
        }
        let mut row = vec![Rational::zero(); nvars];
        for j in 0..nv {
            row[offset + j] = rat(1);
        }
        lp.add(row, Relation::Eq, rat(1));
        offset += nv;
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Intersection {
            nonempty: true,
            mode: Mode::Exact,
            witness: Some(Point(x[..d].to_vec())),
        },
        _ => Intersection { nonempty: false, mode: Mode::Exact, witness: None },
    }
}

fn alternating_projection(bodies: &[&ConvexBody], d: usize, tol: f64) -> Intersection {
    let approx = |nonempty, x: &[f64]| Intersection {
        nonempty,
        mode: Mode::Approximate,
        witness: if nonempty { Point::from_f64(x).ok() } else { None },
    };
    let mut x = bodies[0].representative().to_f64();
    debug_assert_eq!(x.len(), d);
    for _ in 0..ALTERNATING_PROJECTION_CAP {
        let start = x.clone();
        for b in bodies {
            x = b.project_f64(&x);
        }
        let worst = bodies
            .iter()
            .map(|b| dist_f64(&b.project_f64(&x), &x))
            .fold(0.0f64, f64::max);
        if worst <= tol {
            return approx(true, &x);
        }
        if dist_f64(&start, &x) <= 1e-15 {
            return approx(false, &x);
        }
    }
    approx(false, &x)
}

pub(crate) fn dist_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
