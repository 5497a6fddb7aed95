//! How rays from a point meet a family: covering multiplicity, hit counts,
//! shadow arcs in the plane and the minimum number of missed bodies.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_distr_free::standard_normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersect_nonempty, ConvexBody, Direction, Mode, Point};
use crate::rational;

/// Largest family accepted by [`covering_multiplicity`].
pub const MAX_COVERING_FAMILY: usize = 16;

/// Angular slack used when testing closed-arc membership.
pub const ARC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    bodies: Vec<ConvexBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    dim: usize,
}

impl Family {
    pub fn new(bodies: Vec<ConvexBody>) -> Result<Self> {
        let first = bodies.first().ok_or(Error::Empty("family"))?;
        let dim = first.dim();
        for b in &bodies {
            Error::check_dim(dim, b.dim())?;
        }
        Ok(Family { bodies, labels: None, dim })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.bodies.len() {
            return Err(Error::invalid("one label per body required"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::invalid("labels must be unique"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn bodies(&self) -> &[ConvexBody] {
        &self.bodies
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, index: usize) -> Result<&ConvexBody> {
        self.bodies.get(index).ok_or(Error::IndexOutOfRange { index, len: self.bodies.len() })
    }

    pub fn mode(&self) -> Mode {
        self.bodies.iter().fold(Mode::Exact, |m, b| m.and(b.mode()))
    }

    /// Floating bounding box of the whole family.
    pub fn bbox_f64(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for b in &self.bodies {
            let (l, h) = b.bbox_f64();
            for k in 0..self.dim {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub c: usize,
    pub mode: Mode,
    pub witness: Option<Point>,
}

/// Maximum number of bodies sharing a point.
///
/// Feasible index sets are closed under taking subsets, so sets of size `m`
/// are only tested when all their `(m-1)`-subsets were feasible.
pub fn covering_multiplicity(family: &Family) -> Result<Multiplicity> {
    let n = family.len();
    if n > MAX_COVERING_FAMILY {
        return Err(Error::CapExceeded { what: "covering multiplicity family size", limit: MAX_COVERING_FAMILY, got: n });
    }
    let mut mode = family.mode();
    let mut level: Vec<(Vec<usize>, Option<Point>)> =
        (0..n).map(|i| (vec![i], Some(family.bodies[i].representative()))).collect();
    let mut best = (1, level[0].1.clone());
    while !level.is_empty() {
        let feasible: std::collections::HashSet<&[usize]> = level.iter().map(|(s, _)| s.as_slice()).collect();
        let mut candidates = Vec::new();
        for (i, (a, _)) in level.iter().enumerate() {
            for (b, _) in &level[i + 1..] {
                let k = a.len();
                if a[..k - 1] != b[..k - 1] {
                    continue;
                }
                let mut c = a.clone();
                c.push(b[k - 1]);
                let all_sub_ok = (0..c.len()).all(|drop| {
                    let sub: Vec<usize> = c.iter().enumerate().filter(|&(j, _)| j != drop).map(|(_, &v)| v).collect();
                    feasible.contains(sub.as_slice())
                });
                if all_sub_ok {
                    candidates.push(c);
                }
            }
        }
        let results: Vec<Result<(Vec<usize>, crate::geometry::Intersection)>> = candidates
            .into_par_iter()
            .map(|set| {
                let bodies: Vec<&ConvexBody> = set.iter().map(|&i| &family.bodies[i]).collect();
                intersect_nonempty(&bodies).map(|r| (set, r))
            })
            .collect();
        let mut next = Vec::new();
        for r in results {
            let (set, inter) = r?;
            mode = mode.and(inter.mode);
            if inter.nonempty {
                next.push((set, inter.witness));
            }
        }
        if let Some((set, w)) = next.first() {
            best = (set.len(), w.clone());
        }
        level = next;
    }
    Ok(Multiplicity { c: best.0, mode, witness: best.1 })
}

/// Number of bodies met by the ray from `p` along `u`.
pub fn hit_count(p: &Point, u: &Direction, family: &Family) -> Result<usize> {
    Error::check_dim(family.dim(), p.dim())?;
    let mut hits = 0;
    for b in &family.bodies {
        if b.ray_intersects(p, u)? {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Closed angular interval `[lo, hi]` (radians, `0 <= hi - lo <= 2π`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub body: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Arc {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full(&self) -> bool {
        self.width() >= TAU
    }

    pub fn contains(&self, theta: f64, tol: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let off = (theta - self.lo).rem_euclid(TAU);
        off <= self.width() + tol || off >= TAU - tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSet {
    pub arcs: Vec<Arc>,
}

/// Direction arcs of every body as seen from `p` in the plane.
pub fn shadow_arcs(p: &Point, family: &Family) -> Result<ArcSet> {
    if family.dim() != 2 {
        return Err(Error::Unsupported(format!("shadow arcs need d = 2, got d = {}", family.dim())));
    }
    Error::check_dim(2, p.dim())?;
    let pf = p.to_f64();
    let mut arcs = Vec::with_capacity(family.len());
    for (i, body) in family.bodies.iter().enumerate() {
        if body.contains(p)? {
            arcs.push(Arc { body: i, lo: -PI, hi: PI });
            continue;
        }
        let arc = match body {
            ConvexBody::Ball(b) => {
                let c = b.center().to_f64();
                let (dx, dy) = (c[0] - pf[0], c[1] - pf[1]);
                let dist = dx.hypot(dy);
                let half = (rational::to_f64(b.radius()) / dist).min(1.0).asin();
                let mid = dy.atan2(dx);
                Arc { body: i, lo: mid - half, hi: mid + half }
            }
            ConvexBody::Polytope(poly) => {
                // exact differences first so nearby vertices keep their order
                let angles: Vec<f64> = poly
                    .vertices()
                    .iter()
                    .map(|v| {
                        let dx = rational::to_f64(&(&v.coords()[0] - &p.coords()[0]));
                        let dy = rational::to_f64(&(&v.coords()[1] - &p.coords()[1]));
                        dy.atan2(dx)
                    })
                    .collect();
                let base = angles[0];
                let (mut lo, mut hi) = (0.0f64, 0.0f64);
                for a in &angles {
                    let rel = wrap_pi(a - base);
                    lo = lo.min(rel);
                    hi = hi.max(rel);
                }
                Arc { body: i, lo: base + lo, hi: base + hi }
            }
        };
        arcs.push(arc);
    }
    Ok(ArcSet { arcs })
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMissed {
    pub missed: usize,
    pub worst_direction: Direction,
    pub mode: MissMode,
}

/// Minimum over ray directions of the number of bodies the ray misses.
///
/// Exact (arc sweep) for `d <= 2`; for `d >= 3` an estimate over
/// `resolution` quasi-uniform directions plus the directions toward every
/// body, which can only over-estimate the true minimum.
pub fn min_missed(p: &Point, family: &Family, resolution: Option<usize>) -> Result<MinMissed> {
    Error::check_dim(family.dim(), p.dim())?;
    let n = family.len();
    match family.dim() {
        1 => {
            let mut best: Option<MinMissed> = None;
            for s in [1, -1] {
                let u = Direction::from_ints(&[s])?;
                let missed = n - hit_count(p, &u, family)?;
                if best.as_ref().is_none_or(|b| missed < b.missed) {
                    best = Some(MinMissed { missed, worst_direction: u, mode: MissMode::Exact });
                }
            }
            Ok(best.expect("two directions evaluated"))
        }
        2 => {
            let arcs = shadow_arcs(p, family)?;
            let (theta, hits) = max_arc_coverage(&arcs.arcs);
            Ok(MinMissed {
                missed: n - hits,
                worst_direction: Direction::from_f64(&[theta.cos(), theta.sin()])?,
                mode: MissMode::Exact,
            })
        }
        d => {
            let resolution = resolution
                .ok_or_else(|| Error::invalid(format!("min_missed in d = {d} needs a sampling resolution")))?;
            let dirs = sample_directions(p, family, resolution)?;
            let counts: Vec<Result<usize>> = dirs.par_iter().map(|u| hit_count(p, u, family)).collect();
            let mut best: Option<(usize, usize)> = None;
            for (i, c) in counts.into_iter().enumerate() {
                let missed = n - c?;
                if best.is_none_or(|(m, _)| missed < m) {
                    best = Some((missed, i));
                }
            }
            let (missed, i) = best.ok_or(Error::Empty("sampled directions"))?;
            Ok(MinMissed { missed, worst_direction: dirs[i].clone(), mode: MissMode::Sampled })
        }
    }
}

/// Angle covered by the most arcs. Interior points of elementary arcs are
/// preferred; a shared endpoint is only returned when strictly better.
pub fn max_arc_coverage(arcs: &[Arc]) -> (f64, usize) {
    let count = |theta: f64| arcs.iter().filter(|a| a.contains(theta, ARC_TOLERANCE)).count();
    let mut ends: Vec<f64> = arcs
        .iter()
        .filter(|a| !a.is_full())
        .flat_map(|a| [a.lo.rem_euclid(TAU), a.hi.rem_euclid(TAU)])
        .collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    if ends.is_empty() {
        return (0.0, count(0.0));
    }
    let mut best = (f64::NAN, 0usize, false);
    for (i, &a) in ends.iter().enumerate() {
        let b = if i + 1 < ends.len() { ends[i + 1] } else { ends[0] + TAU };
        let mid = if b - a > 0.0 { 0.5 * (a + b) } else { a + PI };
        let c = count(mid);
        if best.0.is_nan() || c > best.1 {
            best = (mid, c, true);
        }
    }
    for &e in &ends {
        let c = count(e);
        if c > best.1 {
            best = (e, c, false);
        }
    }
    (best.0.rem_euclid(TAU), best.1)
}

fn sample_directions(p: &Point, family: &Family, resolution: usize) -> Result<Vec<Direction>> {
    let d = family.dim();
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(resolution + 3 * family.len());
    if d == 3 {
        // Fibonacci sphere
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..resolution {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / resolution as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            raw.push(vec![r * phi.cos(), r * phi.sin(), z]);
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..resolution {
            raw.push((0..d).map(|_| standard_normal(&mut rng)).collect());
        }
    }
    let pf = p.to_f64();
    for b in &family.bodies {
        let proj = b.project_f64(&pf);
        let w: Vec<f64> = proj.iter().zip(&pf).map(|(a, b)| a - b).collect();
        if w.iter().any(|x| x.abs() > 0.0) {
            raw.push(w.iter().map(|x| -x).collect());
            raw.push(w);
        }
        let c: Vec<f64> = b.representative().to_f64().iter().zip(&pf).map(|(a, b)| a - b).collect();
        if c.iter().any(|x| x.abs() > 0.0) {
            raw.push(c);
        }
    }
    raw.into_iter()
        .filter(|v| v.iter().any(|x| x.abs() > 1e-300))
        .map(|v| {
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let coords = v
                .iter()
                .map(|x| rational::from_f64_rounded(x / scale, 24))
                .collect::<Result<Vec<_>>>()?;
            Direction::new(coords)
        })
        .filter(|r| !matches!(r, Err(Error::Invalid(_))))
        .collect()
}

/// Box-Muller standard normals, so the sampler does not need `rand_distr`.
mod rand_distr_free {
    use rand::Rng;

    pub fn standard_normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, VPolytope};
    use crate::rational::{rat, ratio};

    fn ball(x: i64, y: i64, r: crate::Rational) -> ConvexBody {
        Ball::new(Point::from_ints(&[x, y]), r).unwrap().into()
    }

    #[test]
    fn multiplicity_examples() {
        let disjoint = Family::new(vec![
            ball(0, 0, rat(1)),
            ball(5, 0, rat(1)),
            ball(0, 5, rat(1)),
            ball(5, 5, rat(1)),
        ])
        .unwrap();
        let m = covering_multiplicity(&disjoint).unwrap();
        assert_eq!((m.c, m.mode), (1, Mode::Approximate));

        let squares = Family::new(vec![
            VPolytope::cube(2, &rat(0), &rat(2)).into(),
            VPolytope::cube(2, &rat(1), &rat(3)).into(),
        ])
        .unwrap();
        let m = covering_multiplicity(&squares).unwrap();
        assert_eq!((m.c, m.mode), (2, Mode::Exact));
        let w = m.witness.unwrap();
        assert!(squares.bodies().iter().all(|b| b.contains(&w).unwrap()));
    }

    #[test]
    fn three_triangles_sharing_one_point() {
        // all contain the origin; the three pairwise overlaps are thin wedges
        let fam = Family::new(vec![
            VPolytope::from_ints(&[&[0, 0], &[4, 1], &[4, -1]]).unwrap().into(),
            VPolytope::from_ints(&[&[0, 0], &[-2, 4], &[1, 4]]).unwrap().into(),
            VPolytope::from_ints(&[&[0, 0], &[-4, -3], &[-3, -4]]).unwrap().into(),
            VPolytope::from_ints(&[&[1, 0], &[3, 3], &[0, 3]]).unwrap().into(),
        ])
        .unwrap();
        // subset oracle: check every subset by brute-force LP
        let mut oracle = 0;
        crate::geometry::for_each_subset(4, 4, |s| {
            let bodies: Vec<&ConvexBody> = s.iter().map(|&i| &fam.bodies()[i]).collect();
            if intersect_nonempty(&bodies).unwrap().nonempty {
                oracle = oracle.max(s.len());
            }
        });
        let m = covering_multiplicity(&fam).unwrap();
        assert_eq!(m.c, oracle);
        assert_eq!(m.c, 3);
    }

    #[test]
    fn cap_is_enforced() {
        let fam = Family::new((0..17).map(|i| ball(10 * i, 0, rat(1))).collect()).unwrap();
        assert!(matches!(covering_multiplicity(&fam), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn hit_count_examples() {
        let o = Point::from_ints(&[0, 0]);
        let one = Family::new(vec![ball(0, 0, rat(1))]).unwrap();
        for u in [[1, 0], [0, 1], [-3, 7]] {
            assert_eq!(hit_count(&o, &Direction::from_ints(&u).unwrap(), &one).unwrap(), 1);
        }
        let pair = Family::new(vec![ball(3, 0, rat(1)), ball(-3, 0, rat(1))]).unwrap();
        assert_eq!(hit_count(&o, &Direction::from_ints(&[1, 0]).unwrap(), &pair).unwrap(), 1);
    }

    #[test]
    fn shadow_arc_examples() {
        let o = Point::from_ints(&[0, 0]);
        let fam = Family::new(vec![
            ball(2, 0, rat(1)),
            VPolytope::from_ints(&[&[1, -1], &[1, 1]]).unwrap().into(),
            ball(0, 0, ratio(1, 2)),
        ])
        .unwrap();
        let arcs = shadow_arcs(&o, &fam).unwrap().arcs;
        assert!((arcs[0].lo + PI / 6.0).abs() < 1e-12 && (arcs[0].hi - PI / 6.0).abs() < 1e-12);
        assert!((arcs[1].lo + PI / 4.0).abs() < 1e-12 && (arcs[1].hi - PI / 4.0).abs() < 1e-12);
        assert!(arcs[2].is_full());
        let fam3 = Family::new(vec![VPolytope::cube(3, &rat(1), &rat(2)).into()]).unwrap();
        assert!(shadow_arcs(&Point::from_ints(&[0, 0, 0]), &fam3).is_err());
    }

    #[test]
    fn arc_across_the_branch_cut() {
        let o = Point::from_ints(&[0, 0]);
        let fam = Family::new(vec![VPolytope::from_ints(&[&[-2, 1], &[-2, -1]]).unwrap().into()]).unwrap();
        let a = shadow_arcs(&o, &fam).unwrap().arcs[0];
        assert!((a.width() - 2.0 * 0.5f64.atan()).abs() < 1e-12);
        assert!(a.contains(PI, 0.0) && a.contains(-PI, 0.0) && !a.contains(0.0, 0.0));
    }

    #[test]
    fn min_missed_examples() {
        let o = Point::from_ints(&[0, 0]);
        let inside = Family::new(vec![ball(0, 0, rat(1))]).unwrap();
        assert_eq!(min_missed(&o, &inside, None).unwrap().missed, 0);

        let pair = Family::new(vec![ball(3, 0, rat(1)), ball(-3, 0, rat(1))]).unwrap();
        let m = min_missed(&o, &pair, None).unwrap();
        assert_eq!((m.missed, m.mode), (1, MissMode::Exact));
        assert_eq!(hit_count(&o, &m.worst_direction, &pair).unwrap(), 1);
    }

    #[test]
    fn three_symmetric_balls_match_direction_oracle() {
        let o = Point::from_ints(&[0, 0]);
        let r = ratio(1, 4);
        let fam = Family::new(vec![
            Ball::new(Point::from_ints(&[2, 0]), r.clone()).unwrap().into(),
            Ball::new(Point::new(vec![rat(-1), crate::rational::parse_rational("1.7320508075688772").unwrap()]).unwrap(), r.clone())
                .unwrap()
                .into(),
            Ball::new(Point::new(vec![rat(-1), crate::rational::parse_rational("-1.7320508075688772").unwrap()]).unwrap(), r)
                .unwrap()
                .into(),
        ])
        .unwrap();
        let m = min_missed(&o, &fam, None).unwrap();
        assert_eq!(m.missed, 2);
        // oracle: 10^5 uniform directions, floating distance-to-ray test
        let centers = [(2.0, 0.0), (-1.0, 3f64.sqrt()), (-1.0, -(3f64.sqrt()))];
        let mut oracle = usize::MAX;
        for i in 0..100_000 {
            let t = TAU * i as f64 / 100_000.0;
            let (ux, uy) = (t.cos(), t.sin());
            let hits = centers
                .iter()
                .filter(|(cx, cy)| {
                    let s = cx * ux + cy * uy;
                    let perp2 = cx * cx + cy * cy - s * s;
                    s >= 0.0 && perp2 <= 1.0 / 16.0
                })
                .count();
            oracle = oracle.min(3 - hits);
        }
        assert_eq!(oracle, 2);
    }

    #[test]
    fn min_missed_in_one_and_three_dims() {
        let fam1 = Family::new(vec![
            VPolytope::from_ints(&[&[1], &[2]]).unwrap().into(),
            VPolytope::from_ints(&[&[3], &[4]]).unwrap().into(),
            VPolytope::from_ints(&[&[-2], &[-1]]).unwrap().into(),
        ])
        .unwrap();
        let m = min_missed(&Point::from_ints(&[0]), &fam1, None).unwrap();
        assert_eq!((m.missed, m.mode), (1, MissMode::Exact));

        let fam3 = Family::new(vec![
            VPolytope::cube(3, &rat(2), &rat(3)).into(),
            VPolytope::cube(3, &rat(-3), &rat(-2)).into(),
        ])
        .unwrap();
        assert!(min_missed(&Point::from_ints(&[0, 0, 0]), &fam3, None).is_err());
        let m = min_missed(&Point::from_ints(&[0, 0, 0]), &fam3, Some(200)).unwrap();
        assert_eq!((m.missed, m.mode), (1, MissMode::Sampled));
    }

    #[test]
    fn labels_must_be_unique() {
        let fam = Family::new(vec![ball(0, 0, rat(1)), ball(5, 0, rat(1))]).unwrap();
        assert!(fam.clone().with_labels(vec!["a".into(), "a".into()]).is_err());
        assert!(fam.with_labels(vec!["a".into(), "b".into()]).is_ok());
    }
}
