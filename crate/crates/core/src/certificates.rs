//! Exact verification of escape certificates.
//!
//! A subfamily escapes at `p` when `p` lies outside every member and `0` is
//! a convex combination of the vectors `π_K(p) - p`. By Gordan's alternative
//! no direction then has a positive inner product with all of them, and the
//! variational inequality of the projection turns a non-positive inner
//! product into a miss: every ray from `p` avoids some member.

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coverage::{min_missed, Family, MissMode};
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Direction, Mode, Point, DEFAULT_TOLERANCE};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::rational::{self, rat, serde_rational_vec, sub, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubfamilyEscapeCertificate {
    pub p: Point,
    pub member_indices: Vec<usize>,
    pub projections: Vec<Point>,
    #[serde(with = "serde_rational_vec")]
    pub hull_coefficients: Vec<Rational>,
    pub mode: Mode,
    /// Smallest singular value of the `[π_K(p) - p; 1]` system, reported
    /// when ball members make the certificate approximate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl SubfamilyEscapeCertificate {
    /// Re-checks `Σ μ_K (π_K(p) - p) = 0`, `Σ μ_K = 1`, `μ >= 0` by plain
    /// arithmetic. Only meaningful as an identity in exact mode.
    pub fn coefficients_balance(&self) -> bool {
        let mu = &self.hull_coefficients;
        if mu.len() != self.projections.len() || mu.iter().any(Signed::is_negative) {
            return false;
        }
        if mu.iter().fold(Rational::zero(), |a, m| a + m) != rat(1) {
            return false;
        }
        let d = self.p.dim();
        let mut acc = vec![Rational::zero(); d];
        for (m, proj) in mu.iter().zip(&self.projections) {
            for (a, w) in acc.iter_mut().zip(sub(proj.coords(), self.p.coords())) {
                *a += m * w;
            }
        }
        acc.iter().all(Zero::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TverbergRayCertificate {
    pub p: Point,
    pub subfamilies: Vec<SubfamilyEscapeCertificate>,
}

impl TverbergRayCertificate {
    pub fn mode(&self) -> Mode {
        self.subfamilies.iter().fold(Mode::Exact, |m, s| m.and(s.mode))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum EscapeFailure {
    /// Condition (a): `p` lies in (or within tolerance of) this member.
    ContainsPoint { member: usize },
    /// Condition (b): every projection vector has positive inner product
    /// with `separating`.
    NotSurrounded { separating: Direction },
}

/// Ball members must keep `p` at distance greater than this.
pub fn ball_clearance() -> Rational {
    rational::from_f64(DEFAULT_TOLERANCE).expect("finite tolerance")
}

/// Checks the escape condition for `members` at `p`. Member indices in the
/// returned certificate are positions in `members`.
pub fn check_escape(p: &Point, members: &[&ConvexBody]) -> Result<Result<SubfamilyEscapeCertificate, EscapeFailure>> {
    if members.is_empty() {
        return Err(Error::Empty("escape members"));
    }
    let d = p.dim();
    for m in members {
        Error::check_dim(m.dim(), d)?;
    }
    let clearance = ball_clearance();
    let mut projections = Vec::with_capacity(members.len());
    // vectors fed to the hull LP: π_K(p) - p for polytopes, c - p (a positive
    // multiple of it) for balls
    let mut dirs = Vec::with_capacity(members.len());
    let mut mode = Mode::Exact;
    for (i, body) in members.iter().enumerate() {
        match body {
            ConvexBody::Polytope(_) => {
                let pr = body.project(p)?;
                if pr.sq_dist.is_zero() {
                    return Ok(Err(EscapeFailure::ContainsPoint { member: i }));
                }
                dirs.push(sub(pr.point.coords(), p.coords()));
                projections.push(pr.point);
            }
            ConvexBody::Ball(b) => {
                let gap = b.radius() + &clearance;
                if b.center().sq_dist(p) <= &gap * &gap {
                    return Ok(Err(EscapeFailure::ContainsPoint { member: i }));
                }
                mode = Mode::Approximate;
                dirs.push(sub(b.center().coords(), p.coords()));
                projections.push(body.project(p)?.point);
            }
        }
    }

    let k = dirs.len();
    let mut lp = LinearProgram::<Rational>::new(k);
    for c in 0..d {
        lp.add(dirs.iter().map(|w| w[c].clone()).collect(), Relation::Eq, Rational::zero());
    }
    lp.add(vec![rat(1); k], Relation::Eq, rat(1));
    let mu = match lp.solve() {
        LpOutcome::Optimal { x, .. } => x,
        _ => return Ok(Err(EscapeFailure::NotSurrounded { separating: separating_direction(&dirs)? })),
    };

    let (hull_coefficients, margin) = if mode == Mode::Exact {
        (mu, None)
    } else {
        rescale_for_balls(p, members, &projections, &mu)?
    };
    Ok(Ok(SubfamilyEscapeCertificate {
        p: p.clone(),
        member_indices: (0..k).collect(),
        projections,
        hull_coefficients,
        mode,
        margin,
    }))
}

/// Escape check for `indices` of `family`, with family indices recorded.
pub fn check_escape_in(
    p: &Point,
    family: &Family,
    indices: &[usize],
) -> Result<Result<SubfamilyEscapeCertificate, EscapeFailure>> {
    let members = indices.iter().map(|&i| family.get(i)).collect::<Result<Vec<_>>>()?;
    Ok(match check_escape(p, &members)? {
        Ok(mut cert) => {
            cert.member_indices = indices.to_vec();
            Ok(cert)
        }
        Err(EscapeFailure::ContainsPoint { member }) => Err(EscapeFailure::ContainsPoint { member: indices[member] }),
        Err(e) => Err(e),
    })
}

/// `u` with `u·w >= 1` for every `w`; exists exactly when `0 ∉ conv(ws)`.
fn separating_direction(ws: &[Vec<Rational>]) -> Result<Direction> {
    let d = ws[0].len();
    let mut lp = LinearProgram::<Rational>::new(d);
    lp.set_all_free();
    for w in ws {
        lp.add(w.clone(), Relation::Ge, rat(1));
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Direction::new(x),
        other => Err(Error::invalid(format!("Gordan alternative violated: {other:?}"))),
    }
}

/// Converts weights on `c - p` into weights on the floating projection
/// vectors and measures how well-conditioned the hull system is.
fn rescale_for_balls(
    p: &Point,
    members: &[&ConvexBody],
    projections: &[Point],
    mu: &[Rational],
) -> Result<(Vec<Rational>, Option<f64>)> {
    let pf = p.to_f64();
    let mut weights = Vec::with_capacity(mu.len());
    for (body, m) in members.iter().zip(mu) {
        let m = rational::to_f64(m);
        let w = match body {
            ConvexBody::Ball(b) => {
                let c = b.center().to_f64();
                let dist = crate::geometry::dist_f64(&c, &pf);
                m / (1.0 - rational::to_f64(b.radius()) / dist)
            }
            ConvexBody::Polytope(_) => m,
        };
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    let coeffs = weights
        .iter()
        .map(|w| rational::from_f64(w / total))
        .collect::<Result<Vec<_>>>()?;

    let d = pf.len();
    let k = projections.len();
    let mat = DMatrix::from_fn(d + 1, k, |r, c| {
        if r < d {
            projections[c].to_f64()[r] - pf[r]
        } else {
            1.0
        }
    });
    let sv = mat.singular_values();
    let margin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((coeffs, Some(margin)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub mode: Mode,
}

impl Report {
    fn new() -> Self {
        Report { checks: Vec::new(), mode: Mode::Exact }
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Re-verifies a Theorem-1 style certificate from the raw family. Stored
/// projections and coefficients are ignored and recomputed.
pub fn check_theorem1(cert: &TverbergRayCertificate, family: &Family, r: usize) -> Result<Report> {
    Error::check_dim(family.dim(), cert.p.dim())?;
    let mut report = Report::new();
    let count = cert.subfamilies.len();
    report.push("subfamily-count", count == r, format!("{count} subfamilies, r = {r}"));

    let n = family.len();
    let mut valid = vec![true; count];
    for (i, sub) in cert.subfamilies.iter().enumerate() {
        if sub.member_indices.is_empty() {
            valid[i] = false;
            report.push(format!("indices[{i}]"), false, "empty subfamily");
        } else if let Some(bad) = sub.member_indices.iter().find(|&&j| j >= n) {
            valid[i] = false;
            report.push(format!("indices[{i}]"), false, format!("index {bad} out of range (n = {n})"));
        }
    }

    let mut owner = vec![None; n];
    let mut clash = None;
    'outer: for (i, sub) in cert.subfamilies.iter().enumerate() {
        for &j in sub.member_indices.iter().filter(|&&j| j < n) {
            if let Some(prev) = owner[j] {
                clash = Some((j, prev, i));
                break 'outer;
            }
            owner[j] = Some(i);
        }
    }
    match clash {
        None => report.push("disjoint", true, ""),
        Some((j, a, b)) => report.push("disjoint", false, format!("index {j} in subfamilies {a} and {b}")),
    }

    let same_p = cert.subfamilies.iter().all(|s| s.p == cert.p);
    report.push("common-point", same_p, if same_p { String::new() } else { "subfamilies disagree on p".into() });

    for (i, sub) in cert.subfamilies.iter().enumerate() {
        if !valid[i] {
            continue;
        }
        match check_escape_in(&cert.p, family, &sub.member_indices)? {
            Ok(c) => {
                report.mode = report.mode.and(c.mode);
                report.push(format!("escape[{i}]"), true, "");
            }
            Err(EscapeFailure::ContainsPoint { member }) => {
                report.push(format!("escape[{i}]"), false, format!("condition (a): p lies in member {member}"))
            }
            Err(EscapeFailure::NotSurrounded { separating }) => report.push(
                format!("escape[{i}]"),
                false,
                format!("condition (b): separating direction {separating:?}"),
            ),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum CorollaryMethod {
    /// Exact planar arc sweep.
    Exact2d,
    /// Look for `r` disjoint escaping subfamilies among these candidates.
    Certificate { candidates: Vec<Vec<usize>> },
}

/// Checks that every ray from `p` misses at least `r` bodies.
pub fn check_corollary(p: &Point, family: &Family, r: usize, method: &CorollaryMethod) -> Result<Report> {
    Error::check_dim(family.dim(), p.dim())?;
    let mut report = Report::new();
    match method {
        CorollaryMethod::Exact2d => {
            if family.dim() != 2 {
                return Err(Error::Unsupported(format!("exact2d needs d = 2, got d = {}", family.dim())));
            }
            let m = min_missed(p, family, None)?;
            debug_assert_eq!(m.mode, MissMode::Exact);
            report.mode = family.mode();
            report.push(
                "min-missed",
                m.missed >= r,
                format!("min missed {} (worst direction {:?}), r = {r}", m.missed, m.worst_direction),
            );
        }
        CorollaryMethod::Certificate { candidates } => {
            let mut escaping = Vec::new();
            for cand in candidates {
                if cand.is_empty() {
                    continue;
                }
                if let Ok(c) = check_escape_in(p, family, cand)? {
                    report.mode = report.mode.and(c.mode);
                    escaping.push(cand.clone());
                }
            }
            let packing = pack_disjoint(&escaping, r);
            let detail = match &packing {
                Some(sets) => format!("disjoint escaping subfamilies {sets:?}"),
                None => format!("{} escaping candidates, no {r} pairwise disjoint", escaping.len()),
            };
            report.push("disjoint-escapes", packing.is_some(), detail);
        }
    }
    Ok(report)
}

/// `r` pairwise disjoint sets from `sets`, by depth-first search.
fn pack_disjoint(sets: &[Vec<usize>], r: usize) -> Option<Vec<Vec<usize>>> {
    fn go(sets: &[Vec<usize>], start: usize, r: usize, used: &mut Vec<usize>, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == r {
            return true;
        }
        for i in start..sets.len() {
            if sets[i].iter().any(|j| used.contains(j)) {
                continue;
            }
            let mark = used.len();
            used.extend(&sets[i]);
            chosen.push(i);
            if go(sets, i + 1, r, used, chosen) {
                return true;
            }
            chosen.pop();
            used.truncate(mark);
        }
        false
    }
    let mut chosen = Vec::new();
    go(sets, 0, r, &mut Vec::new(), &mut chosen).then(|| chosen.iter().map(|&i| sets[i].clone()).collect())
}
