//! Candidate search for ray-escape partitions and centre points, plus the
//! arithmetic around the hypotheses (multiplicity bound, prime powers and
//! the replication reduction for composite `r`).

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{check_corollary, check_escape_in, check_theorem1, CorollaryMethod, TverbergRayCertificate};
use crate::coverage::{covering_multiplicity, min_missed, Family, MinMissed};
use crate::error::{Error, Result};
use crate::geometry::{for_each_subset, ConvexBody, Mode, Point, DEFAULT_TOLERANCE};
use crate::partition::{find_disjoint_dependent, positively_dependent, Packing};
use crate::rational::{self, rat, ratio, serde_rational, Rational};

/// Candidates are evaluated in parallel in chunks of this size; the lowest
/// index inside the first successful chunk wins.
const CHUNK: usize = 64;
/// Limit on the number of `(d+1)`-subset centroids tried as candidates.
const MAX_SUBSET_CENTROIDS: usize = 4096;
/// Bits kept when f64 iterates become rational candidates.
const CANDIDATE_BITS: u32 = 24;
/// Directions sampled by `min_missed` checks in `d >= 3`.
const CENTER_RESOLUTION: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(with = "serde_rational")]
    pub grid_extent: Rational,
    pub grid_steps: usize,
    pub seed: u64,
    pub max_fixed_point_iters: usize,
    pub fixed_point_starts: usize,
    #[serde(with = "serde_rational")]
    pub contraction: Rational,
    #[serde(with = "serde_rational")]
    pub tolerance: Rational,
    pub partition_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_extent: rat(10),
            grid_steps: 101,
            seed: 0,
            max_fixed_point_iters: 200,
            fixed_point_starts: 16,
            contraction: ratio(1, 100),
            tolerance: rational::from_f64(DEFAULT_TOLERANCE).expect("finite"),
            partition_cap: 1_000_000,
        }
    }
}

impl SearchConfig {
    /// Defaults with the grid sized to the family: the extent is the
    /// smallest integer covering the bounding box, and the step count is 101
    /// per axis in the plane, 41 in space.
    pub fn default_for(family: &Family) -> Self {
        let (lo, hi) = family.bbox_f64();
        let reach = lo.iter().chain(&hi).fold(1.0f64, |m, v| m.max(v.abs()));
        let steps = match family.dim() {
            1 | 2 => 101,
            3 => 41,
            _ => 11,
        };
        SearchConfig { grid_extent: rat(reach.ceil() as i64), grid_steps: steps, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grid_extent.is_positive() {
            return Err(Error::invalid("grid extent must be positive"));
        }
        if self.grid_steps == 0 || self.max_fixed_point_iters == 0 || self.partition_cap == 0 {
            return Err(Error::invalid("grid steps, iteration limit and partition cap must be positive"));
        }
        if !self.contraction.is_positive() || self.contraction >= rat(1) {
            return Err(Error::invalid("contraction must lie in (0, 1)"));
        }
        if !self.tolerance.is_positive() {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exhausted {
    pub candidates_examined: usize,
    pub detail: String,
}

/// Result of a search: found, or the candidate space ran out. Exhaustion
/// says nothing about existence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "result", rename_all = "lowercase")]
pub enum SearchOutcome<T> {
    Found(T),
    Exhausted(Exhausted),
}

impl<T> SearchOutcome<T> {
    pub fn found(self) -> Option<T> {
        match self {
            SearchOutcome::Found(t) => Some(t),
            SearchOutcome::Exhausted(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found(_))
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 1;
    }
    true
}

/// `r = p^k` for a prime `p`; `r = 1` counts as a prime power.
pub fn is_prime_power(r: i64) -> Result<bool> {
    if r <= 0 {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    let mut n = r as u64;
    if n == 1 {
        return Ok(true);
    }
    let mut p = 2;
    while p * p <= n && n % p != 0 {
        p += 1;
    }
    if n % p != 0 {
        return Ok(true);
    }
    while n % p == 0 {
        n /= p;
    }
    Ok(n == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub k: u64,
    #[serde(rename = "R")]
    pub big_r: u64,
}

impl Reduction {
    /// Size and multiplicity of the family with every member taken `k` times.
    pub fn replicate(&self, n: u64, c: u64) -> (u64, u64) {
        (self.k * n, self.k * c)
    }
}

/// Smallest `k >= 1` with `k(r-1)+1` prime.
pub fn corollary_reduction(r: i64) -> Result<Reduction> {
    if r < 2 {
        return Err(Error::invalid(format!("reduction needs r >= 2, got {r}")));
    }
    let step = (r - 1) as u64;
    let k = (1..).find(|k| is_prime(k * step + 1)).expect("primes in arithmetic progression");
    Ok(Reduction { k, big_r: k * step + 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub c_mode: Mode,
    pub r: usize,
    pub bound_value: usize,
    pub bound_satisfied: bool,
    pub r_prime_power: bool,
}

impl HypothesisReport {
    pub fn from_counts(n: usize, d: usize, c: usize, c_mode: Mode, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("r must be at least 1"));
        }
        let bound_value = (d + 1) * (r - 1) + c + 1;
        Ok(HypothesisReport {
            n,
            d,
            c,
            c_mode,
            r,
            bound_value,
            bound_satisfied: n >= bound_value,
            r_prime_power: is_prime_power(r as i64)?,
        })
    }
}

pub fn hypothesis_check(family: &Family, r: usize) -> Result<HypothesisReport> {
    let m = covering_multiplicity(family)?;
    HypothesisReport::from_counts(family.len(), family.dim(), m.c, m.mode, r)
}

/// Per-subfamily weight blocks with disjoint supports, each summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    blocks: Vec<Vec<(usize, Rational)>>,
}

impl WeightVector {
    pub fn new(blocks: Vec<Vec<(usize, Rational)>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Empty("weight blocks"));
        }
        let mut seen = std::collections::HashSet::new();
        for block in &blocks {
            let mut sum = Rational::zero();
            for (i, w) in block {
                if w.is_negative() {
                    return Err(Error::invalid("weights must be nonnegative"));
                }
                if !seen.insert(*i) {
                    return Err(Error::invalid(format!("index {i} appears in two blocks")));
                }
                sum += w;
            }
            if sum != rat(1) {
                return Err(Error::invalid("each weight block must sum to 1"));
            }
        }
        Ok(WeightVector { blocks })
    }

    /// All weight on one member.
    pub fn single(index: usize) -> Self {
        WeightVector { blocks: vec![vec![(index, rat(1))]] }
    }

    pub fn blocks(&self) -> &[Vec<(usize, Rational)>] {
        &self.blocks
    }

    /// Block average, `w(K) = (1/r) Σ_i α_i(K)`.
    pub fn averaged(&self, n: usize) -> Result<Vec<Rational>> {
        let r = rat(self.blocks.len() as i64);
        let mut w = vec![Rational::zero(); n];
        for (i, a) in self.blocks.iter().flatten() {
            *w.get_mut(*i).ok_or(Error::IndexOutOfRange { index: *i, len: n })? += a / &r;
        }
        Ok(w)
    }
}

/// `p' = Σ_K w(K) π_K(p)`, optionally contracted to `(1-ε) Σ_K w(K) π_K(p)`.
/// Ball projections are rounded to rationals.
pub fn weighted_projection_step(
    p: &Point,
    weights: &WeightVector,
    family: &Family,
    contraction: Option<&Rational>,
) -> Result<Point> {
    Error::check_dim(family.dim(), p.dim())?;
    let w = weights.averaged(family.len())?;
    let mut acc = vec![Rational::zero(); p.dim()];
    for (body, wk) in family.bodies().iter().zip(&w) {
        if wk.is_zero() {
            continue;
        }
        let proj = body.project(p)?.point;
        for (a, x) in acc.iter_mut().zip(proj.coords()) {
            *a += wk * x;
        }
    }
    if let Some(eps) = contraction {
        let s = rat(1) - eps;
        acc.iter_mut().for_each(|a| *a *= &s);
    }
    Point::new(acc)
}

fn step_f64(p: &[f64], w: &[f64], family: &Family) -> Vec<f64> {
    let mut acc = vec![0.0; p.len()];
    for (body, wk) in family.bodies().iter().zip(w) {
        if *wk == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(body.project_f64(p)) {
            *a += wk * x;
        }
    }
    acc
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Vec<f64> {
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); r.max(1)];
    for i in 0..n {
        let b = rng.gen_range(0..blocks.len());
        blocks[b].push(i);
    }
    let mut w = vec![0.0; n];
    let live = blocks.iter().filter(|b| !b.is_empty()).count() as f64;
    for block in blocks.iter().filter(|b| !b.is_empty()) {
        let raw: Vec<f64> = block.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&i, x) in block.iter().zip(raw) {
            w[i] = x / total / live;
        }
    }
    w
}

fn centroid(points: &[Point]) -> Point {
    let d = points[0].dim();
    let n = rat(points.len() as i64);
    let mut acc = vec![Rational::zero(); d];
    for p in points {
        for (a, x) in acc.iter_mut().zip(p.coords()) {
            *a += x;
        }
    }
    Point::new(acc.into_iter().map(|a| a / &n).collect()).expect("nonempty")
}

fn rounded_point(x: &[f64]) -> Option<Point> {
    let coords = x
        .iter()
        .map(|v| rational::from_f64_rounded(*v, CANDIDATE_BITS))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    Point::new(coords).ok()
}

/// Candidate points in evaluation order: family centroid, centroids of
/// `(d+1)`-subsets of representatives, fixed-point iterates from seeded
/// weights, then the grid sorted by distance to the centroid.
pub fn candidate_points(family: &Family, r: usize, config: &SearchConfig) -> Result<Vec<Point>> {
    config.validate()?;
    let d = family.dim();
    let n = family.len();
    let reps: Vec<Point> = family.bodies().iter().map(ConvexBody::representative).collect();
    let center = centroid(&reps);
    let mut out = vec![center.clone()];

    let mut budget = MAX_SUBSET_CENTROIDS;
    for_each_subset(n, d + 1, |s| {
        if s.len() == d + 1 && budget > 0 {
            budget -= 1;
            let pts: Vec<Point> = s.iter().map(|&i| reps[i].clone()).collect();
            out.push(centroid(&pts));
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tol = rational::to_f64(&config.tolerance);
    for _ in 0..config.fixed_point_starts {
        let w = random_weights(&mut rng, n, r);
        let mut x = center.to_f64();
        for _ in 0..config.max_fixed_point_iters {
            let next = step_f64(&x, &w, family);
            let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if moved <= tol {
                break;
            }
        }
        out.extend(rounded_point(&x));
    }

    let steps = config.grid_steps;
    let e = &config.grid_extent;
    let axis: Vec<Rational> = if steps == 1 {
        vec![Rational::zero()]
    } else {
        (0..steps).map(|i| -e + e * rat(2 * i as i64) / rat(steps as i64 - 1)).collect()
    };
    let total = steps.checked_pow(d as u32).ok_or(Error::CapExceeded { what: "grid size", limit: usize::MAX, got: steps })?;
    let c64 = center.to_f64();
    let mut grid: Vec<(f64, usize)> = (0..total)
        .map(|i| {
            let mut idx = i;
            let mut dist = 0.0;
            for c in &c64 {
                let v = rational::to_f64(&axis[idx % steps]);
                idx /= steps;
                dist += (v - c) * (v - c);
            }
            (dist, i)
        })
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out.extend(grid.into_iter().map(|(_, mut idx)| {
        let mut coords = Vec::with_capacity(d);
        for _ in 0..d {
            coords.push(axis[idx % steps].clone());
            idx /= steps;
        }
        Point::new(coords).expect("dimension >= 1")
    }));
    Ok(out)
}

/// Scans `candidates` in parallel chunks and returns the lowest index for
/// which `eval` succeeds.
fn first_success<T: Send>(
    candidates: &[Point],
    eval: impl Fn(&Point) -> Result<Option<T>> + Sync,
) -> Result<(Option<T>, usize)> {
    let mut examined = 0;
    for chunk in candidates.chunks(CHUNK) {
        let results: Vec<Result<Option<T>>> = chunk.par_iter().map(&eval).collect();
        for res in results {
            examined += 1;
            if let Some(t) = res? {
                return Ok((Some(t), examined));
            }
        }
    }
    Ok((None, examined))
}

/// Escape partition at `p`: f64 screening of the projection vectors picks
/// subfamilies, which are then certified exactly; if that fails, the exact
/// vectors are packed directly.
pub fn certificate_at(p: &Point, family: &Family, r: usize, cap: usize) -> Result<Option<TverbergRayCertificate>> {
    let n = family.len();
    let d = family.dim();
    let x = p.to_f64();
    let clear = DEFAULT_TOLERANCE * 16.0;
    let vecs: Vec<Option<Vec<f64>>> = family
        .bodies()
        .iter()
        .map(|b| {
            let q = b.project_f64(&x);
            let w: Vec<f64> = q.iter().zip(&x).map(|(a, b)| a - b).collect();
            (w.iter().map(|v| v * v).sum::<f64>().sqrt() > clear).then_some(w)
        })
        .collect();
    let live: Vec<usize> = (0..n).filter(|&i| vecs[i].is_some()).collect();
    if live.len() < r {
        return Ok(None);
    }
    let f64_dep = |s: &[usize]| {
        let sel: Vec<&[f64]> = s.iter().map(|&i| vecs[live[i]].as_deref().expect("live")).collect();
        positively_dependent(&sel)
    };
    if let Packing::Found(sets) = find_disjoint_dependent(live.len(), d + 1, r, cap, f64_dep) {
        let sets: Vec<Vec<usize>> = sets.iter().map(|s| s.iter().map(|&i| live[i]).collect()).collect();
        if let Some(cert) = certify(p, family, &sets)? {
            return Ok(Some(cert));
        }
    }

    // exact vectors: π_K(p) - p for polytopes, c - p for balls
    let clearance = crate::certificates::ball_clearance();
    let mut exact: Vec<Option<Vec<Rational>>> = Vec::with_capacity(n);
    for body in family.bodies() {
        exact.push(match body {
            ConvexBody::Polytope(_) => {
                let pr = body.project(p)?;
                (!pr.sq_dist.is_zero()).then(|| rational::sub(pr.point.coords(), p.coords()))
            }
            ConvexBody::Ball(b) => {
                let gap = b.radius() + &clearance;
                (b.center().sq_dist(p) > &gap * &gap).then(|| rational::sub(b.center().coords(), p.coords()))
            }
        });
    }
    let live: Vec<usize> = (0..n).filter(|&i| exact[i].is_some()).collect();
    if live.len() < r {
        return Ok(None);
    }
    let exact_dep = |s: &[usize]| {
        let sel: Vec<&[Rational]> = s.iter().map(|&i| exact[live[i]].as_deref().expect("live")).collect();
        positively_dependent(&sel)
    };
    match find_disjoint_dependent(live.len(), d + 1, r, cap, exact_dep) {
        Packing::Found(sets) => {
            let sets: Vec<Vec<usize>> = sets.iter().map(|s| s.iter().map(|&i| live[i]).collect()).collect();
            certify(p, family, &sets)
        }
        Packing::NotFound { cap_hit } => {
            if cap_hit {
                log::debug!("partition cap {cap} reached at {p:?}");
            }
            Ok(None)
        }
    }
}

fn certify(p: &Point, family: &Family, sets: &[Vec<usize>]) -> Result<Option<TverbergRayCertificate>> {
    let mut subfamilies = Vec::with_capacity(sets.len());
    for s in sets {
        match check_escape_in(p, family, s)? {
            Ok(c) => subfamilies.push(c),
            Err(_) => return Ok(None),
        }
    }
    let cert = TverbergRayCertificate { p: p.clone(), subfamilies };
    let report = check_theorem1(&cert, family, sets.len())?;
    if report.passed() {
        Ok(Some(cert))
    } else {
        log::warn!("certificate failed re-verification at {p:?}: {report:?}");
        Ok(None)
    }
}

/// Searches candidate points for `r` disjoint subfamilies escaping at a
/// common point. Every returned certificate has passed `check_theorem1`.
pub fn find_certificate(family: &Family, r: usize, config: &SearchConfig) -> Result<SearchOutcome<TverbergRayCertificate>> {
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let candidates = candidate_points(family, r, config)?;
    let (found, examined) = first_success(&candidates, |p| certificate_at(p, family, r, config.partition_cap))?;
    Ok(match found {
        Some(cert) => SearchOutcome::Found(cert),
        None => {
            let detail = format!(
                "no candidate among {examined} points (grid {}^{} over [-{e}, {e}]) admits {r} disjoint escaping subfamilies of {} bodies",
                config.grid_steps,
                family.dim(),
                family.len(),
                e = config.grid_extent,
            );
            log::info!("{detail}");
            SearchOutcome::Exhausted(Exhausted { candidates_examined: examined, detail })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CenterEvidence {
    /// Planar arc sweep at `p`.
    ArcSweep { min_missed: MinMissed },
    /// `r` disjoint subfamilies escaping at `p`.
    Certificate { certificate: TverbergRayCertificate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterPoint {
    pub p: Point,
    pub evidence: CenterEvidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<Reduction>,
}

/// A point every ray from which misses at least `r` bodies.
pub fn find_center_point(family: &Family, r: usize, config: &SearchConfig) -> Result<SearchOutcome<CenterPoint>> {
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let reduction = if r >= 2 && !is_prime_power(r as i64)? {
        let red = corollary_reduction(r as i64)?;
        let (n2, _) = red.replicate(family.len() as u64, 0);
        log::info!("r = {r} is not a prime power: replicate k = {} times (R = {}, n' = {n2})", red.k, red.big_r);
        Some(red)
    } else {
        None
    };
    let d = family.dim();
    if d >= 3 {
        return Ok(match find_certificate(family, r, config)? {
            SearchOutcome::Found(certificate) => SearchOutcome::Found(CenterPoint {
                p: certificate.p.clone(),
                evidence: CenterEvidence::Certificate { certificate },
                reduction,
            }),
            SearchOutcome::Exhausted(e) => SearchOutcome::Exhausted(e),
        });
    }
    let candidates = candidate_points(family, r, config)?;
    let (found, examined) = first_success(&candidates, |p| {
        let m = min_missed(p, family, None)?;
        if m.missed < r {
            return Ok(None);
        }
        if d == 2 && !check_corollary(p, family, r, &CorollaryMethod::Exact2d)?.passed() {
            return Ok(None);
        }
        Ok(Some(CenterPoint { p: p.clone(), evidence: CenterEvidence::ArcSweep { min_missed: m }, reduction }))
    })?;
    Ok(match found {
        Some(c) => SearchOutcome::Found(c),
        None => SearchOutcome::Exhausted(Exhausted {
            candidates_examined: examined,
            detail: format!("no candidate among {examined} points has every ray missing {r} bodies"),
        }),
    })
}

/// Re-checks a centre point from the raw family.
pub fn verify_center_point(center: &CenterPoint, family: &Family, r: usize) -> Result<bool> {
    match &center.evidence {
        CenterEvidence::ArcSweep { .. } => {
            if family.dim() == 2 {
                Ok(check_corollary(&center.p, family, r, &CorollaryMethod::Exact2d)?.passed())
            } else {
                Ok(min_missed(&center.p, family, Some(CENTER_RESOLUTION))?.missed >= r)
            }
        }
        CenterEvidence::Certificate { certificate } => {
            Ok(certificate.p == center.p && check_theorem1(certificate, family, r)?.passed())
        }
    }
}
