//! Seeded instance generators.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raycert_core::arrangements::hyperplane_multiplicity;
use raycert_core::coverage::covering_multiplicity;
use raycert_core::geometry::intersect_nonempty;
use raycert_core::linalg;
use raycert_core::rational::{rat, ratio};
use raycert_core::{ConvexBody, Family, Hyperplane, Point, Rational, VPolytope};
use serde_json::Value;

use crate::files::InstanceFile;
use crate::CliError;

/// Rejection-sampling attempts per member before giving up.
const ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    DisjointPolygons,
    OverlappingSquares,
    GeneralLines,
    ParallelLines,
    ConcurrentLines,
}

impl Style {
    pub const ALL: [Style; 5] = [
        Style::DisjointPolygons,
        Style::OverlappingSquares,
        Style::GeneralLines,
        Style::ParallelLines,
        Style::ConcurrentLines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Style::DisjointPolygons => "disjoint-polygons",
            Style::OverlappingSquares => "overlapping-squares",
            Style::GeneralLines => "general-lines",
            Style::ParallelLines => "parallel-lines",
            Style::ConcurrentLines => "concurrent-lines",
        }
    }
}

impl FromStr for Style {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Style::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::input(format!("unknown style {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct GenParams {
    pub style: Style,
    pub n: usize,
    pub d: usize,
    /// Target covering multiplicity; only `overlapping-squares` uses it.
    pub c_target: Option<usize>,
    pub seed: u64,
}

pub fn generate_instance(params: &GenParams) -> Result<InstanceFile, CliError> {
    let GenParams { style, n, d, c_target, seed } = *params;
    if n == 0 {
        return Err(CliError::input("n must be at least 1"));
    }
    if !(1..=3).contains(&d) {
        return Err(CliError::input(format!("generators support d in 1..=3, got {d}")));
    }
    if let Some(c) = c_target {
        if c == 0 || c > n {
            return Err(CliError::input(format!("c = {c} is not achievable with n = {n}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meta = BTreeMap::new();
    meta.insert("generator".to_string(), Value::from(style.name()));
    meta.insert("seed".to_string(), Value::from(seed));
    meta.insert("n".to_string(), Value::from(n));

    let inst = match style {
        Style::DisjointPolygons => {
            let bodies = disjoint_polygons(&mut rng, n, d)?;
            if c_target.is_some_and(|c| c != 1) {
                return Err(CliError::input("disjoint-polygons always has c = 1"));
            }
            meta.insert("c".to_string(), Value::from(1));
            InstanceFile::from_bodies(bodies, meta)
        }
        Style::OverlappingSquares => {
            let c = c_target.unwrap_or(1);
            let bodies = overlapping_squares(&mut rng, n, d, c)?;
            let achieved = covering_multiplicity(&Family::new(bodies.clone())?)?.c;
            if achieved != c {
                return Err(CliError::input(format!("generator reached c = {achieved}, wanted {c}")));
            }
            meta.insert("c".to_string(), Value::from(achieved));
            InstanceFile::from_bodies(bodies, meta)
        }
        Style::GeneralLines | Style::ParallelLines | Style::ConcurrentLines => {
            if c_target.is_some() {
                return Err(CliError::input(format!("{} fixes c; drop --c", style.name())));
            }
            let planes = match style {
                Style::GeneralLines => general_planes(&mut rng, n, d)?,
                Style::ParallelLines => parallel_planes(&mut rng, n, d),
                _ => concurrent_planes(&mut rng, n, d)?,
            };
            let c = hyperplane_multiplicity(&planes)?;
            meta.insert("c".to_string(), Value::from(c));
            InstanceFile::from_hyperplanes(planes, meta)
        }
    };
    inst.validate()?;
    Ok(inst)
}

fn quarter(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Rational {
    ratio((rng.gen_range(lo..hi) * 4.0).round() as i64, 4)
}

fn random_polytope(rng: &mut ChaCha8Rng, center: &[Rational], d: usize) -> Result<ConvexBody, CliError> {
    let k = rng.gen_range(d + 1..=d + 3);
    let mut verts = Vec::with_capacity(k);
    for _ in 0..k {
        // random direction scaled to radius in [1, 2.5]
        let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let radius = rng.gen_range(1.0..2.5);
        dir.iter_mut().for_each(|v| *v *= radius / norm);
        let coords = center
            .iter()
            .zip(&dir)
            .map(|(c, v)| c + ratio((v * 4.0).round() as i64, 4))
            .collect();
        verts.push(Point::new(coords)?);
    }
    Ok(VPolytope::new(verts)?.into())
}

fn disjoint_polygons(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Vec<ConvexBody>, CliError> {
    let extent = 4.0 + 3.0 * (n as f64).powf(1.0 / d as f64);
    let mut bodies: Vec<ConvexBody> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let center: Vec<Rational> = (0..d).map(|_| quarter(rng, -extent, extent)).collect();
            let cand = random_polytope(rng, &center, d)?;
            let mut clash = false;
            for b in &bodies {
                if intersect_nonempty(&[b, &cand])?.nonempty {
                    clash = true;
                    break;
                }
            }
            if !clash {
                bodies.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CliError::input("could not place pairwise disjoint polygons"));
        }
    }
    Ok(bodies)
}

fn overlapping_squares(rng: &mut ChaCha8Rng, n: usize, d: usize, c: usize) -> Result<Vec<ConvexBody>, CliError> {
    if c > 8 {
        return Err(CliError::input("overlapping-squares supports c <= 8"));
    }
    let groups = n.div_ceil(c);
    // group anchors on a spaced lattice, shuffled so the layout varies with the seed
    let side = (groups as f64).powf(1.0 / d as f64).ceil() as i64;
    let mut anchors: Vec<Vec<i64>> = (0..side.pow(d as u32))
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let v = i % side;
                    i /= side;
                    8 * v - 4 * side
                })
                .collect()
        })
        .collect();
    anchors.shuffle(rng);
    let mut bodies = Vec::with_capacity(n);
    for i in 0..n {
        let (g, layer) = (i / c, i % c);
        let jitter: Vec<Rational> = (0..d).map(|_| ratio(rng.gen_range(0..4), 16)).collect();
        let lo: Vec<Rational> = anchors[g]
            .iter()
            .zip(&jitter)
            .map(|(&a, j)| rat(a) + ratio(layer as i64, 4) + j)
            .collect();
        let hi: Vec<Rational> = lo.iter().map(|x| x + rat(2)).collect();
        let verts = (0..1usize << d)
            .map(|mask| Point::new((0..d).map(|k| if mask >> k & 1 == 1 { hi[k].clone() } else { lo[k].clone() }).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        bodies.push(VPolytope::new(verts)?.into());
    }
    Ok(bodies)
}

fn random_normal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Rational> {
    loop {
        let v: Vec<i64> = (0..d).map(|_| rng.gen_range(-5..=5)).collect();
        if v.iter().any(|&c| c != 0) {
            return v.into_iter().map(rat).collect();
        }
    }
}

fn general_planes(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Vec<Hyperplane>, CliError> {
    let mut planes: Vec<Hyperplane> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let cand = Hyperplane::new(random_normal(rng, d), rat(rng.gen_range(-8..=8)))?;
            let mut trial = planes.clone();
            trial.push(cand);
            if in_general_position(&trial, d)? {
                planes = trial;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CliError::input("could not place hyperplanes in general position"));
        }
    }
    Ok(planes)
}

/// Every `min(n, d)` normals independent and no `d + 1` planes through a point.
fn in_general_position(planes: &[Hyperplane], d: usize) -> Result<bool, CliError> {
    let k = planes.len().min(d);
    let mut ok = true;
    raycert_core::geometry::for_each_subset(planes.len(), k, |s| {
        if ok && s.len() == k {
            let rows: Vec<Vec<Rational>> = s.iter().map(|&i| planes[i].normal().to_vec()).collect();
            ok = linalg::rank(&rows) == k;
        }
    });
    Ok(ok && hyperplane_multiplicity(planes)? <= d)
}

fn parallel_planes(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Hyperplane> {
    let normal = random_normal(rng, d);
    let mut offsets: Vec<i64> = (-(2 * n as i64)..=2 * n as i64).collect();
    offsets.shuffle(rng);
    offsets.truncate(n);
    offsets.sort_unstable();
    offsets
        .into_iter()
        .map(|b| Hyperplane::new(normal.clone(), rat(b)).expect("nonzero normal"))
        .collect()
}

fn concurrent_planes(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Vec<Hyperplane>, CliError> {
    if d == 1 && n > 1 {
        return Err(CliError::input("distinct concurrent planes need d >= 2"));
    }
    let q: Vec<Rational> = (0..d).map(|_| rat(rng.gen_range(-5..=5))).collect();
    let mut normals: Vec<Vec<Rational>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let a = random_normal(rng, d);
            if normals.iter().all(|b| linalg::rank(&[a.clone(), b.clone()]) == 2) {
                normals.push(a);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CliError::input("could not place distinct concurrent planes"));
        }
    }
    normals
        .into_iter()
        .map(|a| {
            let b = raycert_core::rational::dot(&a, &q);
            Ok(Hyperplane::new(a, b)?)
        })
        .collect()
}
