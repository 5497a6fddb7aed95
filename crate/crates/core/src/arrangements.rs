//! Hyperplane arrangements: full-dimensional cells, almost-boundedness,
//! membership in `C(G)` (the union of almost bounded cells of the
//! complement), multiplicity, and the partition search for hyperplanes.

use std::fmt;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::Report;
use crate::error::{Error, Result};
use crate::geometry::{for_each_subset, Mode, Point};
use crate::linalg;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::partition::{find_disjoint_dependent, positively_dependent, Packing};
use crate::rational::{self, dot, rat, serde_rational, serde_rational_vec, Rational};
use crate::search::{Exhausted, SearchConfig, SearchOutcome};

/// Desk-scale caps for cell enumeration.
pub const MAX_PLANES: usize = 20;
pub const MAX_DIM: usize = 3;

/// `{x : normal·x = offset}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "HyperplaneRaw", into = "HyperplaneRaw")]
pub struct Hyperplane {
    normal: Vec<Rational>,
    offset: Rational,
}

#[derive(Serialize, Deserialize)]
struct HyperplaneRaw {
    #[serde(with = "serde_rational_vec")]
    normal: Vec<Rational>,
    #[serde(with = "serde_rational")]
    offset: Rational,
}

impl TryFrom<HyperplaneRaw> for Hyperplane {
    type Error = Error;
    fn try_from(raw: HyperplaneRaw) -> Result<Self> {
        Hyperplane::new(raw.normal, raw.offset)
    }
}

impl From<Hyperplane> for HyperplaneRaw {
    fn from(h: Hyperplane) -> Self {
        HyperplaneRaw { normal: h.normal, offset: h.offset }
    }
}

impl Hyperplane {
    pub fn new(normal: Vec<Rational>, offset: Rational) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::Empty("hyperplane normal"));
        }
        if normal.iter().all(Zero::is_zero) {
            return Err(Error::invalid("hyperplane normal must be nonzero"));
        }
        Ok(Hyperplane { normal, offset })
    }

    pub fn from_ints(normal: &[i64], offset: i64) -> Result<Self> {
        Hyperplane::new(normal.iter().map(|&c| rat(c)).collect(), rat(offset))
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[Rational] {
        &self.normal
    }

    pub fn offset(&self) -> &Rational {
        &self.offset
    }

    /// `normal·x - offset`.
    pub fn eval(&self, x: &[Rational]) -> Rational {
        dot(&self.normal, x) - &self.offset
    }

    pub fn side(&self, x: &Point) -> Option<Sign> {
        let v = self.eval(x.coords());
        if v.is_positive() {
            Some(Sign::Plus)
        } else if v.is_negative() {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    /// Exact orthogonal projection.
    pub fn project(&self, x: &Point) -> Point {
        let t = self.eval(x.coords()) / dot(&self.normal, &self.normal);
        x.offset(&self.normal, &-t)
    }

    pub fn project_f64(&self, x: &[f64]) -> Vec<f64> {
        let a: Vec<f64> = self.normal.iter().map(rational::to_f64).collect();
        let b = rational::to_f64(&self.offset);
        let t = (a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - b) / a.iter().map(|v| v * v).sum::<f64>();
        x.iter().zip(&a).map(|(xi, ai)| xi - t * ai).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn apply(self, v: &Rational) -> Rational {
        match self {
            Sign::Plus => v.clone(),
            Sign::Minus => -v,
        }
    }

    fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Sign vector, serialized as a string such as `"+-+"`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SignVector(pub Vec<Sign>);

impl fmt::Debug for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from(self.clone()))
    }
}

impl From<SignVector> for String {
    fn from(s: SignVector) -> String {
        s.0.iter().map(|x| x.as_char()).collect()
    }
}

impl TryFrom<String> for SignVector {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                _ => Err(Error::invalid(format!("bad sign character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SignVector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub sign_vector: SignVector,
    /// Interior point maximizing the smallest signed slack.
    pub sample: Point,
    /// L∞ radius of the cell around `sample`; `None` when unbounded.
    #[serde(default, with = "opt_rational")]
    pub bounded_radius: Option<Rational>,
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "serde_rational")] Rational);

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.clone().map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

fn check_planes(planes: &[Hyperplane]) -> Result<usize> {
    let first = planes.first().ok_or(Error::Empty("hyperplane list"))?;
    let d = first.dim();
    for h in planes {
        Error::check_dim(d, h.dim())?;
    }
    Ok(d)
}

fn check_caps(planes: &[Hyperplane], d: usize) -> Result<()> {
    if planes.len() > MAX_PLANES {
        return Err(Error::CapExceeded { what: "hyperplane count", limit: MAX_PLANES, got: planes.len() });
    }
    if d > MAX_DIM {
        return Err(Error::CapExceeded { what: "arrangement dimension", limit: MAX_DIM, got: d });
    }
    Ok(())
}

/// Maximizes `m` subject to `s_j (a_j·x - b_j) >= m` over the listed planes,
/// `m <= 1`. Returns `(x, m)`.
fn max_margin(planes: &[Hyperplane], signs: &[Sign], d: usize) -> (Vec<Rational>, Rational) {
    let mut lp = LinearProgram::<Rational>::new(d + 1);
    lp.set_all_free();
    let mut obj = vec![Rational::zero(); d + 1];
    obj[d] = rat(1);
    lp.maximize(obj);
    for (h, s) in planes.iter().zip(signs) {
        let mut row: Vec<Rational> = h.normal.iter().map(|a| s.apply(a)).collect();
        row.push(rat(-1));
        lp.add(row, Relation::Ge, s.apply(&h.offset));
    }
    let mut cap = vec![Rational::zero(); d + 1];
    cap[d] = rat(1);
    lp.add(cap, Relation::Le, rat(1));
    match lp.solve() {
        LpOutcome::Optimal { mut x, value } => {
            x.truncate(d);
            (x, value)
        }
        other => unreachable!("margin LP is feasible and bounded: {other:?}"),
    }
}

fn bounded_radius(planes: &[Hyperplane], signs: &[Sign], sample: &[Rational]) -> Option<Rational> {
    let d = sample.len();
    let mut radius = Rational::zero();
    for k in 0..d {
        for dir in [1, -1] {
            let mut lp = LinearProgram::<Rational>::new(d);
            lp.set_all_free();
            let mut obj = vec![Rational::zero(); d];
            obj[k] = rat(dir);
            lp.maximize(obj);
            for (h, s) in planes.iter().zip(signs) {
                lp.add(h.normal.iter().map(|a| s.apply(a)).collect(), Relation::Ge, s.apply(&h.offset));
            }
            match lp.solve() {
                LpOutcome::Optimal { value, .. } => {
                    let reach = (value - rat(dir) * &sample[k]).abs();
                    if reach > radius {
                        radius = reach;
                    }
                }
                _ => return None,
            }
        }
    }
    Some(radius)
}

/// All full-dimensional cells, by inserting planes one at a time and keeping
/// the sign extensions whose open polyhedron is nonempty. Cells come out in
/// lexicographic sign-vector order (`+` before `-`).
pub fn enumerate_cells(planes: &[Hyperplane]) -> Result<Vec<Cell>> {
    let d = check_planes(planes)?;
    check_caps(planes, d)?;
    let mut frontier: Vec<Vec<Sign>> = vec![Vec::new()];
    for i in 0..planes.len() {
        let prefix_planes = &planes[..=i];
        frontier = frontier
            .par_iter()
            .flat_map_iter(|prefix| {
                [Sign::Plus, Sign::Minus].into_iter().filter_map(move |s| {
                    let mut ext = prefix.clone();
                    ext.push(s);
                    max_margin(prefix_planes, &ext, d).1.is_positive().then_some(ext)
                })
            })
            .collect();
    }
    frontier.sort();
    frontier
        .into_par_iter()
        .map(|signs| {
            let (x, _) = max_margin(planes, &signs, d);
            let bounded_radius = bounded_radius(planes, &signs, &x);
            Ok(Cell { sign_vector: SignVector(signs), sample: Point::new(x)?, bounded_radius })
        })
        .collect()
}

/// A direction `u` with `s_i (a_i·u) >= 1` for all listed planes, i.e. an
/// interior recession direction of the cell, if one exists.
pub fn recession_interior_direction(planes: &[Hyperplane], signs: &[Sign]) -> Option<Vec<Rational>> {
    let d = planes.first()?.dim();
    let mut lp = LinearProgram::<Rational>::new(d);
    lp.set_all_free();
    for (h, s) in planes.iter().zip(signs) {
        lp.add(h.normal.iter().map(|a| s.apply(a)).collect(), Relation::Ge, rat(1));
    }
    lp.solve().point().map(<[Rational]>::to_vec)
}

/// A cell is almost bounded when its recession cone has empty interior.
pub fn is_almost_bounded(cell: &Cell, planes: &[Hyperplane]) -> Result<bool> {
    let d = check_planes(planes)?;
    Error::check_dim(planes.len(), cell.sign_vector.0.len())?;
    Error::check_dim(d, cell.sample.dim())?;
    Ok(recession_interior_direction(planes, &cell.sign_vector.0).is_none())
}

/// Sign vector of a point lying on no plane.
pub fn sign_vector_of(x: &Point, planes: &[Hyperplane]) -> Result<SignVector> {
    let d = check_planes(planes)?;
    Error::check_dim(d, x.dim())?;
    planes
        .iter()
        .enumerate()
        .map(|(i, h)| h.side(x).ok_or(Error::OnHyperplane { index: i }))
        .collect::<Result<Vec<_>>>()
        .map(SignVector)
}

/// Whether `x` lies in an almost bounded cell of the arrangement.
pub fn locate_in_c(x: &Point, planes: &[Hyperplane]) -> Result<bool> {
    let signs = sign_vector_of(x, planes)?;
    Ok(recession_interior_direction(planes, &signs.0).is_none())
}

/// Largest number of planes through a common point (coincident copies
/// counted separately).
///
/// For every point the incident planes contain the flat cut out by a
/// linearly independent subset of them, so it suffices to scan independent
/// subsets of size `<= d` and count the planes containing their flat.
pub fn hyperplane_multiplicity(planes: &[Hyperplane]) -> Result<usize> {
    let d = check_planes(planes)?;
    let n = planes.len();
    let rows: Vec<Vec<Rational>> = planes
        .iter()
        .map(|h| {
            let mut r = h.normal.clone();
            r.push(h.offset.clone());
            r
        })
        .collect();
    let mut best = 0;
    let mut normals = Vec::with_capacity(d);
    for_each_subset(n, d, |s| {
        normals.clear();
        normals.extend(s.iter().map(|&i| planes[i].normal.clone()));
        if linalg::rank(&normals) < s.len() {
            return;
        }
        let count = if s.len() == d {
            // unique intersection point: count incident planes directly
            let a: Vec<Vec<Rational>> = normals.clone();
            let b: Vec<Rational> = s.iter().map(|&i| planes[i].offset.clone()).collect();
            let x = linalg::solve(&a, &b).expect("independent normals");
            planes.iter().filter(|h| h.eval(&x).is_zero()).count()
        } else {
            let base: Vec<Vec<Rational>> = s.iter().map(|&i| rows[i].clone()).collect();
            rows.iter()
                .filter(|row| {
                    let mut m = base.clone();
                    m.push((*row).clone());
                    linalg::rank(&m) == s.len()
                })
                .count()
        };
        best = best.max(count);
    });
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplanePartition {
    pub partition: Vec<Vec<usize>>,
    pub witness: Point,
}

/// Looks for `r` disjoint subfamilies whose `C(·)` sets share a point.
///
/// Every cell's sample point is a candidate. For a subfamily `G`, the cell
/// of `x` in `G`'s arrangement is almost bounded iff the signed normals
/// `s_i(x) a_i` (i ∈ G) are positively dependent, so each candidate reduces
/// to packing dependent subsets; the result is re-verified through the
/// recession-cone LP of [`locate_in_c`].
pub fn find_hyperplane_partition(
    planes: &[Hyperplane],
    r: usize,
    config: &SearchConfig,
) -> Result<SearchOutcome<HyperplanePartition>> {
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    config.validate()?;
    let d = check_planes(planes)?;
    let cells = enumerate_cells(planes)?;
    let n = planes.len();
    let cap = config.partition_cap;

    let attempt = |cell: &Cell| -> Option<Vec<Vec<usize>>> {
        let signed: Vec<Vec<Rational>> = planes
            .iter()
            .zip(&cell.sign_vector.0)
            .map(|(h, s)| h.normal.iter().map(|a| s.apply(a)).collect())
            .collect();
        let dependent = |s: &[usize]| {
            let sel: Vec<&[Rational]> = s.iter().map(|&i| signed[i].as_slice()).collect();
            positively_dependent(&sel)
        };
        match find_disjoint_dependent(n, d + 1, r, cap, dependent) {
            Packing::Found(sets) => Some(sets),
            Packing::NotFound { .. } => None,
        }
    };

    let mut examined = 0;
    for chunk in cells.chunks(32) {
        let results: Vec<Option<Vec<Vec<usize>>>> = chunk.par_iter().map(attempt).collect();
        for (cell, res) in chunk.iter().zip(results) {
            examined += 1;
            let Some(partition) = res else { continue };
            let found = HyperplanePartition { partition, witness: cell.sample.clone() };
            let report = verify_hyperplane_partition(planes, &found, r)?;
            if report.passed() {
                return Ok(SearchOutcome::Found(found));
            }
            log::warn!("candidate partition failed re-verification: {report:?}");
        }
    }
    Ok(SearchOutcome::Exhausted(Exhausted {
        candidates_examined: examined,
        detail: format!("no cell of {n} planes admits {r} disjoint almost-bounded subfamilies"),
    }))
}

/// Independent check of a hyperplane partition witness.
pub fn verify_hyperplane_partition(planes: &[Hyperplane], found: &HyperplanePartition, r: usize) -> Result<Report> {
    let d = check_planes(planes)?;
    Error::check_dim(d, found.witness.dim())?;
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| {
        checks.push(crate::certificates::Check { name, passed, detail });
    };
    let n = planes.len();
    let k = found.partition.len();
    push("subfamily-count".into(), k == r, format!("{k} subfamilies, r = {r}"));

    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut ok_idx = true;
    let mut disjoint = true;
    for (i, part) in found.partition.iter().enumerate() {
        if part.is_empty() || part.iter().any(|&j| j >= n) {
            ok_idx = false;
            continue;
        }
        for &j in part {
            if owner[j].is_some() {
                disjoint = false;
            }
            owner[j] = Some(i);
        }
    }
    push("indices".into(), ok_idx, String::new());
    push("disjoint".into(), disjoint, String::new());

    match sign_vector_of(&found.witness, planes) {
        Err(Error::OnHyperplane { index }) => {
            push("witness-off-planes".into(), false, format!("witness lies on plane {index}"));
        }
        Err(e) => return Err(e),
        Ok(_) => {
            push("witness-off-planes".into(), true, String::new());
            if ok_idx {
                for (i, part) in found.partition.iter().enumerate() {
                    let sub: Vec<Hyperplane> = part.iter().map(|&j| planes[j].clone()).collect();
                    let inside = locate_in_c(&found.witness, &sub)?;
                    push(format!("in-C[{i}]"), inside, String::new());
                }
            }
        }
    }
    Ok(Report { checks, mode: Mode::Exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn line(a: i64, b: i64, c: i64) -> Hyperplane {
        Hyperplane::from_ints(&[a, b], c).unwrap()
    }

    #[test]
    fn cell_counts() {
        assert_eq!(enumerate_cells(&[line(1, 0, 0), line(1, 0, 1)]).unwrap().len(), 3);
        assert_eq!(enumerate_cells(&[line(1, 0, 0), line(0, 1, 0)]).unwrap().len(), 4);
        let three = [line(1, 0, 0), line(0, 1, 0), line(1, 1, 1)];
        let cells = enumerate_cells(&three).unwrap();
        // brute force oracle: sign vectors realized on a fine grid
        let mut seen = std::collections::BTreeSet::new();
        for i in -40..=40 {
            for j in -40..=40 {
                let x = Point::new(vec![ratio(i, 7), ratio(j, 7)]).unwrap();
                if let Ok(s) = sign_vector_of(&x, &three) {
                    seen.insert(s);
                }
            }
        }
        assert_eq!(cells.len(), 7);
        assert_eq!(seen.len(), 7);
        for c in &cells {
            assert!(seen.contains(&c.sign_vector));
            assert_eq!(sign_vector_of(&c.sample, &three).unwrap(), c.sign_vector);
        }
    }

    #[test]
    fn almost_bounded_examples() {
        let strip = [line(1, 0, 0), line(1, 0, 1)];
        for c in enumerate_cells(&strip).unwrap() {
            let middle = c.sign_vector.0 == [Sign::Plus, Sign::Minus];
            assert_eq!(is_almost_bounded(&c, &strip).unwrap(), middle, "{:?}", c.sign_vector);
            assert!(c.bounded_radius.is_none());
        }
        let cross = [line(1, 0, 0), line(0, 1, 0)];
        for c in enumerate_cells(&cross).unwrap() {
            assert!(!is_almost_bounded(&c, &cross).unwrap());
        }
        let tri = [line(1, 0, 0), line(0, 1, 0), line(1, 1, 1)];
        let bounded: Vec<_> = enumerate_cells(&tri).unwrap().into_iter().filter(|c| c.bounded_radius.is_some()).collect();
        assert_eq!(bounded.len(), 1);
        assert!(is_almost_bounded(&bounded[0], &tri).unwrap());
    }

    #[test]
    fn locate_examples() {
        let strip = [line(1, 0, 0), line(1, 0, 1)];
        assert!(locate_in_c(&Point::new(vec![ratio(1, 2), rat(5)]).unwrap(), &strip).unwrap());
        let cross = [line(1, 0, 0), line(0, 1, 0)];
        assert!(!locate_in_c(&Point::from_ints(&[2, 2]), &cross).unwrap());
        let tri = [line(1, 0, 0), line(0, 1, 0), line(1, 1, 1)];
        assert!(locate_in_c(&Point::new(vec![ratio(1, 3), ratio(1, 3)]).unwrap(), &tri).unwrap());
        assert_eq!(locate_in_c(&Point::from_ints(&[0, 5]), &strip), Err(Error::OnHyperplane { index: 0 }));
    }

    #[test]
    fn multiplicity_examples() {
        let general = [line(1, 0, 0), line(0, 1, 0), line(1, 1, 1)];
        assert_eq!(hyperplane_multiplicity(&general).unwrap(), 2);
        let concurrent = [line(1, 0, 0), line(0, 1, 0), line(1, 1, 0)];
        assert_eq!(hyperplane_multiplicity(&concurrent).unwrap(), 3);
        let parallel = [line(1, 0, 0), line(1, 0, 1), line(1, 0, 2), line(1, 0, 3)];
        assert_eq!(hyperplane_multiplicity(&parallel).unwrap(), 1);
        let doubled = [line(1, 0, 0), line(2, 0, 0), line(1, 0, 3)];
        assert_eq!(hyperplane_multiplicity(&doubled).unwrap(), 2);
    }

    #[test]
    fn parallel_lines_partition() {
        let planes: Vec<_> = (0..4).map(|c| line(1, 0, c)).collect();
        let cfg = SearchConfig::default();
        let SearchOutcome::Found(found) = find_hyperplane_partition(&planes, 2, &cfg).unwrap() else {
            panic!("expected a partition");
        };
        let x = rational::to_f64(&found.witness.coords()[0]);
        assert!(x > 1.0 && x < 2.0, "witness {:?}", found.witness);
        let mut parts = found.partition.clone();
        parts.sort();
        assert_eq!(parts, vec![vec![0, 2], vec![1, 3]]);
        assert!(verify_hyperplane_partition(&planes, &found, 2).unwrap().passed());
    }

    #[test]
    fn projection_is_exact() {
        let h = line(1, 1, 2);
        let p = h.project(&Point::from_ints(&[0, 0]));
        assert_eq!(p, Point::from_ints(&[1, 1]));
        assert!(h.eval(h.project(&Point::new(vec![ratio(1, 3), rat(7)]).unwrap()).coords()).is_zero());
    }

    #[test]
    fn caps_enforced() {
        let many: Vec<_> = (0..21).map(|c| line(1, 0, c)).collect();
        assert!(matches!(enumerate_cells(&many), Err(Error::CapExceeded { .. })));
        let h4 = Hyperplane::from_ints(&[1, 0, 0, 0], 0).unwrap();
        assert!(matches!(enumerate_cells(&[h4]), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn sign_vector_json() {
        let s: SignVector = serde_json::from_str("\"+-+\"").unwrap();
        assert_eq!(s.0, vec![Sign::Plus, Sign::Minus, Sign::Plus]);
        assert!(serde_json::from_str::<SignVector>("\"+0\"").is_err());
        let h: Hyperplane = serde_json::from_str(r#"{"normal":[1,"2"],"offset":["1","3"]}"#).unwrap();
        assert_eq!(h.offset(), &ratio(1, 3));
        assert!(serde_json::from_str::<Hyperplane>(r#"{"normal":[0,0],"offset":1}"#).is_err());
    }
}
