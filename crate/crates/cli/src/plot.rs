//! Neutral plot data for planar instances: polygons, circles, clipped lines,
//! arrangement cells, and the witness point with its shadow arcs.

use raycert_core::arrangements::{enumerate_cells, is_almost_bounded};
use raycert_core::coverage::shadow_arcs;
use raycert_core::rational::to_f64;
use raycert_core::{ConvexBody, Point};
use serde::Serialize;

use crate::files::{CertificateFile, Claim, InstanceFile, InstanceKind};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct PlotPolygon {
    pub index: usize,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct PlotCircle {
    pub index: usize,
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Serialize)]
pub struct PlotLine {
    pub index: usize,
    pub normal: [f64; 2],
    pub offset: f64,
    pub segment: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Serialize)]
pub struct PlotCell {
    pub sign_vector: String,
    pub sample: [f64; 2],
    pub bounded: bool,
    pub almost_bounded: bool,
}

#[derive(Debug, Serialize)]
pub struct PlotPoint {
    pub label: String,
    pub at: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct PlotArc {
    pub body: usize,
    pub center: [f64; 2],
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Serialize)]
pub struct PlotData {
    pub window: [[f64; 2]; 2],
    pub polygons: Vec<PlotPolygon>,
    pub circles: Vec<PlotCircle>,
    pub lines: Vec<PlotLine>,
    pub cells: Vec<PlotCell>,
    pub points: Vec<PlotPoint>,
    pub arcs: Vec<PlotArc>,
    /// Subfamilies of the certificate, if one was given.
    pub groups: Vec<Vec<usize>>,
}

fn xy(p: &Point) -> [f64; 2] {
    let v = p.to_f64();
    [v[0], v[1]]
}

/// Counter-clockwise hull by the monotone chain.
fn hull_order(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Part of `{x : a·x = b}` inside the window.
fn clip(a: [f64; 2], b: f64, window: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let nn = a[0] * a[0] + a[1] * a[1];
    let base = [a[0] * b / nn, a[1] * b / nn];
    let dir = [-a[1], a[0]];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if dir[k] == 0.0 {
            if base[k] < window[0][k] || base[k] > window[1][k] {
                return None;
            }
            continue;
        }
        let lo = (window[0][k] - base[k]) / dir[k];
        let hi = (window[1][k] - base[k]) / dir[k];
        t0 = t0.max(lo.min(hi));
        t1 = t1.min(lo.max(hi));
    }
    (t0 <= t1).then(|| [[base[0] + t0 * dir[0], base[1] + t0 * dir[1]], [base[0] + t1 * dir[0], base[1] + t1 * dir[1]]])
}

fn grow(window: &mut [[f64; 2]; 2], p: [f64; 2]) {
    for k in 0..2 {
        window[0][k] = window[0][k].min(p[k]);
        window[1][k] = window[1][k].max(p[k]);
    }
}

pub fn export_plot(inst: &InstanceFile, cert: Option<&CertificateFile>) -> Result<PlotData, CliError> {
    if inst.dimension != 2 {
        return Err(CliError::input(format!("export-plot needs d = 2, got d = {}", inst.dimension)));
    }
    let mut data = PlotData {
        window: [[f64::INFINITY; 2], [f64::NEG_INFINITY; 2]],
        polygons: Vec::new(),
        circles: Vec::new(),
        lines: Vec::new(),
        cells: Vec::new(),
        points: Vec::new(),
        arcs: Vec::new(),
        groups: Vec::new(),
    };
    let witness = cert.map(|c| match &c.claim {
        Claim::TverbergRays(t) => (t.p.clone(), t.subfamilies.iter().map(|s| s.member_indices.clone()).collect()),
        Claim::CenterPoint(cp) => (cp.p.clone(), Vec::new()),
        Claim::TverbergHyperplanes(h) => (h.witness.clone(), h.partition.clone()),
    });
    if let Some((p, groups)) = &witness {
        grow(&mut data.window, xy(p));
        data.points.push(PlotPoint { label: "witness".into(), at: xy(p) });
        data.groups = groups.clone();
    }

    match inst.kind {
        InstanceKind::Bodies => {
            for (index, body) in inst.bodies.iter().enumerate() {
                match body {
                    ConvexBody::Polytope(poly) => {
                        let vertices = hull_order(poly.vertices().iter().map(xy).collect());
                        vertices.iter().for_each(|&v| grow(&mut data.window, v));
                        data.polygons.push(PlotPolygon { index, vertices });
                    }
                    ConvexBody::Ball(b) => {
                        let center = xy(b.center());
                        let radius = to_f64(b.radius());
                        grow(&mut data.window, [center[0] - radius, center[1] - radius]);
                        grow(&mut data.window, [center[0] + radius, center[1] + radius]);
                        data.circles.push(PlotCircle { index, center, radius });
                    }
                }
            }
            if let Some((p, _)) = &witness {
                let family = inst.family()?;
                if family.bodies().iter().all(|b| !b.contains(p).unwrap_or(true)) {
                    for arc in shadow_arcs(p, &family)?.arcs {
                        data.arcs.push(PlotArc { body: arc.body, center: xy(p), lo: arc.lo, hi: arc.hi });
                    }
                }
            }
        }
        InstanceKind::Hyperplanes => {
            let planes = inst.planes()?;
            for cell in enumerate_cells(planes)? {
                let sample = xy(&cell.sample);
                grow(&mut data.window, sample);
                data.cells.push(PlotCell {
                    sign_vector: String::from(cell.sign_vector.clone()),
                    sample,
                    bounded: cell.bounded_radius.is_some(),
                    almost_bounded: is_almost_bounded(&cell, planes)?,
                });
            }
        }
    }
    // pad the window so unbounded cells and clipped lines stay visible
    let pad = (0..2).map(|k| (data.window[1][k] - data.window[0][k]).max(1.0) * 0.25).fold(1.0, f64::max);
    for k in 0..2 {
        data.window[0][k] -= pad;
        data.window[1][k] += pad;
    }
    if inst.kind == InstanceKind::Hyperplanes {
        for (index, h) in inst.hyperplanes.iter().enumerate() {
            let a = [to_f64(&h.normal()[0]), to_f64(&h.normal()[1])];
            let b = to_f64(h.offset());
            data.lines.push(PlotLine { index, normal: a, offset: b, segment: clip(a, b, data.window) });
        }
    }
    Ok(data)
}
