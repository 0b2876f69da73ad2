//! The prescribed mean curvature equation for sections of `E(κ, τ)`:
//!
//! ```text
//! Q(u) = ∂x(λU/W) + ∂y(λV/W) − 2λ²H = 0,
//! U = u_x + λτy,  V = u_y − λτx,  W = √(1 + U² + V²),
//! ```
//!
//! discretised by conservative finite differences on a (possibly skewed)
//! lattice masked by a polygon. With lattice steps `d₁, d₂` and
//! `A = [d₁ d₂]`, the divergence is taken in index space on the flux
//! `A⁻¹F`, so a triangle whose edges run along lattice lines carries its
//! Dirichlet data exactly on nodes.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::etau::ManifoldParams;
use crate::hyperbolic::TwistProfile;

/// Dirichlet data of one polygon edge, defined on a neighbourhood of the
/// edge so that ghost nodes can be filled by extension.
pub type EdgeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub fn edge_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> EdgeFn {
    Arc::new(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Outside,
    Inside,
    Boundary,
}

/// Which data function a boundary node takes its value from. Polygon
/// vertices average the two incident edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assignment {
    Edge(usize),
    Corner(usize),
}

/// Lattice `X = origin + i d₁ + j d₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: [f64; 2],
    pub d1: [f64; 2],
    pub d2: [f64; 2],
}

impl Lattice {
    pub fn cartesian(origin: [f64; 2], h: f64) -> Self {
        Self {
            origin,
            d1: [h, 0.0],
            d2: [0.0, h],
        }
    }

    fn det(&self) -> f64 {
        self.d1[0] * self.d2[1] - self.d1[1] * self.d2[0]
    }

    /// `A⁻¹` with `A = [d₁ d₂]`.
    fn inverse(&self) -> [[f64; 2]; 2] {
        let det = self.det();
        [
            [self.d2[1] / det, -self.d2[0] / det],
            [-self.d1[1] / det, self.d1[0] / det],
        ]
    }

    pub fn position(&self, i: f64, j: f64) -> [f64; 2] {
        [
            self.origin[0] + i * self.d1[0] + j * self.d2[0],
            self.origin[1] + i * self.d1[1] + j * self.d2[1],
        ]
    }

    /// Fractional lattice coordinates of a point.
    pub fn coordinates(&self, p: [f64; 2]) -> [f64; 2] {
        let inv = self.inverse();
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [inv[0][0] * dx + inv[0][1] * dy, inv[1][0] * dx + inv[1][1] * dy]
    }

    fn spacing(&self) -> f64 {
        self.d1[0].hypot(self.d1[1]).max(self.d2[0].hypot(self.d2[1]))
    }
}

/// Polygonal base domain with its node mask and Dirichlet data.
#[derive(Clone)]
pub struct GraphDomain {
    polygon: Vec<[f64; 2]>,
    ccw: bool,
    lattice: Lattice,
    i0: i64,
    j0: i64,
    ni: usize,
    nj: usize,
    kind: Vec<NodeKind>,
    assignment: Vec<Option<Assignment>>,
    boundary_value: Vec<f64>,
    /// Outside nodes carrying extended edge data.
    ghost: Vec<bool>,
    unknown: Vec<usize>,
    inside: Vec<(i64, i64)>,
    edges: Vec<EdgeFn>,
    jump_vertices: Vec<usize>,
}

impl fmt::Debug for GraphDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphDomain")
            .field("polygon", &self.polygon)
            .field("lattice", &self.lattice)
            .field("inside", &self.inside.len())
            .field("jump_vertices", &self.jump_vertices)
            .finish()
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ex * ex + ey * ey;
    let s = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
    (p[0] - a[0] - s * ex).hypot(p[1] - a[1] - s * ey)
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl GraphDomain {
    /// Cartesian grid of spacing `h` with a node at the origin.
    pub fn cartesian(polygon: Vec<[f64; 2]>, h: f64, edges: Vec<EdgeFn>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("must be positive, got {h}")));
        }
        Self::on_lattice(polygon, Lattice::cartesian([0.0, 0.0], h), edges)
    }

    pub fn on_lattice(polygon: Vec<[f64; 2]>, lattice: Lattice, edges: Vec<EdgeFn>) -> Result<Self> {
        let n = polygon.len();
        if n < 3 {
            return Err(Error::InvalidDomain("polygon needs at least three vertices".into()));
        }
        if edges.len() != n {
            return Err(Error::InvalidDomain(format!(
                "{} edges but {} data functions",
                n,
                edges.len()
            )));
        }
        if polygon.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("non-finite vertex".into()));
        }
        if !(lattice.det().abs() > 0.0) {
            return Err(Error::InvalidDomain("degenerate lattice".into()));
        }
        for a in 0..n {
            for b in a + 1..n {
                if b == a + 1 || (a == 0 && b == n - 1) {
                    continue;
                }
                if segments_cross(polygon[a], polygon[(a + 1) % n], polygon[b], polygon[(b + 1) % n]) {
                    return Err(Error::InvalidDomain(format!("edges {a} and {b} cross")));
                }
            }
        }
        let signed_area: f64 = (0..n)
            .map(|k| {
                let (p, q) = (polygon[k], polygon[(k + 1) % n]);
                p[0] * q[1] - p[1] * q[0]
            })
            .sum::<f64>()
            / 2.0;
        if signed_area.abs() < 1e-14 {
            return Err(Error::InvalidDomain("polygon has zero area".into()));
        }

        let coords: Vec<[f64; 2]> = polygon.iter().map(|&p| lattice.coordinates(p)).collect();
        let lo = |k: usize| coords.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min).floor() as i64 - 2;
        let hi = |k: usize| coords.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 2;
        let (i0, j0) = (lo(0), lo(1));
        let (ni, nj) = ((hi(0) - i0 + 1) as usize, (hi(1) - j0 + 1) as usize);
        let eps = 1e-9 * lattice.spacing();

        let total = ni * nj;
        let mut kind = vec![NodeKind::Outside; total];
        let mut assignment = vec![None; total];
        for jj in 0..nj {
            for ii in 0..ni {
                let k = jj * ni + ii;
                let p = lattice.position((i0 + ii as i64) as f64, (j0 + jj as i64) as f64);
                if let Some(v) = (0..n).find(|&v| (p[0] - polygon[v][0]).hypot(p[1] - polygon[v][1]) < eps) {
                    kind[k] = NodeKind::Boundary;
                    assignment[k] = Some(Assignment::Corner(v));
                } else if let Some(e) = (0..n).find(|&e| segment_distance(p, polygon[e], polygon[(e + 1) % n]) < eps) {
                    kind[k] = NodeKind::Boundary;
                    assignment[k] = Some(Assignment::Edge(e));
                } else if point_in_polygon(p, &polygon) {
                    kind[k] = NodeKind::Inside;
                }
            }
        }
        // ghost ring: every 9-point neighbour of an inside node must carry a value
        let snapshot = kind.clone();
        let mut ghost = vec![false; total];
        for jj in 0..nj {
            for ii in 0..ni {
                if snapshot[jj * ni + ii] != NodeKind::Inside {
                    continue;
                }
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b) = (ii as i64 + di, jj as i64 + dj);
                        let k = b as usize * ni + a as usize;
                        if kind[k] == NodeKind::Outside {
                            let p = lattice.position((i0 + a) as f64, (j0 + b) as f64);
                            let e = (0..n)
                                .min_by(|&x, &y| {
                                    let dx = segment_distance(p, polygon[x], polygon[(x + 1) % n]);
                                    let dy = segment_distance(p, polygon[y], polygon[(y + 1) % n]);
                                    dx.total_cmp(&dy)
                                })
                                .unwrap();
                            kind[k] = NodeKind::Boundary;
                            assignment[k] = Some(Assignment::Edge(e));
                            ghost[k] = true;
                        }
                    }
                }
            }
        }

        let mut unknown = vec![usize::MAX; total];
        let mut inside = Vec::new();
        for jj in 0..nj {
            for ii in 0..ni {
                let k = jj * ni + ii;
                if kind[k] == NodeKind::Inside {
                    unknown[k] = inside.len();
                    inside.push((i0 + ii as i64, j0 + jj as i64));
                }
            }
        }
        if inside.is_empty() {
            return Err(Error::InvalidDomain("no interior nodes; refine the grid".into()));
        }

        let mut dom = Self {
            polygon,
            ccw: signed_area > 0.0,
            lattice,
            i0,
            j0,
            ni,
            nj,
            kind,
            assignment,
            boundary_value: vec![f64::NAN; total],
            ghost,
            unknown,
            inside,
            edges,
            jump_vertices: Vec::new(),
        };
        dom.fill_boundary()?;
        Ok(dom)
    }

    fn fill_boundary(&mut self) -> Result<()> {
        let n = self.polygon.len();
        for k in 0..self.kind.len() {
            let Some(a) = self.assignment[k] else { continue };
            let (ii, jj) = ((k % self.ni) as i64 + self.i0, (k / self.ni) as i64 + self.j0);
            let p = self.lattice.position(ii as f64, jj as f64);
            let v = match a {
                Assignment::Edge(e) => (self.edges[e])(p[0], p[1]),
                Assignment::Corner(v) => {
                    let (lo, hi) = self.corner_limits_at(v, p);
                    0.5 * (lo + hi)
                }
            };
            if !v.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "boundary data not finite at ({}, {})",
                    p[0], p[1]
                )));
            }
            self.boundary_value[k] = v;
        }
        self.jump_vertices = (0..n)
            .filter(|&v| {
                let (a, b) = self.corner_limits_at(v, self.polygon[v]);
                (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs()))
            })
            .collect();
        Ok(())
    }

    fn corner_limits_at(&self, v: usize, p: [f64; 2]) -> (f64, f64) {
        let n = self.polygon.len();
        let before = (self.edges[(v + n - 1) % n])(p[0], p[1]);
        let after = (self.edges[v])(p[0], p[1]);
        (before, after)
    }

    /// Same polygon and lattice with different edge data.
    pub fn with_edges(&self, edges: Vec<EdgeFn>) -> Result<Self> {
        if edges.len() != self.polygon.len() {
            return Err(Error::InvalidDomain("edge count mismatch".into()));
        }
        let mut dom = self.clone();
        dom.edges = edges;
        dom.fill_boundary()?;
        Ok(dom)
    }

    pub fn polygon(&self) -> &[[f64; 2]] {
        &self.polygon
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Largest lattice step length.
    pub fn h(&self) -> f64 {
        self.lattice.spacing()
    }

    pub fn is_ccw(&self) -> bool {
        self.ccw
    }

    pub fn inside_nodes(&self) -> &[(i64, i64)] {
        &self.inside
    }

    pub fn n_inside(&self) -> usize {
        self.inside.len()
    }

    /// Vertices where the two incident data functions disagree: the feet of
    /// vertical boundary segments.
    pub fn jump_vertices(&self) -> &[usize] {
        &self.jump_vertices
    }

    /// The one-sided limits of the data at vertex `v`: incoming edge first.
    pub fn corner_limits(&self, v: usize) -> (f64, f64) {
        self.corner_limits_at(v, self.polygon[v])
    }

    pub fn edge_value(&self, e: usize, p: [f64; 2]) -> f64 {
        (self.edges[e])(p[0], p[1])
    }

    pub fn position(&self, i: i64, j: i64) -> [f64; 2] {
        self.lattice.position(i as f64, j as f64)
    }

    fn slot(&self, i: i64, j: i64) -> Option<usize> {
        let (a, b) = (i - self.i0, j - self.j0);
        (a >= 0 && b >= 0 && (a as usize) < self.ni && (b as usize) < self.nj)
            .then(|| b as usize * self.ni + a as usize)
    }

    /// Whether the node's value is a genuine sample of the solution: not a
    /// ghost and not a vertex where the data jumps.
    fn reliable(&self, i: i64, j: i64) -> bool {
        self.slot(i, j).is_some_and(|k| {
            !self.ghost[k]
                && !matches!(self.assignment[k], Some(Assignment::Corner(v)) if self.jump_vertices.contains(&v))
        })
    }

    pub fn kind(&self, i: i64, j: i64) -> NodeKind {
        self.slot(i, j).map_or(NodeKind::Outside, |k| self.kind[k])
    }

    pub fn assignment(&self, i: i64, j: i64) -> Option<Assignment> {
        self.slot(i, j).and_then(|k| self.assignment[k])
    }

    pub fn boundary_value(&self, i: i64, j: i64) -> Option<f64> {
        self.slot(i, j)
            .filter(|&k| self.kind[k] == NodeKind::Boundary)
            .map(|k| self.boundary_value[k])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    /// Same polygon and node layout.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.polygon == other.polygon && self.lattice == other.lattice && self.kind == other.kind
    }

    /// Range of the Dirichlet data.
    pub fn data_range(&self) -> (f64, f64) {
        self.boundary_value
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// A graph `u` over a domain: values at inside and boundary nodes.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GraphDomain>,
    params: ManifoldParams,
    h_mean: f64,
    values: Vec<f64>,
}

impl ScalarField {
    /// Inside nodes from `f`, boundary nodes from the domain data.
    pub fn from_fn(domain: Arc<GraphDomain>, params: ManifoldParams, h_mean: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let inside: Vec<f64> = domain
            .inside
            .iter()
            .map(|&(i, j)| {
                let p = domain.position(i, j);
                f(p[0], p[1])
            })
            .collect();
        Self::from_inside(domain, params, h_mean, &inside)
    }

    /// Every inside and ghost node from `f`, ignoring the edge data; useful
    /// for evaluating exact solutions.
    pub fn sampled(domain: Arc<GraphDomain>, params: ManifoldParams, h_mean: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![f64::NAN; domain.kind.len()];
        for (k, v) in values.iter_mut().enumerate() {
            if domain.kind[k] != NodeKind::Outside {
                let (ii, jj) = ((k % domain.ni) as i64 + domain.i0, (k / domain.ni) as i64 + domain.j0);
                let p = domain.position(ii, jj);
                *v = f(p[0], p[1]);
            }
        }
        Self {
            domain,
            params,
            h_mean,
            values,
        }
    }

    pub fn from_inside(domain: Arc<GraphDomain>, params: ManifoldParams, h_mean: f64, inside: &[f64]) -> Self {
        let mut values = domain.boundary_value.clone();
        for (k, &(i, j)) in domain.inside.iter().enumerate() {
            values[domain.slot(i, j).unwrap()] = inside[k];
        }
        Self {
            domain,
            params,
            h_mean,
            values,
        }
    }

    pub fn domain(&self) -> &Arc<GraphDomain> {
        &self.domain
    }

    pub fn params(&self) -> &ManifoldParams {
        &self.params
    }

    pub fn mean_curvature(&self) -> f64 {
        self.h_mean
    }

    pub fn value(&self, i: i64, j: i64) -> Option<f64> {
        self.domain.slot(i, j).map(|k| self.values[k]).filter(|v| !v.is_nan())
    }

    /// Values at the inside nodes in [`GraphDomain::inside_nodes`] order.
    pub fn inside_values(&self) -> Vec<f64> {
        self.domain
            .inside
            .iter()
            .map(|&(i, j)| self.value(i, j).unwrap())
            .collect()
    }

    /// Bilinear interpolation in lattice coordinates.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        const SNAP: f64 = 1e-9;
        let c = self.domain.lattice.coordinates(p);
        let split = |x: f64| {
            let f = x.floor();
            let s = x - f;
            if s > 1.0 - SNAP {
                (f as i64 + 1, 0.0)
            } else if s < SNAP {
                (f as i64, 0.0)
            } else {
                (f as i64, s)
            }
        };
        let ((i, s), (j, t)) = (split(c[0]), split(c[1]));
        // nodes carrying zero weight need not exist
        let node = |di: i64, dj: i64, w: f64| {
            if w == 0.0 {
                Some(0.0)
            } else {
                self.value(i + di, j + dj).map(|v| w * v)
            }
        };
        Some(
            node(0, 0, (1.0 - s) * (1.0 - t))?
                + node(1, 0, s * (1.0 - t))?
                + node(0, 1, (1.0 - s) * t)?
                + node(1, 1, s * t)?,
        )
    }

    /// Largest nodal difference over the inside nodes.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if !self.domain.same_grid(&other.domain) {
            return Err(Error::DomainMismatch("different grids".into()));
        }
        Ok(self
            .domain
            .inside
            .iter()
            .map(|&(i, j)| (self.value(i, j).unwrap() - other.value(i, j).unwrap()).abs())
            .fold(0.0, f64::max))
    }

    fn defined_nodes(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let d = &self.domain;
        (0..d.nj).flat_map(move |jj| {
            (0..d.ni).filter_map(move |ii| {
                let v = self.values[jj * d.ni + ii];
                (!v.is_nan()).then_some((ii as i64 + d.i0, jj as i64 + d.j0, v))
            })
        })
    }

    /// CSV `x,y,u` over inside and boundary nodes, row by row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,u")?;
        for (i, j, v) in self.defined_nodes() {
            let p = self.domain.position(i, j);
            writeln!(w, "{:.12e},{:.12e},{:.12e}", p[0], p[1], v)?;
        }
        Ok(())
    }

    /// OBJ mesh, two triangles per lattice cell with four defined corners.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        let d = &self.domain;
        let mut index = vec![0usize; self.values.len()];
        for (next, (i, j, v)) in (1..).zip(self.defined_nodes()) {
            let p = d.position(i, j);
            writeln!(w, "v {:.12e} {:.12e} {:.12e}", p[0], p[1], v)?;
            index[d.slot(i, j).unwrap()] = next;
        }
        for jj in 0..d.nj.saturating_sub(1) {
            for ii in 0..d.ni.saturating_sub(1) {
                let k = [
                    jj * d.ni + ii,
                    jj * d.ni + ii + 1,
                    (jj + 1) * d.ni + ii,
                    (jj + 1) * d.ni + ii + 1,
                ];
                if k.iter().all(|&k| index[k] > 0) {
                    let [a, b, c, e] = k.map(|k| index[k]);
                    writeln!(w, "f {a} {b} {e}")?;
                    writeln!(w, "f {a} {e} {c}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FluxModel {
    Minimal,
    Linear,
}

/// Linearisation used for the update direction.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Linearization {
    Newton,
    /// `1/W` frozen at the current iterate.
    Picard,
}

/// Stencil offsets of a face flux: the `p` difference then the `q` average.
const FACE_X: [(i64, i64, f64, f64); 6] = [
    (1, 0, 1.0, 0.0),
    (0, 0, -1.0, 0.0),
    (0, 1, 0.0, 0.25),
    (1, 1, 0.0, 0.25),
    (0, -1, 0.0, -0.25),
    (1, -1, 0.0, -0.25),
];
const FACE_Y: [(i64, i64, f64, f64); 6] = [
    (0, 1, 0.0, 1.0),
    (0, 0, 0.0, -1.0),
    (1, 0, 0.25, 0.0),
    (1, 1, 0.25, 0.0),
    (-1, 0, -0.25, 0.0),
    (-1, 1, -0.25, 0.0),
];

struct Discretization<'a> {
    dom: &'a GraphDomain,
    params: &'a ManifoldParams,
    h_mean: f64,
    inv: [[f64; 2]; 2],
    model: FluxModel,
}

impl<'a> Discretization<'a> {
    fn new(dom: &'a GraphDomain, params: &'a ManifoldParams, h_mean: f64, model: FluxModel) -> Self {
        Self {
            dom,
            params,
            h_mean,
            inv: dom.lattice.inverse(),
            model,
        }
    }

    /// Index-space flux through the face leaving `(i, j)` in direction
    /// `dir`, with its derivatives in the six stencil values.
    fn face(&self, vals: &[f64], i: i64, j: i64, dir: usize) -> (f64, [(i64, i64, f64); 6]) {
        self.face_with(vals, i, j, dir, Linearization::Newton)
    }

    fn face_with(&self, vals: &[f64], i: i64, j: i64, dir: usize, lin: Linearization) -> (f64, [(i64, i64, f64); 6]) {
        let mut stencil = if dir == 0 { FACE_X } else { FACE_Y };
        // the cross difference falls back to one side when the other side
        // holds ghost or jump-vertex values
        let ok = |k: usize| self.dom.reliable(i + stencil[k].0, j + stencil[k].1);
        let (plus, minus) = (ok(2) && ok(3), ok(4) && ok(5));
        if plus != minus {
            let (keep, drop) = if plus { (2, 4) } else { (4, 2) };
            let double = |e: (i64, i64, f64, f64)| (e.0, e.1, 2.0 * e.2, 2.0 * e.3);
            for k in [keep, keep + 1] {
                stencil[k] = double(stencil[k]);
            }
            // the dropped side is replaced by the face's own pair
            for (k, base) in [(drop, 1), (drop + 1, 0)] {
                let e = double(stencil[k]);
                stencil[k] = (stencil[base].0, stencil[base].1, e.2, e.3);
            }
        }
        let (mut p, mut q) = (0.0, 0.0);
        for &(di, dj, cp, cq) in &stencil {
            let v = vals[self.dom.slot(i + di, j + dj).unwrap()];
            p += cp * v;
            q += cq * v;
        }
        let mid = if dir == 0 {
            self.dom.lattice.position(i as f64 + 0.5, j as f64)
        } else {
            self.dom.lattice.position(i as f64, j as f64 + 0.5)
        };
        let inv = &self.inv;
        // ∇u = A⁻ᵀ (p, q)
        let gx = inv[0][0] * p + inv[1][0] * q;
        let gy = inv[0][1] * p + inv[1][1] * q;
        let lam = self.params.lambda(mid[0], mid[1]);
        let [w0, w1] = self.params.connection_form(mid[0], mid[1]);
        let (uu, vv) = (gx + w0, gy + w1);
        let (f, dfd) = match self.model {
            FluxModel::Minimal => {
                let w = (1.0 + uu * uu + vv * vv).sqrt();
                let s = lam / w;
                let w2 = w * w;
                let d = match lin {
                    Linearization::Newton => [
                        [s * (1.0 - uu * uu / w2), -s * uu * vv / w2],
                        [-s * uu * vv / w2, s * (1.0 - vv * vv / w2)],
                    ],
                    Linearization::Picard => [[s, 0.0], [0.0, s]],
                };
                ([s * uu, s * vv], d)
            }
            FluxModel::Linear => ([lam * uu, lam * vv], [[lam, 0.0], [0.0, lam]]),
        };
        let g = inv[dir][0] * f[0] + inv[dir][1] * f[1];
        // dG/d(gx, gy) then chain through A⁻ᵀ
        let dgx = inv[dir][0] * dfd[0][0] + inv[dir][1] * dfd[1][0];
        let dgy = inv[dir][0] * dfd[0][1] + inv[dir][1] * dfd[1][1];
        let dp = dgx * inv[0][0] + dgy * inv[0][1];
        let dq = dgx * inv[1][0] + dgy * inv[1][1];
        let mut jac = [(0, 0, 0.0); 6];
        for (slot, &(di, dj, cp, cq)) in jac.iter_mut().zip(&stencil) {
            *slot = (i + di, j + dj, dp * cp + dq * cq);
        }
        (g, jac)
    }

    fn source(&self, i: i64, j: i64) -> f64 {
        let p = self.dom.position(i, j);
        let lam = self.params.lambda(p[0], p[1]);
        2.0 * lam * lam * self.h_mean
    }

    fn residual_at(&self, vals: &[f64], i: i64, j: i64) -> f64 {
        let (e, _) = self.face(vals, i, j, 0);
        let (w, _) = self.face(vals, i - 1, j, 0);
        let (n, _) = self.face(vals, i, j, 1);
        let (s, _) = self.face(vals, i, j - 1, 1);
        (e - w) + (n - s) - self.source(i, j)
    }

    fn residual(&self, vals: &[f64]) -> Vec<f64> {
        self.dom
            .inside
            .par_iter()
            .map(|&(i, j)| self.residual_at(vals, i, j))
            .collect()
    }

    fn jacobian_row(&self, vals: &[f64], i: i64, j: i64, lin: Linearization) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(24);
        let mut push = |entries: &[(i64, i64, f64); 6], sign: f64| {
            for &(a, b, d) in entries {
                let k = self.dom.unknown[self.dom.slot(a, b).unwrap()];
                if k != usize::MAX {
                    row.push((k, sign * d));
                }
            }
        };
        push(&self.face_with(vals, i, j, 0, lin).1, 1.0);
        push(&self.face_with(vals, i - 1, j, 0, lin).1, -1.0);
        push(&self.face_with(vals, i, j, 1, lin).1, 1.0);
        push(&self.face_with(vals, i, j - 1, 1, lin).1, -1.0);
        row.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(9);
        for (k, v) in row {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => merged.push((k, v)),
            }
        }
        merged
    }

    fn jacobian(&self, vals: &[f64]) -> Result<SparseColMat<usize, f64>> {
        self.jacobian_with(vals, Linearization::Newton)
    }

    fn jacobian_with(&self, vals: &[f64], lin: Linearization) -> Result<SparseColMat<usize, f64>> {
        let rows: Vec<Vec<(usize, f64)>> = self
            .dom
            .inside
            .par_iter()
            .map(|&(i, j)| self.jacobian_row(vals, i, j, lin))
            .collect();
        let triplets: Vec<Triplet<usize, usize, f64>> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| Triplet::new(r, c, v)))
            .collect();
        let n = self.dom.inside.len();
        SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| Error::SingularJacobian(format!("{e:?}")))
    }

    fn scatter(&self, vals: &mut [f64], inside: &[f64]) {
        for (k, &(i, j)) in self.dom.inside.iter().enumerate() {
            vals[self.dom.slot(i, j).unwrap()] = inside[k];
        }
    }
}

fn lu_solve(jac: &SparseColMat<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = jac.sp_lu().map_err(|e| Error::SingularJacobian(format!("{e:?}")))?;
    let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(x.as_mut());
    let out: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian("non-finite Newton step".into()));
    }
    Ok(out)
}

/// `Q(u)` at the inside nodes, in [`GraphDomain::inside_nodes`] order.
pub fn residual(field: &ScalarField) -> Vec<f64> {
    Discretization::new(&field.domain, &field.params, field.h_mean, FluxModel::Minimal).residual(&field.values)
}

pub fn max_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Analytic and forward-difference Jacobian columns of the residual at the
/// given inside nodes, as `(analytic, finite difference)` column pairs.
pub fn jacobian_columns(field: &ScalarField, columns: &[usize], step: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let disc = Discretization::new(&field.domain, &field.params, field.h_mean, FluxModel::Minimal);
    let jac = disc.jacobian(&field.values)?;
    let dense = jac.to_dense();
    let base = disc.residual(&field.values);
    columns
        .iter()
        .map(|&c| {
            let (i, j) = field.domain.inside[c];
            let slot = field.domain.slot(i, j).unwrap();
            let mut vals = field.values.clone();
            vals[slot] += step;
            let bumped = disc.residual(&vals);
            let fd = bumped.iter().zip(&base).map(|(a, b)| (a - b) / step).collect();
            let an = (0..base.len()).map(|r| dense[(r, c)]).collect();
            Ok((an, fd))
        })
        .collect()
}

/// Solver settings; JSON layout `{h, tol, max_iter, seed}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Grid spacing for drivers that build their own domains.
    pub h: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Moves the initial guess towards a random constant within the data range.
    pub seed: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            h: None,
            tol: 1e-8,
            max_iter: 60,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// Solution of the linearised (flux without `1/W`) problem.
    Laplace,
    Constant(f64),
    Inside(Vec<f64>),
}

const NEWTON_HALVINGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `Q(u) = 0` from the linearised solution.
pub fn solve(
    domain: Arc<GraphDomain>,
    params: ManifoldParams,
    h_mean: f64,
    options: &SolveOptions,
) -> Result<ScalarField> {
    solve_from(domain, params, h_mean, options, InitialGuess::Laplace).map(|(f, _)| f)
}

/// Damped Newton on the discrete system: the step is halved until the
/// residual's ℓ² norm decreases. When the Newton direction needs more than
/// a few halvings, the frozen-coefficient (Picard) direction is tried with
/// up to 40 halvings instead.
pub fn solve_from(
    domain: Arc<GraphDomain>,
    params: ManifoldParams,
    h_mean: f64,
    options: &SolveOptions,
    initial: InitialGuess,
) -> Result<(ScalarField, SolveStats)> {
    if !(options.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if let Some(h) = options.h {
        if (h - domain.h()).abs() > 1e-9 * h {
            return Err(Error::DomainMismatch(format!(
                "options.h = {h} but the domain has h = {}",
                domain.h()
            )));
        }
    }
    let n = domain.n_inside();
    let disc = Discretization::new(&domain, &params, h_mean, FluxModel::Minimal);
    let mut vals = domain.boundary_value.clone();
    let start: Vec<f64> = match initial {
        InitialGuess::Laplace => {
            let lin = Discretization::new(&domain, &params, h_mean, FluxModel::Linear);
            disc.scatter(&mut vals, &vec![0.0; n]);
            let r = lin.residual(&vals);
            let jac = lin.jacobian(&vals)?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            lu_solve(&jac, &neg)?
        }
        InitialGuess::Constant(c) => vec![c; n],
        InitialGuess::Inside(v) => {
            if v.len() != n {
                return Err(Error::DomainMismatch(format!(
                    "{} initial values for {n} nodes",
                    v.len()
                )));
            }
            v
        }
    };
    let mut u = start;
    if let Some(seed) = options.seed {
        let (lo, hi) = domain.data_range();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.gen_range(lo..=hi);
        let s: f64 = rng.gen_range(0.0..1.0);
        for v in u.iter_mut() {
            *v = (1.0 - s) * *v + s * c;
        }
    }
    disc.scatter(&mut vals, &u);
    let mut r = disc.residual(&vals);
    let mut iterations = 0;
    while max_norm(&r) >= options.tol {
        if iterations >= options.max_iter {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_norm(&r),
            });
        }
        iterations += 1;
        let base = l2(&r);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut accepted = false;
        for (lin, halvings) in [(Linearization::Newton, NEWTON_HALVINGS), (Linearization::Picard, 40)] {
            let delta = match disc.jacobian_with(&vals, lin).and_then(|jac| lu_solve(&jac, &neg)) {
                Ok(d) => d,
                Err(_) if lin == Linearization::Newton => continue,
                Err(e) => return Err(e),
            };
            let mut t = 1.0;
            for _ in 0..=halvings {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                let mut tv = vals.clone();
                disc.scatter(&mut tv, &trial);
                let tr = disc.residual(&tv);
                if tr.iter().all(|v| v.is_finite()) && l2(&tr) < base {
                    u = trial;
                    vals = tv;
                    r = tr;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_norm(&r),
            });
        }
    }
    let stats = SolveStats {
        iterations,
        residual: max_norm(&r),
    };
    Ok((
        ScalarField {
            domain,
            params,
            h_mean,
            values: vals,
        },
        stats,
    ))
}

/// Discrete comparison: `u₁ ≤ u₂ + tol` at every node.
pub fn comparison_check(field1: &ScalarField, field2: &ScalarField, tol: f64) -> Result<bool> {
    if !field1.domain.same_grid(&field2.domain) || field1.params != field2.params || field1.h_mean != field2.h_mean {
        return Err(Error::DomainMismatch(
            "comparison needs a common grid, parameters and H".into(),
        ));
    }
    Ok(field1
        .values
        .iter()
        .zip(&field2.values)
        .all(|(a, b)| a.is_nan() || *a <= *b + tol))
}

/// Conormal data sampled along one polygon edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeTrace {
    pub edge: usize,
    /// Arclength from the edge's first vertex.
    pub s: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Inward conormal in the orthonormal frame `(E₁, E₂, ξ)`.
    pub eta: Vec<[f64; 3]>,
    /// `⟨η, ξ⟩`.
    pub eta_vertical: Vec<f64>,
    /// Upward unit normal in the frame.
    pub normal: Vec<[f64; 3]>,
    /// Unit edge tangent in the frame.
    pub tangent: [f64; 3],
}

impl EdgeTrace {
    pub fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Trapezoid rule for `∫⟨η, ξ⟩ ds`.
    pub fn integral(&self) -> f64 {
        self.s
            .windows(2)
            .zip(self.eta_vertical.windows(2))
            .map(|(s, v)| 0.5 * (s[1] - s[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Largest defect of `|η| = 1` and `η ⟂ tangent`.
    pub fn frame_defect(&self) -> f64 {
        self.eta
            .iter()
            .map(|e| {
                let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
                let dot = e[0] * self.tangent[0] + e[1] * self.tangent[1] + e[2] * self.tangent[2];
                (norm - 1.0).abs().max(dot.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Conormal along edge `edge_id` from one-sided normal differences of the
/// field and tangential differences of the edge data. At the two end samples
/// `⟨η, ξ⟩` is extrapolated linearly from the interior and clamped to
/// `[−1, 1]`, since the field may jump at vertices.
pub fn edge_trace(field: &ScalarField, edge_id: usize) -> Result<EdgeTrace> {
    let dom = &field.domain;
    let n = dom.polygon.len();
    if edge_id >= n {
        return Err(Error::EdgeNotFound(edge_id));
    }
    let (a, b) = (dom.polygon[edge_id], dom.polygon[(edge_id + 1) % n]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let inward = if dom.ccw { [-t[1], t[0]] } else { [t[1], -t[0]] };
    // probe along the lattice direction closest to the inward normal, so
    // that probes near acute corners stay inside the domain
    let lat = &dom.lattice;
    let probe = [lat.d1, lat.d2, [-lat.d1[0], -lat.d1[1]], [-lat.d2[0], -lat.d2[1]]]
        .into_iter()
        .map(|d| {
            let l = d[0].hypot(d[1]);
            ([d[0] / l, d[1] / l], l)
        })
        .max_by(|x, y| {
            let cx = x.0[0] * inward[0] + x.0[1] * inward[1];
            let cy = y.0[0] * inward[0] + y.0[1] * inward[1];
            cx.total_cmp(&cy)
        })
        .unwrap();
    let (r, step) = probe;
    let m = ((len / dom.h()).round() as usize).max(4);
    let ds = len / m as f64;
    let params = &field.params;

    // the flux field ∇u/W stays bounded where u is steep, so the upward
    // normal is evaluated at the midpoints half a step and one and a half
    // steps inside and extrapolated linearly to the edge
    let upward = |q: [f64; 2], g: [f64; 2]| {
        let lam = params.lambda(q[0], q[1]);
        let [w0, w1] = params.connection_form(q[0], q[1]);
        let (uu, vv) = (g[0] + w0, g[1] + w1);
        let norm = (uu * uu + vv * vv + lam * lam).sqrt();
        [-uu / norm, -vv / norm, lam / norm]
    };
    let det = t[0] * r[1] - t[1] * r[0];
    // gradient from the derivatives along t and r
    let grad = |ut: f64, ur: f64| [(ut * r[1] - ur * t[1]) / det, (ur * t[0] - ut * r[0]) / det];
    let shift = |q: [f64; 2], d: f64, dir: [f64; 2]| [q[0] + d * dir[0], q[1] + d * dir[1]];
    let along_t = |q: [f64; 2]| -> Option<f64> {
        let c = field.interpolate(q)?;
        match (field.interpolate(shift(q, ds, t)), field.interpolate(shift(q, -ds, t))) {
            (Some(f), Some(b)) => Some((f - b) / (2.0 * ds)),
            (Some(f), None) => Some((f - c) / ds),
            (None, Some(b)) => Some((c - b) / ds),
            (None, None) => None,
        }
    };

    let mut s = Vec::with_capacity(m + 1);
    let mut points = Vec::with_capacity(m + 1);
    let mut normals: Vec<Option<[f64; 3]>> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let sk = k as f64 * ds;
        let p = [a[0] + sk * t[0], a[1] + sk * t[1]];
        s.push(sk);
        points.push(p);
        if k == 0 || k == m {
            normals.push(None);
            continue;
        }
        let g = |q: [f64; 2]| dom.edge_value(edge_id, q);
        let eps = 1e-3 * ds;
        let ut0 = (g(shift(p, eps, t)) - g(shift(p, -eps, t))) / (2.0 * eps);
        let (p1, p2) = (shift(p, step, r), shift(p, 2.0 * step, r));
        let nu = (|| {
            let (u1, u2) = (field.interpolate(p1)?, field.interpolate(p2)?);
            let (ut1, ut2) = (along_t(p1)?, along_t(p2)?);
            let near = upward(shift(p, 0.5 * step, r), grad(0.5 * (ut0 + ut1), (u1 - g(p)) / step));
            let far = upward(shift(p, 1.5 * step, r), grad(0.5 * (ut1 + ut2), (u2 - u1) / step));
            let e: [f64; 3] = std::array::from_fn(|i| 1.5 * near[i] - 0.5 * far[i]);
            let l = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            Some([e[0] / l, e[1] / l, e[2] / l])
        })();
        normals.push(nu);
    }

    let frame = |nu: [f64; 3]| {
        let tf = [t[0], t[1], 0.0];
        let c = [
            nu[1] * tf[2] - nu[2] * tf[1],
            nu[2] * tf[0] - nu[0] * tf[2],
            nu[0] * tf[1] - nu[1] * tf[0],
        ];
        let sign = if c[0] * inward[0] + c[1] * inward[1] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        [sign * c[0], sign * c[1], sign * c[2]]
    };

    let mut eta = vec![[0.0; 3]; m + 1];
    let mut normal = vec![[0.0; 3]; m + 1];
    let mut vert = vec![f64::NAN; m + 1];
    for k in 1..m {
        let nu = normals[k].ok_or_else(|| Error::InvalidDomain(format!("edge {edge_id} trace leaves the grid")))?;
        let e = frame(nu);
        normal[k] = nu;
        eta[k] = e;
        vert[k] = e[2];
    }
    for (end, i1, i2) in [(0usize, 1usize, 2usize), (m, m - 1, m - 2)] {
        let v = (2.0 * vert[i1] - vert[i2]).clamp(-1.0, 1.0);
        let horiz = (1.0 - v * v).sqrt();
        let e = [horiz * inward[0], horiz * inward[1], v];
        // the normal completing (t, η) on the side of its neighbour
        let c = [t[1] * e[2], -t[0] * e[2], t[0] * e[1] - t[1] * e[0]];
        let sign = if c[0] * normal[i1][0] + c[1] * normal[i1][1] + c[2] * normal[i1][2] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        vert[end] = v;
        eta[end] = e;
        normal[end] = [sign * c[0], sign * c[1], sign * c[2]];
    }
    Ok(EdgeTrace {
        edge: edge_id,
        s,
        points,
        eta,
        eta_vertical: vert,
        normal,
        tangent: [t[0], t[1], 0.0],
    })
}

/// Number of radii used to extrapolate level-set directions to the corner.
const TWIST_RADII: usize = 4;
const TWIST_ANGLES: usize = 96;

/// Twist of the surface normal along the vertical segment over a jump
/// vertex. For each height the level set `u = z` is located on small arcs
/// around the vertex, its angle from the lower-data edge is extrapolated to
/// zero radius, and the result is returned as a profile in `t = z − z_low`.
///
/// `radius` is the largest arc radius; arcs at `radius·k/4`, `k = 1…4`, are
/// used and fitted linearly in the radius.
pub fn corner_twist_profile(
    field: &ScalarField,
    corner_vertex: usize,
    heights: &[f64],
    radius: f64,
) -> Result<TwistProfile> {
    let dom = &field.domain;
    let n = dom.polygon.len();
    if corner_vertex >= n {
        return Err(Error::EdgeNotFound(corner_vertex));
    }
    if !dom.jump_vertices.contains(&corner_vertex) {
        return Err(Error::NoVerticalEdge(corner_vertex));
    }
    let v = dom.polygon[corner_vertex];
    let prev = dom.polygon[(corner_vertex + n - 1) % n];
    let next = dom.polygon[(corner_vertex + 1) % n];
    let (lim_in, lim_out) = dom.corner_limits(corner_vertex);
    // angles measured from the edge carrying the lower limit
    let (low_dir, high_dir, z_lo, z_hi) = if lim_in < lim_out {
        (prev, next, lim_in, lim_out)
    } else {
        (next, prev, lim_out, lim_in)
    };
    let ang = |q: [f64; 2]| (q[1] - v[1]).atan2(q[0] - v[0]);
    let base = ang(low_dir);
    let opening = (ang(high_dir) - base).rem_euclid(2.0 * PI);
    // the interior sector: pick the sweep whose bisector lies inside
    let mid = base + 0.5 * opening;
    let r = 1e-6 * dom.h().max(1e-12);
    let (sweep, orient) = if dom.contains([v[0] + r * mid.cos(), v[1] + r * mid.sin()]) {
        (opening, 1.0)
    } else {
        (2.0 * PI - opening, -1.0)
    };
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }

    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(heights.len() + 2);
    samples.push((0.0, 0.0));
    let mut rs = Vec::with_capacity(TWIST_RADII);
    let mut arcs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(TWIST_RADII);
    for k in 1..=TWIST_RADII {
        let r = radius * k as f64 / TWIST_RADII as f64;
        let mut arc = Vec::with_capacity(TWIST_ANGLES + 1);
        for m in 0..=TWIST_ANGLES {
            let a = sweep * m as f64 / TWIST_ANGLES as f64;
            let th = base + orient * a;
            let q = [v[0] + r * th.cos(), v[1] + r * th.sin()];
            let u = if m == 0 {
                dom.edge_value(edge_index(dom, v, low_dir), q)
            } else if m == TWIST_ANGLES {
                dom.edge_value(edge_index(dom, v, high_dir), q)
            } else {
                field
                    .interpolate(q)
                    .ok_or_else(|| Error::InvalidDomain("twist arc leaves the grid".into()))?
            };
            arc.push((a, u));
        }
        rs.push(r);
        arcs.push(arc);
    }

    for &z in heights {
        if !(z > z_lo && z < z_hi) {
            return Err(Error::LevelSetMissesCorner {
                height: z,
                reason: format!("outside the jump interval ({z_lo}, {z_hi})"),
            });
        }
        let mut angles = Vec::with_capacity(TWIST_RADII);
        for arc in &arcs {
            let hit = arc.windows(2).find_map(|w| {
                let ((a0, u0), (a1, u1)) = (w[0], w[1]);
                ((u0 - z) * (u1 - z) <= 0.0 && u0 != u1).then(|| a0 + (z - u0) / (u1 - u0) * (a1 - a0))
            });
            angles.push(hit.ok_or_else(|| Error::LevelSetMissesCorner {
                height: z,
                reason: "no crossing on a sampling arc".into(),
            })?);
        }
        let theta0 = linear_fit_intercept(&rs, &angles).clamp(0.0, sweep);
        samples.push((z - z_lo, theta0));
    }
    samples.push((z_hi - z_lo, sweep));
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14);
    let (t, alpha): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    TwistProfile::from_samples(t.clone(), strictly_increasing(&t, isotonic(&alpha)))
}

/// Pool-adjacent-violators fit: the closest non-decreasing sequence in l2.
fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, w1) = blocks[blocks.len() - 1];
            let (m0, w0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let w = w0 + w1;
            *blocks.last_mut().unwrap() = ((m0 * w0 as f64 + m1 * w1 as f64) / w as f64, w);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, w)| std::iter::repeat_n(m, w))
        .collect()
}

/// Break ties left by pooling by spreading each flat run along the chord
/// to its neighbours.
fn strictly_increasing(t: &[f64], y: Vec<f64>) -> Vec<f64> {
    let n = y.len();
    let mut out = y.clone();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && y[j + 1] <= y[i] {
            j += 1;
        }
        if j > i {
            let lo = if i > 0 { 0.5 * (y[i - 1] + y[i]) } else { y[i] };
            let hi = if j + 1 < n { 0.5 * (y[i] + y[j + 1]) } else { y[j] };
            let (ta, tb) = (t[i], t[j]);
            for k in i..=j {
                let s = if tb > ta { (t[k] - ta) / (tb - ta) } else { 0.0 };
                out[k] = lo + s * (hi - lo);
            }
        }
        i = j + 1;
    }
    out
}

fn edge_index(dom: &GraphDomain, v: [f64; 2], other: [f64; 2]) -> usize {
    let n = dom.polygon.len();
    (0..n)
        .find(|&e| {
            let (a, b) = (dom.polygon[e], dom.polygon[(e + 1) % n]);
            (a == v && b == other) || (a == other && b == v)
        })
        .unwrap()
}

fn linear_fit_intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    my - sxy / sxx * mx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(h: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static) -> Arc<GraphDomain> {
        let poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let edges = (0..4).map(|_| edge_fn(f.clone())).collect();
        Arc::new(GraphDomain::cartesian(poly, h, edges).unwrap())
    }

    #[test]
    fn mask_of_unit_square() {
        let d = square(0.25, |_, _| 0.0);
        assert_eq!(d.n_inside(), 9);
        assert_eq!(d.kind(0, 0), NodeKind::Boundary);
        assert_eq!(d.assignment(0, 0), Some(Assignment::Corner(0)));
        assert_eq!(d.assignment(2, 0), Some(Assignment::Edge(0)));
        assert_eq!(d.kind(2, 2), NodeKind::Inside);
        assert_eq!(d.kind(-1, -1), NodeKind::Outside);
        assert!(d.jump_vertices().is_empty());
    }

    #[test]
    fn crossing_polygon_is_rejected() {
        let poly = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let edges = (0..4).map(|_| edge_fn(|_, _| 0.0)).collect();
        assert!(GraphDomain::cartesian(poly, 0.1, edges).is_err());
    }

    #[test]
    fn affine_residual_vanishes() {
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - 3.0 * y;
        let d = square(0.1, f);
        let field = ScalarField::from_fn(d, ManifoldParams::euclidean(), 0.0, f);
        assert!(max_norm(&residual(&field)) < 1e-12);
    }

    #[test]
    fn saddle_residual_vanishes_in_nil() {
        let f = |x: f64, y: f64| -x * y / 2.0;
        let d = square(0.05, f);
        let field = ScalarField::from_fn(d, ManifoldParams::nil_symmetric(), 0.0, f);
        assert!(max_norm(&residual(&field)) < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = |x: f64, y: f64| (x * 2.0).sin() + x * y * y;
        let d = square(0.1, f);
        let field = ScalarField::from_fn(d, ManifoldParams::nil_symmetric(), 0.25, |x, y| f(x, y) + 0.1 * (x - y));
        let cols = jacobian_columns(&field, &[0, 17, 40, 80], 1e-7).unwrap();
        for (an, fd) in cols {
            let scale = an.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in an.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6 * scale.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn skew_lattice_recovers_affine_data() {
        let f = |x: f64, y: f64| 0.5 - x + 0.25 * y;
        let phi = PI / 3.0;
        let lat = Lattice {
            origin: [0.0, 0.0],
            d1: [0.1, 0.0],
            d2: [0.1 * phi.cos(), 0.1 * phi.sin()],
        };
        let poly = vec![[0.0, 0.0], [2.0, 0.0], [phi.cos(), phi.sin()]];
        let edges = (0..3).map(|_| edge_fn(f)).collect();
        let d = Arc::new(GraphDomain::on_lattice(poly, lat, edges).unwrap());
        // every edge lies on lattice nodes, so no ghost nodes are needed
        assert!(d.inside_nodes().iter().all(|&(i, j)| i >= 1 && j >= 1));
        let u = solve(d.clone(), ManifoldParams::euclidean(), 0.0, &SolveOptions::default()).unwrap();
        let exact = ScalarField::from_fn(d, ManifoldParams::euclidean(), 0.0, f);
        assert!(u.max_abs_diff(&exact).unwrap() < 1e-10);
    }

    #[test]
    fn solve_recovers_nil_saddle_and_is_seed_independent() {
        let f = |x: f64, y: f64| -x * y / 2.0 + 0.3 * y;
        let d = square(0.05, f);
        let p = ManifoldParams::nil_symmetric();
        let opts = SolveOptions::default();
        let u = solve(d.clone(), p, 0.0, &opts).unwrap();
        let exact = ScalarField::from_fn(d.clone(), p, 0.0, f);
        assert!(u.max_abs_diff(&exact).unwrap() < 1e-9);
        let seeded = SolveOptions { seed: Some(7), ..opts };
        let v = solve(d, p, 0.0, &seeded).unwrap();
        assert!(u.max_abs_diff(&v).unwrap() < 1e-8);
    }

    #[test]
    fn stagnation_carries_the_residual() {
        let f = |x: f64, y: f64| 5.0 * (x * y).sin();
        let d = square(0.1, f);
        let opts = SolveOptions {
            max_iter: 0,
            ..Default::default()
        };
        match solve(d, ManifoldParams::nil_symmetric(), 0.0, &opts) {
            Err(Error::NewtonStagnation { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected stagnation, got {other:?}"),
        }
    }

    #[test]
    fn flat_trace_is_horizontal() {
        let d = square(0.1, |_, _| 0.0);
        let u = solve(d, ManifoldParams::euclidean(), 0.0, &SolveOptions::default()).unwrap();
        let tr = edge_trace(&u, 0).unwrap();
        assert!(tr.eta_vertical.iter().all(|v| v.abs() < 1e-12));
        assert!(tr.frame_defect() < 1e-12);
        assert!(matches!(edge_trace(&u, 9), Err(Error::EdgeNotFound(9))));
    }

    #[test]
    fn saddle_trace_matches_closed_form() {
        let f = |x: f64, y: f64| -x * y / 2.0;
        let d = square(0.02, f);
        let p = ManifoldParams::nil_symmetric();
        let u = ScalarField::from_fn(d, p, 0.0, f);
        let tr = edge_trace(&u, 0).unwrap();
        for (k, q) in tr.points.iter().enumerate().skip(1).take(tr.points.len() - 2) {
            let exact = -q[0] / (1.0 + q[0] * q[0]).sqrt();
            assert!((tr.eta_vertical[k] - exact).abs() < 1e-10);
        }
        assert!(tr.frame_defect() < 1e-12);
    }

    #[test]
    fn linear_twist_is_recovered() {
        // u = z(ϑ) with ϑ the polar angle: level sets are rays
        let c = 2.0;
        let f = move |x: f64, y: f64| y.atan2(x) / c;
        let poly = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let edges = vec![edge_fn(|_, _| 0.0), edge_fn(f), edge_fn(move |_, _| PI / 2.0 / c)];
        let d = Arc::new(GraphDomain::cartesian(poly, 0.01, edges).unwrap());
        assert_eq!(d.jump_vertices(), &[0]);
        let u = ScalarField::from_fn(d, ManifoldParams::euclidean(), 0.0, f);
        let zs: Vec<f64> = (1..10).map(|k| PI / 2.0 / c * k as f64 / 10.0).collect();
        let prof = corner_twist_profile(&u, 0, &zs, 0.2).unwrap();
        for &z in &zs {
            assert!((prof.alpha(z) - c * z).abs() < 2e-3, "{} vs {}", prof.alpha(z), c * z);
        }
        assert!(matches!(
            corner_twist_profile(&u, 0, &[5.0], 0.2),
            Err(Error::LevelSetMissesCorner { .. })
        ));
        assert!(matches!(
            corner_twist_profile(&u, 1, &zs, 0.2),
            Err(Error::NoVerticalEdge(1))
        ));
    }

    #[test]
    fn exports_have_headers() {
        let d = square(0.25, |x, _| x);
        let u = ScalarField::from_fn(d, ManifoldParams::euclidean(), 0.0, |x, _| x);
        let mut csv = Vec::new();
        u.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x,y,u\n"));
        let mut obj = Vec::new();
        u.write_obj(&mut obj).unwrap();
        let text = String::from_utf8(obj).unwrap();
        assert!(text.lines().any(|l| l.starts_with("v ")) && text.lines().any(|l| l.starts_with("f ")));
    }

    #[test]
    fn options_json_layout() {
        let o: SolveOptions = serde_json::from_str(r#"{"h":0.05,"tol":1e-9,"max_iter":10,"seed":3}"#).unwrap();
        assert_eq!(o.h, Some(0.05));
        assert_eq!(o.seed, Some(3));
        let d: SolveOptions = serde_json::from_str("{}").unwrap();
        assert_eq!(d, SolveOptions::default());
    }
}
