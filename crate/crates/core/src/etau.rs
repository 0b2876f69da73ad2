//! Models of `E(κ, τ)` as Riemannian fibrations over the space form `Σ(κ)`.
//!
//! Two coordinate charts are supported:
//!
//! * `Symmetric`: metric `λ²(dx² + dy²) + (dz + τλ(y dx − x dy))²` with
//!   conformal factor `λ = 4 / (4 + κ(x² + y²))`. This is the chart in which
//!   the mean curvature graph equation is written.
//! * `DanielHauswirth`: `dx² + dy² + (dz − 2τ x dy)²`, only for κ = 0. With
//!   τ = 1/2 this is Nil₃ as `dx² + dy² + (dz − x dy)²`.
//!
//! In both charts the vertical Killing field is `ξ = ∂z`. The two Nil charts
//! are related by `z_sym = z_dh − x y / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::mat3::{self, Mat3, Vec3};
use crate::numerics::{ode, quad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Symmetric,
    DanielHauswirth,
}

/// Ambient model parameters: base curvature, bundle curvature and chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldParams {
    pub kappa: f64,
    pub tau: f64,
    pub chart: Chart,
}

impl ManifoldParams {
    pub fn new(kappa: f64, tau: f64, chart: Chart) -> Result<Self> {
        if !kappa.is_finite() || !tau.is_finite() {
            return Err(invalid("kappa/tau", "must be finite"));
        }
        if chart == Chart::DanielHauswirth && kappa != 0.0 {
            return Err(Error::ChartMismatch { kappa });
        }
        Ok(Self { kappa, tau, chart })
    }

    /// Flat `R³`.
    pub fn euclidean() -> Self {
        Self {
            kappa: 0.0,
            tau: 0.0,
            chart: Chart::Symmetric,
        }
    }

    /// `Nil₃ = E(0, 1/2)` in the symmetric chart.
    pub fn nil_symmetric() -> Self {
        Self {
            kappa: 0.0,
            tau: 0.5,
            chart: Chart::Symmetric,
        }
    }

    /// `Nil₃ = E(0, 1/2)` in the Daniel–Hauswirth chart.
    pub fn nil_daniel_hauswirth() -> Self {
        Self {
            kappa: 0.0,
            tau: 0.5,
            chart: Chart::DanielHauswirth,
        }
    }

    fn check(&self) -> Result<()> {
        if self.chart == Chart::DanielHauswirth && self.kappa != 0.0 {
            return Err(Error::ChartMismatch { kappa: self.kappa });
        }
        Ok(())
    }

    /// Radius of the conformal disc model when `κ < 0`.
    pub fn chart_radius(&self) -> Option<f64> {
        (self.kappa < 0.0).then(|| 2.0 / (-self.kappa).sqrt())
    }

    fn in_chart(&self, x: f64, y: f64) -> Result<()> {
        if let Some(r) = self.chart_radius() {
            if x * x + y * y >= r * r {
                return Err(Error::OutsideChart {
                    x,
                    y,
                    kappa: self.kappa,
                });
            }
        }
        Ok(())
    }

    /// Conformal factor of the base metric.
    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        match self.chart {
            Chart::Symmetric => 4.0 / (4.0 + self.kappa * (x * x + y * y)),
            Chart::DanielHauswirth => 1.0,
        }
    }

    /// `(∂x λ, ∂y λ)`.
    pub fn lambda_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match self.chart {
            Chart::Symmetric => {
                let l = self.lambda(x, y);
                let c = -0.5 * self.kappa * l * l;
                [c * x, c * y]
            }
            Chart::DanielHauswirth => [0.0, 0.0],
        }
    }

    /// Coefficients `w` of the connection form `ω = w₀ dx + w₁ dy + dz`.
    pub fn connection_form(&self, x: f64, y: f64) -> [f64; 2] {
        match self.chart {
            Chart::Symmetric => {
                let tl = self.tau * self.lambda(x, y);
                [tl * y, -tl * x]
            }
            Chart::DanielHauswirth => [0.0, -2.0 * self.tau * x],
        }
    }

    fn connection_form_gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        // [∂x w, ∂y w]
        match self.chart {
            Chart::Symmetric => {
                let l = self.lambda(x, y);
                let [lx, ly] = self.lambda_gradient(x, y);
                let t = self.tau;
                [[t * lx * y, -t * (lx * x + l)], [t * (ly * y + l), -t * ly * x]]
            }
            Chart::DanielHauswirth => [[0.0, -2.0 * self.tau], [0.0, 0.0]],
        }
    }

    /// Coordinate metric coefficients at `p`.
    pub fn metric_at(&self, p: FiberedPoint) -> Result<Mat3> {
        self.check()?;
        self.in_chart(p.x, p.y)?;
        let l2 = self.lambda(p.x, p.y).powi(2);
        let [w0, w1] = self.connection_form(p.x, p.y);
        let w = [w0, w1, 1.0];
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = w[i] * w[j];
            }
        }
        g[0][0] += l2;
        g[1][1] += l2;
        Ok(g)
    }

    /// Partial derivatives `∂_k g_ij` (index order `[k][i][j]`); `∂z g = 0`.
    pub fn metric_derivatives(&self, p: FiberedPoint) -> Result<[Mat3; 3]> {
        self.check()?;
        self.in_chart(p.x, p.y)?;
        let l = self.lambda(p.x, p.y);
        let dl = self.lambda_gradient(p.x, p.y);
        let [w0, w1] = self.connection_form(p.x, p.y);
        let w = [w0, w1, 1.0];
        let dw = self.connection_form_gradient(p.x, p.y);
        let mut out = [[[0.0; 3]; 3]; 3];
        for k in 0..2 {
            let dwk = [dw[k][0], dw[k][1], 0.0];
            for i in 0..3 {
                for j in 0..3 {
                    out[k][i][j] = dwk[i] * w[j] + w[i] * dwk[j];
                }
            }
            out[k][0][0] += 2.0 * l * dl[k];
            out[k][1][1] += 2.0 * l * dl[k];
        }
        Ok(out)
    }

    /// Christoffel symbols `Γ^k_ij` (index order `[k][i][j]`).
    pub fn christoffel(&self, p: FiberedPoint) -> Result<[Mat3; 3]> {
        let g = self.metric_at(p)?;
        let dg = self.metric_derivatives(p)?;
        let ginv = mat3::inverse(&g).ok_or_else(|| invalid("metric", "singular"))?;
        let mut gamma = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    gamma[k][i][j] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    /// Positively oriented orthonormal frame `(E₁, E₂, ξ)` in coordinates,
    /// with `E₁, E₂` the horizontal lifts of the unit base directions.
    pub fn orthonormal_frame(&self, p: FiberedPoint) -> [Vec3; 3] {
        let l = self.lambda(p.x, p.y);
        let [w0, w1] = self.connection_form(p.x, p.y);
        [[1.0 / l, 0.0, -w0 / l], [0.0, 1.0 / l, -w1 / l], [0.0, 0.0, 1.0]]
    }

    /// Riemannian cross product `a × b` at `p` (orientation `dx∧dy∧dz`).
    pub fn cross(&self, p: FiberedPoint, a: &Vec3, b: &Vec3) -> Vec3 {
        let f = self.orthonormal_frame(p);
        let fa = self.frame_coords(p, a);
        let fb = self.frame_coords(p, b);
        let c = mat3::cross(&fa, &fb);
        [
            c[0] * f[0][0] + c[1] * f[1][0] + c[2] * f[2][0],
            c[0] * f[0][1] + c[1] * f[1][1] + c[2] * f[2][1],
            c[0] * f[0][2] + c[1] * f[1][2] + c[2] * f[2][2],
        ]
    }

    /// Components of the coordinate vector `v` in the orthonormal frame.
    pub fn frame_coords(&self, p: FiberedPoint, v: &Vec3) -> Vec3 {
        let l = self.lambda(p.x, p.y);
        let [w0, w1] = self.connection_form(p.x, p.y);
        [l * v[0], l * v[1], v[2] + w0 * v[0] + w1 * v[1]]
    }
}

/// A point in chart coordinates: base `(x, y)` and fiber coordinate `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FiberedPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn coords(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    /// Daniel–Hauswirth chart → symmetric chart (Nil only).
    pub fn dh_to_symmetric(self) -> Self {
        Self {
            z: self.z - 0.5 * self.x * self.y,
            ..self
        }
    }

    /// Symmetric chart → Daniel–Hauswirth chart (Nil only).
    pub fn symmetric_to_dh(self) -> Self {
        Self {
            z: self.z + 0.5 * self.x * self.y,
            ..self
        }
    }
}

/// Closed, sampled curve in the base. The first sample is repeated at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLoop {
    samples: Vec<[f64; 2]>,
    orientation: i8,
}

impl BaseLoop {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.len() < 8 {
            return Err(Error::InvalidLoop(format!(
                "need at least 8 samples, got {}",
                samples.len()
            )));
        }
        let (first, last) = (samples[0], samples[samples.len() - 1]);
        if first != last {
            return Err(Error::InvalidLoop("first sample must equal last sample".into()));
        }
        if samples.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidLoop("non-finite sample".into()));
        }
        let area = shoelace(&samples);
        let orientation = if area >= 0.0 { 1 } else { -1 };
        Ok(Self { samples, orientation })
    }

    /// Samples `f` at `n` equally spaced parameters of `[0, 1)` and closes the loop.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> [f64; 2]) -> Result<Self> {
        let mut s: Vec<[f64; 2]> = (0..n).map(|k| f(k as f64 / n as f64)).collect();
        s.push(s[0]);
        Self::new(s)
    }

    pub fn circle(center: [f64; 2], radius: f64, n: usize, ccw: bool) -> Result<Self> {
        let sgn = if ccw { 1.0 } else { -1.0 };
        Self::from_fn(n, |t| {
            let a = sgn * 2.0 * std::f64::consts::PI * t;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
    }

    /// Closed polygon through `vertices`, each edge subdivided into
    /// `per_edge` pieces.
    pub fn polygon(vertices: &[[f64; 2]], per_edge: usize) -> Result<Self> {
        let m = vertices.len();
        let mut s = Vec::with_capacity(m * per_edge + 1);
        for i in 0..m {
            let (a, b) = (vertices[i], vertices[(i + 1) % m]);
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                s.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        s.push(s[0]);
        Self::new(s)
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    /// `+1` counterclockwise, `−1` clockwise.
    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn reversed(&self) -> Self {
        let mut s = self.samples.clone();
        s.reverse();
        Self {
            samples: s,
            orientation: -self.orientation,
        }
    }

    /// Signed Euclidean (shoelace) area.
    pub fn euclidean_area(&self) -> f64 {
        shoelace(&self.samples)
    }

    /// Fails with the first pair of non-adjacent crossing segments.
    pub fn check_simple(&self) -> Result<()> {
        let s = &self.samples;
        let m = s.len() - 1;
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                if segments_cross(s[i], s[i + 1], s[j], s[j + 1]) {
                    return Err(Error::SelfIntersectingLoop { first: i, second: j });
                }
            }
        }
        Ok(())
    }
}

fn shoelace(s: &[[f64; 2]]) -> f64 {
    0.5 * s.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    // orientations within rounding of zero count as collinear
    let scale = [p1, p2, q1, q2].iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale * scale;
    let snap = |d: f64| if d.abs() <= tol { 0.0 } else { d };
    let (d1, d2) = (snap(orient(q1, q2, p1)), snap(orient(q1, q2, p2)));
    let (d3, d4) = (snap(orient(p1, p2, q1)), snap(orient(p1, p2, q2)));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

/// Coordinate metric at `p`; see [`ManifoldParams::metric_at`].
pub fn metric_at(params: &ManifoldParams, p: FiberedPoint) -> Result<Mat3> {
    params.metric_at(p)
}

/// Horizontal lift of the piecewise-linear loop starting at height `z0`.
///
/// Solves `ż = −(w₀ ẋ + w₁ ẏ)` segment by segment with fixed-step RK4; the
/// number of sub-steps per segment is doubled until the end height moves by
/// less than `1e-8`. Returns one lifted point per loop sample.
pub fn horizontal_lift(params: &ManifoldParams, lp: &BaseLoop, z0: f64) -> Result<Vec<FiberedPoint>> {
    params.check()?;
    for p in lp.samples() {
        params.in_chart(p[0], p[1])?;
    }
    let mut substeps = 1usize;
    let mut prev = lift_with(params, lp, z0, substeps);
    while substeps < 4096 {
        substeps *= 2;
        let next = lift_with(params, lp, z0, substeps);
        let change = (next.last().unwrap().z - prev.last().unwrap().z).abs();
        prev = next;
        if change < 1e-8 {
            break;
        }
    }
    Ok(prev)
}

fn lift_with(params: &ManifoldParams, lp: &BaseLoop, z0: f64, substeps: usize) -> Vec<FiberedPoint> {
    let s = lp.samples();
    let mut out = Vec::with_capacity(s.len());
    let mut z = z0;
    out.push(FiberedPoint::new(s[0][0], s[0][1], z));
    for w in s.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let rhs = |t: f64, _z: &[f64; 1]| {
            let (x, y) = (a[0] + t * d[0], a[1] + t * d[1]);
            let [w0, w1] = params.connection_form(x, y);
            [-(w0 * d[0] + w1 * d[1])]
        };
        z = ode::rk4(&rhs, 0.0, 1.0, [z], substeps)[0];
        out.push(FiberedPoint::new(b[0], b[1], z));
    }
    out
}

/// Signed area of the region enclosed by the loop in the base area element
/// `λ² dx dy`, by fan triangulation and collapsed Gauss quadrature.
pub fn enclosed_area(params: &ManifoldParams, lp: &BaseLoop) -> Result<f64> {
    params.check()?;
    // evaluate on the counterclockwise copy so that reversal negates exactly
    let ccw;
    let s = if lp.orientation() > 0 {
        lp.samples()
    } else {
        ccw = lp.reversed();
        ccw.samples()
    };
    let sign = f64::from(lp.orientation());
    if params.kappa == 0.0 {
        return Ok(sign * shoelace(s));
    }
    for p in s {
        params.in_chart(p[0], p[1])?;
    }
    let rule = quad::gauss_legendre(10);
    let density = |x: f64, y: f64| params.lambda(x, y).powi(2);
    let o = s[0];
    let area: f64 = s
        .windows(2)
        .map(|w| quad::triangle(&density, o, w[0], w[1], &rule))
        .sum();
    Ok(sign * area)
}

/// Signed vertical displacement of the horizontal lift of a simple closed
/// loop: `2τ · area`, positive for counterclockwise loops when `τ > 0`.
pub fn holonomy(params: &ManifoldParams, lp: &BaseLoop) -> Result<f64> {
    lp.check_simple()?;
    Ok(2.0 * params.tau * enclosed_area(params, lp)?)
}
