//! Upper half-plane `H²` toolkit for the mirror curves of the sister surface.
//!
//! A horizontal mirror curve is reconstructed from the twist profile `α(t)`
//! of its minimal sister along a vertical geodesic. The frame is the
//! horocycle foliation by the lines `y = const`, with `e₁ = y∂x` and
//! `e₂ = −y∂y`; the curve then solves
//!
//! ```text
//! θ' = α' + cos θ − 1,   x' = y cos θ,   y' = −y sin θ,   (x, y)(0) = (0, 1),
//! ```
//!
//! its unit normal is `n = sin θ e₁ − cos θ e₂` and its geodesic curvature
//! with respect to `n` is `cos θ − θ'`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::interp::Hermite;
use crate::numerics::{ode, roots};

const THETA_TOL: f64 = 1e-10;

/// Arclength-sampled twist angle along a vertical geodesic, `α(0) = 0`,
/// strictly increasing.
#[derive(Debug, Clone)]
pub struct TwistProfile {
    interp: Hermite,
}

impl TwistProfile {
    /// Monotone cubic through the samples.
    pub fn from_samples(t: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        Self::validate(&t, &alpha)?;
        Ok(Self {
            interp: Hermite::pchip(t, alpha),
        })
    }

    /// Cubic Hermite through samples with prescribed slopes `α'`.
    pub fn from_samples_with_slopes(t: Vec<f64>, alpha: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Self::validate(&t, &alpha)?;
        if slopes.len() != t.len() || slopes.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidProfile("slopes must be finite and positive".into()));
        }
        Ok(Self {
            interp: Hermite::new(t, alpha, slopes),
        })
    }

    /// Samples `α` and `α'` at `n + 1` equispaced points of `[0, b]`.
    pub fn from_fn(b: f64, n: usize, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Result<Self> {
        if !(b > 0.0) || n < 1 {
            return Err(Error::InvalidProfile(format!(
                "need b > 0 and n ≥ 1, got b = {b}, n = {n}"
            )));
        }
        let t: Vec<f64> = (0..=n).map(|i| b * i as f64 / n as f64).collect();
        let alpha = t.iter().map(|&s| f(s)).collect();
        let slopes = t.iter().map(|&s| df(s)).collect();
        Self::from_samples_with_slopes(t, alpha, slopes)
    }

    /// Constant twist rate `α(t) = rate · t` on `[0, b]`.
    pub fn linear(rate: f64, b: f64) -> Result<Self> {
        Self::from_fn(b, 1, |t| rate * t, |_| rate)
    }

    fn validate(t: &[f64], alpha: &[f64]) -> Result<()> {
        if t.len() < 2 || t.len() != alpha.len() {
            return Err(Error::InvalidProfile("need at least two matching samples".into()));
        }
        if t[0] != 0.0 || alpha[0] != 0.0 {
            return Err(Error::InvalidProfile(
                "profile must start at t = 0 with α(0) = 0".into(),
            ));
        }
        if t.iter().chain(alpha).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("arclength samples must increase".into()));
        }
        if alpha.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile(
                "twist must be strictly increasing (α' > 0)".into(),
            ));
        }
        Ok(())
    }

    /// Total arclength `b`.
    pub fn length(&self) -> f64 {
        self.interp.domain().1
    }

    /// Total twist `α(b)`.
    pub fn total(&self) -> f64 {
        *self.interp.values().last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        self.interp.knots()
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.interp.eval(t)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.interp.slope(t)
    }
}

fn frame_rhs(profile: &TwistProfile) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] + '_ {
    move |t, s| {
        let (th, y) = (s[0], s[2]);
        [profile.rate(t) + th.cos() - 1.0, y * th.cos(), -y * th.sin()]
    }
}

/// Integrates the frame system through `ts` (sorted, within `[0, b]`),
/// restarting at every profile knot where `α''` may jump.
fn integrate_frame(profile: &TwistProfile, ts: &[f64]) -> Vec<[f64; 3]> {
    let rhs = frame_rhs(profile);
    let dp = ode::DormandPrince {
        tol: THETA_TOL * 1e-2,
        h_init: 1e-4,
        h_max: 0.02,
    };
    let knots = profile.knots();
    let mut out = Vec::with_capacity(ts.len());
    let mut state = [0.0, 0.0, 1.0];
    let mut idx = 0;
    for w in knots.windows(2) {
        let start = idx;
        while idx < ts.len() && (ts[idx] <= w[1] || w[1] == knots[knots.len() - 1]) {
            idx += 1;
        }
        let mut targets = ts[start..idx].to_vec();
        targets.push(w[1]);
        let n_out = idx - start;
        let mut next = state;
        dp.integrate_to_each(&rhs, w[0], state, &targets, |i, _, y| {
            if i < n_out {
                out.push(*y);
            } else {
                next = *y;
            }
        });
        state = next;
    }
    out
}

/// `θ(t)` on `n + 1` equispaced samples of `[0, b]`, as `(t, θ)` pairs.
pub fn theta_from_twist(profile: &TwistProfile) -> Vec<[f64; 2]> {
    let curve = reconstruct_curve_with(profile, default_samples(profile));
    curve.t.iter().zip(&curve.theta).map(|(&t, &th)| [t, th]).collect()
}

fn default_samples(profile: &TwistProfile) -> usize {
    ((profile.length() / 1e-3).ceil() as usize).clamp(200, 20_000)
}

/// Hyperbolic curve sampled by arclength together with its frame angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HCurve {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    /// `cos θ − θ'` with `θ'` from the frame equation.
    pub curvature: Vec<f64>,
}

/// Reconstructs the mirror curve starting at `(0, 1)` with `θ(0) = 0`.
pub fn reconstruct_curve(profile: &TwistProfile) -> HCurve {
    reconstruct_curve_with(profile, default_samples(profile))
}

/// As [`reconstruct_curve`] with `n + 1` equispaced output samples.
pub fn reconstruct_curve_with(profile: &TwistProfile, n: usize) -> HCurve {
    let b = profile.length();
    let n = n.max(2);
    let ts: Vec<f64> = (0..=n).map(|i| b * i as f64 / n as f64).collect();
    let states = integrate_frame(profile, &ts);
    let curvature = ts
        .iter()
        .zip(&states)
        .map(|(&t, s)| {
            let dth = profile.rate(t) + s[0].cos() - 1.0;
            s[0].cos() - dth
        })
        .collect();
    HCurve {
        x: states.iter().map(|s| s[1]).collect(),
        y: states.iter().map(|s| s[2]).collect(),
        theta: states.iter().map(|s| s[0]).collect(),
        t: ts,
        curvature,
    }
}

impl HCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> [f64; 2] {
        [self.x[0], self.y[0]]
    }

    pub fn end(&self) -> [f64; 2] {
        let n = self.len() - 1;
        [self.x[n], self.y[n]]
    }

    pub fn length(&self) -> f64 {
        self.t[self.len() - 1] - self.t[0]
    }

    /// Unit normal `n = sin θ e₁ − cos θ e₂` as a Euclidean direction.
    pub fn normal_direction(&self, i: usize) -> [f64; 2] {
        [self.theta[i].sin(), self.theta[i].cos()]
    }

    /// Largest deviation of the hyperbolic speed from 1, by central
    /// differences of the samples.
    pub fn speed_defect(&self) -> f64 {
        (1..self.len() - 1)
            .map(|i| {
                let dt = self.t[i + 1] - self.t[i - 1];
                let dx = (self.x[i + 1] - self.x[i - 1]) / dt;
                let dy = (self.y[i + 1] - self.y[i - 1]) / dt;
                ((dx * dx + dy * dy).sqrt() / self.y[i] - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Geodesic curvature with respect to the left normal, estimated from
    /// positions only: `k = y κ_E + N_y`. Interior samples; uniform spacing.
    pub fn curvature_from_positions(&self) -> Vec<f64> {
        (1..self.len() - 1)
            .map(|i| {
                let h = self.t[i + 1] - self.t[i];
                let (x0, x1, x2) = (self.x[i - 1], self.x[i], self.x[i + 1]);
                let (y0, y1, y2) = (self.y[i - 1], self.y[i], self.y[i + 1]);
                let (dx, dy) = ((x2 - x0) / (2.0 * h), (y2 - y0) / (2.0 * h));
                let (ddx, ddy) = ((x2 - 2.0 * x1 + x0) / (h * h), (y2 - 2.0 * y1 + y0) / (h * h));
                let v = (dx * dx + dy * dy).sqrt();
                let kappa_e = (dx * ddy - dy * ddx) / v.powi(3);
                y1 * kappa_e + dx / v
            })
            .collect()
    }

    /// `∫ cos θ dt` (Simpson when the sample count allows, else trapezoid).
    fn integral_cos_theta(&self) -> f64 {
        integrate_samples(&self.t, &self.theta.iter().map(|t| t.cos()).collect::<Vec<_>>())
    }

    /// `∫ k dt = ∫ cos θ dt − (θ(b) − θ(0))`.
    pub fn total_curvature(&self) -> f64 {
        self.integral_cos_theta() - (self.theta[self.len() - 1] - self.theta[0])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y,theta,curvature")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.t[i], self.x[i], self.y[i], self.theta[i], self.curvature[i]
            )?;
        }
        Ok(())
    }
}

fn integrate_samples(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len() - 1;
    let h = t[1] - t[0];
    let uniform = t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() < 1e-9 * h.abs().max(1e-300));
    if uniform && n.is_multiple_of(2) && n >= 2 {
        let mut s = f[0] + f[n];
        for (i, v) in f.iter().enumerate().take(n).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    } else {
        t.windows(2)
            .zip(f.windows(2))
            .map(|(tt, ff)| 0.5 * (tt[1] - tt[0]) * (ff[0] + ff[1]))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GeodesicKind {
    VerticalLine { x0: f64 },
    Semicircle { center: f64, radius: f64 },
}

/// Complete geodesic of `H²` with an orientation: `+1` means upward for
/// vertical lines and increasing `x` for semicircles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HGeodesic {
    pub kind: GeodesicKind,
    pub orientation: i8,
}

impl HGeodesic {
    pub fn vertical(x0: f64, orientation: i8) -> Self {
        Self {
            kind: GeodesicKind::VerticalLine { x0 },
            orientation,
        }
    }

    pub fn semicircle(center: f64, radius: f64, orientation: i8) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self {
            kind: GeodesicKind::Semicircle { center, radius },
            orientation,
        })
    }

    /// Oriented unit Euclidean tangent at a point of the geodesic.
    pub fn tangent_at(&self, p: [f64; 2]) -> [f64; 2] {
        let s = f64::from(self.orientation);
        match self.kind {
            GeodesicKind::VerticalLine { .. } => [0.0, s],
            GeodesicKind::Semicircle { center, .. } => {
                let (rx, ry) = (p[0] - center, p[1]);
                let r = rx.hypot(ry);
                [s * ry / r, -s * rx / r]
            }
        }
    }

    /// Euclidean distance of `p` from the geodesic's trace.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            GeodesicKind::VerticalLine { x0 } => (p[0] - x0).abs(),
            GeodesicKind::Semicircle { center, radius } => ((p[0] - center).hypot(p[1]) - radius).abs(),
        }
    }
}

fn in_half_plane(p: [f64; 2]) -> Result<()> {
    if p[1] > 0.0 && p[0].is_finite() && p[1].is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "p",
            format!("({}, {}) is not in the upper half-plane", p[0], p[1]),
        ))
    }
}

/// The complete geodesic through `p` tangent to `direction`.
pub fn geodesic_from(p: [f64; 2], direction: [f64; 2]) -> Result<HGeodesic> {
    in_half_plane(p)?;
    let (dx, dy) = (direction[0], direction[1]);
    let norm = dx.hypot(dy);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(invalid("direction", "must be a nonzero finite vector"));
    }
    if dx.abs() <= 1e-14 * norm {
        return Ok(HGeodesic::vertical(p[0], if dy > 0.0 { 1 } else { -1 }));
    }
    let center = p[0] + p[1] * dy / dx;
    let radius = (p[0] - center).hypot(p[1]);
    HGeodesic::semicircle(center, radius, if dx > 0.0 { 1 } else { -1 })
}

/// Intersection point of two geodesics in the open half-plane with the
/// unsigned angle between their oriented tangents, or `None`.
pub fn intersect(g1: &HGeodesic, g2: &HGeodesic) -> Result<Option<([f64; 2], f64)>> {
    use GeodesicKind::*;
    const EPS: f64 = 1e-12;
    let point = match (g1.kind, g2.kind) {
        (VerticalLine { x0: a }, VerticalLine { x0: b }) => {
            if (a - b).abs() <= EPS * (1.0 + a.abs()) {
                return Err(Error::CoincidentGeodesics);
            }
            None
        }
        (VerticalLine { x0 }, Semicircle { center, radius }) | (Semicircle { center, radius }, VerticalLine { x0 }) => {
            let d = x0 - center;
            let y2 = radius * radius - d * d;
            (y2 > 0.0).then(|| [x0, y2.sqrt()])
        }
        (Semicircle { center: c1, radius: r1 }, Semicircle { center: c2, radius: r2 }) => {
            let scale = 1.0 + c1.abs() + r1;
            if (c1 - c2).abs() <= EPS * scale {
                if (r1 - r2).abs() <= EPS * scale {
                    return Err(Error::CoincidentGeodesics);
                }
                None
            } else {
                let x = (r1 * r1 - r2 * r2 + c2 * c2 - c1 * c1) / (2.0 * (c2 - c1));
                let y2 = r1 * r1 - (x - c1) * (x - c1);
                (y2 > 0.0).then(|| [x, y2.sqrt()])
            }
        }
    };
    Ok(point.map(|p| {
        let (t1, t2) = (g1.tangent_at(p), g2.tangent_at(p));
        let c = (t1[0] * t2[0] + t1[1] * t2[1]).clamp(-1.0, 1.0);
        (p, c.acos())
    }))
}

/// Piece of a piecewise smooth boundary, traversed with the enclosed
/// region on the left.
#[derive(Debug, Clone)]
pub enum BoundaryArc {
    Geodesic {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// A reconstructed curve, traversed along (`forward`) or against its
    /// parametrization.
    Curve {
        curve: HCurve,
        forward: bool,
    },
}

impl BoundaryArc {
    fn endpoints(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Self::Geodesic { from, to } => (*from, *to),
            Self::Curve { curve, forward: true } => (curve.start(), curve.end()),
            Self::Curve { curve, forward: false } => (curve.end(), curve.start()),
        }
    }

    /// `∫ k_g` with respect to the inner (left) normal.
    fn total_geodesic_curvature(&self) -> f64 {
        match self {
            Self::Geodesic { .. } => 0.0,
            Self::Curve { curve, forward } => {
                let k = curve.total_curvature();
                if *forward {
                    k
                } else {
                    -k
                }
            }
        }
    }
}

/// Gauss–Bonnet for a disc with `K ≡ −1`:
/// `area = Σ exterior angles + ∫ k_g − 2π`.
pub fn gauss_bonnet_area_from(total_geodesic_curvature: f64, exterior_angles: &[f64]) -> f64 {
    exterior_angles.iter().sum::<f64>() + total_geodesic_curvature - 2.0 * PI
}

/// Area of the disc bounded by `arcs` (in order, region on the left) with
/// the given exterior angles at the junctions.
pub fn gauss_bonnet_area(arcs: &[BoundaryArc], exterior_angles: &[f64]) -> Result<f64> {
    if arcs.is_empty() {
        return Err(invalid("arcs", "empty boundary"));
    }
    for i in 0..arcs.len() {
        let end = arcs[i].endpoints().1;
        let next = arcs[(i + 1) % arcs.len()].endpoints().0;
        let gap = (end[0] - next[0]).hypot(end[1] - next[1]);
        if gap >= 1e-6 {
            return Err(Error::NonClosingBoundary { gap });
        }
    }
    let kg: f64 = arcs.iter().map(BoundaryArc::total_geodesic_curvature).sum();
    Ok(gauss_bonnet_area_from(kg, exterior_angles))
}

/// `f_φ(b) = (1 − cos(φ − b))/sin(φ − b) − b eᵇ`, for `0 < b < φ < π/2`.
pub fn f_phi(phi: f64, b: f64) -> Result<f64> {
    if !(0.0 < b && b < phi && phi < FRAC_PI_2) {
        return Err(invalid(
            "phi/b",
            format!("need 0 < b < phi < π/2, got phi = {phi}, b = {b}"),
        ));
    }
    Ok(f_phi_unchecked(phi, b))
}

fn f_phi_unchecked(phi: f64, b: f64) -> f64 {
    // (1 − cos x)/sin x = tan(x/2), which stays finite as x → 0
    (0.5 * (phi - b)).tan() - b * b.exp()
}

/// Unique zero of `f_φ` on `(0, φ)`, by bisection to `1e-10`.
pub fn b0_of_phi(phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < FRAC_PI_2) {
        return Err(invalid("phi", format!("must lie in (0, π/2), got {phi}")));
    }
    roots::bisection(|b| f_phi_unchecked(phi, b), 0.0, phi, 1e-12, "f_phi")
}

/// `b₀'(φ)` by implicit differentiation of `f_φ(b₀(φ)) = 0`.
pub fn b0_prime(phi: f64) -> Result<f64> {
    let b = b0_of_phi(phi)?;
    let x = phi - b;
    let df_dphi = 1.0 / (1.0 + x.cos());
    let df_db = -df_dphi - b.exp() * (1.0 + b);
    Ok(-df_dphi / df_db)
}

/// The region `V` bounded by the mirror curve and the two geodesics leaving
/// its endpoints along `−n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MirrorRegion {
    /// Total twist `α(b)`.
    pub phi: f64,
    pub b: f64,
    /// Hyperbolic area by Green's theorem.
    pub area: f64,
    /// Intersection angle of the two geodesics.
    pub angle: f64,
    /// `φ − b − area`.
    pub angle_gauss_bonnet: f64,
    pub vertex: [f64; 2],
    pub gamma_0: HGeodesic,
    pub gamma_b: HGeodesic,
}

/// Region report with the flat JSON layout `{phi, b, area, angle}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub phi: f64,
    pub b: f64,
    pub area: f64,
    pub angle: f64,
}

impl MirrorRegion {
    pub fn report(&self) -> RegionReport {
        RegionReport {
            phi: self.phi,
            b: self.b,
            area: self.area,
            angle: self.angle,
        }
    }
}

/// Builds the mirror curve of `profile` and the region `V` it cuts off with
/// `γ₀` and `γ_b`.
pub fn mirror_region(profile: &TwistProfile) -> Result<MirrorRegion> {
    let curve = reconstruct_curve(profile);
    mirror_region_of(profile, &curve)
}

pub fn mirror_region_of(profile: &TwistProfile, curve: &HCurve) -> Result<MirrorRegion> {
    let b = profile.length();
    let phi = profile.total();
    let last = curve.len() - 1;
    let c = curve.end();
    let nb = curve.normal_direction(last);
    let gamma_0 = HGeodesic::vertical(0.0, -1);
    let gamma_b = geodesic_from(c, [-nb[0], -nb[1]])?;
    let no_hit = || Error::NoIntersection {
        b,
        b0: if phi > 0.0 && phi < FRAC_PI_2 {
            b0_of_phi(phi).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        },
    };
    let (vertex, angle) = intersect(&gamma_0, &gamma_b)?.ok_or_else(no_hit)?;
    if vertex[1] >= 1.0 {
        return Err(no_hit());
    }
    let area = match gamma_b.kind {
        GeodesicKind::Semicircle { center, .. } => {
            let beta_c = c[1].atan2(c[0] - center);
            let beta_p = vertex[1].atan2(vertex[0] - center);
            (beta_p - beta_c) - curve.integral_cos_theta()
        }
        GeodesicKind::VerticalLine { .. } => return Err(no_hit()),
    };
    Ok(MirrorRegion {
        phi,
        b,
        area,
        angle,
        angle_gauss_bonnet: phi - b - area,
        vertex,
        gamma_0,
        gamma_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_twist_rate_gives_geodesic() {
        // k = 1 − α' = 0 and θ' = cos θ, so θ is the Gudermannian of t
        let p = TwistProfile::linear(1.0, 1.5).unwrap();
        let c = reconstruct_curve(&p);
        for (t, th) in c.t.iter().zip(&c.theta) {
            assert!((th - 2.0 * (t / 2.0).tanh().atan()).abs() < 1e-9);
        }
        assert!(c.curvature.iter().all(|k| k.abs() < 1e-12));
        assert!(c.curvature_from_positions().iter().all(|k| k.abs() < 1e-5));
        // the geodesic through (0, 1) with horizontal tangent is the unit circle
        assert!(c.x.iter().zip(&c.y).all(|(x, y)| (x.hypot(*y) - 1.0).abs() < 1e-9));
    }

    #[test]
    fn double_twist_rate_theta() {
        let p = TwistProfile::linear(2.0, 0.5).unwrap();
        let th = theta_from_twist(&p);
        let end = th.last().unwrap()[1];
        // fine fixed-step oracle for θ' = 1 + cos θ
        let oracle = ode::rk4(&|_t, y: &[f64; 1]| [1.0 + y[0].cos()], 0.0, 0.5, [0.0], 20_000)[0];
        assert!((end - oracle).abs() < 1e-9);
        assert!(end > 0.0 && end < 1.0);
        // closed form: tan(θ/2) = t
        assert!((end - 2.0 * 0.5f64.atan()).abs() < 1e-9);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(TwistProfile::from_samples(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(TwistProfile::from_samples(vec![0.0, 1.0], vec![0.1, 0.5]).is_err());
        assert!(TwistProfile::from_samples(vec![0.0, 0.0], vec![0.0, 0.5]).is_err());
        assert!(TwistProfile::linear(0.0, 1.0).is_err());
    }

    #[test]
    fn constant_theta_is_a_spiral() {
        // α' = 1 − cos θ₀ keeps θ ≡ θ₀ after the start; manufacture it by
        // integrating the frame with θ fixed.
        let th0: f64 = 0.4;
        let b = 1.2;
        let n = 4000;
        let h = b / n as f64;
        let mut xs = vec![0.0];
        let mut ys = vec![1.0];
        for i in 1..=n {
            let t = i as f64 * h;
            ys.push((-t * th0.sin()).exp());
            xs.push(th0.cos() / th0.sin() * (1.0 - (-t * th0.sin()).exp()));
        }
        let c = HCurve {
            t: (0..=n).map(|i| i as f64 * h).collect(),
            x: xs,
            y: ys,
            theta: vec![th0; n + 1],
            curvature: vec![th0.cos(); n + 1],
        };
        assert!(c.speed_defect() < 1e-6);
        for k in c.curvature_from_positions() {
            assert!((k - th0.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstructed_curvature_matches_frame() {
        let p = TwistProfile::from_fn(0.8, 16, |t| t + 0.5 * t * t, |t| 1.0 + t).unwrap();
        let c = reconstruct_curve(&p);
        assert!(c.speed_defect() < 1e-6);
        for (i, k) in c.curvature_from_positions().into_iter().enumerate() {
            assert!((k - c.curvature[i + 1]).abs() < 1e-3);
            let t = c.t[i + 1];
            assert!((c.curvature[i + 1] - (1.0 - p.rate(t))).abs() < 1e-3);
        }
        for (i, &th) in c.theta.iter().enumerate() {
            assert!(th <= p.alpha(c.t[i]) + 1e-12);
        }
    }

    #[test]
    fn geodesic_from_examples() {
        let g = geodesic_from([0.0, 1.0], [0.0, -1.0]).unwrap();
        assert_eq!(g.kind, GeodesicKind::VerticalLine { x0: 0.0 });
        let th = FRAC_PI_2;
        let g = geodesic_from([0.3, 0.7], [th.sin(), -th.cos()]).unwrap();
        match g.kind {
            GeodesicKind::Semicircle { center, radius } => {
                assert!((center - 0.3).abs() < 1e-12 && (radius - 0.7).abs() < 1e-12)
            }
            _ => panic!("expected semicircle"),
        }
        let g = geodesic_from([0.0, 1.0], [1.0, 0.0]).unwrap();
        assert_eq!(
            g.kind,
            GeodesicKind::Semicircle {
                center: 0.0,
                radius: 1.0
            }
        );
        assert!(geodesic_from([0.0, -1.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn intersect_examples() {
        let v = HGeodesic::vertical(0.0, 1);
        let s = HGeodesic::semicircle(0.0, 1.0, 1).unwrap();
        let (p, a) = intersect(&v, &s).unwrap().unwrap();
        assert!((p[0]).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!((a - FRAC_PI_2).abs() < 1e-14);
        assert!(intersect(&v, &HGeodesic::vertical(2.0, 1)).unwrap().is_none());
        assert!(matches!(intersect(&v, &v), Err(Error::CoincidentGeodesics)));
        let far = HGeodesic::semicircle(5.0, 1.0, 1).unwrap();
        assert!(intersect(&v, &far).unwrap().is_none());
    }

    #[test]
    fn gauss_bonnet_formula_examples() {
        let ext = [3.0 * PI / 4.0; 3];
        assert!((gauss_bonnet_area_from(0.0, &ext) - PI / 4.0).abs() < 1e-14);
        assert!((gauss_bonnet_area_from(0.0, &[PI; 3]) - PI).abs() < 1e-14);
    }

    #[test]
    fn geodesic_triangle_area_matches_green() {
        // counterclockwise: down the line x = 0.2 is clockwise, so go a → c → b
        let a = [0.2, 2.0];
        let b = [0.2, (1.0f64 - 0.04).sqrt()];
        let c = [-0.6, 0.8];
        let through = |p: [f64; 2], q: [f64; 2]| {
            let center = (q[0] * q[0] + q[1] * q[1] - p[0] * p[0] - p[1] * p[1]) / (2.0 * (q[0] - p[0]));
            HGeodesic::semicircle(center, (p[0] - center).hypot(p[1]), if q[0] > p[0] { 1 } else { -1 }).unwrap()
        };
        let gac = through(a, c);
        let gcb = through(c, b);
        let gba = HGeodesic::vertical(0.2, 1);
        let turn = |g1: &HGeodesic, g2: &HGeodesic, p| {
            let (t1, t2) = (g1.tangent_at(p), g2.tangent_at(p));
            (t1[0] * t2[1] - t1[1] * t2[0]).atan2(t1[0] * t2[0] + t1[1] * t2[1])
        };
        let ext = [turn(&gac, &gcb, c), turn(&gcb, &gba, b), turn(&gba, &gac, a)];
        assert!(ext.iter().all(|e| *e > 0.0));
        let arcs = [
            BoundaryArc::Geodesic { from: a, to: c },
            BoundaryArc::Geodesic { from: c, to: b },
            BoundaryArc::Geodesic { from: b, to: a },
        ];
        let gb = gauss_bonnet_area(&arcs, &ext).unwrap();
        // Green: ∮ dx / y, and on a semicircle dx / y = −dβ
        let beta = |g: &HGeodesic, p: [f64; 2]| match g.kind {
            GeodesicKind::Semicircle { center, .. } => p[1].atan2(p[0] - center),
            _ => unreachable!(),
        };
        let green = -(beta(&gac, c) - beta(&gac, a)) - (beta(&gcb, b) - beta(&gcb, c));
        assert!(gb > 0.0 && (gb - green).abs() < 1e-12, "{gb} vs {green}");
        let open = [
            BoundaryArc::Geodesic { from: a, to: b },
            BoundaryArc::Geodesic { from: b, to: c },
        ];
        assert!(matches!(
            gauss_bonnet_area(&open, &ext[..2]),
            Err(Error::NonClosingBoundary { .. })
        ));
    }

    #[test]
    fn f_phi_examples() {
        let f = f_phi(PI / 3.0, PI / 6.0).unwrap();
        assert!(f < 0.0 && (f + 0.6159).abs() < 1e-4);
        assert!((f_phi(PI / 3.0, 1e-8).unwrap() - (PI / 6.0).tan()).abs() < 1e-7);
        let b0 = b0_of_phi(PI / 3.0).unwrap();
        assert!((b0 - 0.294_427_530_2).abs() < 1e-9);
        assert!(f_phi_unchecked(PI / 3.0, b0).abs() < 1e-10);
        assert!(PI / 3.0 + b0 < FRAC_PI_2);
    }

    #[test]
    fn b0_increases_with_matching_derivative() {
        let grid: Vec<f64> = (1..=20).map(|i| FRAC_PI_2 * i as f64 / 21.0).collect();
        let b0: Vec<f64> = grid.iter().map(|&p| b0_of_phi(p).unwrap()).collect();
        for (i, &b) in b0.iter().enumerate() {
            assert!(b > 0.0 && b < grid[i]);
        }
        assert!(b0.windows(2).all(|w| w[1] > w[0]));
        let h = 1e-5;
        for &p in &grid {
            let fd = (b0_of_phi(p + h).unwrap() - b0_of_phi(p - h).unwrap()) / (2.0 * h);
            let an = b0_prime(p).unwrap();
            assert!(an > 0.0 && ((an - fd) / fd).abs() < 0.05);
        }
    }

    #[test]
    fn circular_mirror_curve_has_closed_form_region() {
        // α' ≡ c > 2 gives a circle of curvature κ = c − 1 > 1 about the vertex
        let (c, b) = (5.0, 0.1);
        let p = TwistProfile::linear(c, b).unwrap();
        let r = mirror_region(&p).unwrap();
        let kappa: f64 = c - 1.0;
        let s = (kappa * kappa - 1.0).sqrt();
        let angle = b * s;
        let area = angle * (kappa / s - 1.0);
        assert!((r.angle - angle).abs() < 1e-8, "{} vs {angle}", r.angle);
        assert!((r.area - area).abs() < 1e-8, "{} vs {area}", r.area);
        assert!((r.angle_gauss_bonnet - r.angle).abs() < 1e-8);
    }

    #[test]
    fn horocycle_normals_do_not_meet() {
        let p = TwistProfile::linear(1.0, 0.3).unwrap();
        assert!(matches!(mirror_region(&p), Err(Error::NoIntersection { .. })));
    }

    #[test]
    fn region_report_json_layout() {
        let p = TwistProfile::linear(4.0, 0.1).unwrap();
        let r = mirror_region(&p).unwrap().report();
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 4);
        for k in ["phi", "b", "area", "angle"] {
            assert!(v.get(k).is_some());
        }
    }
}
