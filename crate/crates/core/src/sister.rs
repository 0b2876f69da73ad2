//! Sister-surface bookkeeping along curves on a minimal surface in
//! `E(κ + 4H², H)`: shape-operator rotation, normal curvature and torsion of
//! surface curves, and the twist functionals.
//!
//! Conventions: `J` rotates the tangent plane by `+π/2` about `ν`, i.e.
//! `Jv = ν × v`. Along a curve `c` the normal curvature is
//! `k = ⟨ν, ∇_{c′}c′⟩` and the normal torsion `t = −⟨∇_{c′}ν, η⟩`, with the
//! stored conormal `η = ±Jc′` (the sign is the orientation flag).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::etau::{FiberedPoint, ManifoldParams};
use crate::helicoid::HelicoidModel;
use crate::mc_graph::{edge_trace, ScalarField};
use crate::numerics::mat3::{self, Mat3, Vec3};

/// A 2×2 operator in an orthonormal tangent basis `(e, Je)`.
pub type Shape = [[f64; 2]; 2];

const J: Shape = [[0.0, -1.0], [1.0, 0.0]];
const SYMMETRY_TOL: f64 = 1e-8;
const KIND_TOL: f64 = 1e-6;
const MIN_SAMPLES: usize = 4;

/// `S̃ = JS + H·id` for each sample.
pub fn sister_shape(samples: &[Shape], h: f64) -> Result<Vec<Shape>> {
    samples
        .iter()
        .map(|s| {
            let asym = (s[0][1] - s[1][0]).abs();
            if !(asym <= SYMMETRY_TOL) {
                return Err(Error::NonSymmetric(asym));
            }
            let mut out: Shape =
                std::array::from_fn(|i| std::array::from_fn(|j| J[i][0] * s[0][j] + J[i][1] * s[1][j]));
            out[0][0] += h;
            out[1][1] += h;
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Tangent to the fibers.
    Vertical,
    /// Tangent to the horizontal distribution.
    Horizontal,
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Vertical => "vertical",
            Self::Horizontal => "horizontal",
        })
    }
}

/// Sister normal curvature and torsion along a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisterQuantities {
    /// `k̃ = −t + H`.
    pub ktilde: Vec<f64>,
    /// `t̃ = k`.
    pub ttilde: Vec<f64>,
    pub h: f64,
}

/// Frame data sampled along a surface curve. Vectors are coordinate
/// components in the chart of `params`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFrameData {
    /// Arclength.
    pub s: Vec<f64>,
    pub points: Vec<FiberedPoint>,
    pub tangent: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub conormal: Vec<Vec3>,
    pub k: Vec<f64>,
    pub t: Vec<f64>,
    /// `true` when `η = Jc′`, so that `(c′, η, ν)` is positively oriented.
    pub positive: bool,
    pub params: ManifoldParams,
    /// Mean curvature of the sister surface.
    pub h_mean: f64,
}

/// Derivative at `at` of the quadratic through the three nodes `x`.
fn lagrange_weights(x: [f64; 3], at: f64) -> [f64; 3] {
    std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        (2.0 * at - x[j] - x[k]) / ((x[i] - x[j]) * (x[i] - x[k]))
    })
}

fn derivative(s: &[f64], v: &[Vec3]) -> Vec<Vec3> {
    let n = s.len();
    (0..n)
        .map(|i| {
            let c = i.clamp(1, n - 2);
            let w = lagrange_weights([s[c - 1], s[c], s[c + 1]], s[i]);
            std::array::from_fn(|d| w[0] * v[c - 1][d] + w[1] * v[c][d] + w[2] * v[c + 1][d])
        })
        .collect()
}

/// `Γ(a, b)^k = Γ^k_ij a^i b^j`.
fn contract(gamma: &[Mat3; 3], a: &Vec3, b: &Vec3) -> Vec3 {
    std::array::from_fn(|k| mat3::inner(&gamma[k], a, b))
}

fn trapezoid_cumulative(s: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(s.len());
    out.push(0.0);
    for i in 1..s.len() {
        acc += 0.5 * (s[i] - s[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc);
    }
    out
}

impl CurveFrameData {
    /// Builds the frame from curve points and (approximate) unit normals.
    /// Arclength comes from metric chord lengths, derivatives from
    /// three-point differences, and the normals are re-orthogonalised
    /// against the tangent.
    pub fn from_samples(
        params: ManifoldParams,
        points: Vec<FiberedPoint>,
        normals: Vec<Vec3>,
        h_mean: f64,
    ) -> Result<Self> {
        let n = points.len();
        if n < MIN_SAMPLES {
            return Err(invalid(
                "samples",
                format!("need at least {MIN_SAMPLES} samples, got {n}"),
            ));
        }
        if normals.len() != n {
            return Err(invalid("normals", "one normal per point is required"));
        }
        let mut s = Vec::with_capacity(n);
        s.push(0.0);
        for w in points.windows(2) {
            let d = mat3::sub(&w[1].coords(), &w[0].coords());
            let mid = FiberedPoint::new(
                0.5 * (w[0].x + w[1].x),
                0.5 * (w[0].y + w[1].y),
                0.5 * (w[0].z + w[1].z),
            );
            let len = mat3::inner(&params.metric_at(mid)?, &d, &d).sqrt();
            if !(len > 0.0) {
                return Err(invalid("points", "consecutive samples coincide"));
            }
            s.push(s.last().unwrap() + len);
        }
        let metrics = points
            .iter()
            .map(|&p| params.metric_at(p))
            .collect::<Result<Vec<_>>>()?;
        let coords: Vec<Vec3> = points.iter().map(|p| p.coords()).collect();

        let tangent: Vec<Vec3> = derivative(&s, &coords)
            .iter()
            .zip(&metrics)
            .map(|(v, g)| mat3::scale(1.0 / mat3::inner(g, v, v).sqrt(), v))
            .collect();
        let mut normal = Vec::with_capacity(n);
        for ((nu, c), g) in normals.iter().zip(&tangent).zip(&metrics) {
            let v = mat3::sub(nu, &mat3::scale(mat3::inner(g, nu, c), c));
            let l = mat3::inner(g, &v, &v).sqrt();
            if !(l > 1e-8) {
                return Err(invalid("normals", "normal is parallel to the curve"));
            }
            normal.push(mat3::scale(1.0 / l, &v));
        }
        let conormal: Vec<Vec3> = points
            .iter()
            .zip(&normal)
            .zip(&tangent)
            .map(|((&p, nu), c)| params.cross(p, nu, c))
            .collect();

        let dc = derivative(&s, &tangent);
        let dn = derivative(&s, &normal);
        let mut k = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        for i in 0..n {
            let gamma = params.christoffel(points[i])?;
            let acc = mat3::add(&dc[i], &contract(&gamma, &tangent[i], &tangent[i]));
            let dnu = mat3::add(&dn[i], &contract(&gamma, &tangent[i], &normal[i]));
            k.push(mat3::inner(&metrics[i], &normal[i], &acc));
            t.push(-mat3::inner(&metrics[i], &dnu, &conormal[i]));
        }
        Ok(Self {
            s,
            points,
            tangent,
            normal,
            conormal,
            k,
            t,
            positive: true,
            params,
            h_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Largest defect of orthonormality of `(c′, η, ν)` and of its
    /// orientation against the flag.
    pub fn frame_defect(&self) -> f64 {
        let sign = if self.positive { 1.0 } else { -1.0 };
        (0..self.len())
            .map(|i| {
                let p = self.points[i];
                let Ok(g) = self.params.metric_at(p) else {
                    return f64::INFINITY;
                };
                let v = [&self.tangent[i], &self.conormal[i], &self.normal[i]];
                let mut d: f64 = 0.0;
                for a in 0..3 {
                    for b in a..3 {
                        let target = if a == b { 1.0 } else { 0.0 };
                        d = d.max((mat3::inner(&g, v[a], v[b]) - target).abs());
                    }
                }
                let vol = mat3::inner(&g, &self.params.cross(p, v[0], v[1]), v[2]);
                d.max((vol - sign).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Classifies the curve by the horizontal and vertical parts of `c′`.
    pub fn kind(&self) -> Option<CurveKind> {
        let (mut horiz, mut vert): (f64, f64) = (0.0, 0.0);
        for (p, c) in self.points.iter().zip(&self.tangent) {
            let f = self.params.frame_coords(*p, c);
            horiz = horiz.max(f[0].hypot(f[1]));
            vert = vert.max(f[2].abs());
        }
        if horiz < KIND_TOL {
            Some(CurveKind::Vertical)
        } else if vert < KIND_TOL {
            Some(CurveKind::Horizontal)
        } else {
            None
        }
    }

    /// The same curve traversed backwards with the conormal kept, so the
    /// orientation flag flips, `t` changes sign and `k` is unchanged.
    pub fn reversed(&self) -> Self {
        let len = self.length();
        let rev = |v: &[Vec3]| v.iter().rev().copied().collect::<Vec<_>>();
        Self {
            s: self.s.iter().rev().map(|s| len - s).collect(),
            points: self.points.iter().rev().copied().collect(),
            tangent: self.tangent.iter().rev().map(|c| mat3::scale(-1.0, c)).collect(),
            normal: rev(&self.normal),
            conormal: rev(&self.conormal),
            k: self.k.iter().rev().copied().collect(),
            t: self.t.iter().rev().map(|t| -t).collect(),
            positive: !self.positive,
            params: self.params,
            h_mean: self.h_mean,
        }
    }

    /// Shape operator of the minimal surface in the basis `(c′, η)`.
    pub fn shape_samples(&self) -> Vec<Shape> {
        self.k.iter().zip(&self.t).map(|(&k, &t)| [[k, t], [t, -k]]).collect()
    }

    pub fn sister(&self) -> SisterQuantities {
        let shapes = sister_shape(&self.shape_samples(), self.h_mean).expect("shape samples are symmetric");
        SisterQuantities {
            ktilde: shapes.iter().map(|s| s[0][0]).collect(),
            ttilde: shapes.iter().map(|s| s[1][0]).collect(),
            h: self.h_mean,
        }
    }

    /// Running twist: `∫(t + H)` for vertical curves, `−∫k̃` for
    /// horizontal ones.
    pub fn twist_cumulative(&self, kind: CurveKind) -> Vec<f64> {
        let f: Vec<f64> = match kind {
            CurveKind::Vertical => self.t.iter().map(|t| t + self.h_mean).collect(),
            CurveKind::Horizontal => self.sister().ktilde.iter().map(|k| -k).collect(),
        };
        trapezoid_cumulative(&self.s, &f)
    }

    /// Writes `t,k,t_tor,ktilde,ttilde,twist_cum`, where `t` is arclength.
    pub fn write_csv<W: Write>(&self, mut w: W, kind: CurveKind) -> Result<()> {
        let sister = self.sister();
        let twist = self.twist_cumulative(kind);
        writeln!(w, "t,k,t_tor,ktilde,ttilde,twist_cum")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.s[i], self.k[i], self.t[i], sister.ktilde[i], sister.ttilde[i], twist[i]
            )?;
        }
        Ok(())
    }
}

/// `∫t + H·l` (vertical) or `−∫k̃` (horizontal).
pub fn twist_turn(data: &CurveFrameData, kind: CurveKind) -> Result<f64> {
    match data.kind() {
        Some(k) if k == kind => Ok(*data.twist_cumulative(kind).last().unwrap()),
        found => Err(Error::KindMismatch(format!(
            "requested {kind}, curve is {}",
            found.map_or("neither".to_string(), |k| k.to_string())
        ))),
    }
}

/// Frame data along a boundary edge of a solved graph, traversed with the
/// domain on the left and with the downward normal. The sister has mean
/// curvature `τ`.
pub fn curve_k_t(field: &ScalarField, edge: usize) -> Result<CurveFrameData> {
    let trace = edge_trace(field, edge)?;
    if trace.s.len() < MIN_SAMPLES {
        return Err(invalid(
            "edge",
            format!("edge {edge} has fewer than {MIN_SAMPLES} samples"),
        ));
    }
    let params = *field.params();
    let dom = field.domain();
    let mut points = Vec::with_capacity(trace.s.len());
    let mut normals = Vec::with_capacity(trace.s.len());
    for (p, nu) in trace.points.iter().zip(&trace.normal) {
        let q = FiberedPoint::new(p[0], p[1], dom.edge_value(edge, *p));
        let f = params.orthonormal_frame(q);
        normals.push(std::array::from_fn(|d| {
            -(nu[0] * f[0][d] + nu[1] * f[1][d] + nu[2] * f[2][d])
        }));
        points.push(q);
    }
    if !dom.is_ccw() {
        points.reverse();
        normals.reverse();
    }
    CurveFrameData::from_samples(params, points, normals, params.tau)
}

/// `(∫⟨η_in, ξ⟩, ∫⟨c′, JT⟩)` along `edge`, where `T = ξ − ⟨ξ, ν⟩ν` is the
/// tangential part of the vertical field. With the domain on the left and
/// `ν` downward, `Jc′` is the outward conormal, so the two agree.
pub fn first_period_identity_check(field: &ScalarField, edge: usize) -> Result<(f64, f64)> {
    let direct = edge_trace(field, edge)?.integral();
    let data = curve_k_t(field, edge)?;
    let xi = [0.0, 0.0, 1.0];
    let f: Vec<f64> = (0..data.len())
        .map(|i| {
            let p = data.points[i];
            let g = data.params.metric_at(p)?;
            let nu = &data.normal[i];
            let tang = mat3::sub(&xi, &mat3::scale(mat3::inner(&g, &xi, nu), nu));
            let jt = data.params.cross(p, nu, &tang);
            Ok(mat3::inner(&g, &data.tangent[i], &jt))
        })
        .collect::<Result<_>>()?;
    let sister_form = *trapezoid_cumulative(&data.s, &f).last().unwrap();
    Ok((direct, sister_form))
}

/// Frame data along helicoid parameter samples `(u, v)`, with normals from
/// central differences of the immersion. The normal is oriented downward
/// where it has a vertical part.
pub fn helicoid_curve(model: &HelicoidModel, uv: &[(f64, f64)]) -> Result<CurveFrameData> {
    let params = ManifoldParams::nil_daniel_hauswirth();
    let eps = 1e-5;
    let mut points = Vec::with_capacity(uv.len());
    let mut normals = Vec::with_capacity(uv.len());
    let mut vertical = 0.0;
    for &(u, v) in uv {
        let p = model.point(u, v)?;
        let du = mat3::scale(
            0.5 / eps,
            &mat3::sub(&model.point(u + eps, v)?.coords(), &model.point(u - eps, v)?.coords()),
        );
        let dv = mat3::scale(
            0.5 / eps,
            &mat3::sub(&model.point(u, v + eps)?.coords(), &model.point(u, v - eps)?.coords()),
        );
        let c = params.cross(p, &du, &dv);
        let g = params.metric_at(p)?;
        let nu = mat3::scale(1.0 / mat3::inner(&g, &c, &c).sqrt(), &c);
        vertical += params.frame_coords(p, &nu)[2];
        points.push(p);
        normals.push(nu);
    }
    if vertical > 0.0 {
        normals.iter_mut().for_each(|n| *n = mat3::scale(-1.0, n));
    }
    CurveFrameData::from_samples(params, points, normals, params.tau)
}

/// The vertical ruling `u = −U` between fiber heights `z0 < z1`.
pub fn helicoid_ruling(model: &HelicoidModel, z0: f64, z1: f64, n: usize) -> Result<CurveFrameData> {
    if !(z1 > z0) || n < MIN_SAMPLES {
        return Err(invalid("ruling", "need z0 < z1 and at least 4 samples"));
    }
    let a = model.alpha();
    // z = sinh(αv)/(2α²) on the ruling
    let v_of = |z: f64| (2.0 * a * a * z).asinh() / a;
    let uv: Vec<_> = (0..n)
        .map(|i| (-model.u_period(), v_of(z0 + (z1 - z0) * i as f64 / (n - 1) as f64)))
        .collect();
    helicoid_curve(model, &uv)
}

/// The horizontal axis `v = 0` over `u ∈ [−U, U]`.
pub fn helicoid_axis(model: &HelicoidModel, n: usize) -> Result<CurveFrameData> {
    let u = model.u_period();
    let uv: Vec<_> = (0..n)
        .map(|i| (-u + 2.0 * u * i as f64 / (n - 1) as f64, 0.0))
        .collect();
    helicoid_curve(model, &uv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn umbilic_and_minimal_examples() {
        let s = sister_shape(&[[[0.0; 2]; 2]], 0.5).unwrap();
        assert_eq!(s[0], [[0.5, 0.0], [0.0, 0.5]]);
        let s = sister_shape(&[[[0.3, 0.0], [0.0, -0.3]]], 0.0).unwrap();
        assert_eq!(s[0], [[0.0, 0.3], [0.3, 0.0]]);
        assert!(matches!(
            sister_shape(&[[[0.0, 1.0], [0.0, 0.0]]], 0.5),
            Err(Error::NonSymmetric(_))
        ));
    }

    #[test]
    fn fiber_in_vertical_plane() {
        let params = ManifoldParams::nil_symmetric();
        let pts: Vec<_> = (0..9)
            .map(|i| FiberedPoint::new(0.0, 0.7, -1.0 + 0.25 * i as f64))
            .collect();
        let nus: Vec<_> = pts.iter().map(|&p| params.orthonormal_frame(p)[0]).collect();
        let d = CurveFrameData::from_samples(params, pts, nus, 0.5).unwrap();
        assert!(d.frame_defect() < 1e-12);
        assert_eq!(d.kind(), Some(CurveKind::Vertical));
        for t in &d.t {
            assert_abs_diff_eq!(*t, -0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(twist_turn(&d, CurveKind::Vertical).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(
            twist_turn(&d, CurveKind::Horizontal),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn reversal_keeps_conormal() {
        let params = ManifoldParams::nil_symmetric();
        let pts: Vec<_> = (0..6).map(|i| FiberedPoint::new(0.0, 0.2, 0.1 * i as f64)).collect();
        let nus: Vec<_> = pts.iter().map(|&p| params.orthonormal_frame(p)[0]).collect();
        let d = CurveFrameData::from_samples(params, pts, nus, 0.5).unwrap();
        let r = d.reversed();
        assert!(!r.positive);
        assert!(r.frame_defect() < 1e-12);
        assert_abs_diff_eq!(r.t[0], -d.t[5], epsilon = 1e-14);
        assert_abs_diff_eq!(r.s[5], d.length(), epsilon = 1e-14);
    }

    #[test]
    fn too_few_samples() {
        let params = ManifoldParams::euclidean();
        let pts = vec![FiberedPoint::new(0.0, 0.0, 0.0), FiberedPoint::new(1.0, 0.0, 0.0)];
        let nus = vec![[0.0, 0.0, -1.0]; 2];
        assert!(CurveFrameData::from_samples(params, pts, nus, 0.0).is_err());
    }
}
