use std::sync::Arc;

use cmc_forge::helicoid::{HelicoidGraph, HelicoidModel};
use cmc_forge::hyperbolic::TwistProfile;
use cmc_forge::mc_graph::{edge_fn, solve, EdgeFn, GraphDomain, ScalarField, SolveOptions};
use cmc_forge::sister::{
    curve_k_t, first_period_identity_check, helicoid_axis, helicoid_ruling, sister_shape, twist_turn, CurveFrameData,
    CurveKind, Shape,
};
use cmc_forge::{FiberedPoint, ManifoldParams};
use proptest::prelude::*;

fn unit_square(h: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static) -> Arc<GraphDomain> {
    let poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let edges: Vec<EdgeFn> = (0..4).map(|_| edge_fn(f.clone())).collect();
    Arc::new(GraphDomain::cartesian(poly, h, edges).unwrap())
}

/// A helix around `(x0, y0)` with a normal field turning in the frame.
fn helix(x0: f64, y0: f64, r: f64, w: f64, pitch: f64, beta: f64, n: usize) -> CurveFrameData {
    let p = ManifoldParams::nil_symmetric();
    let pts: Vec<FiberedPoint> = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            FiberedPoint::new(x0 + r * (w * s).cos(), y0 + r * (w * s).sin(), pitch * s)
        })
        .collect();
    let nus = pts
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let f = p.orthonormal_frame(q);
            let a = beta * i as f64 / n as f64;
            std::array::from_fn(|d| a.cos() * f[2][d] + a.sin() * f[0][d] + 0.3 * f[1][d])
        })
        .collect();
    CurveFrameData::from_samples(p, pts, nus, 0.5).unwrap()
}

fn mul(a: &Shape, b: &Shape) -> Shape {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sister_shape_has_trace_two_h(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, h in -2.0..2.0f64) {
        let s = sister_shape(&[[[a, b], [b, c]]], h).unwrap()[0];
        prop_assert!((s[0][0] + s[1][1] - 2.0 * h).abs() < 1e-12);
        // oracle: J S + H id by explicit products
        let j = [[0.0, -1.0], [1.0, 0.0]];
        let js = mul(&j, &[[a, b], [b, c]]);
        let det = (js[0][0] + h) * (js[1][1] + h) - js[0][1] * js[1][0];
        prop_assert!((s[0][0] * s[1][1] - s[0][1] * s[1][0] - det).abs() < 1e-12 * (1.0 + det.abs()));
        prop_assert!((det - (a * c - b * b + h * h)).abs() < 1e-9 * (1.0 + det.abs()));
    }

    #[test]
    fn reversal_flips_torsion_and_keeps_curvature(
        x0 in -0.5..0.5f64, y0 in -0.5..0.5f64, r in 0.2..1.0f64, w in 0.5..3.0f64, pitch in -1.0..1.0f64, beta in -2.0..2.0f64,
    ) {
        let d = helix(x0, y0, r, w, pitch, beta, 200);
        prop_assert!(d.frame_defect() < 1e-8);
        let kept = d.reversed();
        prop_assert!(kept.frame_defect() < 1e-8);
        let n = d.len();
        for i in 0..n {
            prop_assert!((kept.k[i] - d.k[n - 1 - i]).abs() < 1e-12);
            prop_assert!((kept.t[i] + d.t[n - 1 - i]).abs() < 1e-12);
        }
        // rebuilt from the reversed samples, η = Jc′ flips with c′
        let fresh = CurveFrameData::from_samples(d.params, kept.points.clone(), kept.normal.clone(), 0.5).unwrap();
        for i in 0..n {
            prop_assert!((fresh.k[i] - d.k[n - 1 - i]).abs() < 1e-7);
            prop_assert!((fresh.t[i] - d.t[n - 1 - i]).abs() < 1e-7);
        }
    }

    #[test]
    fn sister_relations_hold_pointwise(beta in -2.0..2.0f64, pitch in -1.0..1.0f64) {
        let d = helix(0.1, 0.2, 0.5, 2.0, pitch, beta, 100);
        let s = d.sister();
        for i in 0..d.len() {
            prop_assert!((s.ktilde[i] - (0.5 - d.t[i])).abs() < 1e-14);
            prop_assert_eq!(s.ttilde[i], d.k[i]);
        }
    }
}

#[test]
fn flat_horizontal_geodesic_has_no_curvature() {
    let d = unit_square(0.1, |_, _| 0.0);
    let u = solve(d, ManifoldParams::euclidean(), 0.0, &SolveOptions::default()).unwrap();
    let c = curve_k_t(&u, 0).unwrap();
    assert!(c.k.iter().chain(&c.t).all(|v| v.abs() < 1e-12));
    assert_eq!(first_period_identity_check(&u, 0).unwrap(), (0.0, 0.0));
}

#[test]
fn saddle_period_identity_matches_closed_form() {
    let f = |x: f64, y: f64| -0.5 * x * y;
    let d = unit_square(0.02, f);
    let u = ScalarField::from_fn(d, ManifoldParams::nil_symmetric(), 0.0, f);
    let (direct, sister) = first_period_identity_check(&u, 0).unwrap();
    assert!((direct - sister).abs() < 1e-6);
    // ⟨η, ξ⟩ = −x/√(1 + x²) along y = 0
    assert!((direct + (2f64.sqrt() - 1.0)).abs() < 2e-4, "{direct}");
    assert_eq!(curve_k_t(&u, 0).unwrap().kind(), Some(CurveKind::Horizontal));
}

#[test]
fn helicoid_axis_identity_vanishes() {
    let g = HelicoidGraph::new(1.0).unwrap();
    let f = move |x: f64, y: f64| g.height_symmetric(x, y).unwrap();
    let poly = vec![[0.0, -0.4], [0.3, -0.4], [0.3, 0.4], [0.0, 0.4]];
    let edges: Vec<EdgeFn> = (0..4).map(|_| edge_fn(f)).collect();
    let d = Arc::new(GraphDomain::cartesian(poly, 0.02, edges).unwrap());
    let u = solve(d, ManifoldParams::nil_symmetric(), 0.0, &SolveOptions::default()).unwrap();
    let (direct, sister) = first_period_identity_check(&u, 3).unwrap();
    assert!(direct.abs() < 1e-3 && sister.abs() < 1e-3);
    assert!((direct - sister).abs() < 1e-6);
}

#[test]
fn helicoid_axis_twists_by_pi() {
    let m = HelicoidModel::with_alpha(1.0).unwrap();
    let axis = helicoid_axis(&m, 401).unwrap();
    assert_eq!(axis.kind(), Some(CurveKind::Horizontal));
    let twist = twist_turn(&axis, CurveKind::Horizontal).unwrap();
    assert!((twist + std::f64::consts::PI).abs() < 1e-3, "{twist}");
}

#[test]
fn helicoid_ruling_twist_matches_table() {
    for alpha in [0.5, 1.0] {
        let m = HelicoidModel::with_alpha(alpha).unwrap();
        let (z0, z1) = (-0.5, 0.8);
        let r = helicoid_ruling(&m, z0, z1, 401).unwrap();
        let twist = twist_turn(&r, CurveKind::Vertical).unwrap();
        let table = m.ruling_twist(z1) - m.ruling_twist(z0);
        assert!((twist - table).abs() < 1e-4, "alpha {alpha}: {twist} vs {table}");
    }
}

#[test]
fn ruling_sister_curvature_is_one_minus_twist_rate() {
    let m = HelicoidModel::with_alpha(1.0).unwrap();
    let (z0, z1) = (0.0, 0.6);
    let r = helicoid_ruling(&m, z0, z1, 401).unwrap();
    let base = m.ruling_twist(z0);
    let profile = TwistProfile::from_fn(
        z1 - z0,
        200,
        |t| m.ruling_twist(z0 + t) - base,
        |t| m.ruling_twist_rate(z0 + t),
    )
    .unwrap();
    let s = r.sister();
    for (p, kt) in r.points.iter().zip(&s.ktilde) {
        let rate = profile.rate(p.z - z0);
        assert!((kt - (1.0 - rate)).abs() < 1e-3, "{kt} vs {}", 1.0 - rate);
    }
}

#[test]
fn fiber_has_torsion_minus_tau() {
    let p = ManifoldParams::nil_daniel_hauswirth();
    let pts: Vec<_> = (0..50).map(|i| FiberedPoint::new(0.0, -0.3, 0.05 * i as f64)).collect();
    let nus: Vec<_> = pts.iter().map(|&q| p.orthonormal_frame(q)[0]).collect();
    let d = CurveFrameData::from_samples(p, pts, nus, p.tau).unwrap();
    assert!(d.t.iter().all(|t| (t + p.tau).abs() < 1e-6));
    assert!(twist_turn(&d, CurveKind::Vertical).unwrap().abs() < 1e-6);
    let mut csv = Vec::new();
    d.write_csv(&mut csv, CurveKind::Vertical).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,k,t_tor,ktilde,ttilde,twist_cum\n"));
    assert_eq!(text.lines().count(), 51);
}
