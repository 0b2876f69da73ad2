use std::f64::consts::PI;

use cmc_forge::etau::{enclosed_area, holonomy, horizontal_lift};
use cmc_forge::numerics::mat3;
use cmc_forge::{BaseLoop, Chart, FiberedPoint, ManifoldParams};
use proptest::prelude::*;

/// Star-shaped loop `r(θ) = r₀(1 + Σ cₖ cos(kθ + δₖ))` around `center`.
fn star(center: [f64; 2], r0: f64, coeffs: &[(f64, f64)], n: usize) -> BaseLoop {
    BaseLoop::from_fn(n, |t| {
        let th = 2.0 * PI * t;
        let r = r0
            * (1.0
                + coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (c, d))| c * ((k as f64 + 2.0) * th + d).cos())
                    .sum::<f64>());
        [center[0] + r * th.cos(), center[1] + r * th.sin()]
    })
    .unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.08..0.08f64, 0.0..2.0 * PI), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lift_rises_by_twice_tau_times_area(cx in -1.0..1.0f64, cy in -1.0..1.0f64, r0 in 0.2..1.5f64, c in coeffs()) {
        for p in [ManifoldParams::nil_symmetric(), ManifoldParams::nil_daniel_hauswirth()] {
            let lp = star([cx, cy], r0, &c, 400);
            let lift = horizontal_lift(&p, &lp, 0.0).unwrap();
            let rise = lift.last().unwrap().z - lift[0].z;
            let area = enclosed_area(&p, &lp).unwrap();
            prop_assert!((rise - 2.0 * p.tau * area).abs() < 1e-4, "{rise} vs {area}");
            prop_assert!((holonomy(&p, &lp).unwrap() - rise).abs() < 1e-4);
            prop_assert_eq!(holonomy(&p, &lp.reversed()).unwrap(), -holonomy(&p, &lp).unwrap());
        }
    }

    #[test]
    fn shoelace_area_matches_the_polar_formula(r0 in 0.2..1.5f64, c in coeffs()) {
        // ½∫r² dθ = π r₀² (1 + ½ Σ cₖ²)
        let lp = star([0.3, -0.4], r0, &c, 4000);
        let exact = PI * r0 * r0 * (1.0 + 0.5 * c.iter().map(|(a, _)| a * a).sum::<f64>());
        let area = enclosed_area(&ManifoldParams::nil_symmetric(), &lp).unwrap();
        prop_assert!((area - exact).abs() < 1e-5 * exact);
    }

    #[test]
    fn chart_change_round_trips(x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
        let p = FiberedPoint::new(x, y, z);
        let q = p.dh_to_symmetric().symmetric_to_dh();
        prop_assert!((q.z - z).abs() < 1e-12 && q.x == x && q.y == y);
    }

    #[test]
    fn metric_is_positive_definite(kappa in -2.0..2.0f64, tau in -1.0..1.0f64, x in -0.9..0.9f64, y in -0.9..0.9f64) {
        let p = ManifoldParams::new(kappa, tau, Chart::Symmetric).unwrap();
        let pt = FiberedPoint::new(x, y, 0.3);
        let g = p.metric_at(pt).unwrap();
        // leading principal minors
        prop_assert!(g[0][0] > 0.0);
        prop_assert!(g[0][0] * g[1][1] - g[0][1] * g[1][0] > 0.0);
        prop_assert!(mat3::det(&g) > 0.0);
        let f = p.orthonormal_frame(pt);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((mat3::inner(&g, &f[i], &f[j]) - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lifts_are_horizontal(r0 in 0.2..1.0f64, c in coeffs()) {
        let p = ManifoldParams::nil_symmetric();
        let lp = star([0.1, -0.2], r0, &c, 400);
        let lift = horizontal_lift(&p, &lp, 0.0).unwrap();
        for w in lift.windows(2) {
            let d = mat3::sub(&w[1].coords(), &w[0].coords());
            let mid = FiberedPoint::new(0.5 * (w[0].x + w[1].x), 0.5 * (w[0].y + w[1].y), 0.0);
            let f = p.frame_coords(mid, &d);
            prop_assert!(f[2].abs() < 1e-4 * f[0].hypot(f[1]).max(1e-12));
        }
    }
}

#[test]
fn thin_subdivided_triangle_is_simple() {
    let (a, phi, n) = (2.1863846875802078f64, 0.1f64, 2.6863846875802078);
    let tri = [[0.0, 0.0], [n, 0.0], [a * phi.cos(), a * phi.sin()]];
    BaseLoop::polygon(&tri, 64).unwrap().check_simple().unwrap();
    let bow = BaseLoop::new(vec![
        [0.0, 0.0],
        [1.0, 1.0],
        [1.0, 0.0],
        [0.5, -0.5],
        [0.0, 1.0],
        [-0.5, 0.5],
        [-1.0, 0.0],
        [-0.5, -0.2],
        [0.0, 0.0],
    ])
    .unwrap();
    assert!(bow.check_simple().is_err());
}
