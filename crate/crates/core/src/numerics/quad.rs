//! Adaptive Gauss–Kronrod and fixed Gauss–Legendre quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Subdivides by bisection until the Kronrod/Gauss difference on every
/// panel is below its share of `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let width = (b - a).abs();
    let mut panels = 0usize;
    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        let (val, err) = gk15(&f, lo, hi);
        let share = tol * ((hi - lo).abs() / width).max(1e-3);
        if err <= share || depth >= 48 || (hi - lo).abs() < 1e-14 * width {
            if !val.is_finite() {
                return Err(Error::RootNotConverged {
                    what: "quadrature (non-finite integrand)".into(),
                    iterations: panels,
                });
            }
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
        if panels > 200_000 {
            return Err(Error::RootNotConverged {
                what: "adaptive quadrature".into(),
                iterations: panels,
            });
        }
    }
    Ok(total)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Integral of `f` over the triangle `(p0, p1, p2)` using a collapsed
/// (Duffy) tensor Gauss–Legendre rule of order `n`. The result carries the
/// orientation sign of the triangle.
pub fn triangle<F: Fn(f64, f64) -> f64>(
    f: &F,
    p0: [f64; 2],
    p1: [f64; 2],
    p2: [f64; 2],
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let (x, w) = rule;
    let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let jac = e1[0] * e2[1] - e1[1] * e2[0];
    let mut acc = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let s = 0.5 * (xi + 1.0);
        for (j, &xj) in x.iter().enumerate() {
            let t = 0.5 * (xj + 1.0);
            // (s, t) in the unit square -> (s, (1 - s) t) in the reference triangle
            let r = s;
            let q = (1.0 - s) * t;
            let px = p0[0] + r * e1[0] + q * e2[0];
            let py = p0[1] + r * e1[1] + q * e2[1];
            acc += w[i] * w[j] * 0.25 * (1.0 - s) * f(px, py);
        }
    }
    acc * jac
}
