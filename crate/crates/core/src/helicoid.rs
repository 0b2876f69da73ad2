//! Horizontal helicoids `H_α` in `Nil₃` (Daniel–Hauswirth chart).
//!
//! For a pitch `α > 0` the helicoid is built from the solution of
//! `ψ' = −√(α² + cos²ψ)`, `ψ(0) = 0` and `G' = 1/(ψ' − α)`, `G(0) = 0`:
//!
//! ```text
//! x₁ =  sinh(αv) cos ψ(u) / (α(ψ'(u) − α))
//! x₂ = −G(u)
//! x₃ = −sinh(αv) sin ψ(u) / (α(ψ'(u) − α))
//! ```
//!
//! The fundamental piece `|u| < U` is a graph `x₃ = −x₁ tan ψ` over the strip
//! `|x₂| < a/2`, where `a = −2G(U)` is the width.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::etau::FiberedPoint;
use crate::numerics::interp::Hermite;
use crate::numerics::{elliptic, ode, quad, roots};

const ODE_TOL: f64 = 1e-10;
const TABLE_STEP: f64 = 2e-3;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must be positive and finite, got {alpha}")))
    }
}

fn speed(alpha: f64, psi: f64) -> f64 {
    (alpha * alpha + psi.cos().powi(2)).sqrt()
}

/// `U(α) = K(1/√(α²+1)) / √(α²+1)`, the first `u > 0` with `ψ(u) = −π/2`.
pub fn u_of_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let r = (alpha * alpha + 1.0).sqrt();
    Ok(elliptic::complete_k(1.0 / r)? / r)
}

/// `G` as a function of `ψ`: `∫₀^ψ dθ / (s(s + α))` with `s = √(α² + cos²θ)`.
fn g_of_psi(alpha: f64, psi: f64) -> f64 {
    // relative tolerance: the width behaves like 1/α for small α and 1/α² for large α
    let scale = FRAC_PI_2 / (alpha * (1.0 + alpha));
    let f = |t: f64| {
        let s = speed(alpha, t);
        1.0 / (s * (s + alpha))
    };
    quad::integrate(f, 0.0, psi, 1e-14 * scale).expect("smooth integrand on a finite interval")
}

/// Width `a = −2G(U)` from the quadrature `2∫₀^{π/2} dθ/(s(s+α))`.
///
/// Independent of the ODE tables; strictly decreasing in `α`.
pub fn width(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2.0 * g_of_psi(alpha, FRAC_PI_2))
}

/// Pitch `α` whose helicoid has width `a`, by Brent's method on `log α`
/// over `α ∈ [1e-4, 1e4]`.
pub fn alpha_for_width(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("width must be positive, got {a}")));
    }
    let f = |la: f64| width(la.exp()).map(|w| (w / a).ln()).unwrap_or(f64::NAN);
    let la = roots::brent(f, 1e-4f64.ln(), 1e4f64.ln(), 1e-15, 1e-12, "helicoid width")?;
    Ok(la.exp())
}

/// Conormal height `b(φ, α) = sinh(−½ ln((1+cos φ)/(1−cos φ))) / (2α²) ≤ 0`
/// along the vertical ruling.
pub fn conormal_height(phi: f64, alpha: f64) -> Result<f64> {
    Ok(ConormalSample::new(phi, alpha)?.height)
}

/// A point of the vertical ruling `u = −U` where the horizontal conormal
/// makes angle `φ` with `∂x₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConormalSample {
    pub phi: f64,
    pub v: f64,
    pub height: f64,
}

impl ConormalSample {
    pub fn new(phi: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(phi > 0.0 && phi <= FRAC_PI_2) {
            return Err(invalid("phi", format!("must lie in (0, π/2], got {phi}")));
        }
        // cos(π/2) is not exactly zero in floating point
        let c = if phi == FRAC_PI_2 { 0.0 } else { phi.cos() };
        let l = ((1.0 + c) / (1.0 - c)).ln();
        Ok(Self {
            phi,
            v: -l / (2.0 * alpha),
            height: (-0.5 * l).sinh() / (2.0 * alpha * alpha),
        })
    }
}

/// Tabulated helicoid of pitch `alpha`.
#[derive(Debug, Clone)]
pub struct HelicoidModel {
    alpha: f64,
    u_max: f64,
    psi: Hermite,
    g: Hermite,
    u_period: f64,
    width: f64,
}

impl HelicoidModel {
    /// Integrates the `ψ`/`G` system on `[−u_max, u_max]` with tolerance
    /// `1e-10` and stores Hermite tables. `u_max` must be at least `3U(α)`.
    pub fn build(alpha: f64, u_max: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let u_ell = u_of_alpha(alpha)?;
        if !(u_max >= 3.0 * u_ell * (1.0 - 1e-12)) || !u_max.is_finite() {
            return Err(invalid("u_max", format!("need u_max ≥ 3U = {}", 3.0 * u_ell)));
        }
        let n = ((u_max / TABLE_STEP).ceil() as usize).max(16);
        let ts: Vec<f64> = (1..=n).map(|i| u_max * i as f64 / n as f64).collect();
        let rhs = |_u: f64, y: &[f64; 2]| {
            let dpsi = -speed(alpha, y[0]);
            [dpsi, 1.0 / (dpsi - alpha)]
        };
        let mut pos = vec![[0.0, 0.0]; n];
        let dp = ode::DormandPrince {
            tol: ODE_TOL * 1e-2,
            h_init: 1e-4,
            h_max: 0.05,
        };
        dp.integrate_to_each(&rhs, 0.0, [0.0, 0.0], &ts, |i, _, y| pos[i] = *y);

        let mut us = Vec::with_capacity(2 * n + 1);
        let mut psis = Vec::with_capacity(2 * n + 1);
        let mut gs = Vec::with_capacity(2 * n + 1);
        for i in (0..n).rev() {
            us.push(-ts[i]);
            psis.push(-pos[i][0]);
            gs.push(-pos[i][1]);
        }
        us.push(0.0);
        psis.push(0.0);
        gs.push(0.0);
        for i in 0..n {
            us.push(ts[i]);
            psis.push(pos[i][0]);
            gs.push(pos[i][1]);
        }
        let dpsi: Vec<f64> = psis.iter().map(|&p| -speed(alpha, p)).collect();
        let dg: Vec<f64> = dpsi.iter().map(|&d| 1.0 / (d - alpha)).collect();
        let psi = Hermite::new(us.clone(), psis, dpsi);
        let g = Hermite::new(us, gs, dg);

        let u_period = roots::brent(
            |u| psi.eval(u) + FRAC_PI_2,
            0.5 * u_ell,
            (1.5 * u_ell).min(u_max),
            1e-14,
            0.0,
            "psi = -pi/2",
        )?;
        let width = -2.0 * g.eval(u_period);
        Ok(Self {
            alpha,
            u_max,
            psi,
            g,
            u_period,
            width,
        })
    }

    /// Builds with `u_max = 3U(α)`.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        Self::build(alpha, 3.0 * u_of_alpha(alpha)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// `U` located on the ODE table.
    pub fn u_period(&self) -> f64 {
        self.u_period
    }

    /// `a = −2G(U)` from the ODE table.
    pub fn width(&self) -> f64 {
        self.width
    }

    fn check_u(&self, u: f64) -> Result<()> {
        if u.abs() <= self.u_max * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(invalid(
                "u",
                format!("|u| = {} exceeds u_max = {}", u.abs(), self.u_max),
            ))
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        self.psi.eval(u)
    }

    /// `ψ'(u) = −√(α² + cos²ψ(u))`.
    pub fn psi_prime(&self, u: f64) -> f64 {
        -speed(self.alpha, self.psi(u))
    }

    pub fn g(&self, u: f64) -> f64 {
        self.g.eval(u)
    }

    pub fn g_prime(&self, u: f64) -> f64 {
        1.0 / (self.psi_prime(u) - self.alpha)
    }

    pub fn table(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.psi
            .knots()
            .iter()
            .zip(self.psi.values())
            .zip(self.g.values())
            .map(|((&u, &p), &g)| (u, p, g))
    }

    /// Point `H_α(u, v)` in the Daniel–Hauswirth chart.
    pub fn point(&self, u: f64, v: f64) -> Result<FiberedPoint> {
        self.check_u(u)?;
        let a = self.alpha;
        let psi = self.psi(u);
        let c = (a * v).sinh() / (a * (self.psi_prime(u) - a));
        Ok(FiberedPoint::new(c * psi.cos(), -self.g(u), -c * psi.sin()))
    }

    /// Largest `max_u |ψ(u + 2U) − ψ(u) + π|` over the table.
    pub fn periodicity_residual(&self) -> f64 {
        let shift = 2.0 * self.u_period;
        self.psi
            .knots()
            .iter()
            .filter(|&&u| u + shift <= self.u_max)
            .map(|&u| (self.psi(u + shift) - self.psi(u) + PI).abs())
            .fold(0.0, f64::max)
    }

    /// Angle of the horizontal surface normal along the vertical ruling
    /// `u = −U` at fiber height `z`, measured from `∂x₁`.
    pub fn ruling_twist(&self, z: f64) -> f64 {
        (2.0 * self.alpha * self.alpha * z).atan()
    }

    /// Derivative of [`Self::ruling_twist`] with respect to arclength `z`.
    pub fn ruling_twist_rate(&self, z: f64) -> f64 {
        let a2 = self.alpha * self.alpha;
        2.0 * a2 / (1.0 + 4.0 * a2 * a2 * z * z)
    }

    /// Writes the table as CSV with header `u,psi,G`.
    pub fn write_table_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,psi,G")?;
        for (u, p, g) in self.table() {
            writeln!(w, "{u:.12e},{p:.12e},{g:.12e}")?;
        }
        Ok(())
    }

    /// Writes the `(u, v)` grid `[u0, u1] × [v0, v1]` as an OBJ triangle mesh.
    pub fn write_obj<W: Write>(
        &self,
        mut w: W,
        u_range: (f64, f64),
        v_range: (f64, f64),
        nu: usize,
        nv: usize,
    ) -> Result<()> {
        if nu < 2 || nv < 2 {
            return Err(invalid("grid", "need at least 2×2 samples"));
        }
        for i in 0..nu {
            let u = u_range.0 + (u_range.1 - u_range.0) * i as f64 / (nu - 1) as f64;
            for j in 0..nv {
                let v = v_range.0 + (v_range.1 - v_range.0) * j as f64 / (nv - 1) as f64;
                let p = self.point(u, v)?;
                writeln!(w, "v {:.10} {:.10} {:.10}", p.x, p.y, p.z)?;
            }
        }
        let id = |i: usize, j: usize| i * nv + j + 1;
        for i in 0..nu - 1 {
            for j in 0..nv - 1 {
                writeln!(w, "f {} {} {}", id(i, j), id(i + 1, j), id(i + 1, j + 1))?;
                writeln!(w, "f {} {} {}", id(i, j), id(i + 1, j + 1), id(i, j + 1))?;
            }
        }
        Ok(())
    }
}

/// The fundamental piece of `H_α` as a graph over the strip `|x₂| < a/2`.
///
/// Since `x₂ = −G(u)` depends on `u` only, the inverse map needs a scalar
/// root find per `x₂` followed by `x₃ = −x₁ tan ψ`.
#[derive(Debug, Clone, Copy)]
pub struct HelicoidGraph {
    alpha: f64,
    half_width: f64,
}

impl HelicoidGraph {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            half_width: 0.5 * width(alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `ψ` on the strip at `x₂`, from `−G(ψ) = x₂`.
    pub fn psi_at(&self, x2: f64) -> Result<f64> {
        if x2.abs() >= self.half_width {
            return Err(Error::OutsideChart {
                x: 0.0,
                y: x2,
                kappa: 0.0,
            });
        }
        if x2 == 0.0 {
            return Ok(0.0);
        }
        let a = self.alpha;
        let (mut lo, mut hi) = (-FRAC_PI_2, FRAC_PI_2);
        // −G(ψ) is decreasing; Newton safeguarded by the bracket
        let mut p = 0.0;
        for _ in 0..100 {
            let f = -g_of_psi(a, p) - x2;
            if f > 0.0 {
                lo = p;
            } else {
                hi = p;
            }
            let s = speed(a, p);
            let df = -1.0 / (s * (s + a));
            let mut next = p - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - p).abs() < 1e-15 {
                return Ok(next);
            }
            p = next;
        }
        Ok(p)
    }

    /// Height `x₃` over `(x₁, x₂)` in the Daniel–Hauswirth chart.
    pub fn height_dh(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok(-x1 * self.psi_at(x2)?.tan())
    }

    /// Height over `(x, y)` in the symmetric Nil chart.
    pub fn height_symmetric(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.height_dh(x, y)? - 0.5 * x * y)
    }

    /// Samples the symmetric-chart graph on a tensor grid; `out[j][i]` is
    /// the height at `(xs[i], ys[j])`. One root find per row.
    pub fn resample_symmetric(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
        ys.iter()
            .map(|&y| {
                let t = self.psi_at(y)?.tan();
                Ok(xs.iter().map(|&x| -x * t - 0.5 * x * y).collect())
            })
            .collect()
    }
}
