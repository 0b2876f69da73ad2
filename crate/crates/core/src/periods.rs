//! The contour `Γₙ`, the two period problems and the k-noid report.
//!
//! Base picture in the symmetric Nil chart: the triangle `Δₙ = [0, N̂, Â]`
//! with `N̂ = (n, 0)` and `Â = a(cos φ, sin φ)`. The finite horizontal
//! geodesic `c₁` lies over `Â → 0` at height `b`, the edge over `0 → N̂` at
//! height 0, and the third edge is the horizontal lift starting at
//! `(Â, b + n²)`. Vertical edges sit over all three vertices.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::etau::{holonomy, BaseLoop, FiberedPoint, ManifoldParams};
use crate::helicoid::{alpha_for_width, conormal_height};
use crate::hyperbolic::{b0_of_phi, mirror_region, reconstruct_curve, HCurve, TwistProfile};
use crate::mc_graph::{
    corner_twist_profile, edge_fn, edge_trace, solve_from, EdgeFn, GraphDomain, InitialGuess, Lattice, ScalarField,
    SolveOptions,
};
use crate::numerics::mat3::{self, Vec3};

/// Edge of the contour polygon over `c₁`.
pub const C1_EDGE: usize = 2;
/// Vertex of the contour polygon under the vertical edge of length `b`.
pub const B_VERTEX: usize = 0;
/// Fewest lattice steps along `c₁`.
const MIN_STEPS_ON_C1: f64 = 16.0;

/// Parameters of the contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Length of the finite horizontal geodesic `c₁`.
    pub a: f64,
    /// Length of the finite vertical geodesic.
    pub b: f64,
    /// Hinge angle between `c₁` and the edge of length `n`.
    pub phi: f64,
    /// Truncation parameter.
    pub n: f64,
}

impl ContourSpec {
    pub fn new(a: f64, b: f64, phi: f64, n: f64) -> Result<Self> {
        let spec = Self { a, b, phi, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.a, self.phi, self.n)?;
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(invalid("b", format!("must be non-negative, got {}", self.b)));
        }
        let gap = self.gap();
        if gap <= 0.0 {
            return Err(invalid("n", format!("too small: d(p6, p5) = {gap} is not positive")));
        }
        Ok(())
    }

    /// Euclidean area of `Δₙ`.
    pub fn area(&self) -> f64 {
        0.5 * self.a * self.n * self.phi.sin()
    }

    /// Length `d(p₆, p₅) = b + n² − area(Δₙ)` of the vertical edge over `N̂`.
    pub fn gap(&self) -> f64 {
        self.b + self.n * self.n - self.area()
    }

    /// `[0, N̂, Â]`, counterclockwise.
    pub fn base_triangle(&self) -> [[f64; 2]; 3] {
        [[0.0, 0.0], [self.n, 0.0], self.a_hat()]
    }

    fn a_hat(&self) -> [f64; 2] {
        [self.a * self.phi.cos(), self.a * self.phi.sin()]
    }

    /// Boundary data in polygon edge order.
    fn edges(&self) -> Vec<EdgeFn> {
        let (b, top, ah) = (self.b, self.b + self.n * self.n, self.a_hat());
        vec![
            edge_fn(|_, _| 0.0),
            // horizontal lift from (Â, b + n²) with τ = 1/2
            edge_fn(move |x, y| top + 0.5 * (ah[0] * y - ah[1] * x)),
            edge_fn(move |_, _| b),
        ]
    }
}

fn check_shape(a: f64, phi: f64, n: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if !(phi > 0.0 && phi < PI / 2.0) {
        return Err(invalid("phi", format!("must lie in (0, π/2), got {phi}")));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(invalid("n", format!("must be positive, got {n}")));
    }
    Ok(())
}

/// The six vertices `p₁ … p₆` of `Γₙ` (five when `b = 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contour {
    pub spec: ContourSpec,
    pub vertices: Vec<FiberedPoint>,
    /// Rise of the horizontal lift of `∂Δₙ`.
    pub holonomy: f64,
}

/// `p₁ = (0, 0)`, up `b` to `p₂`, along `c₁` to `p₃ = (Â, b)`, up `n²` to
/// `p₄`, along the third edge to `p₅ = (N̂, d)` and down to `p₆ = (N̂, 0)`.
pub fn build_contour(spec: &ContourSpec) -> Result<Contour> {
    spec.validate()?;
    let params = ManifoldParams::nil_symmetric();
    let [o, nh, ah] = spec.base_triangle();
    let lift = holonomy(&params, &BaseLoop::polygon(&[o, nh, ah], 64)?)?;
    let closing = spec.b + spec.n * spec.n - lift - spec.gap();
    if closing.abs() > 1e-9 * (1.0 + spec.n * spec.n) {
        return Err(Error::NonClosingBoundary { gap: closing });
    }
    let top = spec.b + spec.n * spec.n;
    let mut vertices = vec![FiberedPoint::new(0.0, 0.0, 0.0)];
    if spec.b > 0.0 {
        vertices.push(FiberedPoint::new(0.0, 0.0, spec.b));
    }
    vertices.extend([
        FiberedPoint::new(ah[0], ah[1], spec.b),
        FiberedPoint::new(ah[0], ah[1], top),
        FiberedPoint::new(nh[0], nh[1], spec.gap()),
        FiberedPoint::new(nh[0], nh[1], 0.0),
    ]);
    Ok(Contour {
        spec: *spec,
        vertices,
        holonomy: lift,
    })
}

impl Contour {
    /// Cosines of the ambient angles between consecutive edges at each
    /// vertex.
    pub fn corner_cosines(&self) -> Result<Vec<f64>> {
        let params = ManifoldParams::nil_symmetric();
        let m = self.vertices.len();
        let tangent = |p: FiberedPoint, q: FiberedPoint| -> Vec3 {
            let d = [q.x - p.x, q.y - p.y];
            if d[0].hypot(d[1]) < 1e-14 {
                return [0.0, 0.0, (q.z - p.z).signum()];
            }
            // horizontal: dz + τλ(y dx − x dy) = 0
            let lt = params.tau * params.lambda(p.x, p.y);
            [d[0], d[1], -lt * (p.y * d[0] - p.x * d[1])]
        };
        (0..m)
            .map(|k| {
                let p = self.vertices[k];
                let back = tangent(p, self.vertices[(k + m - 1) % m]);
                let ahead = tangent(p, self.vertices[(k + 1) % m]);
                let g = params.metric_at(p)?;
                let c = mat3::inner(&g, &back, &ahead);
                Ok(c / (mat3::inner(&g, &back, &back) * mat3::inner(&g, &ahead, &ahead)).sqrt())
            })
            .collect()
    }
}

/// Skew lattice spanned by the directions of the two edges at the origin,
/// so that all three edges pass through nodes.
fn contour_lattice(a: f64, phi: f64, n: f64, h: f64) -> Lattice {
    lattice_with_steps(a, phi, n, c1_steps(a, h))
}

fn c1_steps(a: f64, h: f64) -> f64 {
    (a / h).round().max(MIN_STEPS_ON_C1)
}

fn lattice_with_steps(a: f64, phi: f64, n: f64, n2: f64) -> Lattice {
    let n1 = n2 * (n / a).round().max(1.0);
    Lattice {
        origin: [0.0, 0.0],
        d1: [n / n1, 0.0],
        d2: [a / n2 * phi.cos(), a / n2 * phi.sin()],
    }
}

/// The triangle `Δₙ` with the data of `Γₙ` on a lattice of spacing about `h`.
pub fn contour_domain(spec: &ContourSpec, h: f64) -> Result<Arc<GraphDomain>> {
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    let lattice = contour_lattice(spec.a, spec.phi, spec.n, h);
    Ok(Arc::new(GraphDomain::on_lattice(
        spec.base_triangle().to_vec(),
        lattice,
        spec.edges(),
    )?))
}

/// Knobs of the period drivers; JSON keys match the field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodOptions {
    /// Coarse spacing; every period value is extrapolated from `h` and `h/2`.
    pub h: f64,
    pub n_start: f64,
    pub n_step: f64,
    pub n_max: f64,
    /// Truncation continuation stops once successive values differ by less.
    pub n_tol: f64,
    /// Target `|p|` for the first-period root.
    pub p_tol: f64,
    /// Lower end of the first-period bracket in `b`.
    pub b_min: f64,
    pub scan_points: usize,
    /// Doublings of the bracket end tried when `p` keeps its sign on
    /// `[b_min, 2|h|]`.
    pub expand_steps: usize,
    /// Range of the first-period scan in `a`.
    pub a_min: f64,
    pub a_max: f64,
    /// Coarse spacing of that scan.
    pub a_scan_h: f64,
    /// Contour used for the twist profile of the second period.
    pub twist_a: f64,
    pub twist_n: f64,
    /// Largest sampling radius around the corner, relative to `twist_a`.
    pub twist_radius: f64,
    pub twist_heights: usize,
    /// Target `|A − π/k|`.
    pub angle_tol: f64,
    pub angle_points: usize,
    pub solver: SolveOptions,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        Self {
            h: 0.025,
            n_start: 4.0,
            n_step: 2.0,
            n_max: 16.0,
            n_tol: 1e-4,
            p_tol: 1e-4,
            b_min: 1e-3,
            scan_points: 8,
            expand_steps: 6,
            a_min: 0.25,
            a_max: 4.0,
            a_scan_h: 0.05,
            twist_a: 1.0,
            twist_n: 8.0,
            twist_radius: 0.1,
            twist_heights: 15,
            angle_tol: 1e-6,
            angle_points: 20,
            solver: SolveOptions::default(),
        }
    }
}

impl PeriodOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("n_start", self.n_start),
            ("n_step", self.n_step),
            ("n_tol", self.n_tol),
            ("p_tol", self.p_tol),
            ("b_min", self.b_min),
            ("a_min", self.a_min),
            ("a_scan_h", self.a_scan_h),
            ("twist_a", self.twist_a),
            ("twist_n", self.twist_n),
            ("twist_radius", self.twist_radius),
            ("angle_tol", self.angle_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.n_max < self.n_start {
            return Err(invalid("n_max", "must not be below n_start"));
        }
        if self.a_max <= self.a_min {
            return Err(invalid("a_max", "must exceed a_min"));
        }
        if self.scan_points < 2 || self.angle_points < 2 {
            return Err(invalid("scan_points", "scans need at least two points"));
        }
        if self.twist_heights < 2 {
            return Err(invalid("twist_heights", "need at least two heights"));
        }
        Ok(())
    }
}

/// `p` at one `b`, with the two grid values behind the extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodSample {
    pub b: f64,
    /// `2 p(h/2) − p(h)`.
    pub p: f64,
    pub p_coarse: f64,
    pub p_fine: f64,
    /// Largest final Newton residual of the two solves.
    pub residual: f64,
}

/// `∫⟨η, ξ⟩` over `c₁` for a solved contour field.
pub fn conormal_period(field: &ScalarField, edge: usize) -> Result<f64> {
    Ok(edge_trace(field, edge)?.integral())
}

/// Solves contours with fixed `(a, φ, n)` on a grid pair `h`, `h/2`,
/// warm-starting each grid from its previous solution.
pub struct FirstPeriodEvaluator {
    a: f64,
    phi: f64,
    n: f64,
    h: f64,
    solver: SolveOptions,
    grids: [Arc<GraphDomain>; 2],
    warm: [Mutex<Option<Vec<f64>>>; 2],
}

impl FirstPeriodEvaluator {
    pub fn new(a: f64, phi: f64, n: f64, h: f64, solver: SolveOptions) -> Result<Self> {
        check_shape(a, phi, n)?;
        let template = ContourSpec { a, b: 0.0, phi, n };
        // the fine grid halves the coarse one even where the step floor applies
        let steps = c1_steps(a, h);
        let grids = [
            contour_domain_with_steps(&template, steps)?,
            contour_domain_with_steps(&template, 2.0 * steps)?,
        ];
        Ok(Self {
            a,
            phi,
            n,
            h,
            solver: SolveOptions { h: None, ..solver },
            grids,
            warm: [Mutex::new(None), Mutex::new(None)],
        })
    }

    pub fn spec(&self, b: f64) -> Result<ContourSpec> {
        ContourSpec::new(self.a, b, self.phi, self.n)
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Solution on grid `level` (0 coarse, 1 fine) with data for `b`.
    pub fn field(&self, b: f64, level: usize) -> Result<(ScalarField, f64)> {
        let spec = self.spec(b)?;
        let dom = Arc::new(self.grids[level].with_edges(spec.edges())?);
        let params = ManifoldParams::nil_symmetric();
        let warm = self.warm[level].lock().unwrap().clone();
        let attempt = match warm {
            Some(v) => solve_from(dom.clone(), params, 0.0, &self.solver, InitialGuess::Inside(v)).ok(),
            None => None,
        };
        let (u, stats) = match attempt {
            Some(done) => done,
            None => solve_from(dom, params, 0.0, &self.solver, InitialGuess::Laplace)?,
        };
        *self.warm[level].lock().unwrap() = Some(u.inside_values());
        Ok((u, stats.residual))
    }

    pub fn eval(&self, b: f64) -> Result<PeriodSample> {
        let run = |level: usize| -> Result<(f64, f64)> {
            let (u, res) = self.field(b, level)?;
            Ok((conormal_period(&u, C1_EDGE)?, res))
        };
        let (coarse, fine) = rayon::join(|| run(0), || run(1));
        let ((pc, rc), (pf, rf)) = (coarse?, fine?);
        Ok(PeriodSample {
            b,
            p: 2.0 * pf - pc,
            p_coarse: pc,
            p_fine: pf,
            residual: rc.max(rf),
        })
    }
}

fn contour_domain_with_steps(spec: &ContourSpec, steps: f64) -> Result<Arc<GraphDomain>> {
    let lattice = lattice_with_steps(spec.a, spec.phi, spec.n, steps);
    Ok(Arc::new(GraphDomain::on_lattice(
        spec.base_triangle().to_vec(),
        lattice,
        spec.edges(),
    )?))
}

/// First period with truncation continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPeriod {
    pub p: f64,
    pub n_used: f64,
    pub h_used: f64,
    pub residual: f64,
    /// Whether successive truncations agreed to `n_tol` before `n_max`.
    pub converged: bool,
    /// `(n, p)` for every truncation tried.
    pub history: Vec<(f64, f64)>,
}

/// Truncation nearest to `n` that is a whole multiple of `a`, so that the
/// two lattice spacings agree.
pub fn snap_truncation(a: f64, n: f64) -> f64 {
    a * (n / a).round().max(1.0)
}

/// `p = ∫_{c₁}⟨η, ξ⟩` for `spec`, raising `n` from `spec.n` in steps of
/// about `n_step` until two successive values agree to `n_tol`. Every
/// truncation is snapped to a multiple of `a`.
pub fn first_period(spec: &ContourSpec, opts: &PeriodOptions) -> Result<FirstPeriod> {
    spec.validate()?;
    opts.validate()?;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let step = snap_truncation(spec.a, opts.n_step);
    let mut n = snap_truncation(spec.a, spec.n);
    loop {
        let ev = FirstPeriodEvaluator::new(spec.a, spec.phi, n, opts.h, opts.solver)?;
        let s = ev.eval(spec.b)?;
        let converged = history.last().is_some_and(|&(_, prev)| (s.p - prev).abs() < opts.n_tol);
        history.push((n, s.p));
        if converged || n + step > opts.n_max.max(step) + 1e-9 {
            return Ok(FirstPeriod {
                p: s.p,
                n_used: n,
                h_used: opts.h,
                residual: s.residual,
                converged,
                history,
            });
        }
        n += step;
    }
}

/// `p(b)` on a grid of `b` values at truncation `n`; independent solves run
/// in parallel.
pub fn scan_first_period(a: f64, phi: f64, n: f64, bs: &[f64], opts: &PeriodOptions) -> Result<Vec<PeriodSample>> {
    opts.validate()?;
    if bs.is_empty() {
        return Err(invalid("b", "empty scan range"));
    }
    bs.par_iter()
        .map(|&b| FirstPeriodEvaluator::new(a, phi, n, opts.h, opts.solver)?.eval(b))
        .collect()
}

/// Upper end `2|h(φ, α)|` of the bracket in `b`, where `α` is the helicoid
/// pitch of width `a sin φ`.
pub fn first_period_b_max(a: f64, phi: f64) -> Result<f64> {
    Ok(2.0 * conormal_height(phi, alpha_for_width(a * phi.sin())?)?.abs())
}

/// A sign-changing bracket and its end values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Root of `p` in one of the contour parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPeriodRoot {
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub p: f64,
    pub n_used: f64,
    pub h_used: f64,
    pub residual: f64,
    pub bracket: Bracket,
    /// `(parameter, p)` on the scan grid.
    pub scan: Vec<(f64, f64)>,
    /// Every sign change of the scan, left to right.
    pub sign_changes: Vec<Bracket>,
}

fn sign_changes(scan: &[(f64, f64)]) -> Vec<Bracket> {
    scan.windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| Bracket {
            lo: w[0].0,
            hi: w[1].0,
            f_lo: w[0].1,
            f_hi: w[1].1,
        })
        .collect()
}

fn scan_error(what: &str, scan: &[(f64, f64)]) -> Error {
    let table: Vec<String> = scan.iter().map(|(x, f)| format!("({x:.6}, {f:.6})")).collect();
    let (first, last) = (scan[0], scan[scan.len() - 1]);
    Error::NoBracket {
        what: format!("{what}; scan {}", table.join(" ")),
        lo: first.0,
        hi: last.0,
        f_lo: first.1,
        f_hi: last.1,
    }
}

/// Illinois variant of regula falsi on a sign-changing bracket; stops at
/// `|f| ≤ ftol`.
fn refine_root(mut f: impl FnMut(f64) -> Result<f64>, bracket: Bracket, ftol: f64, what: &str) -> Result<(f64, f64)> {
    let Bracket {
        mut lo,
        mut hi,
        mut f_lo,
        mut f_hi,
    } = bracket;
    if f_lo.abs() <= ftol {
        return Ok((lo, f_lo));
    }
    if f_hi.abs() <= ftol {
        return Ok((hi, f_hi));
    }
    let mut side = 0i8;
    for _ in 0..60 {
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(x > lo.min(hi) && x < lo.max(hi)) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() <= ftol {
            return Ok((x, fx));
        }
        if fx.signum() == f_hi.signum() {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
        if (hi - lo).abs() < 1e-13 * (1.0 + lo.abs()) {
            return Ok((x, fx));
        }
    }
    Err(Error::RootNotConverged {
        what: what.to_string(),
        iterations: 60,
    })
}

/// Root of `p(b)` at fixed `(a, φ)`: truncation continuation at the middle
/// of `[b_min, 2|h|]`, a scan at the resulting `n` (widened by doubling the
/// upper end while no `+ → −` change shows), and Illinois refinement of the
/// first `+ → −` change.
pub fn solve_first_period(a: f64, phi: f64, opts: &PeriodOptions) -> Result<FirstPeriodRoot> {
    opts.validate()?;
    check_shape(a, phi, opts.n_start)?;
    let (lo, hi) = (opts.b_min, first_period_b_max(a, phi)?);
    if hi <= lo {
        return Err(invalid("b_min", format!("exceeds the bracket end {hi}")));
    }
    let n_used = first_period(&ContourSpec::new(a, 0.5 * (lo + hi), phi, opts.n_start)?, opts)?.n_used;
    let grid = linspace(lo, hi, opts.scan_points);
    let mut scan: Vec<(f64, f64)> = scan_first_period(a, phi, n_used, &grid, opts)?
        .into_iter()
        .map(|s| (s.b, s.p))
        .collect();
    let ev = FirstPeriodEvaluator::new(a, phi, n_used, opts.h, opts.solver)?;
    // near φ = π/2 the helicoid bound 2|h| shrinks to zero while the
    // threshold does not, so the bracket is widened geometrically
    for _ in 0..opts.expand_steps {
        if sign_changes(&scan).iter().any(|c| c.f_lo > 0.0) {
            break;
        }
        let b = 2.0 * scan.last().unwrap().0;
        scan.push((b, ev.eval(b)?.p));
    }
    let changes = sign_changes(&scan);
    let bracket = *changes
        .iter()
        .find(|c| c.f_lo > 0.0)
        .ok_or_else(|| scan_error("first period p(b)", &scan))?;
    let mut residual = 0.0;
    let (b, p) = refine_root(
        |b| {
            let s = ev.eval(b)?;
            residual = s.residual;
            Ok(s.p)
        },
        bracket,
        opts.p_tol,
        "first period in b",
    )?;
    Ok(FirstPeriodRoot {
        a,
        b,
        phi,
        p,
        n_used,
        h_used: opts.h,
        residual,
        bracket,
        scan,
        sign_changes: changes,
    })
}

/// Smallest `a` in `[a_min, a_max]` with `p(a, b, φ) = 0`.
///
/// A left-to-right scan in `a` at truncation about `n_start` and spacing
/// `a_scan_h` locates the first sign change. Truncation continuation then
/// runs at the right end of that bracket and fixes the ratio `n/a`. The
/// bracket is re-checked at spacing `h` (and shifted along the scan grid if
/// the finer values disagree in sign), and Illinois refines it.
pub fn solve_first_period_in_a(b: f64, phi: f64, opts: &PeriodOptions) -> Result<FirstPeriodRoot> {
    opts.validate()?;
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    check_shape(opts.a_min, phi, opts.n_max)?;
    let grid = linspace(opts.a_min, opts.a_max, opts.scan_points);
    let scan: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&a| {
            let n = snap_truncation(a, opts.n_start);
            let s = FirstPeriodEvaluator::new(a, phi, n, opts.a_scan_h, opts.solver)?.eval(b)?;
            Ok((a, s.p))
        })
        .collect::<Result<_>>()?;
    let changes = sign_changes(&scan);
    let first = *changes.first().ok_or_else(|| scan_error("first period p(a)", &scan))?;
    // the truncation is carried along as a multiple of a
    let ratio = (first_period(&ContourSpec::new(first.hi, b, phi, opts.n_start)?, opts)?.n_used / first.hi).round();
    let eval =
        |a: f64| -> Result<PeriodSample> { FirstPeriodEvaluator::new(a, phi, ratio * a, opts.h, opts.solver)?.eval(b) };
    let mut i = grid.iter().position(|&a| a == first.lo).unwrap_or(0);
    let mut fine: Vec<Option<f64>> = vec![None; grid.len()];
    let mut value = |i: usize| -> Result<f64> {
        if let Some(v) = fine[i] {
            return Ok(v);
        }
        let v = eval(grid[i])?.p;
        fine[i] = Some(v);
        Ok(v)
    };
    // walk to the nearest fine-grid sign change, preferring the left
    let bracket = loop {
        let (f_lo, f_hi) = (value(i)?, value(i + 1)?);
        if f_lo.signum() != f_hi.signum() {
            break Bracket {
                lo: grid[i],
                hi: grid[i + 1],
                f_lo,
                f_hi,
            };
        }
        let step_left = f_lo.signum() == first.f_hi.signum();
        if step_left && i > 0 {
            i -= 1;
        } else if !step_left && i + 2 < grid.len() {
            i += 1;
        } else {
            let table: Vec<(f64, f64)> = grid.iter().zip(&fine).filter_map(|(&a, v)| v.map(|v| (a, v))).collect();
            return Err(scan_error("first period p(a) at the working spacing", &table));
        }
    };
    let mut residual = 0.0;
    let (a, p) = refine_root(
        |a| {
            let s = eval(a)?;
            residual = s.residual;
            Ok(s.p)
        },
        bracket,
        opts.p_tol,
        "first period in a",
    )?;
    Ok(FirstPeriodRoot {
        a,
        b,
        phi,
        p,
        n_used: ratio * a,
        h_used: opts.h,
        residual,
        bracket,
        scan,
        sign_changes: changes,
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Angular period `A` and the mirror region `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularPeriod {
    pub phi: f64,
    pub b: f64,
    /// Direct intersection angle of the mirror geodesics.
    pub angle: f64,
    /// `φ − b − area(V)`.
    pub angle_gauss_bonnet: f64,
    pub area_v: f64,
}

/// Disagreement allowed between the direct and Gauss–Bonnet angles.
const ANGLE_AGREEMENT: f64 = 1e-4;

/// `A` for a twist profile over the vertical edge; `φ` and `b` are the
/// profile's total twist and length.
pub fn angular_period(profile: &TwistProfile) -> Result<AngularPeriod> {
    let (phi, b) = (profile.total(), profile.length());
    if phi > 0.0 && phi < PI / 2.0 {
        let b0 = b0_of_phi(phi)?;
        if b >= b0 {
            return Err(Error::NoIntersection { b, b0 });
        }
    }
    let region = mirror_region(profile)?;
    if (region.angle - region.angle_gauss_bonnet).abs() > ANGLE_AGREEMENT {
        return Err(Error::InvalidProfile(format!(
            "direct angle {} and Gauss-Bonnet angle {} disagree",
            region.angle, region.angle_gauss_bonnet
        )));
    }
    Ok(AngularPeriod {
        phi,
        b,
        angle: region.angle,
        angle_gauss_bonnet: region.angle_gauss_bonnet,
        area_v: region.area,
    })
}

/// Twist profile over the vertical edge of length `b`, from the contour
/// `(twist_a, b, φ, twist_n)`.
pub fn contour_twist_profile(phi: f64, b: f64, opts: &PeriodOptions) -> Result<TwistProfile> {
    let spec = ContourSpec::new(opts.twist_a, b, phi, opts.twist_n)?;
    let dom = contour_domain(&spec, opts.h)?;
    let solver = SolveOptions { h: None, ..opts.solver };
    let (u, _) = solve_from(
        dom,
        ManifoldParams::nil_symmetric(),
        0.0,
        &solver,
        InitialGuess::Laplace,
    )?;
    let m = opts.twist_heights;
    let heights: Vec<f64> = (1..=m).map(|j| b * j as f64 / (m + 1) as f64).collect();
    corner_twist_profile(&u, B_VERTEX, &heights, opts.twist_radius * opts.twist_a)
}

/// `A(b)` at hinge angle `φ`, from the extracted twist profile.
pub fn angular_period_at(phi: f64, b: f64, opts: &PeriodOptions) -> Result<AngularPeriod> {
    angular_period(&contour_twist_profile(phi, b, opts)?)
}

/// Hinge angle `φ_k = π/k + b₀(π/k)`.
pub fn hinge_angle(k: u32) -> Result<f64> {
    if k < 3 {
        return Err(invalid("k", format!("needs k ≥ 3, got {k}")));
    }
    let base = PI / f64::from(k);
    let phi = base + b0_of_phi(base)?;
    if phi >= PI / 2.0 {
        return Err(invalid("k", format!("φ_k = {phi} is not below π/2")));
    }
    Ok(phi)
}

/// Solution of `A(b) = π/k` at `φ = φ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondPeriod {
    pub k: u32,
    pub phi: f64,
    pub b: f64,
    pub b0: f64,
    pub period: AngularPeriod,
    /// `A − π/k` at the ends of `[0.02, 0.98]·b₀(φ_k)`.
    pub certificate: Bracket,
    /// `(b, A)` on the monotonicity grid.
    pub scan: Vec<(f64, f64)>,
    /// Every sign change of `A − π/k` on the grid.
    pub sign_changes: Vec<Bracket>,
}

pub fn solve_second_period(k: u32, opts: &PeriodOptions) -> Result<SecondPeriod> {
    opts.validate()?;
    let phi = hinge_angle(k)?;
    let target = PI / f64::from(k);
    let b0 = b0_of_phi(phi)?;
    let grid = linspace(0.02 * b0, 0.98 * b0, opts.angle_points);
    let scan: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&b| Ok((b, angular_period_at(phi, b, opts)?.angle)))
        .collect::<Result<_>>()?;
    if let Some(w) = scan.windows(2).find(|w| w[1].1 >= w[0].1) {
        return Err(Error::NotMonotone {
            what: "A(b)".into(),
            at: w[1].0,
        });
    }
    let shifted: Vec<(f64, f64)> = scan.iter().map(|&(b, a)| (b, a - target)).collect();
    let (first, last) = (shifted[0], shifted[shifted.len() - 1]);
    let certificate = Bracket {
        lo: first.0,
        hi: last.0,
        f_lo: first.1,
        f_hi: last.1,
    };
    if !(certificate.f_lo > 0.0 && certificate.f_hi < 0.0) {
        return Err(scan_error("angular period A(b) − π/k", &shifted));
    }
    let changes = sign_changes(&shifted);
    let mut period = None;
    let (b, _) = refine_root(
        |b| {
            let ap = angular_period_at(phi, b, opts)?;
            period = Some(ap);
            Ok(ap.angle - target)
        },
        changes[0],
        opts.angle_tol,
        "second period in b",
    )?;
    let period = match period {
        Some(p) if p.b == b => p,
        _ => angular_period_at(phi, b, opts)?,
    };
    Ok(SecondPeriod {
        k,
        phi,
        b,
        b0,
        period,
        certificate,
        scan,
        sign_changes: changes,
    })
}

/// Euler characteristic `V − E + F` of the surface generated by reflection:
/// `4k` quadrilateral pieces, every edge shared by two pieces and every
/// corner by four.
pub fn euler_characteristic(k: u32) -> i64 {
    let k = i64::from(k);
    let faces = 4 * k;
    let edges = 4 * faces / 2;
    let vertices = 4 * faces / 4;
    vertices - edges + faces
}

pub fn genus(chi: i64) -> i64 {
    (2 - chi) / 2
}

/// The k-noid report; JSON layout
/// `{k, a, b, phi, p, A, b0, areaV, chi, genus, n_used, h_used, residual}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub k: u32,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub p: f64,
    #[serde(rename = "A")]
    pub angle: f64,
    pub b0: f64,
    #[serde(rename = "areaV")]
    pub area_v: f64,
    pub chi: i64,
    pub genus: i64,
    pub n_used: f64,
    pub h_used: f64,
    pub residual: f64,
}

/// Everything produced for one `k`.
#[derive(Debug, Clone)]
pub struct Knoid {
    pub report: PeriodReport,
    pub second: SecondPeriod,
    pub first: FirstPeriodRoot,
    /// Fundamental piece in Nil on the coarse grid.
    pub field: ScalarField,
    /// Twist profile over the vertical edge and its sister mirror curve.
    pub profile: TwistProfile,
    pub curve: HCurve,
}

/// Second period first (it does not involve `a`), then the smallest `a`
/// solving the first period at the resulting `(b, φ_k)`.
pub fn assemble_report(k: u32, opts: &PeriodOptions) -> Result<Knoid> {
    assemble_report_with(solve_second_period(k, opts)?, opts)
}

/// [`assemble_report`] from an already solved second period.
pub fn assemble_report_with(second: SecondPeriod, opts: &PeriodOptions) -> Result<Knoid> {
    let k = second.k;
    let first = solve_first_period_in_a(second.b, second.phi, opts)?;
    let chi = euler_characteristic(k);
    let spec = ContourSpec::new(first.a, second.b, second.phi, first.n_used)?;
    let solver = SolveOptions { h: None, ..opts.solver };
    let (field, _) = solve_from(
        contour_domain(&spec, opts.h)?,
        ManifoldParams::nil_symmetric(),
        0.0,
        &solver,
        InitialGuess::Laplace,
    )?;
    let profile = contour_twist_profile(second.phi, second.b, opts)?;
    let curve = reconstruct_curve(&profile);
    let report = PeriodReport {
        k,
        a: first.a,
        b: second.b,
        phi: second.phi,
        p: first.p,
        angle: second.period.angle,
        b0: second.b0,
        area_v: second.period.area_v,
        chi,
        genus: genus(chi),
        n_used: first.n_used,
        h_used: first.h_used,
        residual: first.residual,
    };
    Ok(Knoid {
        report,
        second,
        first,
        field,
        profile,
        curve,
    })
}
