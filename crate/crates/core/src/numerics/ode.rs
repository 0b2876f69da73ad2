//! Explicit one-step integrators for small autonomous and non-autonomous
//! systems: the classical fixed-step Runge–Kutta method and an adaptive
//! Dormand–Prince 5(4) pair.

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let y2 = axpy(y, 0.5 * h, &k1);
    let k2 = f(t + 0.5 * h, &y2);
    let y3 = axpy(y, 0.5 * h, &k2);
    let k3 = f(t + 0.5 * h, &y3);
    let y4 = axpy(y, h, &k3);
    let k4 = f(t + h, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates with `steps` RK4 steps from `t0` to `t1`.
pub fn rk4<const N: usize, F>(f: &F, t0: f64, t1: f64, y0: [f64; N], steps: usize) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(f, t0 + k as f64 * h, &y, h);
    }
    y
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integrator with mixed absolute/relative
/// tolerance `tol`.
#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
}

impl DormandPrince {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            h_init: 1e-3,
            h_max: 0.1,
        }
    }

    /// Integrates from `t0` to `t1` and returns the state at `t1`.
    pub fn integrate<const N: usize, F>(&self, f: &F, t0: f64, t1: f64, y0: [f64; N]) -> [f64; N]
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = y0;
        self.integrate_to_each(f, t0, y0, &[t1], |_, _, y| out = *y);
        out
    }

    /// Integrates through the monotone list of output times `ts` (all on the
    /// same side of `t0`) and calls `sink(index, t, y)` at each of them.
    pub fn integrate_to_each<const N: usize, F, S>(&self, f: &F, t0: f64, y0: [f64; N], ts: &[f64], mut sink: S)
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        S: FnMut(usize, f64, &[f64; N]),
    {
        let mut t = t0;
        let mut y = y0;
        let mut h = self.h_init;
        let mut k1 = f(t, &y);
        for (idx, &target) in ts.iter().enumerate() {
            let dir = if target >= t { 1.0 } else { -1.0 };
            while (target - t) * dir > 1e-15 * (1.0 + t.abs()) {
                let mut step = (h.min(self.h_max)).min((target - t).abs());
                loop {
                    let hs = dir * step;
                    let (y_new, err, k7) = dp_step(f, t, &y, &k1, hs);
                    let mut sc = 0.0f64;
                    for i in 0..N {
                        let scale = self.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
                        sc = sc.max((err[i] / scale).abs());
                    }
                    if sc <= 1.0 || step < 1e-14 {
                        t += hs;
                        y = y_new;
                        k1 = k7;
                        let fac = if sc == 0.0 {
                            5.0
                        } else {
                            (0.9 * sc.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        h = step * fac;
                        break;
                    }
                    step *= (0.9 * sc.powf(-0.25)).clamp(0.1, 0.9);
                }
            }
            sink(idx, target, &y);
        }
    }
}

type DpOut<const N: usize> = ([f64; N], [f64; N], [f64; N]);

fn dp_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> DpOut<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    let k2 = f(t + C2 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let k3 = f(t + C3 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let k4 = f(t + C4 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let k5 = f(t + C5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let k6 = f(t + h, &tmp);
    let mut y_new = [0.0; N];
    for i in 0..N {
        y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
    }
    let k7 = f(t + h, &y_new);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, err, k7)
}
