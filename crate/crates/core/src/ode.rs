//! Adaptive Dormand-Prince 5(4) integrator for complex state vectors.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-10,
            rtol: 1e-10,
            initial_step: 0.05,
            min_step: 1e-12,
            max_steps: 20_000,
        }
    }
}

impl OdeOptions {
    pub fn tight() -> Self {
        OdeOptions {
            atol: 1e-12,
            rtol: 1e-12,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

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
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[C64], terms: &[(f64, &[C64])], h: f64) -> Vec<C64> {
    let mut out = y.to_vec();
    for (w, k) in terms {
        if *w != 0.0 {
            let s = w * h;
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += v * s;
            }
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns the final state.
pub fn integrate<F>(mut f: F, y0: Vec<C64>, t0: f64, t1: f64, opts: &OdeOptions) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.initial_step.min(span.abs()) * dir;
    let mut k1 = f(t, &y)?;
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(Error::NonConvergence {
                what: "ODE integration (step budget exhausted)".into(),
                history: vec![t],
            });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h))?;
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h))?;
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
        let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h))?;
        let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h))?;
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y_new)?;
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::NonConvergence {
                what: "ODE integration (non-finite state)".into(),
                history: vec![t],
            });
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < opts.min_step {
            return Err(Error::NonConvergence {
                what: "ODE integration (step size underflow)".into(),
                history: vec![t, h],
            });
        }
    }
    Ok((y, stats))
}
