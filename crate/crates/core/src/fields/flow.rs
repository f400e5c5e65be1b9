//! Adaptive Dormand–Prince 5(4) integration of complex ODE systems.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowIntegrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for FlowIntegrator {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_step: 1.0, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResult {
    pub value: Vec<C64>,
    /// sum of accepted local error estimates
    pub error_estimate: f64,
    pub steps: usize,
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
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[C64], terms: &[(f64, &[C64])], h: f64) -> Vec<C64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, ki) in out.iter_mut().zip(k.iter()) {
                *o += ki * (c * h);
            }
        }
    }
    out
}

impl FlowIntegrator {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    /// Shrinks the absolute tolerance for states of size `scale` < 1, so the
    /// error control stays relative on small patches.
    pub fn scaled_to(&self, scale: f64) -> Self {
        let s = if scale > 0.0 && scale.is_finite() { scale.min(1.0) } else { 1.0 };
        Self { atol: self.atol * s, ..self.clone() }
    }

    /// Integrates dy/ds = f(s, y) from s0 to s1 ≥ s0.
    pub fn integrate<F>(&self, f: F, y0: &[C64], s0: f64, s1: f64) -> Result<FlowResult>
    where
        F: Fn(f64, &[C64]) -> Result<Vec<C64>>,
    {
        let mut y = y0.to_vec();
        let mut s = s0;
        let mut result = FlowResult { value: Vec::new(), error_estimate: 0.0, steps: 0, rejected: 0 };
        if s1 <= s0 {
            result.value = y;
            return Ok(result);
        }
        let mut h = (s1 - s0).min(self.max_step).min(0.1);
        let mut k1 = f(s, &y)?;
        while s < s1 {
            if result.steps + result.rejected >= self.max_steps {
                return Err(Error::StepSizeCollapse(h));
            }
            let last = s + h >= s1;
            if last {
                h = s1 - s;
            }
            let k2 = f(s + C2 * h, &axpy(&y, &[(A21, &k1)], h))?;
            let k3 = f(s + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h))?;
            let k4 = f(s + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
            let k5 = f(s + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h))?;
            let k6 = f(s + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h))?;
            let ynew = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
            let k7 = f(s + h, &ynew)?;
            let mut err: f64 = 0.0;
            let mut abs_err: f64 = 0.0;
            for i in 0..y.len() {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let sc = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
                err = err.max(e.norm() / sc);
                abs_err = abs_err.max(e.norm());
            }
            if !err.is_finite() {
                h *= 0.2;
                result.rejected += 1;
                if h < 1e-14 * (1.0 + s.abs()) {
                    return Err(Error::StepSizeCollapse(h));
                }
                continue;
            }
            if err <= 1.0 {
                s = if last { s1 } else { s + h };
                y = ynew;
                k1 = k7;
                result.steps += 1;
                result.error_estimate += abs_err;
            } else {
                result.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(self.max_step);
            if h < 1e-14 * (1.0 + s.abs()) {
                return Err(Error::StepSizeCollapse(h));
            }
        }
        result.value = y;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let integ = FlowIntegrator::default();
        let y0 = vec![C64::new(1.0, 0.5)];
        let r = integ.integrate(|_, y| Ok(vec![-y[0]]), &y0, 0.0, 3.0).unwrap();
        let want = y0[0] * (-3.0f64).exp();
        assert!((r.value[0] - want).norm() < 1e-10);
    }

    #[test]
    fn riccati_blowdown() {
        // y' = −y², y(0) = 1 → y = 1/(1+s)
        let integ = FlowIntegrator::default();
        let r = integ.integrate(|_, y| Ok(vec![-y[0] * y[0]]), &[C64::new(1.0, 0.0)], 0.0, 9.0).unwrap();
        assert!((r.value[0] - 0.1).norm() < 1e-9);
    }
}
