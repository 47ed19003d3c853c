//! Adaptive Dormand–Prince 5(4) stepping on a dense complex matrix state.

use crate::error::{Error, Result};
use crate::qcore::{CMatrix, C64};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

pub(crate) struct Stepper {
    k: Vec<CMatrix>,
    tmp: CMatrix,
    y_new: CMatrix,
    pub h: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    fsal_valid: bool,
}

impl Stepper {
    pub fn new(n: usize) -> Self {
        Self {
            k: (0..7).map(|_| CMatrix::zeros(n, n)).collect(),
            tmp: CMatrix::zeros(n, n),
            y_new: CMatrix::zeros(n, n),
            h: None,
            accepted: 0,
            rejected: 0,
            fsal_valid: false,
        }
    }

    /// Advances `y` from `t0` to exactly `t1`. The right-hand side must be
    /// smooth on the open interval; callers split at coefficient breakpoints.
    pub fn integrate<F>(
        &mut self,
        f: &mut F,
        y: &mut CMatrix,
        t0: f64,
        t1: f64,
        tol: Tolerances,
    ) -> Result<()>
    where
        F: FnMut(f64, &CMatrix, &mut CMatrix),
    {
        if t1 <= t0 {
            return Ok(());
        }
        // Derivative at the left end is recomputed after a breakpoint.
        self.fsal_valid = false;
        let span = t1 - t0;
        let mut t = t0;
        let mut h = match self.h {
            Some(h) => h.min(span),
            None => self.initial_step(f, y, t0, span),
        };
        let h_floor = 1e-13 * t1.abs().max(span);
        while t < t1 {
            if self.accepted + self.rejected >= tol.max_steps {
                return Err(Error::NotConverged {
                    what: "master-equation integrator",
                    detail: format!("exceeded {} steps at t = {t:e} s", tol.max_steps),
                });
            }
            let last = t + h >= t1 - 1e-12 * span;
            let step = if last { t1 - t } else { h };
            let err = self.try_step(f, y, t, step, tol);
            if err <= 1.0 {
                std::mem::swap(y, &mut self.y_new);
                // k[6] holds f(t + step, y_new), the next step's first stage.
                self.k.swap(0, 6);
                self.fsal_valid = true;
                t = if last { t1 } else { t + step };
                self.accepted += 1;
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A short final step says nothing about the right step size.
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                self.rejected += 1;
                h = if err.is_finite() {
                    step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    step * 0.1
                };
                if h < h_floor {
                    return Err(Error::StepSizeUnderflow { time: t, step: h });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn initial_step<F>(&mut self, f: &mut F, y: &CMatrix, t0: f64, span: f64) -> f64
    where
        F: FnMut(f64, &CMatrix, &mut CMatrix),
    {
        f(t0, y, &mut self.k[0]);
        self.fsal_valid = true;
        let d0 = y.norm();
        let d1 = self.k[0].norm();
        let h = if d1 <= 1e-300 {
            span
        } else {
            0.01 * d0.max(1e-5) / d1
        };
        h.clamp(span * 1e-10, span)
    }

    fn try_step<F>(&mut self, f: &mut F, y: &CMatrix, t: f64, h: f64, tol: Tolerances) -> f64
    where
        F: FnMut(f64, &CMatrix, &mut CMatrix),
    {
        if !self.fsal_valid {
            f(t, y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        for s in 1..7 {
            self.tmp.copy_from(y);
            for (j, &a) in A[s].iter().enumerate().take(s) {
                if a != 0.0 {
                    let ha = h * a;
                    for (t, k) in self.tmp.as_mut_slice().iter_mut().zip(self.k[j].as_slice()) {
                        *t += k * ha;
                    }
                }
            }
            if s == 6 {
                self.y_new.copy_from(&self.tmp);
            }
            f(t + C[s] * h, &self.tmp, &mut self.k[s]);
        }
        let mut acc = 0.0f64;
        let ys = y.as_slice();
        let yn = self.y_new.as_slice();
        for idx in 0..ys.len() {
            let mut e = C64::default();
            for (s, &w) in E.iter().enumerate() {
                if w != 0.0 {
                    e += self.k[s].as_slice()[idx] * w;
                }
            }
            let sc = tol.abs + tol.rel * ys[idx].norm().max(yn[idx].norm());
            let r = (e * h).norm() / sc;
            // NaN must propagate so the step is rejected.
            if r.is_nan() {
                return f64::NAN;
            }
            acc = acc.max(r);
        }
        acc
    }
}
