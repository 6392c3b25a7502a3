//! Dormand–Prince 5(4) on flat complex state vectors.
//!
//! The generators here are time independent, so the right-hand side is a plain
//! `f(y) -> dy`. Step-size control is the PI controller of Hairer's DOPRI5
//! (β = 0.04) with a mixed absolute/relative error measured in the max norm.

use num_complex::Complex64;
use rayon::prelude::*;

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

const CHUNK: usize = 1 << 12;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// `out = y + Σ w_i k_i`, chunked over threads.
fn lincomb(out: &mut [Complex64], y: &[Complex64], terms: &[(f64, &[Complex64])]) {
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, o)| {
        let lo = c * CHUNK;
        let hi = lo + o.len();
        o.copy_from_slice(&y[lo..hi]);
        for &(w, k) in terms {
            if w != 0.0 {
                for (oi, ki) in o.iter_mut().zip(&k[lo..hi]) {
                    *oi += ki * w;
                }
            }
        }
    });
}

/// `max_i |h Σ e_j k_j[i]| / (atol + rtol max(|y_i|, |y_new_i|))`.
fn error_norm(h: f64, k: &[Vec<Complex64>; 7], y: &[Complex64], y_new: &[Complex64], rtol: f64, atol: f64) -> f64 {
    let weights = [E1, 0.0, E3, E4, E5, E6, E7];
    y.par_chunks(CHUNK)
        .enumerate()
        .map(|(c, ychunk)| {
            let lo = c * CHUNK;
            let mut worst: f64 = 0.0;
            for (i, yi) in ychunk.iter().enumerate() {
                let idx = lo + i;
                let mut err = Complex64::new(0.0, 0.0);
                for (w, kj) in weights.iter().zip(k.iter()) {
                    if *w != 0.0 {
                        err += kj[idx] * *w;
                    }
                }
                let scale = atol + rtol * yi.norm().max(y_new[idx].norm());
                worst = worst.max((err * h).norm() / scale);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Stage storage for one integration. `k[0]` holds `f(y)` of the current
/// state between steps (first-same-as-last).
pub(crate) struct Dopri5 {
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    fsal_valid: bool,
    pub rhs_evaluations: u64,
}

impl Dopri5 {
    pub fn new(len: usize) -> Self {
        let zero = || vec![Complex64::new(0.0, 0.0); len];
        Self {
            k: [zero(), zero(), zero(), zero(), zero(), zero(), zero()],
            stage: zero(),
            fsal_valid: false,
            rhs_evaluations: 0,
        }
    }

    /// Attempts a step of size `h` from `y`; writes the 5th-order solution to
    /// `y_new` and returns the scaled error norm. Call [`Self::accept`] if the
    /// step is taken.
    pub fn attempt<F>(&mut self, f: &F, y: &[Complex64], h: f64, y_new: &mut [Complex64], rtol: f64, atol: f64) -> f64
    where
        F: Fn(&[Complex64], &mut [Complex64]) + ?Sized,
    {
        if !self.fsal_valid {
            f(y, &mut self.k[0]);
            self.rhs_evaluations += 1;
            self.fsal_valid = true;
        }
        self.stages(f, y, h, y_new);
        let [_, _, _, _, _, _, k7] = &mut self.k;
        f(y_new, k7);
        self.rhs_evaluations += 1;
        error_norm(h, &self.k, y, y_new, rtol, atol)
    }

    /// The accepted step's last stage is `f(y_new)`.
    pub fn accept(&mut self) {
        let [k1, _, _, _, _, _, k7] = &mut self.k;
        std::mem::swap(k1, k7);
    }

    /// Stages 2..6 and the 5th-order combination, given `k[0] = f(y)`.
    fn stages<F>(&mut self, f: &F, y: &[Complex64], h: f64, y_new: &mut [Complex64])
    where
        F: Fn(&[Complex64], &mut [Complex64]) + ?Sized,
    {
        let Self { k, stage, .. } = self;
        let [k1, k2, k3, k4, k5, k6, _] = k;
        lincomb(stage, y, &[(h * A21, k1)]);
        f(stage, k2);
        lincomb(stage, y, &[(h * A31, k1), (h * A32, k2)]);
        f(stage, k3);
        lincomb(stage, y, &[(h * A41, k1), (h * A42, k2), (h * A43, k3)]);
        f(stage, k4);
        lincomb(stage, y, &[(h * A51, k1), (h * A52, k2), (h * A53, k3), (h * A54, k4)]);
        f(stage, k5);
        lincomb(
            stage,
            y,
            &[(h * A61, k1), (h * A62, k2), (h * A63, k3), (h * A64, k4), (h * A65, k5)],
        );
        f(stage, k6);
        lincomb(
            y_new,
            y,
            &[(h * B1, k1), (h * B3, k3), (h * B4, k4), (h * B5, k5), (h * B6, k6)],
        );
        self.rhs_evaluations += 5;
    }

    /// Re-integration of a sub-step from a saved state: `k1 = f(y)` is supplied
    /// and the stage buffers are overwritten. Leaves FSAL invalid.
    pub fn substep<F>(&mut self, f: &F, y: &[Complex64], k1: &[Complex64], h: f64, y_new: &mut [Complex64])
    where
        F: Fn(&[Complex64], &mut [Complex64]) + ?Sized,
    {
        self.k[0].copy_from_slice(k1);
        self.stages(f, y, h, y_new);
        self.fsal_valid = false;
    }
}

/// PI step-size controller state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Controller {
    err_old: f64,
    just_rejected: bool,
}

impl Controller {
    pub fn new() -> Self {
        Self {
            err_old: 1e-4,
            just_rejected: false,
        }
    }

    /// New step size after an accepted step with error `err <= 1`.
    pub fn accepted(&mut self, h: f64, err: f64) -> f64 {
        let fac11 = err.powf(EXPO);
        let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
        let mut h_new = h / fac;
        if self.just_rejected {
            h_new = h_new.min(h);
        }
        self.err_old = err.max(1e-4);
        self.just_rejected = false;
        h_new
    }

    /// Reduced step size after a rejected step.
    pub fn rejected(&mut self, h: f64, err: f64) -> f64 {
        self.just_rejected = true;
        let fac11 = if err.is_finite() { err.powf(EXPO) } else { f64::INFINITY };
        h / (fac11 / SAFETY).min(1.0 / MIN_FACTOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn single_step_is_fifth_order() {
        // y' = -y: the local error of a step of size h scales like h^6.
        let f = |y: &[Complex64], out: &mut [Complex64]| {
            for (o, v) in out.iter_mut().zip(y) {
                *o = -v;
            }
        };
        let local_err = |h: f64| {
            let mut s = Dopri5::new(1);
            let mut y_new = vec![c(0.0)];
            s.attempt(&f, &[c(1.0)], h, &mut y_new, 1e-8, 1e-10);
            (y_new[0].re - (-h).exp()).abs()
        };
        let ratio = local_err(0.1) / local_err(0.05);
        assert!((ratio.log2() - 6.0).abs() < 0.3, "order estimate {}", ratio.log2());
    }

    #[test]
    fn error_estimate_is_fourth_order() {
        let f = |y: &[Complex64], out: &mut [Complex64]| {
            for (o, v) in out.iter_mut().zip(y) {
                *o = v * Complex64::new(0.0, -3.0);
            }
        };
        let est = |h: f64| {
            let mut s = Dopri5::new(1);
            let mut y_new = vec![c(0.0)];
            s.attempt(&f, &[c(1.0)], h, &mut y_new, 0.0, 1.0)
        };
        let ratio = est(0.02) / est(0.01);
        assert!((ratio.log2() - 5.0).abs() < 0.3);
    }

    #[test]
    fn controller_limits() {
        let mut ctl = Controller::new();
        assert!((ctl.accepted(1.0, 0.0) - MAX_FACTOR).abs() < 1e-12);
        let h = ctl.rejected(1.0, 1e6);
        assert!((h - MIN_FACTOR).abs() < 1e-12);
        // Right after a rejection the step may not grow.
        assert!(ctl.accepted(0.2, 1e-3) <= 0.2);
    }
}
