use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficient;
use crate::error::{Error, Result};

/// Amplitude and derivative of one Fourier mode of `v'' + a(t) xi^2 v = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub xi: f64,
    pub t: f64,
    pub v: Complex64,
    pub vp: Complex64,
}

impl ModeState {
    /// `|v'|^2 / xi^2 + a |v|^2`.
    pub fn energy(&self, a: f64) -> f64 {
        self.vp.norm_sqr() / (self.xi * self.xi) + a * self.v.norm_sqr()
    }
}

/// Fundamental matrix of the mode equation at one sample time, in the scaled
/// variables `(v, v'/xi)`: columns are the solutions starting from `(1, 0)`
/// and `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSample {
    pub t: f64,
    pub a: f64,
    pub m: [[f64; 2]; 2],
}

/// Trajectory of the fundamental matrix together with step counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub xi: f64,
    pub t0: f64,
    pub a0: f64,
    pub samples: Vec<ModeSample>,
    pub steps: usize,
    pub rejected: usize,
}

/// Largest eigenvalue of the symmetric 2x2 matrix `M^T M`, i.e. `||M||_2^2`.
fn norm_sq(m: &[[f64; 2]; 2]) -> f64 {
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let r = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let q = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let mean = 0.5 * (p + r);
    let half = 0.5 * (p - r);
    mean + (half * half + q * q).sqrt()
}

impl ModeSolution {
    /// Evolves a given initial state (prescribed at `t0`) to sample `i`.
    pub fn state_at(&self, i: usize, init: &ModeState) -> ModeState {
        let s = &self.samples[i];
        let w0 = init.vp / self.xi;
        let v = s.m[0][0] * init.v + s.m[0][1] * w0;
        let w = s.m[1][0] * init.v + s.m[1][1] * w0;
        ModeState {
            xi: self.xi,
            t: s.t,
            v,
            vp: w * self.xi,
        }
    }

    /// Wronskian `v1 v2' - v2 v1'` of the solutions starting from
    /// `(v, v') = (1, 0)` and `(0, 1)`; equal to 1 for the exact flow.
    pub fn wronskian(&self, i: usize) -> f64 {
        let m = &self.samples[i].m;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Worst-case energy ratio `E(t_i) / E(t0)` over all initial data.
    pub fn amplification(&self, i: usize) -> f64 {
        let s = &self.samples[i];
        let (d1, d0) = (s.a.sqrt(), self.a0.sqrt());
        let w = [
            [d1 * s.m[0][0] / d0, d1 * s.m[0][1]],
            [s.m[1][0] / d0, s.m[1][1]],
        ];
        norm_sq(&w)
    }

    /// Largest amplification over all samples.
    pub fn max_amplification(&self) -> f64 {
        (0..self.samples.len())
            .map(|i| self.amplification(i))
            .fold(0.0, f64::max)
    }
}

/// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type State = [f64; 4];

/// `y = (v1, w1, v2, w2)` with `w = v'/xi`: `v' = xi w`, `w' = -a xi v`.
#[inline]
fn deriv(a: f64, xi: f64, y: &State) -> State {
    [xi * y[1], -a * xi * y[0], xi * y[3], -a * xi * y[2]]
}

/// Adaptive integration of `v'' + a(t) xi^2 v = 0` from `t0` to `t1` for the
/// two fundamental solutions, with local error tolerance `tol` and steps
/// capped by `min(0.1 t, 0.2 / (xi sqrt(Lambda0)))`. The fundamental matrix is
/// recorded at `t0`, at every time of `sample_times` inside `(t0, t1)` and at `t1`.
pub fn solve_mode(
    coeff: &dyn Coefficient,
    xi: f64,
    t0: f64,
    t1: f64,
    tol: f64,
    sample_times: &[f64],
) -> Result<ModeSolution> {
    if coeff.dim() != 1 {
        return Err(Error::param("dim", "the mode equation needs a time-only coefficient"));
    }
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::param("t_span", format!("[{t0}, {t1}] must satisfy 0 < t0 < t1")));
    }
    if !(xi > 0.0) {
        return Err(Error::param("xi", format!("{xi} must be positive")));
    }
    if !(tol >= 1e-12) {
        return Err(Error::param("tol", format!("{tol:e} below 1e-12")));
    }
    let x = [0.0, 0.0];
    let a = |t: f64| coeff.eval(t, &x, 0, 0);
    let h_wave = 0.2 / (xi * coeff.big_lambda0().sqrt());
    let mut marks: Vec<f64> = sample_times.iter().copied().filter(|&s| s > t0 && s < t1).collect();
    marks.push(t1);
    marks.sort_by(f64::total_cmp);
    marks.dedup();

    let mut y: State = [1.0, 0.0, 0.0, 1.0];
    let mut t = t0;
    let a0 = a(t0);
    let record = |t: f64, y: &State| ModeSample {
        t,
        a: a(t),
        m: [[y[0], y[2]], [y[1], y[3]]],
    };
    let mut samples = vec![record(t0, &y)];
    let mut steps = 0;
    let mut rejected = 0;
    let mut h = h_wave.min(0.1 * t0);
    let mut k = [[0.0; 4]; 7];
    k[0] = deriv(a(t), xi, &y);
    for &target in &marks {
        while t < target {
            h = h.min(0.1 * t).min(h_wave);
            let h_free = h;
            let remaining = target - t;
            let land = h >= remaining;
            if land {
                h = remaining;
            }
            for s in 1..7 {
                let mut ys = y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    *yi += h * acc;
                }
                k[s] = deriv(a(t + C[s] * h), xi, &ys);
            }
            let mut y_new = y;
            for (i, yi) in y_new.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[6][j] * kj[i];
                }
                *yi += h * acc;
            }
            let mut err: f64 = 0.0;
            for i in 0..4 {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
                err = err.max((h * e).abs() / sc);
            }
            if err <= 1.0 {
                t = if land { target } else { t + h };
                y = y_new;
                k[0] = k[6];
                steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = if land { h_free.max(h * fac) } else { h * fac };
            } else {
                rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < 1e-15 * t.max(1e-300) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        samples.push(record(t, &y));
    }
    Ok(ModeSolution {
        xi,
        t0,
        a0,
        samples,
        steps,
        rejected,
    })
}
