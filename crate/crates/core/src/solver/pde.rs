use num_complex::Complex64;

use crate::coefficients::{Coefficient, CoefficientSample, Sampler};
use crate::error::{Error, Result};
use crate::lp::{Grid, SpectralField};

/// Time-dependent source term `F(t)` of `u_tt - div(A grad u) = F`.
pub type Forcing<'a> = &'a (dyn Fn(f64) -> SpectralField + Sync);

/// Solution state `(u, u_t)` at time `t`, both band-limited to `|k_i| <= N/3`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl WaveState {
    /// Initial state with both fields truncated to the two-thirds band.
    pub fn new(t: f64, mut u: SpectralField, mut ut: SpectralField) -> Self {
        u.truncate();
        ut.truncate();
        WaveState { t, u, ut }
    }

    pub fn zeros(grid: &Grid, t: f64) -> Self {
        WaveState {
            t,
            u: SpectralField::zeros(grid),
            ut: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.u.grid
    }
}

/// `div(A(t, .) grad)` on a grid, with the coefficient sampler cached.
pub struct WaveOperator<'a> {
    grid: Grid,
    sampler: Sampler<'a>,
    big_lambda0: f64,
}

impl<'a> WaveOperator<'a> {
    pub fn new(grid: &Grid, coeff: &'a dyn Coefficient) -> Result<Self> {
        if coeff.dim() != grid.dim() {
            return Err(Error::param(
                "dim",
                format!("coefficient is {}-dimensional, grid {}", coeff.dim(), grid.dim()),
            ));
        }
        Ok(WaveOperator {
            grid: grid.clone(),
            sampler: coeff.sampler(&grid.points()),
            big_lambda0: coeff.big_lambda0(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn big_lambda0(&self) -> f64 {
        self.big_lambda0
    }

    pub fn sample(&self, t: f64) -> CoefficientSample {
        (self.sampler)(t, false)
    }

    /// `div(A(t) grad u)`, truncated to the two-thirds band.
    pub fn apply(&self, t: f64, u: &SpectralField) -> SpectralField {
        let a = self.sample(t);
        self.apply_sampled(&a, u)
    }

    pub fn apply_sampled(&self, a: &CoefficientSample, u: &SpectralField) -> SpectralField {
        let g = &self.grid;
        let dim = g.dim();
        if dim == 1 {
            return self.apply_1d(a, u);
        }
        let grads: Vec<Vec<f64>> = (0..dim).map(|ax| u.derivative(ax).physical()).collect();
        let mut out = SpectralField::zeros(g);
        let mut flux = vec![Complex64::default(); g.len()];
        for j in 0..dim {
            for (i, f) in flux.iter_mut().enumerate() {
                let m = &a.values[i];
                let v = if dim == 1 {
                    m[0] * grads[0][i]
                } else {
                    m[2 * j] * grads[0][i] + m[2 * j + 1] * grads[1][i]
                };
                *f = Complex64::new(v, 0.0);
            }
            g.forward_complex(&mut flux);
            for (i, c) in out.coef.iter_mut().enumerate() {
                if g.in_band(i) {
                    let k = g.wavevector(i)[j] as f64;
                    *c += Complex64::new(0.0, k) * flux[i];
                }
            }
        }
        out
    }

    /// One-dimensional fast path working in a single buffer.
    fn apply_1d(&self, a: &CoefficientSample, u: &SpectralField) -> SpectralField {
        let g = &self.grid;
        let half = (g.n() / 2) as i64;
        let mut buf: Vec<Complex64> = u
            .coef
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = g.freq(i);
                if k == -half {
                    Complex64::default()
                } else {
                    c * Complex64::new(0.0, k as f64)
                }
            })
            .collect();
        g.inverse_complex(&mut buf);
        for (b, m) in buf.iter_mut().zip(&a.values) {
            *b = Complex64::new(m[0] * b.re, 0.0);
        }
        g.forward_complex(&mut buf);
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if g.in_band(i) {
                *b * Complex64::new(0.0, g.freq(i) as f64)
            } else {
                Complex64::default()
            };
        }
        SpectralField::from_coefficients(g, buf)
    }

    /// Energy `||u_t||^2 + \int A grad u . grad u`, the integral by grid quadrature.
    pub fn energy(&self, state: &WaveState) -> f64 {
        let g = &self.grid;
        let a = self.sample(state.t);
        let grads: Vec<Vec<f64>> = (0..g.dim()).map(|ax| state.u.derivative(ax).physical()).collect();
        let cell = (2.0 * std::f64::consts::PI / g.n() as f64).powi(g.dim() as i32);
        let mut pot = 0.0;
        for i in 0..g.len() {
            let m = &a.values[i];
            pot += if g.dim() == 1 {
                m[0] * grads[0][i] * grads[0][i]
            } else {
                let (x, y) = (grads[0][i], grads[1][i]);
                m[0] * x * x + (m[1] + m[2]) * x * y + m[3] * y * y
            };
        }
        state.ut.l2_sq() + pot * cell
    }
}

/// Right-hand side `div(A grad u) + F` of the second-order system.
pub fn rhs(state: &WaveState, coeff: &dyn Coefficient, forcing: Option<&SpectralField>) -> Result<SpectralField> {
    let op = WaveOperator::new(state.grid(), coeff)?;
    let mut out = op.apply(state.t, &state.u);
    if let Some(f) = forcing {
        let mut f = f.clone();
        f.truncate();
        out.axpy(1.0, &f);
    }
    Ok(out)
}

/// `dt = safety / (sqrt(Lambda0) N/3)`.
pub fn cfl_dt(n: usize, big_lambda0: f64, safety: f64) -> f64 {
    safety / (big_lambda0.sqrt() * (n as f64 / 3.0))
}

fn accel(op: &WaveOperator<'_>, t: f64, u: &SpectralField, forcing: Option<Forcing<'_>>) -> SpectralField {
    let mut a = op.apply(t, u);
    if let Some(f) = forcing {
        let mut f = f(t);
        f.truncate();
        a.axpy(1.0, &f);
    }
    a
}

fn combine(base: &SpectralField, dt: f64, k: &SpectralField) -> SpectralField {
    let mut out = base.clone();
    out.axpy(dt, k);
    out
}

/// One classical RK4 step of `(u, u_t)' = (u_t, div(A grad u) + F)`. Negative
/// `dt` integrates backwards.
pub fn step(op: &WaveOperator<'_>, state: &WaveState, dt: f64, forcing: Option<Forcing<'_>>) -> Result<WaveState> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::param("dt", format!("{dt} is not a usable step")));
    }
    let limit = cfl_dt(op.grid().n(), op.big_lambda0(), 1.0);
    if dt.abs() > limit {
        log::warn!("step {dt:e} exceeds the CFL limit {limit:e}");
    }
    let t = state.t;
    let h = 0.5 * dt;
    let k1u = state.ut.clone();
    let k1v = accel(op, t, &state.u, forcing);
    let k2u = combine(&state.ut, h, &k1v);
    let k2v = accel(op, t + h, &combine(&state.u, h, &k1u), forcing);
    let k3u = combine(&state.ut, h, &k2v);
    let k3v = accel(op, t + h, &combine(&state.u, h, &k2u), forcing);
    let k4u = combine(&state.ut, dt, &k3v);
    let k4v = accel(op, t + dt, &combine(&state.u, dt, &k3u), forcing);
    let mut u = state.u.clone();
    let mut ut = state.ut.clone();
    let s = dt / 6.0;
    for (kv, w) in [(&k1u, 1.0), (&k2u, 2.0), (&k3u, 2.0), (&k4u, 1.0)] {
        u.axpy(s * w, kv);
    }
    for (kv, w) in [(&k1v, 1.0), (&k2v, 2.0), (&k3v, 2.0), (&k4v, 1.0)] {
        ut.axpy(s * w, kv);
    }
    Ok(WaveState { t: t + dt, u, ut })
}

/// Fixed-step driver settings.
#[derive(Clone, Copy, Debug)]
pub struct StepPolicy {
    /// Largest step, normally [`cfl_dt`].
    pub dt_max: f64,
    /// When positive, steps are further capped by `fraction * |t|` to resolve
    /// coefficient oscillations on the scale `t`.
    pub time_fraction: f64,
}

/// Counters of one integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub steps: usize,
}

/// Integrates from `state.t` to `t_end` (either direction), landing exactly on
/// every time of `checkpoints` that lies in between and passing the state there
/// to `on_checkpoint`.
pub fn integrate(
    op: &WaveOperator<'_>,
    mut state: WaveState,
    t_end: f64,
    policy: StepPolicy,
    checkpoints: &[f64],
    forcing: Option<Forcing<'_>>,
    mut on_checkpoint: impl FnMut(&WaveState) -> Result<()>,
) -> Result<(WaveState, IntegrationStats)> {
    let dir = if t_end >= state.t { 1.0 } else { -1.0 };
    let mut marks: Vec<f64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| (c - state.t) * dir >= 0.0 && (t_end - c) * dir >= 0.0)
        .collect();
    marks.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    marks.dedup();
    let mut stats = IntegrationStats::default();
    let mut next = 0;
    while next < marks.len() && marks[next] == state.t {
        on_checkpoint(&state)?;
        next += 1;
    }
    while (t_end - state.t) * dir > 0.0 {
        let target = if next < marks.len() { marks[next] } else { t_end };
        let mut dt = policy.dt_max;
        if policy.time_fraction > 0.0 && state.t != 0.0 {
            dt = dt.min(policy.time_fraction * state.t.abs());
        }
        let remaining = (target - state.t).abs();
        // avoid a sliver step just before the target
        if dt >= remaining || remaining - dt < 1e-3 * dt {
            dt = remaining;
        }
        let land = dt == remaining;
        state = step(op, &state, dir * dt, forcing)?;
        stats.steps += 1;
        if land {
            state.t = target;
            while next < marks.len() && marks[next] == target {
                on_checkpoint(&state)?;
                next += 1;
            }
        }
    }
    Ok((state, stats))
}
