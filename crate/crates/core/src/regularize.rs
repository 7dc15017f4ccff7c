//! Regularization of the coefficients near `t = 0`: truncation, time
//! mollification and a smooth cutoff blend, together with the envelope
//! `phi_eps` controlling the time derivatives of the result and the block
//! weights `f_nu`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, CoefficientField, CoefficientSample, Point, Sampler, SeparableSampler};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Integral of `exp(-1 / (1 - s^2))` over `(-1, 1)`.
const BUMP_MASS: f64 = 0.443_993_816_168_079_4;

/// Kernel masses further than this from 1 reject the quadrature rule.
const MASS_TOLERANCE: f64 = 1e-10;

/// `h(s) = exp(-1/s)` for `s > 0` and its first two derivatives.
fn h_derivs(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let h = (-1.0 / s).exp();
    let i = 1.0 / s;
    (h, h * i * i, h * (i.powi(4) - 2.0 * i.powi(3)))
}

/// C-infinity step from 0 (at `u <= 0`) to 1 (at `u >= 1`) with two derivatives.
pub fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = h_derivs(u);
    let (b, b1, b2) = h_derivs(1.0 - u);
    // derivatives of h(1 - u) with respect to u
    let (b1, b2) = (-b1, b2);
    let d = a + b;
    let num = a1 * b - a * b1;
    let s = a / d;
    let s1 = num / (d * d);
    let s2 = (a2 * b - a * b2) / (d * d) - 2.0 * num * (a1 + b1) / (d * d * d);
    (s, s1, s2)
}

/// The fixed cutoff `theta`: 1 for `s <= 1/4`, 0 for `s >= 3/4`, smooth and
/// decreasing in between. Returns `(theta, theta', theta'')`.
pub fn theta(s: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = smooth_step(2.0 * (s - 0.25));
    (1.0 - v, -2.0 * d1, -4.0 * d2)
}

/// `(theta(s), 1 - theta(s))`, each computed without cancellation.
pub fn theta_pair(s: f64) -> (f64, f64) {
    let u = 2.0 * (s - 0.25);
    if u <= 0.0 {
        return (1.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 1.0);
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    (b / (a + b), a / (a + b))
}

/// `theta_eps(t) = theta(t / (3 eps) + 1/12)` with its `t`-derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Cutoff {
    pub eps: f64,
}

impl Cutoff {
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_derivs(t).0
    }

    /// `(theta_eps(t), 1 - theta_eps(t))`.
    pub fn eval_pair(&self, t: f64) -> (f64, f64) {
        theta_pair(t / (3.0 * self.eps) + 1.0 / 12.0)
    }

    pub fn eval_derivs(&self, t: f64) -> (f64, f64, f64) {
        let k = 1.0 / (3.0 * self.eps);
        let (v, d1, d2) = theta(t * k + 1.0 / 12.0);
        (v, d1 * k, d2 * k * k)
    }
}

pub fn cutoff_theta(eps: f64) -> Result<Cutoff> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    Ok(Cutoff { eps })
}

/// Unit-mass even mollifier `rho(s) = exp(-1/(1-s^2)) / mass` on `(-1, 1)` and
/// its first two derivatives.
pub fn mollifier(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 / (1.0 - s * s);
    let r = (-q).exp() / BUMP_MASS;
    let r1 = -2.0 * s * q * q * r;
    let s2 = s * s;
    let r2 = r * (-2.0 * q * q - 8.0 * s2 * q.powi(3) + 4.0 * s2 * q.powi(4));
    (r, r1, r2)
}

/// Quadrature settings for the time mollification.
#[derive(Clone, Debug)]
pub struct QuadratureSpec {
    rule: Arc<GaussLegendre>,
}

impl QuadratureSpec {
    /// Builds an `nodes`-point Gauss-Legendre rule and checks that it
    /// reproduces the kernel mass.
    pub fn new(nodes: usize) -> Result<Self> {
        let rule = GaussLegendre::new(nodes.max(1));
        let mass = rule.integrate(-1.0, 1.0, |s| mollifier(s).0);
        let deviation = (mass - 1.0).abs();
        if !(deviation <= MASS_TOLERANCE) {
            return Err(Error::QuadratureUnderResolved { mass, deviation });
        }
        Ok(QuadratureSpec { rule: Arc::new(rule) })
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    /// `eta^-k \int rho^(k)(u) f(t - eta u) du` for `k = 0, 1, 2`, with the
    /// integration interval split where `t - eta u` crosses a kink of `f`.
    pub fn mollify(&self, f: impl Fn(f64) -> f64, t: f64, eta: f64, kinks: &[f64]) -> [f64; 3] {
        let mut cuts = vec![-1.0];
        for &r in kinks {
            let u = (t - r) / eta;
            if u > -1.0 && u < 1.0 {
                cuts.push(u);
            }
        }
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        let mut m = [0.0; 3];
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            let c = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo);
            for (x, wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let u = c + h * x;
                let (r0, r1, r2) = mollifier(u);
                let v = f(t - eta * u) * wt * h;
                m[0] += r0 * v;
                m[1] += r1 * v;
                m[2] += r2 * v;
            }
        }
        [m[0], m[1] / eta, m[2] / (eta * eta)]
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::new(96).expect("96-node rule resolves the kernel")
    }
}

fn check_eps(eps: f64, t_final: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5 * t_final) {
        return Err(Error::param("eps", format!("{eps} not in (0, T/2] with T = {t_final}")));
    }
    Ok(())
}

/// `a` frozen at `a(eps)` for `t < eps` and at `a(T)` for `t > T`.
pub struct Truncated<'a> {
    pub base: &'a dyn Coefficient,
    pub eps: f64,
}

pub fn truncate_time(base: &dyn Coefficient, eps: f64) -> Result<Truncated<'_>> {
    check_eps(eps, base.t_final())?;
    Ok(Truncated { base, eps })
}

impl Truncated<'_> {
    fn clamp(&self, t: f64) -> (f64, bool) {
        let tf = self.base.t_final();
        if t < self.eps {
            (self.eps, true)
        } else if t > tf {
            (tf, true)
        } else {
            (t, false)
        }
    }
}

impl Coefficient for Truncated<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        self.base.eval(self.clamp(t).0, x, j, k)
    }
    fn eval_dt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        match self.clamp(t) {
            (_, true) => 0.0,
            (s, false) => self.base.eval_dt(s, x, j, k),
        }
    }
    fn eval_dtt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        match self.clamp(t) {
            (_, true) => 0.0,
            (s, false) => self.base.eval_dtt(s, x, j, k),
        }
    }
    fn lambda0(&self) -> f64 {
        self.base.lambda0()
    }
    fn big_lambda0(&self) -> f64 {
        self.base.big_lambda0()
    }
    fn t_final(&self) -> f64 {
        self.base.t_final()
    }
}

/// Time mollification `rho_{eps/2} *_t a~_eps`, evaluated pointwise by quadrature.
/// Time derivatives differentiate the kernel.
pub struct Mollified<'a> {
    pub trunc: Truncated<'a>,
    pub quad: QuadratureSpec,
}

pub fn mollify_time<'a>(trunc: Truncated<'a>, quad: &QuadratureSpec) -> Mollified<'a> {
    Mollified {
        trunc,
        quad: quad.clone(),
    }
}

impl Mollified<'_> {
    fn moments(&self, t: f64, x: &Point, j: usize, k: usize) -> [f64; 3] {
        let eps = self.trunc.eps;
        let kinks = [eps, self.trunc.base.t_final()];
        self.quad
            .mollify(|s| self.trunc.eval(s, x, j, k), t, 0.5 * eps, &kinks)
    }
}

impl Coefficient for Mollified<'_> {
    fn dim(&self) -> usize {
        self.trunc.dim()
    }
    fn eval(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        self.moments(t, x, j, k)[0]
    }
    fn eval_dt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        self.moments(t, x, j, k)[1]
    }
    fn eval_dtt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        self.moments(t, x, j, k)[2]
    }
    fn lambda0(&self) -> f64 {
        self.trunc.lambda0()
    }
    fn big_lambda0(&self) -> f64 {
        self.trunc.big_lambda0()
    }
    fn t_final(&self) -> f64 {
        self.trunc.t_final()
    }
}

/// The blended coefficient `a_eps = (rho * a~_eps) theta_eps + a (1 - theta_eps)`.
///
/// Built-in families are separable in `(t, x)`, so only the time profile is
/// regularized and the spatial profile is multiplied back in.
#[derive(Clone, Debug)]
pub struct RegularizedCoefficient {
    pub base: CoefficientField,
    pub eps: f64,
    quad: QuadratureSpec,
}

pub fn blend(base: &CoefficientField, eps: f64) -> Result<RegularizedCoefficient> {
    RegularizedCoefficient::new(base, eps, &QuadratureSpec::default())
}

impl RegularizedCoefficient {
    pub fn new(base: &CoefficientField, eps: f64, quad: &QuadratureSpec) -> Result<Self> {
        check_eps(eps, base.t_final)?;
        Ok(RegularizedCoefficient {
            base: base.clone(),
            eps,
            quad: quad.clone(),
        })
    }

    /// Regularization at the block scale `eps = 2^-nu`, clamped to `T/2`.
    pub fn for_block(base: &CoefficientField, nu: usize, quad: &QuadratureSpec) -> Result<Self> {
        let eps = 0.5f64.powi(nu as i32).min(0.5 * base.t_final);
        Self::new(base, eps, quad)
    }

    fn tau_raw(&self, t: f64) -> (f64, f64, f64) {
        self.base.time.eval(t)
    }

    /// Regularized time profile `(tau_eps, tau_eps', tau_eps'')`.
    pub fn tau(&self, t: f64) -> (f64, f64, f64) {
        if self.base.rho == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let eps = self.eps;
        let tf = self.base.t_final;
        let eta = 0.5 * eps;
        if t >= 2.0 * eps {
            if t > tf {
                return (self.tau_raw(tf).0, 0.0, 0.0);
            }
            return self.tau_raw(t);
        }
        let frozen = self.tau_raw(eps).0;
        if t + eta <= eps {
            return (frozen, 0.0, 0.0);
        }
        // subtracting the frozen value keeps the derivative moments free of
        // cancellation where the truncated profile is flat
        let trunc = |s: f64| {
            if s <= eps {
                0.0
            } else {
                self.tau_raw(s.min(tf)).0 - frozen
            }
        };
        let [m0, m1, m2] = self.quad.mollify(trunc, t, eta, &[eps, tf]);
        let m0 = m0 + frozen;
        let (th, th1, th2) = Cutoff { eps }.eval_derivs(t);
        let (a, a1, a2) = if th < 1.0 { self.tau_raw(t) } else { (0.0, 0.0, 0.0) };
        let v = m0 * th + a * (1.0 - th);
        let d1 = m1 * th + m0 * th1 + a1 * (1.0 - th) - a * th1;
        let d2 = m2 * th + 2.0 * m1 * th1 + m0 * th2 + a2 * (1.0 - th) - 2.0 * a1 * th1 - a * th2;
        (v, d1, d2)
    }

    /// Caches the spatial profile on a point set for repeated sampling.
    pub fn grid_sampler<'a>(&'a self, points: &[Point]) -> RegularizedSampler<'a> {
        RegularizedSampler {
            reg: self,
            inner: self.base.grid_sampler(points),
        }
    }
}

pub struct RegularizedSampler<'a> {
    reg: &'a RegularizedCoefficient,
    inner: SeparableSampler<'a>,
}

impl RegularizedSampler<'_> {
    pub fn sample(&self, t: f64, with_dt: bool) -> CoefficientSample {
        let (tau, dtau, _) = self.reg.tau(t);
        self.inner.sample_with(tau, dtau, with_dt)
    }
}

impl Coefficient for RegularizedCoefficient {
    fn dim(&self) -> usize {
        self.base.dim
    }
    fn eval(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        let b = self.base.base[2 * j + k];
        if j != k || self.base.rho == 0.0 {
            return b;
        }
        b + self.base.rho * self.tau(t).0 * self.base.profile(x)
    }
    fn eval_dt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        if j != k || self.base.rho == 0.0 {
            return 0.0;
        }
        self.base.rho * self.tau(t).1 * self.base.profile(x)
    }
    fn eval_dtt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        if j != k || self.base.rho == 0.0 {
            return 0.0;
        }
        self.base.rho * self.tau(t).2 * self.base.profile(x)
    }
    fn lambda0(&self) -> f64 {
        self.base.lambda0
    }
    fn big_lambda0(&self) -> f64 {
        self.base.big_lambda0
    }
    fn t_final(&self) -> f64 {
        self.base.t_final
    }
    fn sample(&self, t: f64, points: &[Point], with_dt: bool) -> CoefficientSample {
        self.grid_sampler(points).sample(t, with_dt)
    }

    fn sampler<'a>(&'a self, points: &[Point]) -> Sampler<'a> {
        let s = self.grid_sampler(points);
        Box::new(move |t, with_dt| s.sample(t, with_dt))
    }
}

/// Quintic ramp `6s^5 - 15s^4 + 10s^3`, clamped to `[0, 1]`.
fn ramp(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Envelope of the regularized time derivatives:
/// `phi_eps(t) = psi((t - eps/2) / (eps/2)) / t`, zero for `t <= eps/2`.
#[derive(Clone, Copy, Debug)]
pub struct PhiFunction {
    pub eps: f64,
}

impl PhiFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let half = 0.5 * self.eps;
        if t <= half {
            return 0.0;
        }
        ramp((t - half) / half) / t
    }
}

pub fn phi(eps: f64) -> Result<PhiFunction> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    Ok(PhiFunction { eps })
}

/// Empirical constants of `|d_t a_eps| <= C1 phi_eps` and
/// `|d_t^2 a_eps| <= C3 phi_eps^2` over a set of times and points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub eps: f64,
    pub c1: f64,
    pub c3: f64,
    /// Largest `|d_t a_eps|` or `|d_t^2 a_eps|` where `phi_eps` vanishes; zero
    /// when the envelope is respected there.
    pub leak: f64,
}

pub fn envelope_constants(reg: &RegularizedCoefficient, times: &[f64], points: &[Point]) -> EnvelopeConstants {
    let p = PhiFunction { eps: reg.eps };
    let g = points
        .iter()
        .map(|x| reg.base.profile(x).abs())
        .fold(0.0, f64::max);
    let amp = reg.base.rho.abs() * g;
    let mut out = EnvelopeConstants {
        eps: reg.eps,
        c1: 0.0,
        c3: 0.0,
        leak: 0.0,
    };
    for &t in times {
        let (_, d1, d2) = reg.tau(t);
        let (d1, d2) = (amp * d1.abs(), amp * d2.abs());
        let ph = p.eval(t);
        if ph > 0.0 {
            out.c1 = out.c1.max(d1 / ph);
            out.c3 = out.c3.max(d2 / (ph * ph));
        } else {
            out.leak = out.leak.max(d1).max(d2);
        }
    }
    out
}

/// `f_nu(t) = \int_0^t (phi_nu^2 2^-nu + 2^nu 1_[0, 2^(1-nu)]) ds`, where
/// `phi_nu` is the envelope at `eps = 2^-nu`.
pub fn f_weight(nu: usize, t: f64, quad: &QuadratureSpec) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let scale = 0.5f64.powi(nu as i32);
    let eps = scale;
    let indicator = t.min(2.0 * eps) / scale;
    let p = PhiFunction { eps };
    let half = 0.5 * eps;
    let mut phi2 = 0.0;
    if t > half {
        let hi = t.min(eps);
        phi2 += quad.rule.integrate(half, hi, |s| p.eval(s).powi(2));
    }
    if t > eps {
        phi2 += 1.0 / eps - 1.0 / t;
    }
    indicator + phi2 * scale
}
