//! Coefficient families `A(t, x)` on the torus and empirical audits of the
//! hypotheses they are meant to satisfy.
//!
//! Every built-in family has the separable form
//!
//! ```text
//! a_jk(t, x) = base_jk + rho * tau(t) * g(x) * delta_jk
//! ```
//!
//! where `tau` is an oscillating time profile with hand-coded derivatives and
//! `g` a spatial profile (Lipschitz or log-Lipschitz). Time-only families use
//! `g = 1`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// A point of the torus `[0, 2pi)^n`. For `n = 1` the second coordinate is ignored.
pub type Point = [f64; 2];

/// Anything that can be evaluated as a symmetric coefficient matrix `a_jk(t, x)`.
///
/// Implementations must be pure: evaluation never mutates state and may be
/// called concurrently.
pub trait Coefficient: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &Point, j: usize, k: usize) -> f64;
    fn eval_dt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64;
    fn eval_dtt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64;
    fn lambda0(&self) -> f64;
    fn big_lambda0(&self) -> f64;
    fn t_final(&self) -> f64;

    /// Returns a closure sampling the coefficient on `points` at any time,
    /// caching whatever does not depend on time.
    fn sampler<'a>(&'a self, points: &[Point]) -> Sampler<'a> {
        let points = points.to_vec();
        Box::new(move |t, with_dt| self.sample(t, &points, with_dt))
    }

    /// Samples `a_jk(t, .)` (and optionally `d/dt a_jk`) at every point.
    fn sample(&self, t: f64, points: &[Point], with_dt: bool) -> CoefficientSample {
        let n = self.dim();
        let mut values = Vec::with_capacity(points.len());
        let mut dt = Vec::with_capacity(if with_dt { points.len() } else { 0 });
        for x in points {
            let mut m = [0.0; 4];
            let mut d = [0.0; 4];
            for j in 0..n {
                for k in 0..n {
                    m[2 * j + k] = self.eval(t, x, j, k);
                    if with_dt {
                        d[2 * j + k] = self.eval_dt(t, x, j, k);
                    }
                }
            }
            values.push(m);
            if with_dt {
                dt.push(d);
            }
        }
        CoefficientSample {
            dim: n,
            values,
            dt: with_dt.then_some(dt),
        }
    }
}

/// Time-to-sample closure returned by [`Coefficient::sampler`].
pub type Sampler<'a> = Box<dyn Fn(f64, bool) -> CoefficientSample + Send + Sync + 'a>;

/// Coefficient matrices sampled on a point set, stored row-major as `[a11, a12, a21, a22]`.
#[derive(Clone, Debug)]
pub struct CoefficientSample {
    pub dim: usize,
    pub values: Vec<[f64; 4]>,
    pub dt: Option<Vec<[f64; 4]>>,
}

impl CoefficientSample {
    /// Quadratic form `sum a_jk xi_j xi_k` at point index `i`.
    #[inline]
    pub fn quadratic(&self, i: usize, xi: &[f64; 2]) -> f64 {
        quad_form(self.dim, &self.values[i], xi)
    }

    #[inline]
    pub fn quadratic_dt(&self, i: usize, xi: &[f64; 2]) -> f64 {
        let dt = self.dt.as_ref().expect("sample taken without time derivatives");
        quad_form(self.dim, &dt[i], xi)
    }
}

#[inline]
pub(crate) fn quad_form(dim: usize, m: &[f64; 4], xi: &[f64; 2]) -> f64 {
    if dim == 1 {
        m[0] * xi[0] * xi[0]
    } else {
        m[0] * xi[0] * xi[0] + (m[1] + m[2]) * xi[0] * xi[1] + m[3] * xi[1] * xi[1]
    }
}

/// Oscillating time profile `tau(t)` with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    /// `tau = 0` (constant coefficients).
    Zero,
    /// `tau = 1` (time-independent coefficients).
    Unit,
    /// `tau = sin(log t)`: `|t tau'| + |t^2 tau''|` bounded.
    SinLog,
    /// `tau = sin(((1 + L)^(1+delta) - 1) / (1 + delta))` with `L = -log t`.
    Graded { delta: f64 },
    /// `tau = sin(t^(1-q) / (q - 1))`, oscillating faster than any graded bound.
    Violator { q: f64 },
}

impl TimeProfile {
    /// Returns `(tau, tau', tau'')` at `t > 0`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            TimeProfile::Zero => (0.0, 0.0, 0.0),
            TimeProfile::Unit => (1.0, 0.0, 0.0),
            TimeProfile::SinLog => {
                let l = t.ln();
                let (s, c) = l.sin_cos();
                (s, c / t, -(s + c) / (t * t))
            }
            TimeProfile::Graded { delta } => {
                let l1 = 1.0 - t.ln();
                let p = (l1.powf(1.0 + delta) - 1.0) / (1.0 + delta);
                let (s, c) = p.sin_cos();
                let g = l1.powf(delta);
                let d1 = -c * g / t;
                let d2 = (-s * g * g + c * (delta * l1.powf(delta - 1.0) + g)) / (t * t);
                (s, d1, d2)
            }
            TimeProfile::Violator { q } => {
                let p = t.powf(1.0 - q) / (q - 1.0);
                let (s, c) = p.sin_cos();
                let tq = t.powf(-q);
                (s, -c * tq, -s * tq * tq + q * c * tq / t)
            }
        }
    }

    /// `sup |tau|`, `sup |t tau'|`, `sup |t^2 tau''|` and the graded bounds
    /// `sup |t tau'| / (1 + |log t|^delta)`, `sup |t^2 tau''| / (1 + |log t|^delta)^2`
    /// over `t in (0, 1]`. Infinite where the profile is unbounded.
    fn bounds(&self, delta: f64) -> ProfileBounds {
        let graded_floor = if delta == 0.0 { 0.5 } else { 1.0 };
        match *self {
            TimeProfile::Zero => ProfileBounds::default(),
            TimeProfile::Unit => ProfileBounds {
                sup: 1.0,
                ..Default::default()
            },
            TimeProfile::SinLog => ProfileBounds {
                sup: 1.0,
                dt: 1.0,
                dtt: std::f64::consts::SQRT_2,
                graded_dt: graded_floor,
                graded_dtt: std::f64::consts::SQRT_2 * graded_floor * graded_floor,
            },
            TimeProfile::Graded { delta: d } => {
                let (dt, dtt) = if d == 0.0 {
                    (1.0, std::f64::consts::SQRT_2)
                } else {
                    (f64::INFINITY, f64::INFINITY)
                };
                ProfileBounds {
                    sup: 1.0,
                    dt,
                    dtt,
                    graded_dt: graded_floor,
                    // (1+L)^{2d} + d (1+L)^{d-1} + (1+L)^d <= 3 (1 + L^d)^2
                    graded_dtt: if d == 0.0 {
                        std::f64::consts::SQRT_2 * 0.25
                    } else {
                        3.0
                    },
                }
            }
            TimeProfile::Violator { .. } => ProfileBounds {
                sup: 1.0,
                dt: f64::INFINITY,
                dtt: f64::INFINITY,
                graded_dt: f64::INFINITY,
                graded_dtt: f64::INFINITY,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ProfileBounds {
    sup: f64,
    dt: f64,
    dtt: f64,
    graded_dt: f64,
    graded_dtt: f64,
}

/// Spatial profile `g(x)`. In two dimensions the profile is averaged over
/// the coordinates, `g(x) = (p(x1) + p(x2)) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceProfile {
    /// `g = 1`.
    #[default]
    One,
    /// `g = sin x` (Lipschitz).
    Sin,
    /// `g = 2 + sin x` (Lipschitz).
    ShiftedSin,
    /// `g = sum_{j=1}^{J} 2^-j cos(2^j x)` (log-Lipschitz uniformly in `J`).
    Weierstrass,
}

impl SpaceProfile {
    fn eval_1d(self, x: f64, terms: u32) -> f64 {
        match self {
            SpaceProfile::One => 1.0,
            SpaceProfile::Sin => x.sin(),
            SpaceProfile::ShiftedSin => 2.0 + x.sin(),
            SpaceProfile::Weierstrass => {
                let mut s = 0.0;
                let mut freq = 1.0;
                for _ in 0..terms {
                    freq *= 2.0;
                    s += (freq * x).cos() / freq;
                }
                s
            }
        }
    }

    /// `sup |g|`.
    fn sup(self, terms: u32) -> f64 {
        match self {
            SpaceProfile::One | SpaceProfile::Sin => 1.0,
            SpaceProfile::ShiftedSin => 3.0,
            SpaceProfile::Weierstrass => 1.0 - 0.5f64.powi(terms as i32),
        }
    }

    /// Regularity exponent of the profile: 0 for Lipschitz, 1 for log-Lipschitz.
    pub fn ell(self) -> u8 {
        match self {
            SpaceProfile::Weierstrass => 1,
            _ => 0,
        }
    }

    /// Bound on `|g(x+y) - g(x)| / (|y| log^ell(1 + 1/|y|))` for `0 < |y| < 1`.
    fn modulus(self) -> f64 {
        match self {
            SpaceProfile::One => 0.0,
            SpaceProfile::Sin | SpaceProfile::ShiftedSin => 1.0,
            // sum_j 2^-j min(2^j |y|, 2) <= |y| (log2(1/|y|) + 2), and log(1+1/|y|) > log 2.
            SpaceProfile::Weierstrass => 3.0 / LN_2,
        }
    }

    /// Largest Fourier frequency present in the profile.
    pub fn bandwidth(self, terms: u32) -> usize {
        match self {
            SpaceProfile::One => 0,
            SpaceProfile::Sin | SpaceProfile::ShiftedSin => 1,
            SpaceProfile::Weierstrass => 1usize << terms,
        }
    }
}

/// JSON has no infinity; unbounded constants are written as `null`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Declared constants of the oscillation and regularity hypotheses.
/// Infinite values mark hypotheses the family does not satisfy.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct OscConstants {
    /// Space modulus constant (Lipschitz or log-Lipschitz).
    #[serde(with = "unbounded")]
    pub c0: f64,
    /// `sup |t d/dt a|`.
    #[serde(with = "unbounded")]
    pub c1: f64,
    /// `sup |t (d/dt a(x+y) - d/dt a(x))| / modulus(y)`.
    #[serde(with = "unbounded")]
    pub c2: f64,
    /// `sup |t^2 d^2/dt^2 a|`.
    #[serde(with = "unbounded")]
    pub c3: f64,
    /// `sup |d/dt a| t / (1 + |log t|^delta)`.
    #[serde(with = "unbounded")]
    pub graded_dt: f64,
    /// `sup |d^2/dt^2 a| t^2 / (1 + |log t|^delta)^2`.
    #[serde(with = "unbounded")]
    pub graded_dtt: f64,
}

/// Parameters accepted by [`make_family`]. Unused fields are ignored by
/// families that do not need them.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    pub dim: usize,
    /// Level of the `constant` family.
    pub c: f64,
    /// Mean diagonal value.
    pub m: f64,
    /// Oscillation amplitude.
    pub rho: f64,
    /// Off-diagonal constant (two dimensions only).
    pub coupling: f64,
    pub profile: SpaceProfile,
    /// Number of Weierstrass terms.
    pub terms: u32,
    pub delta: f64,
    pub q: f64,
    /// Right endpoint of the time interval for families defined on all of `t > 0`.
    pub t_final: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            dim: 1,
            c: 1.0,
            m: 2.0,
            rho: 0.5,
            coupling: 0.0,
            profile: SpaceProfile::One,
            terms: 8,
            delta: 0.0,
            q: 2.0,
            t_final: 1.0,
        }
    }
}

/// Names accepted by [`make_family`].
pub const FAMILY_NAMES: [&str; 5] = ["constant", "yamazaki-osc", "delta-osc", "violator", "stationary"];

/// A concrete coefficient matrix with analytically exact time derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub name: String,
    pub dim: usize,
    /// Time-independent part, row-major.
    pub base: [f64; 4],
    pub rho: f64,
    pub time: TimeProfile,
    pub space: SpaceProfile,
    pub terms: u32,
    pub lambda0: f64,
    pub big_lambda0: f64,
    pub ell: u8,
    pub delta: f64,
    pub osc: OscConstants,
    pub t_final: f64,
}

/// Builds one of the built-in coefficient families.
///
/// * `constant`: `A = c Id`.
/// * `yamazaki-osc`: `a_jk = m delta_jk + rho sin(log t) g(x) delta_jk`.
/// * `delta-osc`: time-only, `a = m + rho sin(((1 - log t)^(1+delta) - 1)/(1+delta))` on `(0, 1]`.
/// * `violator`: time-only, `a = m + rho sin(t^(1-q)/(q-1))` on `(0, 1]`.
/// * `stationary`: `a_jk = (m + rho g(x)) delta_jk`, independent of time.
pub fn make_family(name: &str, params: &FamilyParams) -> Result<CoefficientField> {
    let p = params;
    if p.dim != 1 && p.dim != 2 {
        return Err(Error::param("dim", format!("{} is not 1 or 2", p.dim)));
    }
    if !(p.t_final > 0.0) {
        return Err(Error::param("t_final", "must be positive"));
    }
    let coupling = if p.dim == 2 { p.coupling } else { 0.0 };
    let (time, space, m, rho, t_final) = match name {
        "constant" => {
            if !(p.c > 0.0) {
                return Err(Error::param("c", format!("{} must be positive", p.c)));
            }
            (TimeProfile::Zero, SpaceProfile::One, p.c, 0.0, p.t_final)
        }
        "yamazaki-osc" => (TimeProfile::SinLog, p.profile, p.m, p.rho, p.t_final),
        "stationary" => (TimeProfile::Unit, p.profile, p.m, p.rho, p.t_final),
        "delta-osc" => {
            if !(0.0..=1.0).contains(&p.delta) {
                return Err(Error::param("delta", format!("{} not in [0, 1]", p.delta)));
            }
            (TimeProfile::Graded { delta: p.delta }, SpaceProfile::One, p.m, p.rho, 1.0)
        }
        "violator" => {
            if !(p.q > 1.0) {
                return Err(Error::param("q", format!("{} must exceed 1", p.q)));
            }
            (TimeProfile::Violator { q: p.q }, SpaceProfile::One, p.m, p.rho, 1.0)
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    if space == SpaceProfile::Weierstrass && p.terms == 0 {
        return Err(Error::param("terms", "Weierstrass profile needs at least one term"));
    }
    let bounds = time.bounds(if matches!(time, TimeProfile::Graded { .. }) { p.delta } else { 0.0 });
    let amp = rho.abs() * space.sup(p.terms);
    let lambda0 = m - amp * bounds.sup - coupling.abs();
    let big_lambda0 = m + amp * bounds.sup + coupling.abs();
    if !(lambda0 > 0.0) {
        return Err(Error::param(
            "rho",
            format!("amplitude {rho} with mean {m} leaves lambda0 = {lambda0} <= 0"),
        ));
    }
    let modulus = rho.abs() * space.modulus();
    let osc = OscConstants {
        c0: modulus * bounds.sup,
        c1: amp * bounds.dt,
        c2: modulus * bounds.dt,
        c3: amp * bounds.dtt,
        graded_dt: amp * bounds.graded_dt,
        graded_dtt: amp * bounds.graded_dtt,
    };
    // zero amplitudes must not turn 0 * inf into NaN
    let osc = if amp == 0.0 {
        OscConstants::default()
    } else {
        osc
    };
    let delta = match time {
        TimeProfile::Graded { delta } => delta,
        _ => 0.0,
    };
    Ok(CoefficientField {
        name: name.to_string(),
        dim: p.dim,
        base: [m, coupling, coupling, m],
        rho,
        time,
        space,
        terms: p.terms,
        lambda0,
        big_lambda0,
        ell: space.ell(),
        delta,
        osc,
        t_final,
    })
}

impl CoefficientField {
    /// Spatial profile `g(x)`.
    pub fn profile(&self, x: &Point) -> f64 {
        if self.dim == 1 {
            self.space.eval_1d(x[0], self.terms)
        } else {
            0.5 * (self.space.eval_1d(x[0], self.terms) + self.space.eval_1d(x[1], self.terms))
        }
    }

    /// True when the coefficient does not depend on `x`.
    pub fn is_time_only(&self) -> bool {
        self.space == SpaceProfile::One
    }

    /// Scalar time-only coefficient `a(t)` (the `(0,0)` entry at `x = 0`).
    pub fn scalar(&self, t: f64) -> f64 {
        self.eval(t, &[0.0, 0.0], 0, 0)
    }

    /// Samples the spatial profile once; the returned sampler evaluates the
    /// field on the same points at any time without re-evaluating `g`.
    pub fn grid_sampler(&self, points: &[Point]) -> SeparableSampler<'_> {
        SeparableSampler {
            field: self,
            profile: points.iter().map(|x| self.profile(x)).collect(),
        }
    }
}

impl Coefficient for CoefficientField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        let base = self.base[2 * j + k];
        if j != k || self.rho == 0.0 {
            return base;
        }
        base + self.rho * self.time.eval(t).0 * self.profile(x)
    }

    fn eval_dt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        if j != k || self.rho == 0.0 {
            return 0.0;
        }
        self.rho * self.time.eval(t).1 * self.profile(x)
    }

    fn eval_dtt(&self, t: f64, x: &Point, j: usize, k: usize) -> f64 {
        if j != k || self.rho == 0.0 {
            return 0.0;
        }
        self.rho * self.time.eval(t).2 * self.profile(x)
    }

    fn lambda0(&self) -> f64 {
        self.lambda0
    }

    fn big_lambda0(&self) -> f64 {
        self.big_lambda0
    }

    fn t_final(&self) -> f64 {
        self.t_final
    }

    fn sample(&self, t: f64, points: &[Point], with_dt: bool) -> CoefficientSample {
        self.grid_sampler(points).sample(t, with_dt)
    }

    fn sampler<'a>(&'a self, points: &[Point]) -> Sampler<'a> {
        let s = self.grid_sampler(points);
        Box::new(move |t, with_dt| s.sample(t, with_dt))
    }
}

/// A [`CoefficientField`] with its spatial profile cached on a point set.
pub struct SeparableSampler<'a> {
    field: &'a CoefficientField,
    profile: Vec<f64>,
}

impl SeparableSampler<'_> {
    pub fn sample(&self, t: f64, with_dt: bool) -> CoefficientSample {
        let (tau, dtau, _) = if self.field.rho == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            self.field.time.eval(t)
        };
        self.sample_with(tau, dtau, with_dt)
    }

    /// Samples `base + rho * tau * g` with a caller-supplied time factor.
    pub fn sample_with(&self, tau: f64, dtau: f64, with_dt: bool) -> CoefficientSample {
        let f = self.field;
        let values = self
            .profile
            .iter()
            .map(|&g| {
                let d = f.rho * tau * g;
                [f.base[0] + d, f.base[1], f.base[2], f.base[3] + d]
            })
            .collect();
        let dt = with_dt.then(|| {
            self.profile
                .iter()
                .map(|&g| {
                    let d = f.rho * dtau * g;
                    [d, 0.0, 0.0, d]
                })
                .collect()
        });
        CoefficientSample {
            dim: f.dim,
            values,
            dt,
        }
    }
}

/// Extreme eigenvalues of a symmetric matrix stored row-major.
pub(crate) fn eigen_extremes(dim: usize, m: &[f64; 4]) -> (f64, f64) {
    if dim == 1 {
        return (m[0], m[0]);
    }
    let off = 0.5 * (m[1] + m[2]);
    let mean = 0.5 * (m[0] + m[3]);
    let half = 0.5 * (m[0] - m[3]);
    let r = (half * half + off * off).sqrt();
    (mean - r, mean + r)
}

/// Where to sample `(t, x, y)` when auditing a coefficient.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// Spatial increments `y` with `0 < |y| < 1`.
    pub offsets: Vec<Point>,
}

impl SamplingPlan {
    /// Log-uniform grid on `[t_max 10^-decades, t_max]`, `per_decade` points per decade.
    pub fn log_times(t_max: f64, decades: u32, per_decade: u32) -> Vec<f64> {
        let total = decades * per_decade;
        (0..=total)
            .map(|i| t_max * 10f64.powf(-(decades as f64) + i as f64 / per_decade as f64))
            .collect()
    }

    /// Quasi-random points on the torus (additive recurrence).
    pub fn quasi_random_points(count: usize) -> Vec<Point> {
        // plastic-number recurrence, low discrepancy in two dimensions
        let g = 1.324_717_957_244_746;
        let (a1, a2) = (1.0 / g, 1.0 / (g * g));
        (0..count)
            .map(|i| {
                let i = i as f64 + 1.0;
                [
                    2.0 * PI * (0.5 + a1 * i).fract(),
                    2.0 * PI * (0.5 + a2 * i).fract(),
                ]
            })
            .collect()
    }

    /// Halving sequence `|y| = 2^-m`, `m = 1..=levels`, in a few directions.
    pub fn halving_offsets(dim: usize, levels: u32) -> Vec<Point> {
        let dirs: Vec<Point> = if dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![[1.0, 0.0], [0.0, 1.0], [s, s], [s, -s]]
        };
        (1..=levels)
            .flat_map(|m| {
                let h = 0.5f64.powi(m as i32);
                dirs.iter().map(move |d| [h * d[0], h * d[1]]).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Default plan: 400 points per decade over 8 decades below `t_final`,
    /// 64 quasi-random points and a 20-level halving sequence of offsets.
    pub fn standard(dim: usize, t_final: f64) -> Self {
        SamplingPlan {
            times: Self::log_times(t_final, 8, 400),
            points: Self::quasi_random_points(64),
            offsets: Self::halving_offsets(dim, 20),
        }
    }

    /// A much coarser plan for expensive coefficients.
    pub fn coarse(dim: usize, t_final: f64) -> Self {
        SamplingPlan {
            times: Self::log_times(t_final, 8, 10),
            points: Self::quasi_random_points(16),
            offsets: Self::halving_offsets(dim, 12),
        }
    }
}

/// Extreme observed Rayleigh quotients of `A(t, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Computes the extreme Rayleigh quotients of `A` over the plan. For each
/// sampled matrix the extremes over unit directions are its eigenvalues,
/// which are computed exactly.
pub fn check_ellipticity(field: &dyn Coefficient, plan: &SamplingPlan) -> Result<EllipticityBounds> {
    let n = field.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in &plan.times {
        for x in &plan.points {
            let mut m = [0.0; 4];
            for j in 0..n {
                for k in 0..n {
                    m[2 * j + k] = field.eval(t, x, j, k);
                }
            }
            let (a, b) = eigen_extremes(n, &m);
            if !(a > 0.0) {
                return Err(Error::NotHyperbolic { t, quotient: a });
            }
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    Ok(EllipticityBounds {
        lambda_min: lo,
        lambda_max: hi,
    })
}

fn modulus_weight(ell: u8, r: f64) -> f64 {
    if ell == 0 {
        r
    } else {
        r * (1.0 + 1.0 / r).ln()
    }
}

/// Sup of the space-modulus quotient for each offset magnitude in the plan,
/// sorted by decreasing `|y|`.
pub fn space_modulus_profile(field: &dyn Coefficient, ell: u8, plan: &SamplingPlan) -> Vec<(f64, f64)> {
    let n = field.dim();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for y in &plan.offsets {
        let r = if n == 1 { y[0].abs() } else { y[0].hypot(y[1]) };
        if !(r > 0.0 && r < 1.0) {
            continue;
        }
        let w = modulus_weight(ell, r);
        let mut best = 0.0f64;
        for &t in &plan.times {
            for x in &plan.points {
                let xy = [x[0] + y[0], x[1] + y[1]];
                for j in 0..n {
                    for k in j..n {
                        let d = (field.eval(t, &xy, j, k) - field.eval(t, x, j, k)).abs();
                        best = best.max(d / w);
                    }
                }
            }
        }
        match out.iter_mut().find(|(rr, _)| (*rr - r).abs() <= 1e-15 * r) {
            Some(slot) => slot.1 = slot.1.max(best),
            None => out.push((r, best)),
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// Empirical space-modulus constant `sup |a(t,x+y) - a(t,x)| / (|y| log^ell(1 + 1/|y|))`.
pub fn estimate_space_modulus(field: &dyn Coefficient, ell: u8, plan: &SamplingPlan) -> f64 {
    space_modulus_profile(field, ell, plan)
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max)
}

/// Observed oscillation bounds of the time derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationBounds {
    /// `sup |t d/dt a|`.
    pub sup_t_dta: f64,
    /// `sup |t^2 d^2/dt^2 a|`.
    pub sup_t2_dtta: f64,
    /// `sup |d/dt a| t / (1 + |log t|^delta)`.
    pub sup_graded: f64,
    /// `sup |d^2/dt^2 a| t^2 / (1 + |log t|^delta)^2`.
    pub sup_graded_dtt: f64,
}

pub fn check_oscillation_bounds(field: &dyn Coefficient, delta: f64, plan: &SamplingPlan) -> OscillationBounds {
    let n = field.dim();
    let mut b = OscillationBounds {
        sup_t_dta: 0.0,
        sup_t2_dtta: 0.0,
        sup_graded: 0.0,
        sup_graded_dtt: 0.0,
    };
    for &t in &plan.times {
        let grade = 1.0 + t.ln().abs().powf(delta);
        for x in &plan.points {
            for j in 0..n {
                for k in j..n {
                    let d1 = field.eval_dt(t, x, j, k).abs();
                    let d2 = field.eval_dtt(t, x, j, k).abs();
                    b.sup_t_dta = b.sup_t_dta.max(t * d1);
                    b.sup_t2_dtta = b.sup_t2_dtta.max(t * t * d2);
                    b.sup_graded = b.sup_graded.max(t * d1 / grade);
                    b.sup_graded_dtt = b.sup_graded_dtt.max(t * t * d2 / (grade * grade));
                }
            }
        }
    }
    b
}

/// Audit of one family: ellipticity, space modulus and oscillation constants
/// next to the declared values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientAudit {
    pub family: String,
    pub declared: OscConstants,
    pub lambda0: f64,
    pub big_lambda0: f64,
    pub ellipticity: EllipticityBounds,
    pub space_modulus: f64,
    pub oscillation: OscillationBounds,
}

pub fn audit(field: &CoefficientField, plan: &SamplingPlan) -> Result<CoefficientAudit> {
    Ok(CoefficientAudit {
        family: field.name.clone(),
        declared: field.osc,
        lambda0: field.lambda0,
        big_lambda0: field.big_lambda0,
        ellipticity: check_ellipticity(field, plan)?,
        space_modulus: estimate_space_modulus(field, field.ell, plan),
        oscillation: check_oscillation_bounds(field, field.delta, plan),
    })
}
