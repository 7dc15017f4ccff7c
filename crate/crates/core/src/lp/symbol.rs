use crate::coefficients::{quad_form, Coefficient, CoefficientSample, Point};
use crate::error::{Error, Result};

use super::grid::Grid;
use super::paradiff::Symbol;

/// Entries of the zero-order symbol `alpha = ((gamma^2 + A xi.xi) / (gamma^2 + |xi|^2))^(1/2)`
/// and the combinations used by the block energies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Alpha,
    AlphaHalf,
    AlphaInvHalf,
    /// `d/dt alpha^(-1/2)`.
    DtAlphaInvHalf,
    /// `alpha^(1/2) (gamma^2 + |xi|^2)^(1/2)`.
    AlphaHalfR,
    /// `alpha^2 (gamma^2 + |xi|^2)`.
    Alpha2R,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 6] = [
        SymbolKind::Alpha,
        SymbolKind::AlphaHalf,
        SymbolKind::AlphaInvHalf,
        SymbolKind::DtAlphaInvHalf,
        SymbolKind::AlphaHalfR,
        SymbolKind::Alpha2R,
    ];
}

/// Evaluates a symbol entry from `Q = A xi.xi`, `Q_t = d/dt A xi.xi` and `|xi|^2`.
#[inline]
pub fn symbol_value(kind: SymbolKind, gamma: f64, q: f64, qt: f64, xi2: f64) -> f64 {
    let g2 = gamma * gamma;
    let r = g2 + xi2;
    let num = g2 + q;
    // fourth roots as nested square roots, several times cheaper than powf
    match kind {
        SymbolKind::Alpha => (num / r).sqrt(),
        SymbolKind::AlphaHalf => (num / r).sqrt().sqrt(),
        SymbolKind::AlphaInvHalf => (r / num).sqrt().sqrt(),
        SymbolKind::DtAlphaInvHalf => -0.25 * (r / num).sqrt().sqrt() * qt / num,
        SymbolKind::AlphaHalfR => (num * r).sqrt().sqrt(),
        SymbolKind::Alpha2R => num,
    }
}

/// The symbol `alpha` built from a (regularized) coefficient at parameter `gamma`.
#[derive(Clone, Copy)]
pub struct SymbolEvaluator<'a> {
    pub coeff: &'a dyn Coefficient,
    pub gamma: f64,
}

pub fn alpha_symbol(coeff: &dyn Coefficient, gamma: f64) -> Result<SymbolEvaluator<'_>> {
    if !(gamma >= 1.0) {
        return Err(Error::param("gamma", format!("{gamma} < 1")));
    }
    Ok(SymbolEvaluator { coeff, gamma })
}

impl<'a> SymbolEvaluator<'a> {
    pub fn eval(&self, t: f64, x: &Point, xi: [f64; 2], kind: SymbolKind) -> f64 {
        let n = self.coeff.dim();
        let mut m = [0.0; 4];
        let mut d = [0.0; 4];
        for j in 0..n {
            for k in 0..n {
                m[2 * j + k] = self.coeff.eval(t, x, j, k);
                if kind == SymbolKind::DtAlphaInvHalf {
                    d[2 * j + k] = self.coeff.eval_dt(t, x, j, k);
                }
            }
        }
        let xi2 = xi[0] * xi[0] + if n == 2 { xi[1] * xi[1] } else { 0.0 };
        symbol_value(kind, self.gamma, quad_form(n, &m, &xi), quad_form(n, &d, &xi), xi2)
    }

    /// Samples the coefficient and its time derivative on the grid at time `t`.
    pub fn snapshot(&self, grid: &Grid, t: f64) -> SymbolSnapshot {
        self.snapshot_from(self.coeff.sample(t, &grid.points(), true))
    }

    /// Wraps an existing coefficient sample (which must contain time derivatives
    /// for the `DtAlphaInvHalf` entry).
    pub fn snapshot_from(&self, sample: CoefficientSample) -> SymbolSnapshot {
        SymbolSnapshot::new(sample, self.gamma)
    }
}

/// Coefficient values frozen at one time on the grid; the symbol entries are
/// then functions of `(x_j, xi)` only.
pub struct SymbolSnapshot {
    pub sample: CoefficientSample,
    pub gamma: f64,
    uniform: bool,
}

impl SymbolSnapshot {
    pub fn new(sample: CoefficientSample, gamma: f64) -> Self {
        let uniform = sample_is_uniform(&sample);
        SymbolSnapshot { sample, gamma, uniform }
    }

    pub fn entry(&self, kind: SymbolKind) -> SnapshotSymbol<'_> {
        SnapshotSymbol { snap: self, kind }
    }

    /// True when the coefficient sample does not vary over the grid.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    fn value_at(&self, i: usize, kind: SymbolKind, xi: [f64; 2]) -> f64 {
        let s = &self.sample;
        let xi2 = xi[0] * xi[0] + if s.dim == 2 { xi[1] * xi[1] } else { 0.0 };
        let q = s.quadratic(i, &xi);
        let qt = if kind == SymbolKind::DtAlphaInvHalf {
            s.quadratic_dt(i, &xi)
        } else {
            0.0
        };
        symbol_value(kind, self.gamma, q, qt, xi2)
    }
}

fn sample_is_uniform(s: &CoefficientSample) -> bool {
    let v = &s.values;
    let dt_same = match &s.dt {
        Some(d) => d.iter().all(|x| x == &d[0]),
        None => true,
    };
    v.iter().all(|x| x == &v[0]) && dt_same
}

pub struct SnapshotSymbol<'a> {
    snap: &'a SymbolSnapshot,
    kind: SymbolKind,
}

impl Symbol for SnapshotSymbol<'_> {
    fn sample(&self, xi: [f64; 2], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.snap.value_at(i, self.kind, xi);
        }
    }

    fn uniform_value(&self, xi: [f64; 2]) -> Option<f64> {
        self.snap.uniform.then(|| self.snap.value_at(0, self.kind, xi))
    }
}
