use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{DyadicDecomposition, Paraproduct, SpectralField, SymbolEvaluator, SymbolKind, SymbolSnapshot};
use crate::regularize::{f_weight, QuadratureSpec};
use crate::solver::WaveState;

/// Header line of every CSV written by this crate.
pub const CSV_HEADER: &str = "# oscillab-csv v1";

/// The block `u_nu = Delta_nu u` and the corrected fields built from it:
///
/// ```text
/// v_nu = T_{alpha^-1/2} d_t u_nu - T_{d_t alpha^-1/2} u_nu
/// w_nu = T_{alpha^1/2 (gamma^2 + |xi|^2)^1/2} u_nu
/// ```
#[derive(Clone, Debug)]
pub struct BlockFields {
    pub u_nu: SpectralField,
    pub ut_nu: SpectralField,
    pub v: SpectralField,
    pub w: SpectralField,
}

/// `sym` should be built on the coefficient regularized at `eps = 2^-nu`.
pub fn block_fields(state: &WaveState, sym: &SymbolEvaluator<'_>, nu: usize) -> Result<BlockFields> {
    let grid = state.grid();
    let snap = sym.snapshot(grid, state.t);
    let para = Paraproduct::new(grid, sym.gamma)?;
    block_fields_from(state, &snap, &para, nu)
}

/// Same as [`block_fields`] with a precomputed snapshot of the symbol at `state.t`.
pub fn block_fields_from(
    state: &WaveState,
    snap: &SymbolSnapshot,
    para: &Paraproduct,
    nu: usize,
) -> Result<BlockFields> {
    let dec = DyadicDecomposition::new(state.grid());
    let u_nu = dec.block(&state.u, nu)?;
    let ut_nu = dec.block(&state.ut, nu)?;
    let mut v = para.apply(&snap.entry(SymbolKind::AlphaInvHalf), &ut_nu);
    v.axpy(-1.0, &para.apply(&snap.entry(SymbolKind::DtAlphaInvHalf), &u_nu));
    let w = para.apply(&snap.entry(SymbolKind::AlphaHalfR), &u_nu);
    Ok(BlockFields { u_nu, ut_nu, v, w })
}

/// Block energy `e_nu = ||v_nu||^2 + ||w_nu||^2 + ||u_nu||^2` next to the
/// classical `||d_t u_nu||^2 + ||u_nu||^2 + ||grad u_nu||^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEnergySample {
    pub nu: usize,
    pub t: f64,
    pub e_nu: f64,
    pub e_classical: f64,
    /// `||d_t u_nu||^2`.
    pub ut_sq: f64,
}

impl BlockEnergySample {
    fn from_fields(nu: usize, t: f64, f: &BlockFields) -> Self {
        let u2 = f.u_nu.l2_sq();
        let ut_sq = f.ut_nu.l2_sq();
        BlockEnergySample {
            nu,
            t,
            e_nu: f.v.l2_sq() + f.w.l2_sq() + u2,
            e_classical: ut_sq + u2 + f.u_nu.grad_l2_sq(),
            ut_sq,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.e_nu / self.e_classical
    }
}

pub fn block_energy(state: &WaveState, sym: &SymbolEvaluator<'_>, nu: usize) -> Result<BlockEnergySample> {
    let f = block_fields(state, sym, nu)?;
    Ok(BlockEnergySample::from_fields(nu, state.t, &f))
}

pub fn block_energy_from(
    state: &WaveState,
    snap: &SymbolSnapshot,
    para: &Paraproduct,
    nu: usize,
) -> Result<BlockEnergySample> {
    let f = block_fields_from(state, snap, para, nu)?;
    Ok(BlockEnergySample::from_fields(nu, state.t, &f))
}

/// Parameters of the weighted total energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyWeights {
    pub theta: f64,
    pub beta: f64,
    pub k1: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            theta: 0.0,
            beta: 0.0,
            k1: 0.0,
        }
    }
}

impl EnergyWeights {
    /// Checks `theta` in `[0, 1)`, strictly positive for log-Lipschitz (`ell = 1`)
    /// coefficients, and nonnegative `beta`, `k1`.
    pub fn validate(&self, ell: u8) -> Result<()> {
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::param("theta", format!("{} outside [0, 1)", self.theta)));
        }
        if ell == 1 && self.theta == 0.0 {
            return Err(Error::param("theta", "must be positive when ell = 1"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::param("beta", format!("{} must be nonnegative", self.beta)));
        }
        if !(self.k1 >= 0.0) {
            return Err(Error::param("k1", format!("{} must be nonnegative", self.k1)));
        }
        Ok(())
    }

    /// `e^{-K1 f_nu(t)} e^{-2 beta (nu+1) t} 2^{-2 nu theta}`.
    pub fn factor(&self, nu: usize, t: f64, quad: &QuadratureSpec) -> f64 {
        let f = if self.k1 == 0.0 { 0.0 } else { self.k1 * f_weight(nu, t, quad) };
        (-f - 2.0 * self.beta * (nu as f64 + 1.0) * t).exp() * 2f64.powf(-2.0 * nu as f64 * self.theta)
    }
}

/// `E(t) = sum_nu weight_nu(t) e_nu(t)` for block energies given as `(nu, e_nu)`.
pub fn total_energy(t: f64, blocks: &[(usize, f64)], weights: &EnergyWeights, quad: &QuadratureSpec) -> f64 {
    blocks.iter().map(|&(nu, e)| weights.factor(nu, t, quad) * e).sum()
}

/// Block energies of a run on common sample times, one series per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub nus: Vec<usize>,
    /// `series[i][k]` is block `nus[i]` at `times[k]`.
    pub series: Vec<Vec<BlockEnergySample>>,
    pub weights: EnergyWeights,
    /// Weighted total at each sample time.
    pub totals: Vec<f64>,
    /// Weight of block `nus[i]` at `times[k]`.
    pub factors: Vec<Vec<f64>>,
}

impl EnergyLedger {
    pub fn new(
        times: Vec<f64>,
        series: Vec<Vec<BlockEnergySample>>,
        weights: EnergyWeights,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        let mut nus = Vec::with_capacity(series.len());
        for s in &series {
            if s.len() != times.len() {
                return Err(Error::param("series", "every block needs one sample per time"));
            }
            let nu = s.first().map_or(0, |b| b.nu);
            if s.iter().any(|b| b.nu != nu) {
                return Err(Error::param("series", "mixed block indices in one series"));
            }
            nus.push(nu);
        }
        let factors: Vec<Vec<f64>> = nus
            .iter()
            .map(|&nu| times.iter().map(|&t| weights.factor(nu, t, quad)).collect())
            .collect();
        let totals = (0..times.len())
            .map(|k| series.iter().zip(&factors).map(|(s, f)| f[k] * s[k].e_nu).sum())
            .collect();
        Ok(EnergyLedger {
            times,
            nus,
            series,
            weights,
            totals,
            factors,
        })
    }

    /// Smallest `C` with `e_nu / e_classical` in `[1/C, C]` over all samples.
    pub fn c_eq(&self) -> f64 {
        let mut c: f64 = 1.0;
        for b in self.series.iter().flatten() {
            if b.e_classical > 0.0 && b.e_nu > 0.0 {
                let r = b.ratio();
                c = c.max(r).max(1.0 / r);
            }
        }
        c
    }

    /// Smallest `C` with `||d_t u_nu|| <= C e_nu^(1/2)` over all samples.
    pub fn c_dt(&self) -> f64 {
        self.series
            .iter()
            .flatten()
            .filter(|b| b.e_nu > 0.0)
            .map(|b| (b.ut_sq / b.e_nu).sqrt())
            .fold(0.0, f64::max)
    }

    /// Writes `t,nu,e_nu,e_classical,weight,total` rows, ordered by time then block.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        writeln!(out, "t,nu,e_nu,e_classical,weight,total")?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, s) in self.series.iter().enumerate() {
                let b = &s[k];
                writeln!(
                    out,
                    "{t:e},{},{:e},{:e},{:e},{:e}",
                    b.nu, b.e_nu, b.e_classical, self.factors[i][k], self.totals[k]
                )?;
            }
        }
        Ok(())
    }
}

/// Fitted loss `sigma(t)`: least-squares slope of `1/2 log2(e_nu(t)/e_nu(t0))` against `nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Largest absolute residual of the linear fit at each time.
    pub residual: Vec<f64>,
    /// Smallest `b >= 0` with `sigma(t) <= sigma(s) + b (t - s)` for all sampled `s < t`.
    pub beta_hat: f64,
}

impl LossCurve {
    pub fn sup_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    /// `min_t (b t + slack - sigma(t))`; nonnegative when the envelope holds.
    pub fn envelope_margin(&self, b: f64, slack: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.sigma)
            .map(|(t, s)| b * t + slack - s)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest pointwise gap to another curve on the same times.
    pub fn max_gap(&self, other: &LossCurve) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::param("loss curves", "sample times differ"));
        }
        Ok(self
            .sigma
            .iter()
            .zip(&other.sigma)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Least-squares line through `(x, y)`; returns `(intercept, slope)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

pub fn fit_loss(ledger: &EnergyLedger, nu_range: (usize, usize)) -> Result<LossCurve> {
    let (lo, hi) = nu_range;
    if hi < lo + 4 {
        return Err(Error::param("nu_range", format!("[{lo}, {hi}] spans fewer than 5 blocks")));
    }
    let mut rows = Vec::new();
    for nu in lo..=hi {
        let i = ledger
            .nus
            .iter()
            .position(|&n| n == nu)
            .ok_or_else(|| Error::param("nu_range", format!("block {nu} missing from the ledger")))?;
        let s = &ledger.series[i];
        let e0 = s.first().map_or(0.0, |b| b.e_nu);
        if !(e0 > 0.0) {
            return Err(Error::param("ledger", format!("block {nu} starts with zero energy")));
        }
        rows.push((nu as f64, s, e0));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut sigma = Vec::with_capacity(ledger.times.len());
    let mut residual = Vec::with_capacity(ledger.times.len());
    for k in 0..ledger.times.len() {
        let y: Vec<f64> = rows.iter().map(|(_, s, e0)| 0.5 * (s[k].e_nu / e0).log2()).collect();
        let (a, b) = linear_fit(&x, &y);
        let r = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - a - b * xi).abs())
            .fold(0.0, f64::max);
        sigma.push(b);
        residual.push(r);
    }
    let times = ledger.times.clone();
    let mut beta_hat: f64 = 0.0;
    for j in 0..times.len() {
        for i in 0..j {
            let dt = times[j] - times[i];
            if dt > 0.0 {
                beta_hat = beta_hat.max((sigma[j] - sigma[i]) / dt);
            }
        }
    }
    Ok(LossCurve {
        times,
        sigma,
        residual,
        beta_hat,
    })
}
