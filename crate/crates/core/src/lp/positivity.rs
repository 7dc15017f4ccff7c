use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficient;
use crate::error::{Error, Result};

use super::dyadic::sobolev_norm;
use super::grid::{Grid, SpectralField};
use super::paradiff::Paraproduct;
use super::symbol::{alpha_symbol, SymbolKind};

/// Worst positivity quotients observed for one value of `gamma`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PositivityQuotients {
    pub gamma: f64,
    /// `min ||T_{alpha^-1/2} u|| / ||u||`.
    pub l2: f64,
    /// `min ||T_{alpha^1/2 (gamma^2+|xi|^2)^1/2} u|| / ||u||_{H^1_gamma}`.
    pub h1: f64,
}

impl PositivityQuotients {
    pub fn worst(&self) -> f64 {
        self.l2.min(self.h1)
    }
}

/// Outcome of the doubling search for `gamma_0`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GammaSearch {
    pub gamma0: f64,
    pub threshold: f64,
    /// Quotients for every `gamma` tried, in order.
    pub history: Vec<PositivityQuotients>,
}

/// A coefficient frozen at one time, at which positivity is probed.
pub struct Probe<'a> {
    pub coeff: &'a dyn Coefficient,
    pub t: f64,
}

/// Worst quotients of both positivity inequalities over all probes and trial fields.
pub fn positivity_quotients(
    grid: &Grid,
    probes: &[Probe<'_>],
    trials: &[SpectralField],
    gamma: f64,
) -> Result<PositivityQuotients> {
    let para = Paraproduct::new(grid, gamma)?;
    let modes: Vec<usize> = (0..grid.len())
        .filter(|&i| trials.iter().any(|u| u.coef[i].norm_sqr() > 0.0))
        .collect();
    let denoms: Vec<(f64, f64)> = trials
        .iter()
        .map(|u| Ok((u.l2(), sobolev_norm(u, 1.0, gamma)?)))
        .collect::<Result<_>>()?;
    let mut q = PositivityQuotients {
        gamma,
        l2: f64::INFINITY,
        h1: f64::INFINITY,
    };
    for probe in probes {
        let snap = alpha_symbol(probe.coeff, gamma)?.snapshot(grid, probe.t);
        let k_l2 = para.kernels(&snap.entry(SymbolKind::AlphaInvHalf), &modes);
        let k_h1 = para.kernels(&snap.entry(SymbolKind::AlphaHalfR), &modes);
        for (u, &(n0, n1)) in trials.iter().zip(&denoms) {
            if n0 == 0.0 {
                continue;
            }
            q.l2 = q.l2.min(k_l2.apply(u).l2() / n0);
            q.h1 = q.h1.min(k_h1.apply(u).l2() / n1);
        }
    }
    Ok(q)
}

/// Smallest `gamma` in `{1, 2, 4, .., 2^max_exponent}` for which both
/// positivity inequalities hold with constant `lambda0 / 2` on every probe
/// and trial field.
pub fn find_gamma0(
    grid: &Grid,
    probes: &[Probe<'_>],
    trials: &[SpectralField],
    lambda0: f64,
    max_exponent: u32,
) -> Result<GammaSearch> {
    let threshold = 0.5 * lambda0;
    let mut history = Vec::new();
    for e in 0..=max_exponent {
        let gamma = 2f64.powi(e as i32);
        let q = positivity_quotients(grid, probes, trials, gamma)?;
        history.push(q);
        if q.worst() >= threshold {
            return Ok(GammaSearch {
                gamma0: gamma,
                threshold,
                history,
            });
        }
    }
    let worst = history.iter().map(|q| q.worst()).fold(f64::NEG_INFINITY, f64::max);
    Err(Error::GammaSearchExhausted {
        max_exponent,
        worst_quotient: worst,
        threshold,
    })
}
