use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::RunKind;
use super::run::{RunReport, LOSS_TOL};

/// Largest admissible change of the loss curve under grid doubling.
pub const RESOLUTION_TOL: f64 = 0.02;
/// Largest `max / min` amplification ratio counted as bounded.
pub const BOUNDED_SPREAD: f64 = 10.0;

/// The qualitative predictions checked against run reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Lipschitz-in-space coefficients: no derivative loss.
    NoLoss,
    /// Log-Lipschitz coefficients: loss at most linear in time.
    LinearLoss,
    /// Time-only graded family against the violator control.
    DeltaFamily,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-loss" => Ok(Criterion::NoLoss),
            "linear-loss" => Ok(Criterion::LinearLoss),
            "delta-family" => Ok(Criterion::DeltaFamily),
            _ => Err(Error::Config(format!(
                "unknown criterion `{s}` (expected no-loss, linear-loss or delta-family)"
            ))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::NoLoss => "no-loss",
            Criterion::LinearLoss => "linear-loss",
            Criterion::DeltaFamily => "delta-family",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub criterion: Criterion,
    pub pass: bool,
    /// Distance to the nearest threshold; negative when failing.
    pub margin: f64,
    /// Short reading of the outcome.
    pub verdict: String,
    pub details: Vec<String>,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {}: {} (margin {:.4})",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.verdict,
            self.margin
        )?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

fn mismatch(c: Criterion, r: &RunReport, why: &str) -> Error {
    Error::CriterionMismatch {
        criterion: c.to_string(),
        report: format!("{} ({}, {why})", r.family, r.config_hash.get(..12).unwrap_or("")),
    }
}

fn pde_loss<'a>(c: Criterion, r: &'a RunReport) -> Result<&'a crate::energy::LossCurve> {
    if r.kind != RunKind::Pde {
        return Err(mismatch(c, r, "not a PDE run"));
    }
    r.loss.as_ref().ok_or_else(|| mismatch(c, r, "no loss curve"))
}

/// Loss curves of runs that differ only in resolution must agree.
fn resolution_drift(c: Criterion, reports: &[RunReport], details: &mut Vec<String>) -> Result<Option<f64>> {
    if reports.len() < 2 {
        return Ok(None);
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let mut worst: f64 = 0.0;
    for w in sorted.windows(2) {
        let gap = pde_loss(c, w[0])?.max_gap(pde_loss(c, w[1])?)?;
        details.push(format!("N = {} vs {}: max |sigma difference| = {gap:.4}", w[0].n, w[1].n));
        worst = worst.max(gap);
    }
    Ok(Some(worst))
}

/// Evaluates a criterion on the reports of its experiment template.
pub fn check_theorem(reports: &[RunReport], which: Criterion) -> Result<CheckOutcome> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to check".into()));
    }
    match which {
        Criterion::NoLoss => check_no_loss(reports),
        Criterion::LinearLoss => check_linear_loss(reports),
        Criterion::DeltaFamily => check_delta_family(reports),
    }
}

fn check_no_loss(reports: &[RunReport]) -> Result<CheckOutcome> {
    let c = Criterion::NoLoss;
    let mut details = Vec::new();
    let mut margin = f64::INFINITY;
    for r in reports {
        let s = pde_loss(c, r)?.sup_sigma();
        details.push(format!("{} N = {}: sup sigma = {s:.4}", r.family, r.n));
        margin = margin.min(LOSS_TOL - s);
    }
    let loss_ok = margin >= 0.0;
    if let Some(d) = resolution_drift(c, reports, &mut details)? {
        margin = margin.min(RESOLUTION_TOL - d);
    }
    let pass = margin >= 0.0;
    let verdict = if !loss_ok {
        "loss present".to_string()
    } else if !pass {
        "resolution drift".to_string()
    } else {
        "no loss".to_string()
    };
    Ok(CheckOutcome {
        criterion: c,
        pass,
        margin,
        verdict,
        details,
    })
}

fn check_linear_loss(reports: &[RunReport]) -> Result<CheckOutcome> {
    let c = Criterion::LinearLoss;
    let mut details = Vec::new();
    let mut margin = f64::INFINITY;
    let mut finite = true;
    for r in reports {
        let l = pde_loss(c, r)?;
        let env = l.envelope_margin(l.beta_hat, LOSS_TOL);
        let res = l.max_residual();
        finite &= l.beta_hat.is_finite();
        details.push(format!(
            "{} N = {}: beta_hat = {:.4}, envelope margin = {env:.4}, max residual = {res:.4}",
            r.family, r.n, l.beta_hat
        ));
        margin = margin.min(env).min(LOSS_TOL - res);
    }
    if let Some(d) = resolution_drift(c, reports, &mut details)? {
        details.push(format!("resolution drift {d:.4} (reported, not asserted)"));
    }
    let pass = finite && margin >= 0.0;
    let verdict = if !finite {
        "diverging beta_hat".to_string()
    } else if pass {
        "loss bounded linearly in t".to_string()
    } else {
        "loss not linear in the block index".to_string()
    };
    Ok(CheckOutcome {
        criterion: c,
        pass,
        margin: if finite { margin } else { f64::NEG_INFINITY },
        verdict,
        details,
    })
}

fn check_delta_family(reports: &[RunReport]) -> Result<CheckOutcome> {
    let c = Criterion::DeltaFamily;
    let mut bounded = None;
    let mut graded = None;
    let mut violator = None;
    for r in reports {
        let m = r.mode.as_ref().ok_or_else(|| mismatch(c, r, "not a mode run"))?;
        match r.family.as_str() {
            "delta-osc" if r.delta == 0.0 => bounded = Some(m),
            "delta-osc" => {
                if graded.map_or(true, |(d, _)| r.delta > d) {
                    graded = Some((r.delta, m));
                }
            }
            "violator" => violator = Some(m),
            _ => return Err(mismatch(c, r, "not a graded or violator family")),
        }
    }
    let missing = |what: &str| Error::Config(format!("delta-family needs a {what} report"));
    let b = bounded.ok_or_else(|| missing("delta = 0"))?;
    let (delta, g) = graded.ok_or_else(|| missing("delta > 0"))?;
    let v = violator.ok_or_else(|| missing("violator"))?;

    let m_bounded = BOUNDED_SPREAD - b.spread;
    let graded_ok = g.exponent.is_finite() && g.exponent > 0.0;
    let m_graded = if graded_ok { g.exponent } else { -g.exponent.abs() };
    let m_curv = v.curvature;
    let m_ratio = v.end_exponent - 2.0 * g.exponent;
    let details = vec![
        format!("delta = 0: amplification spread {:.3} (bound {BOUNDED_SPREAD})", b.spread),
        format!("delta = {delta}: exponent {:.4}", g.exponent),
        format!(
            "violator: curvature {:.4}, exponent at largest xi {:.4} vs 2 x {:.4}",
            v.curvature, v.end_exponent, g.exponent
        ),
    ];
    let margin = m_bounded.min(m_graded).min(m_curv).min(m_ratio);
    let pass = m_bounded >= 0.0 && graded_ok && m_curv > 0.0 && m_ratio >= 0.0;
    Ok(CheckOutcome {
        criterion: c,
        pass,
        margin,
        verdict: if pass { "three-way ordering holds" } else { "ordering violated" }.to_string(),
        details,
    })
}
