use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{audit, make_family, Coefficient, CoefficientAudit, CoefficientField, SamplingPlan};
use crate::energy::{block_energy_from, fit_loss, BlockEnergySample, EnergyLedger, LossCurve, CSV_HEADER};
use crate::error::{Error, Result};
use crate::lp::{find_gamma0, GammaSearch, Grid, Paraproduct, Probe, SpectralField, SymbolSnapshot};
use crate::regularize::{phi, QuadratureSpec, RegularizedCoefficient};
use crate::solver::{cfl_dt, integrate, solve_mode, StepPolicy, WaveOperator, WaveState};

use super::config::{ExperimentConfig, RunKind};
use super::{linear_fit, quadratic_fit, thread_pool};

/// Tolerance on the fitted loss, in derivatives.
pub const LOSS_TOL: f64 = 0.05;
/// Largest admissible equivalence constant between block and classical energies.
pub const C_EQ_MAX: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            pass: value <= bound,
            value,
            bound,
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            pass: value >= bound,
            value,
            bound,
        }
    }
}

/// Amplification of the mode equation over the sampled frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub xi: Vec<f64>,
    /// Worst-case energy ratio at `t1`.
    pub amplification: Vec<f64>,
    /// Worst-case energy ratio over all recorded times.
    pub sup_amplification: Vec<f64>,
    /// `max |W - 1|` of the Wronskian over the recorded times.
    pub wronskian_drift: Vec<f64>,
    pub steps: Vec<usize>,
    /// Least-squares slope of `log2 sup_amplification` against `log2 xi`.
    pub exponent: f64,
    /// `max / min` of `sup_amplification` over `xi`.
    pub spread: f64,
    /// Quadratic coefficient of the fit of `log2 sup_amplification` in `log2 xi`.
    pub curvature: f64,
    /// Slope of that quadratic fit at the largest `xi`.
    pub end_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub kind: RunKind,
    pub family: String,
    pub dim: usize,
    pub n: usize,
    pub ell: u8,
    pub delta: f64,
    pub audit: CoefficientAudit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_search: Option<GammaSearch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_eq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeReport>,
    pub checks: Vec<CheckResult>,
    pub steps: usize,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p = if path.is_dir() { path.join("run.json") } else { path.to_path_buf() };
        Ok(serde_json::from_str(&fs::read_to_string(p)?)?)
    }
}

/// Everything a run produces in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub ledger: Option<EnergyLedger>,
}

/// Runs one experiment and, when the config names an output directory,
/// writes `run.json`, `config.toml` and the CSV artifacts there.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    Ok(run_full(config)?.report)
}

pub fn run_full(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    // inside a sweep the caller's pool is reused
    let out = if rayon::current_thread_index().is_some() {
        execute(config)?
    } else {
        thread_pool()?.install(|| execute(config))?
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, config, &out).map_err(|e| e.at_stage("output"))?;
    }
    Ok(out)
}

fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let field = build_field(config).map_err(|e| e.at_stage("coefficients"))?;
    let plan = SamplingPlan::coarse(field.dim, field.t_final);
    let aud = audit(&field, &plan).map_err(|e| e.at_stage("coefficients"))?;
    let mut checks = vec![
        CheckResult::at_least("ellipticity-lower", aud.ellipticity.lambda_min, field.lambda0 - 1e-12),
        CheckResult::at_most("ellipticity-upper", aud.ellipticity.lambda_max, field.big_lambda0 + 1e-12),
    ];
    let mut report = RunReport {
        config_hash: config.hash()?,
        kind: config.kind,
        family: field.name.clone(),
        dim: field.dim,
        n: config.grid.n,
        ell: field.ell,
        delta: field.delta,
        audit: aud,
        gamma_search: None,
        gamma0: None,
        c_eq: None,
        c_dt: None,
        loss: None,
        beta_hat: None,
        mode: None,
        checks: Vec::new(),
        steps: 0,
        wall_clock_s: 0.0,
    };
    let ledger = match config.kind {
        RunKind::Mode => {
            let m = run_modes(config, &field).map_err(|e| e.at_stage("mode"))?;
            report.steps = m.steps.iter().sum();
            checks.push(CheckResult::at_most(
                "amplification-finite",
                m.sup_amplification.iter().copied().fold(0.0, f64::max),
                f64::MAX,
            ));
            report.mode = Some(m);
            None
        }
        RunKind::Pde => {
            let quad = QuadratureSpec::new(config.integrator.quadrature_nodes).map_err(|e| e.at_stage("regularize"))?;
            let gamma = match config.gamma.fixed {
                Some(g) => g,
                None => {
                    let s = search_gamma(config, &field, &quad).map_err(|e| e.at_stage("gamma"))?;
                    let g = s.gamma0;
                    report.gamma_search = Some(s);
                    g
                }
            };
            report.gamma0 = Some(gamma);
            let (ledger, steps) = solve_blocks(config, &field, &quad, gamma).map_err(|e| e.at_stage("solve"))?;
            report.steps = steps;
            let loss = fit_loss(&ledger, (config.loss.nu_min, config.loss.nu_max)).map_err(|e| e.at_stage("energy"))?;
            let c_eq = ledger.c_eq();
            let c_dt = ledger.c_dt();
            checks.push(CheckResult::at_most("c_eq", c_eq, C_EQ_MAX));
            checks.push(CheckResult::at_most("dt-bound", c_dt, 10.0 * (1.0 + 1.0 / field.lambda0)));
            checks.push(CheckResult::at_most("phi-envelope", phi_envelope(&ledger)?, 2.0));
            checks.push(CheckResult::at_most("weights-monotone", weight_increase(&ledger), 0.0));
            checks.push(CheckResult::at_most("no-loss", loss.sup_sigma(), LOSS_TOL));
            checks.push(CheckResult::at_most(
                "loss-envelope",
                if loss.beta_hat.is_finite() { loss.max_residual() } else { f64::MAX },
                LOSS_TOL,
            ));
            report.c_eq = Some(c_eq);
            report.c_dt = Some(c_dt);
            report.beta_hat = Some(loss.beta_hat);
            report.loss = Some(loss);
            Some(ledger)
        }
    };
    report.checks = checks;
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(RunOutput { report, ledger })
}

fn build_field(config: &ExperimentConfig) -> Result<CoefficientField> {
    let field = make_family(&config.family.name, &config.family.params)?;
    let t = &config.time;
    if t.t1 > field.t_final {
        return Err(Error::Config(format!("t1 = {} exceeds T = {}", t.t1, field.t_final)));
    }
    let a0 = field.eval(t.t0, &[0.0, 0.0], 0, 0);
    if !a0.is_finite() {
        return Err(Error::Config(format!("`{}` is singular at t0 = {}", field.name, t.t0)));
    }
    Ok(field)
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn search_gamma(config: &ExperimentConfig, field: &CoefficientField, quad: &QuadratureSpec) -> Result<GammaSearch> {
    let g = Grid::new(field.dim, config.gamma.grid_n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let trials: Vec<SpectralField> = (0..config.gamma.trials)
        .map(|_| SpectralField::random(&g, &mut rng, |_| 1.0))
        .collect();
    let lo = if config.time.t0 > 0.0 { config.time.t0 } else { 1e-4 * config.time.t1 };
    let times = log_spaced(lo, config.time.t1, config.gamma.probe_times);
    let regs: Vec<RegularizedCoefficient> = (config.loss.nu_min..=config.loss.nu_max)
        .map(|nu| RegularizedCoefficient::for_block(field, nu, quad))
        .collect::<Result<_>>()?;
    let probes: Vec<Probe<'_>> = regs
        .iter()
        .flat_map(|r| times.iter().map(move |&t| Probe { coeff: r, t }))
        .collect();
    find_gamma0(&g, &probes, &trials, field.lambda0, config.gamma.max_exponent)
}

/// Solves the equation once per block with data `cos(2^nu x_1)` and records
/// that block's energy at the sample times.
fn solve_blocks(
    config: &ExperimentConfig,
    field: &CoefficientField,
    quad: &QuadratureSpec,
    gamma: f64,
) -> Result<(EnergyLedger, usize)> {
    let grid = Grid::new(field.dim, config.grid.n)?;
    let times = config.time.sample_times();
    let nus: Vec<usize> = (config.loss.nu_min..=config.loss.nu_max).collect();
    let results: Vec<(Vec<BlockEnergySample>, usize)> = nus
        .par_iter()
        .map(|&nu| solve_block(config, field, quad, &grid, gamma, nu, &times))
        .collect::<Result<_>>()?;
    let steps = results.iter().map(|r| r.1).sum();
    let series = results.into_iter().map(|r| r.0).collect();
    let ledger = EnergyLedger::new(times, series, config.energy.weights(), quad)?;
    Ok((ledger, steps))
}

fn solve_block(
    config: &ExperimentConfig,
    field: &CoefficientField,
    quad: &QuadratureSpec,
    grid: &Grid,
    gamma: f64,
    nu: usize,
    times: &[f64],
) -> Result<(Vec<BlockEnergySample>, usize)> {
    let reg = RegularizedCoefficient::for_block(field, nu, quad)?;
    let sampler = reg.grid_sampler(&grid.points());
    let para = Paraproduct::new(grid, gamma)?;
    let op = WaveOperator::new(grid, field)?;
    let t0 = config.time.t0;
    let (u, ut) = travelling_wave(&op, grid, nu, t0);
    let state = WaveState::new(t0, u, ut);
    let policy = StepPolicy {
        dt_max: cfl_dt(grid.n(), field.big_lambda0, config.integrator.cfl),
        time_fraction: config.integrator.time_fraction,
    };
    let mut samples = Vec::with_capacity(times.len());
    let (_, stats) = integrate(&op, state, config.time.t1, policy, times, None, |s| {
        let snap = SymbolSnapshot::new(sampler.sample(s.t, true), gamma);
        samples.push(block_energy_from(s, &snap, &para, nu)?);
        Ok(())
    })?;
    log::info!("block {nu}: {} steps", stats.steps);
    Ok((samples, stats.steps))
}

/// Right-moving data `cos(k x_1)`, `k sqrt(a) sin(k x_1)` with `k = 2^nu` and
/// `a` the spatial mean of `a_11(t0)`. For constant coefficients `||u||` then
/// stays constant, so the lower-order part of `e_nu` does not oscillate.
fn travelling_wave(op: &WaveOperator<'_>, grid: &Grid, nu: usize, t0: f64) -> (SpectralField, SpectralField) {
    let k = (1usize << nu) as f64;
    let sample = op.sample(t0);
    let a = sample.values.iter().map(|m| m[0]).sum::<f64>() / sample.values.len() as f64;
    let u = SpectralField::cosine(grid, [1 << nu, 0], 1.0);
    let c = k * a.sqrt();
    let ut = SpectralField::from_fn(grid, |x| c * (k * x[0]).sin());
    (u, ut)
}

/// `max phi_nu(t) 2^-nu` over the ledger's blocks and times.
fn phi_envelope(ledger: &EnergyLedger) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &nu in &ledger.nus {
        let eps = 0.5f64.powi(nu as i32);
        let p = phi(eps)?;
        for &t in &ledger.times {
            worst = worst.max(p.eval(t) * eps);
        }
    }
    Ok(worst)
}

/// Largest increase of any weight factor between consecutive sample times.
fn weight_increase(ledger: &EnergyLedger) -> f64 {
    ledger
        .factors
        .iter()
        .flat_map(|f| f.windows(2).map(|w| w[1] - w[0]))
        .fold(0.0, f64::max)
}

fn run_modes(config: &ExperimentConfig, field: &CoefficientField) -> Result<ModeReport> {
    if !field.is_time_only() || field.dim != 1 {
        return Err(Error::Config(format!("`{}` is not a one-dimensional time-only family", field.name)));
    }
    let t = &config.time;
    let marks = log_spaced(t.t0, t.t1, config.mode.samples);
    let xi = config.mode.frequencies();
    let sols = xi
        .par_iter()
        .map(|&x| solve_mode(field, x, t.t0, t.t1, config.integrator.mode_tol, &marks))
        .collect::<Result<Vec<_>>>()?;
    let amplification: Vec<f64> = sols.iter().map(|s| s.amplification(s.samples.len() - 1)).collect();
    let sup_amplification: Vec<f64> = sols.iter().map(|s| s.max_amplification()).collect();
    let wronskian_drift = sols
        .iter()
        .map(|s| (0..s.samples.len()).map(|i| (s.wronskian(i) - 1.0).abs()).fold(0.0, f64::max))
        .collect();
    let steps = sols.iter().map(|s| s.steps).collect();
    let lx: Vec<f64> = xi.iter().map(|x| x.log2()).collect();
    let ly: Vec<f64> = sup_amplification.iter().map(|a| a.log2()).collect();
    let (_, exponent) = linear_fit(&lx, &ly);
    let max = sup_amplification.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sup_amplification.iter().copied().fold(f64::INFINITY, f64::min);
    let (curvature, end_exponent) = if lx.len() >= 3 {
        let [_, c1, c2] = quadratic_fit(&lx, &ly);
        let end = lx[lx.len() - 1];
        (c2, c1 + 2.0 * c2 * end)
    } else {
        (0.0, exponent)
    };
    Ok(ModeReport {
        xi,
        amplification,
        sup_amplification,
        wronskian_drift,
        steps,
        exponent,
        spread: max / min,
        curvature,
        end_exponent,
    })
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&out.report)?)?;
    if let Some(ledger) = &out.ledger {
        ledger.write_csv(BufWriter::new(fs::File::create(dir.join("ledger.csv"))?))?;
    }
    if let Some(loss) = &out.report.loss {
        let mut w = BufWriter::new(fs::File::create(dir.join("loss.csv"))?);
        writeln!(w, "{CSV_HEADER}")?;
        writeln!(w, "t,sigma,residual")?;
        for ((t, s), r) in loss.times.iter().zip(&loss.sigma).zip(&loss.residual) {
            writeln!(w, "{t:e},{s:e},{r:e}")?;
        }
    }
    if let Some(m) = &out.report.mode {
        let mut w = BufWriter::new(fs::File::create(dir.join("amplification.csv"))?);
        writeln!(w, "{CSV_HEADER}")?;
        writeln!(w, "family,delta,xi,amplification,sup_amplification,wronskian_drift,steps")?;
        for i in 0..m.xi.len() {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e},{}",
                out.report.family,
                out.report.delta,
                m.xi[i],
                m.amplification[i],
                m.sup_amplification[i],
                m.wronskian_drift[i],
                m.steps[i]
            )?;
        }
    }
    Ok(())
}
