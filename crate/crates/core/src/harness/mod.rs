//! Experiment orchestration: configs, runs, sweeps and criterion checks.

mod check;
mod config;
mod run;
mod sweep;

pub use check::{check_theorem, CheckOutcome, Criterion, RESOLUTION_TOL};
pub use config::{
    EnergyConfig, ExperimentConfig, FamilyConfig, GammaConfig, GridConfig, IntegratorConfig, LossConfig, ModeConfig,
    RunKind, TimeConfig,
};
pub use run::{run, run_full, CheckResult, ModeReport, RunOutput, RunReport, C_EQ_MAX, LOSS_TOL};
pub use sweep::{sweep, Axis, SweepCell, SweepReport};

pub use crate::energy::linear_fit;

use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OSCILLAB_THREADS";

/// A worker pool sized by `OSCILLAB_THREADS` (all cores when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Least-squares parabola `c0 + c1 x + c2 x^2` through `(x, y)`.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> [f64; 3] {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    // centered abscissa keeps the normal equations well conditioned
    let mut s = [0.0; 5];
    let mut r = [0.0; 3];
    for (xi, yi) in x.iter().zip(y) {
        let d = xi - mx;
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                r[k] += p * yi;
            }
            p *= d;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    let mut c = [0.0; 3];
    for (j, cj) in c.iter_mut().enumerate() {
        let mut mj = m;
        for i in 0..3 {
            mj[i][j] = r[i];
        }
        *cj = det3(&mj) / d;
    }
    // back to the uncentered variable
    [c[0] - c[1] * mx + c[2] * mx * mx, c[1] - 2.0 * c[2] * mx, c[2]]
}
