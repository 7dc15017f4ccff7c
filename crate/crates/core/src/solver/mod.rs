//! Time integration: a pseudo-spectral RK4 solver for
//! `u_tt = div(A(t, x) grad u) + F` and an adaptive integrator for the
//! single-mode equation `v'' + a(t) xi^2 v = 0` of time-only coefficients.

mod mode;
mod pde;

pub use mode::{solve_mode, ModeSample, ModeSolution, ModeState};
pub use pde::{cfl_dt, integrate, rhs, step, Forcing, IntegrationStats, StepPolicy, WaveOperator, WaveState};
