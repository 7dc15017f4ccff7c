use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oscillab_core::coefficients::{audit, make_family, SamplingPlan};
use oscillab_core::harness::{check_theorem, sweep, Axis, Criterion, ExperimentConfig, RunReport};
use oscillab_core::lp::lp_selftest;
use oscillab_core::Result;

#[derive(Parser)]
#[command(name = "oscillab", version, about = "Spectral laboratory for oscillating hyperbolic equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Simulate {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every combination of the given axes.
    Sweep {
        config: PathBuf,
        /// `key.path=v1,v2,...`; repeat for more axes.
        #[arg(long = "axis")]
        axes: Vec<Axis>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a criterion against run reports (`run.json` files or run directories).
    Check {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// no-loss, linear-loss or delta-family.
        #[arg(long)]
        criterion: Criterion,
        #[arg(long)]
        json: bool,
    },
    /// Check the Littlewood-Paley identities on random fields.
    LpSelftest {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        fields: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the empirical regularity and oscillation constants of a family.
    CoeffAudit {
        family: String,
        /// `key=value` family parameter; repeat as needed.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Use the dense default sampling plan instead of the coarse one.
        #[arg(long)]
        dense: bool,
    },
}

fn load(config: &PathBuf, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(config)?;
    if out.is_some() {
        c.output_dir = out;
    }
    Ok(c)
}

fn print_report(r: &RunReport) {
    println!("family {} (N = {}, hash {})", r.family, r.n, &r.config_hash[..12]);
    if let Some(g) = r.gamma0 {
        println!("gamma0 = {g}");
    }
    if let (Some(c), Some(l)) = (r.c_eq, &r.loss) {
        println!(
            "C_eq = {c:.4}, sup sigma = {:.4}, beta_hat = {:.4}, max residual = {:.4}",
            l.sup_sigma(),
            l.beta_hat,
            l.max_residual()
        );
    }
    if let Some(m) = &r.mode {
        println!(
            "amplification exponent = {:.4}, spread = {:.3}, curvature = {:.4}, end exponent = {:.4}",
            m.exponent, m.spread, m.curvature, m.end_exponent
        );
    }
    for c in &r.checks {
        let bound = if c.bound == f64::MAX { "none".to_string() } else { format!("{:.6}", c.bound) };
        println!("{} {}: {:.6} (bound {bound})", if c.pass { "pass" } else { "FAIL" }, c.name, c.value);
    }
    println!("{} steps, {:.2} s", r.steps, r.wall_clock_s);
}

fn main() -> ExitCode {
    env_logger::init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Simulate { config, out } => {
            let r = oscillab_core::harness::run(&load(&config, out)?)?;
            print_report(&r);
        }
        Command::Sweep { config, axes, out } => {
            let s = sweep(&load(&config, out)?, &axes)?;
            print!("{}", s.summary_csv());
            for c in s.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("cell {}: {}", c.index, c.error.as_deref().unwrap_or(""));
            }
        }
        Command::Check { reports, criterion, json } => {
            let rs = reports.iter().map(|p| RunReport::load(p)).collect::<Result<Vec<_>>>()?;
            let o = check_theorem(&rs, criterion)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&o)?);
            } else {
                print!("{o}");
            }
            if !o.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::LpSelftest { dim, n, fields, seed } => {
            let r = lp_selftest(dim, n, fields, seed)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            let pass = r.pass(1e-12);
            println!("{}", if pass { "pass" } else { "FAIL" });
            if !pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::CoeffAudit { family, params, dense } => {
            let mut c = ExperimentConfig::new(&family, Default::default());
            for p in &params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| oscillab_core::Error::Config(format!("`{p}` is not key=value")))?;
                c = c.with_override(&format!("family.params.{k}"), v)?;
            }
            let f = make_family(&c.family.name, &c.family.params)?;
            let plan = if dense {
                SamplingPlan::standard(f.dim, f.t_final)
            } else {
                SamplingPlan::coarse(f.dim, f.t_final)
            };
            println!("{}", serde_json::to_string_pretty(&audit(&f, &plan)?)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
