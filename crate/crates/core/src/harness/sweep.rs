use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::CSV_HEADER;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{run, RunReport};
use super::thread_pool;

/// One sweep axis, written `key.path=v1,v2,...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{s}` is not of the form key=v1,v2")))?;
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis `{s}` needs a key and at least one value")));
        }
        Ok(Axis {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Outcome of one combination of axis values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axes: Vec<Axis>,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// Summary table, one row per cell.
    pub fn summary_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        let mut head = vec!["cell".to_string()];
        head.extend(self.axes.iter().map(|a| a.key.clone()));
        head.extend(
            [
                "family", "status", "gamma0", "c_eq", "beta_hat", "sup_sigma", "max_residual", "exponent", "spread",
                "pass",
            ]
            .map(String::from),
        );
        let _ = writeln!(s, "{}", head.join(","));
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for c in &self.cells {
            let mut row = vec![c.index.to_string()];
            row.extend(c.assignments.iter().map(|(_, v)| v.clone()));
            match &c.report {
                Some(r) => {
                    let loss = r.loss.as_ref();
                    let mode = r.mode.as_ref();
                    row.push(r.family.clone());
                    row.push("ok".into());
                    row.push(opt(r.gamma0));
                    row.push(opt(r.c_eq));
                    row.push(opt(r.beta_hat));
                    row.push(opt(loss.map(|l| l.sup_sigma())));
                    row.push(opt(loss.map(|l| l.max_residual())));
                    row.push(opt(mode.map(|m| m.exponent)));
                    row.push(opt(mode.map(|m| m.spread)));
                    row.push(r.pass().to_string());
                }
                None => {
                    row.push(String::new());
                    row.push("error".into());
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("false".into());
                }
            }
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

fn combinations(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                a.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((a.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

fn cell_config(template: &ExperimentConfig, assignments: &[(String, String)], dir: Option<&Path>) -> Result<ExperimentConfig> {
    let mut c = template.clone();
    for (k, v) in assignments {
        c = c.with_override(k, v)?;
    }
    c.output_dir = dir.map(Path::to_path_buf);
    Ok(c)
}

/// Runs every combination of axis values in parallel. Cells that fail are
/// recorded and do not stop the sweep. With an output directory each cell
/// writes into `cell-NNN/` and the summary goes to `summary.csv`; without
/// axes the single run writes into the directory itself.
pub fn sweep(template: &ExperimentConfig, axes: &[Axis]) -> Result<SweepReport> {
    let root = template.output_dir.clone();
    let combos = combinations(axes);
    let dirs: Vec<Option<PathBuf>> = (0..combos.len())
        .map(|i| {
            root.as_ref()
                .map(|r| if axes.is_empty() { r.clone() } else { r.join(format!("cell-{i:03}")) })
        })
        .collect();
    let cells: Vec<SweepCell> = thread_pool()?.install(|| {
        combos
            .par_iter()
            .zip(&dirs)
            .enumerate()
            .map(|(index, (assignments, dir))| {
                let result = cell_config(template, assignments, dir.as_deref()).and_then(|c| run(&c));
                let (report, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => {
                        log::warn!("sweep cell {index} failed: {e}");
                        (None, Some(e.to_string()))
                    }
                };
                SweepCell {
                    index,
                    assignments: assignments.clone(),
                    dir: dir.clone(),
                    report,
                    error,
                }
            })
            .collect()
    });
    let report = SweepReport {
        axes: axes.to_vec(),
        cells,
    };
    if let Some(r) = &root {
        fs::create_dir_all(r)?;
        fs::write(r.join("summary.csv"), report.summary_csv())?;
    }
    Ok(report)
}
