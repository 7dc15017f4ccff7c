use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{FamilyParams, FAMILY_NAMES};
use crate::energy::EnergyWeights;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    /// Full wave equation on the torus with block energies.
    #[default]
    Pde,
    /// Scalar mode equation `v'' + a(t) xi^2 v = 0` over a range of `xi`.
    Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: String,
    #[serde(default)]
    pub params: FamilyParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t0: f64,
    pub t1: f64,
    /// Energy sample times, uniform on `[t0, t1]`.
    pub samples: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t0: 1e-4,
            t1: 1.0,
            samples: 64,
        }
    }
}

impl TimeConfig {
    pub fn sample_times(&self) -> Vec<f64> {
        let m = self.samples.max(2) - 1;
        (0..=m)
            .map(|i| {
                if i == m {
                    self.t1
                } else {
                    self.t0 + (self.t1 - self.t0) * i as f64 / m as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub theta: f64,
    pub beta: f64,
    pub k1: f64,
    /// Space regularity exponent; when given it must match the family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u8>,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            theta: 0.0,
            beta: 0.0,
            k1: 0.0,
            ell: None,
        }
    }
}

impl EnergyConfig {
    pub fn weights(&self) -> EnergyWeights {
        EnergyWeights {
            theta: self.theta,
            beta: self.beta,
            k1: self.k1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaConfig {
    /// The search tries `gamma = 2^0 .. 2^max_exponent`.
    pub max_exponent: u32,
    /// Grid size of the positivity search.
    pub grid_n: usize,
    /// Random trial fields per probe.
    pub trials: usize,
    /// Probe times per block, log-spaced on `[t0, t1]`.
    pub probe_times: usize,
    /// Skips the search and uses this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            max_exponent: 10,
            grid_n: 256,
            trials: 100,
            probe_times: 6,
            fixed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// RK4 step as a fraction of the CFL limit.
    pub cfl: f64,
    /// Steps are also capped by `time_fraction * t`.
    pub time_fraction: f64,
    /// Local error tolerance of the mode solver.
    pub mode_tol: f64,
    /// Gauss-Legendre nodes of the regularization quadrature.
    pub quadrature_nodes: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            cfl: 0.5,
            time_fraction: 0.1,
            mode_tol: 1e-10,
            quadrature_nodes: 96,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub nu_min: usize,
    pub nu_max: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { nu_min: 2, nu_max: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    pub log2_xi_min: u32,
    pub log2_xi_max: u32,
    /// Frequencies per octave.
    pub per_octave: u32,
    /// Log-spaced times at which the amplification is recorded.
    pub samples: usize,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            log2_xi_min: 4,
            log2_xi_max: 12,
            per_octave: 1,
            samples: 200,
        }
    }
}

impl ModeConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        let p = self.per_octave.max(1);
        let steps = (self.log2_xi_max - self.log2_xi_min) * p;
        (0..=steps)
            .map(|i| 2f64.powf(self.log2_xi_min as f64 + i as f64 / p as f64))
            .collect()
    }
}

/// One experiment, read from a TOML document. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: RunKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub family: FamilyConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub gamma: GammaConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub mode: ModeConfig,
}

impl ExperimentConfig {
    pub fn new(family: &str, params: FamilyParams) -> Self {
        ExperimentConfig {
            kind: RunKind::Pde,
            seed: 0,
            output_dir: None,
            family: FamilyConfig {
                name: family.to_string(),
                params,
            },
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            energy: EnergyConfig::default(),
            gamma: GammaConfig::default(),
            integrator: IntegratorConfig::default(),
            loss: LossConfig::default(),
            mode: ModeConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, ignoring the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Checks everything that can be checked without building the coefficient.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !FAMILY_NAMES.contains(&self.family.name.as_str()) {
            return Err(Error::UnknownFamily(self.family.name.clone()));
        }
        let n = self.grid.n;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadGrid(n));
        }
        let t = &self.time;
        if !(t.t0 >= 0.0 && t.t0 < t.t1) {
            return bad(format!("time span [{}, {}] must satisfy 0 <= t0 < t1", t.t0, t.t1));
        }
        if t.samples < 2 {
            return bad("time.samples must be at least 2".into());
        }
        let ell = self.family.params.profile.ell();
        if let Some(e) = self.energy.ell {
            if e != ell {
                return bad(format!("energy.ell = {e} but the family profile has ell = {ell}"));
            }
        }
        self.energy.weights().validate(ell)?;
        if self.kind == RunKind::Pde {
            let l = &self.loss;
            if l.nu_max < l.nu_min + 4 {
                return bad(format!("loss range [{}, {}] spans fewer than 5 blocks", l.nu_min, l.nu_max));
            }
            if 1usize << l.nu_max > n / 3 {
                return bad(format!("frequency 2^{} lies outside the band |k| <= {} of N = {n}", l.nu_max, n / 3));
            }
            let g = self.gamma.grid_n;
            if g < 8 || !g.is_power_of_two() {
                return Err(Error::BadGrid(g));
            }
            if let Some(f) = self.gamma.fixed {
                if !(f >= 1.0) {
                    return bad(format!("gamma.fixed = {f} must be >= 1"));
                }
            }
        } else {
            let m = &self.mode;
            if m.log2_xi_max < m.log2_xi_min {
                return bad("mode.log2_xi_max < mode.log2_xi_min".into());
            }
            if t.t0 <= 0.0 {
                return bad("the mode solver needs t0 > 0".into());
            }
        }
        let i = &self.integrator;
        if !(i.cfl > 0.0 && i.cfl <= 1.0) {
            return bad(format!("integrator.cfl = {} outside (0, 1]", i.cfl));
        }
        if !(i.time_fraction >= 0.0) {
            return bad("integrator.time_fraction must be nonnegative".into());
        }
        Ok(())
    }

    /// Overrides the value at a dotted key path such as `family.params.rho`.
    /// The value is read as TOML (number, boolean, array), falling back to a string.
    pub fn with_override(&self, path: &str, value: &str) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_value(value);
        let keys: Vec<&str> = path.split('.').collect();
        let (last, parents) = keys.split_last().ok_or_else(|| Error::Config("empty key path".into()))?;
        let mut cur = &mut root;
        for k in parents {
            let table = cur
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{path}`: `{k}` is not inside a table")))?;
            cur = table
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        cur.as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{path}` does not name a table entry")))?
            .insert(last.to_string(), parsed);
        root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("`{path}`: {e}")))
    }
}

fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}
