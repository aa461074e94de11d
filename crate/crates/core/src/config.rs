//! Experiment configuration files.
//!
//! A config is a TOML document with flat sections. `version = 1` is the only
//! format understood so far; unknown keys are rejected.
//!
//! ```toml
//! version = 1
//! command = "flow"
//! seed = 7
//!
//! [domain]
//! lengths = [1.0]
//! level = 9
//!
//! [operator]
//! p = 4.0
//!
//! [flow]
//! dt = 1e-4
//! horizon = 2.0
//! integrator = "rk4"
//! renormalize = true
//!
//! [initial]
//! preset = "positive_random"
//!
//! [output]
//! dir = "out"
//! snapshot_stride = 1000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Integrator};
use crate::lab::SuiteConfig;
use crate::operators::OperatorParams;
use crate::presets::Preset;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Flow,
    GroundState,
    Asymptotics,
    Properties,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::GroundState => "ground-state",
            Command::Asymptotics => "asymptotics",
            Command::Properties => "properties",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lengths: Vec<f64>,
    pub level: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub p: f64,
    #[serde(default = "one")]
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub dt: f64,
    pub horizon: f64,
    pub integrator: Integrator,
    pub renormalize: bool,
    /// Zero runs to the horizon regardless of stationarity.
    pub stationarity_tol: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { dt: 1e-4, horizon: 2.0, integrator: Integrator::Rk4, renormalize: true, stationarity_tol: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub preset: Preset,
    /// Defaults to the top-level seed.
    pub seed: Option<u64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { preset: Preset::FirstMode, seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a snapshot every this many steps, plus the first and last state.
    pub snapshot_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), snapshot_stride: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSection {
    /// Largest accepted energy increase between ledger rows, relative to `max(1, ℰ(u₀))`.
    pub energy_increase: f64,
    /// Largest accepted `|‖u‖ - r|` after each step when renormalizing.
    pub norm_error: f64,
    pub positivity: bool,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection { energy_increase: 1e-9, norm_error: 1e-12, positivity: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateSection {
    /// Flow stationarity threshold for the flow minimizer.
    pub stationarity_tol: f64,
    /// Time budget of the flow minimizer.
    pub max_time: f64,
    pub residual_tol: f64,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        GroundStateSection { stationarity_tol: 1e-10, max_time: 50.0, residual_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    /// First checkpoint; later ones double.
    pub tau0: f64,
    pub checkpoints: usize,
    /// Bound on `max(‖e‖_{L²}, ‖∇e‖_{L²})` at the last checkpoint.
    pub tolerance: f64,
    /// Bound on `|𝒮(u) - λ|` at the last checkpoint.
    pub s_tolerance: f64,
    /// Trailing checkpoints over which the error must decrease.
    pub monotone_window: usize,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        AsymptoticsSection { tau0: 0.05, checkpoints: 5, tolerance: 1e-4, s_tolerance: 1e-5, monotone_window: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertiesSection {
    pub cases: usize,
    pub hemicontinuity_cases: usize,
    pub tolerance: f64,
    pub identity_tolerance: f64,
    pub sigma: f64,
    pub radius: f64,
}

impl Default for PropertiesSection {
    fn default() -> Self {
        PropertiesSection {
            cases: 500,
            hemicontinuity_cases: 20,
            tolerance: 1e-9,
            identity_tolerance: 1e-6,
            sigma: 1.0,
            radius: 2.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn version() -> u32 {
    CONFIG_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSection,
    pub operator: OperatorSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
    #[serde(default)]
    pub properties: PropertiesSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain config")
    }

    /// Field-level checks that do not need a basis.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        self.domain_spec()?;
        self.operator_params()?;
        let f = &self.flow;
        if !(f.dt.is_finite() && f.dt > 0.0) || !(f.horizon.is_finite() && f.horizon >= 0.0) {
            return bad(format!("flow: dt = {} and horizon = {} must be positive and non-negative", f.dt, f.horizon));
        }
        if !(f.stationarity_tol >= 0.0) {
            return bad("flow.stationarity_tol must be non-negative".into());
        }
        let a = &self.asymptotics;
        if !(a.tau0 > 0.0) || a.checkpoints == 0 || a.monotone_window > a.checkpoints {
            return bad("asymptotics: need tau0 > 0 and 1 <= monotone_window <= checkpoints".into());
        }
        let g = &self.ground_state;
        if !(g.stationarity_tol > 0.0 && g.max_time > 0.0 && g.residual_tol > 0.0) {
            return bad("ground_state tolerances and max_time must be positive".into());
        }
        let pr = &self.properties;
        if pr.cases == 0 || !(pr.tolerance >= 0.0) || !(pr.identity_tolerance >= 0.0) || !(pr.radius > 0.0) {
            return bad("properties: need cases >= 1, non-negative tolerances and radius > 0".into());
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        DomainSpec::new(&self.domain.lengths, self.domain.level).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn operator_params(&self) -> Result<OperatorParams> {
        OperatorParams::new(self.operator.p)
            .and_then(|o| o.with_radius(self.operator.radius))
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        Ok(FlowConfig::new(self.operator_params()?, self.domain.level, self.flow.dt, self.flow.horizon)
            .with_integrator(self.flow.integrator)
            .with_renormalize(self.flow.renormalize)
            .with_stationarity_tol(self.flow.stationarity_tol)
            .with_stride(self.output.snapshot_stride.max(1)))
    }

    pub fn initial_seed(&self) -> u64 {
        self.initial.seed.unwrap_or(self.seed)
    }

    pub fn suite_config(&self) -> Result<SuiteConfig> {
        let pr = &self.properties;
        let mut s = SuiteConfig::new(self.domain_spec()?);
        s.cases = pr.cases;
        s.hemicontinuity_cases = pr.hemicontinuity_cases;
        s.seed = self.seed;
        s.tolerance = pr.tolerance;
        s.identity_tolerance = pr.identity_tolerance;
        s.sigma = pr.sigma;
        s.radius = pr.radius;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form with the output directory blanked,
    /// truncated to 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("plain config");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}
