//! JSON run configuration (`"schema_version": 1`).

use serde::{Deserialize, Serialize};

use paramid_core::classes::CertifyOptions;
use paramid_core::registry::{builtin_system, ModeChoice, SystemSpec};
use paramid_core::zeros::ZeroOptions;
use paramid_core::{Error, Result, DEFAULT_GRID_POINTS, DEFAULT_INTEGRATOR_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Either the name of a builtin system or a full inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Builtin(String),
    Inline(SystemSpec),
}

impl SystemRef {
    pub fn resolve(&self) -> Result<SystemSpec> {
        match self {
            SystemRef::Builtin(name) => builtin_system(name),
            SystemRef::Inline(spec) => Ok(spec.clone()),
        }
    }
}

/// A perturbation `Δp`: one expression per parameter component, or a
/// single expression repeated in every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub name: String,
    pub dp: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_directions")]
    pub directions: Vec<String>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_eps_max")]
    pub eps_max: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            directions: default_directions(),
            epsilons: default_epsilons(),
            eps_max: default_eps_max(),
        }
    }
}

fn default_directions() -> Vec<String> {
    ["1", "t", "t - 0.5", "(t - 0.5)^2"].iter().map(|s| s.to_string()).collect()
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

fn default_eps_max() -> f64 {
    1e-1
}

fn default_perturbations() -> Vec<PerturbationSpec> {
    vec![PerturbationSpec {
        name: "constant".into(),
        dp: vec!["0.01".into()],
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub system: SystemRef,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Overrides the system's own mode when present.
    #[serde(default)]
    pub mode: Option<ModeChoice>,
    /// Seeds the random derivative checks on parameter expressions.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_perturbations")]
    pub perturbations: Vec<PerturbationSpec>,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub zeros: Option<ZeroOptions>,
    #[serde(default)]
    pub certify: Option<CertifyOptions>,
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_tol() -> f64 {
    DEFAULT_INTEGRATOR_TOL
}

impl Config {
    pub fn for_system(system: SystemRef) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system,
            grid: default_grid(),
            tol: default_tol(),
            mode: None,
            seed: 0,
            perturbations: default_perturbations(),
            experiment: ExperimentSpec::default(),
            zeros: None,
            certify: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.grid < 3 {
            return Err(Error::InvalidInput(format!("grid must have at least 3 points, got {}", self.grid)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.experiment.epsilons.iter().any(|e| !e.is_finite()) || !(self.experiment.eps_max > 0.0) {
            return Err(Error::InvalidInput("experiment epsilons must be finite and eps_max positive".into()));
        }
        if let Some(p) = self.perturbations.iter().find(|p| p.dp.is_empty()) {
            return Err(Error::InvalidInput(format!("perturbation `{}` has no components", p.name)));
        }
        Ok(())
    }

    pub fn zero_options(&self) -> ZeroOptions {
        self.zeros.unwrap_or_default()
    }

    pub fn certify_options(&self) -> CertifyOptions {
        self.certify.unwrap_or_default()
    }
}

/// Repeats a single expression across `l` components.
pub fn expand_components(exprs: &[String], l: usize) -> Result<Vec<String>> {
    match exprs.len() {
        1 => Ok(vec![exprs[0].clone(); l]),
        k if k == l => Ok(exprs.to_vec()),
        k => Err(Error::InvalidInput(format!("expected 1 or {l} components, got {k}"))),
    }
}
