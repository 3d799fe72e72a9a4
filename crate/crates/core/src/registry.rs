//! Named example systems, all on `[0, 1]` and all defined through the
//! expression language so their Jacobians are symbolic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{param_from_exprs, system_from_exprs};
use crate::ode::{ParamFunction, SystemModel};
use crate::zeros::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    K,
    H,
    /// `K` when `n = l`, `H` otherwise.
    Auto,
}

impl ModeChoice {
    pub fn resolve(self, n: usize, l: usize) -> Mode {
        match self {
            ModeChoice::K => Mode::K,
            ModeChoice::H => Mode::H,
            ModeChoice::Auto if n == l => Mode::K,
            ModeChoice::Auto => Mode::H,
        }
    }
}

impl std::str::FromStr for ModeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(ModeChoice::K),
            "h" => Ok(ModeChoice::H),
            "auto" => Ok(ModeChoice::Auto),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}` (expected k, h or auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemSource {
    Builtin,
    Expression,
}

/// Serializable description of `ẋ = f(t, x, p(t))` with its reference
/// parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default = "default_source")]
    pub source: SystemSource,
    pub n: usize,
    pub l: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: Vec<f64>,
    /// `n` expressions over `t`, `x[0..n)`, `p[0..l)`.
    pub rhs: Vec<String>,
    /// `l` expressions in `t`.
    pub p0: Vec<String>,
    #[serde(default = "default_mode")]
    pub mode: ModeChoice,
}

fn default_source() -> SystemSource {
    SystemSource::Expression
}

fn default_mode() -> ModeChoice {
    ModeChoice::Auto
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rhs.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "system `{}` declares n = {} but has {} right-hand sides",
                self.name,
                self.n,
                self.rhs.len()
            )));
        }
        if self.p0.len() != self.l {
            return Err(Error::InvalidInput(format!(
                "system `{}` declares l = {} but p0 has {} components",
                self.name,
                self.l,
                self.p0.len()
            )));
        }
        if self.mode == ModeChoice::K && self.n != self.l {
            return Err(Error::InvalidInput(format!("system `{}`: mode K needs n = l", self.name)));
        }
        if self.mode == ModeChoice::H && self.l > self.n {
            return Err(Error::InvalidInput(format!("system `{}`: mode H needs l ≤ n", self.name)));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(SystemModel, ParamFunction)> {
        self.validate()?;
        let sys = system_from_exprs(&self.name, &self.rhs, self.l, self.horizon, self.x0.clone())?;
        let p0 = param_from_exprs(&self.p0)?;
        Ok((sys, p0))
    }

    pub fn mode(&self) -> Mode {
        self.mode.resolve(self.n, self.l)
    }
}

fn builtin(name: &str, rhs: &[&str], l: usize, x0: &[f64], mode: ModeChoice) -> SystemSpec {
    SystemSpec {
        name: name.into(),
        source: SystemSource::Builtin,
        n: rhs.len(),
        l,
        horizon: 1.0,
        x0: x0.to_vec(),
        rhs: rhs.iter().map(|s| s.to_string()).collect(),
        p0: vec!["0".into(); l],
        mode,
    }
}

/// Every builtin system.
pub fn builtin_systems() -> Vec<SystemSpec> {
    use ModeChoice::{H, K};
    vec![
        builtin("no-zero", &["p0"], 1, &[0.0], K),
        builtin("simple-zero", &["(t - 0.5) * p0"], 1, &[0.0], K),
        builtin("double-zero", &["(t - 0.5)^2 * p0"], 1, &[0.0], K),
        builtin("affine", &["x0 + p0"], 1, &[0.0], K),
        builtin("nonlinear", &["x0^2 + p0"], 1, &[0.1], K),
        builtin(
            "tall-rank-drop",
            &["(t - 0.5) * p0 + 0.5 * x1", "(t - 0.5) * p0 - 0.5 * x0"],
            1,
            &[0.0, 0.0],
            H,
        ),
        builtin("tall-mixed", &["(t - 0.5) * p0", "p1 - x0", "x0 + x1"], 2, &[0.0, 0.0, 0.0], H),
        builtin("rotation-2d", &["x1 + p0", "-x0 + p1"], 2, &[1.0, 0.0], K),
        builtin("double-zero-tall", &["(t - 0.5)^2 * p0", "(t - 0.5) * p0"], 1, &[0.0, 0.0], H),
        builtin("endpoint-zero", &["t * p0"], 1, &[0.0], K),
    ]
}

pub fn builtin_system(name: &str) -> Result<SystemSpec> {
    builtin_systems().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let known: Vec<String> = builtin_systems().into_iter().map(|s| s.name).collect();
        Error::InvalidInput(format!("unknown system `{name}` (known: {})", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_build() {
        for spec in builtin_systems() {
            let (sys, p0) = spec.build().unwrap();
            assert_eq!(sys.n(), spec.n);
            assert_eq!(p0.dim(), spec.l);
            assert!(sys.has_analytic_jacobians());
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        for spec in builtin_systems() {
            let s = serde_json::to_string(&spec).unwrap();
            let back: SystemSpec = serde_json::from_str(&s).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn validation() {
        let mut s = builtin_system("simple-zero").unwrap();
        s.p0.push("0".into());
        assert!(s.build().is_err());
        assert!(builtin_system("nope").is_err());
        assert_eq!(builtin_system("tall-mixed").unwrap().mode(), Mode::H);
        assert_eq!(ModeChoice::Auto.resolve(2, 1), Mode::H);
        assert_eq!(ModeChoice::Auto.resolve(2, 2), Mode::K);
    }
}
