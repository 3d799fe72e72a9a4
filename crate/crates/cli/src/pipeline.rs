//! Sequential analysis stages. Every failure carries the name of the stage
//! it came from and maps onto a process exit code.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use paramid_core::classes::{certify_membership, lambda_bound, mininorm_path, MininormPath};
use paramid_core::expr::param_from_exprs;
use paramid_core::identifiability::{distinguish, identifiability_experiment, Direction, ExperimentOptions, ExperimentReport};
use paramid_core::linalg::mininorm;
use paramid_core::registry::SystemSpec;
use paramid_core::zeros::{observation_set, Mode, ObservationSet};
use paramid_core::{sensitivity_path, Error, ErrorClass, ParamFunction, SensitivityPath, SystemModel, TimeGrid};

use crate::config::{expand_components, Config, PerturbationSpec, SCHEMA_VERSION};
use crate::report::{AnalysisReport, DeterminantSummary, MininormSummary, PerturbationCertificates, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Parse,
    Sensitivity,
    Zeros,
    Certify,
    Mininorm,
    Distinguish,
    Experiment,
    Output,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Parse => "parse",
            Stage::Sensitivity => "sensitivity",
            Stage::Zeros => "zeros",
            Stage::Certify => "certify",
            Stage::Mininorm => "mininorm",
            Stage::Distinguish => "distinguish",
            Stage::Experiment => "experiment",
            Stage::Output => "output",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("stage `{stage}`: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    /// 1 analysis failure, 2 configuration or parse error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.error.class() {
            ErrorClass::Analysis => 1,
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for paramid_core::Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|error| StageError { stage, error })
    }
}

const DERIVATIVE_CHECKS: usize = 100;

/// A parsed system with its reference solution and sensitivity path.
pub struct Session {
    pub config: Config,
    pub spec: SystemSpec,
    pub system: SystemModel,
    pub p0: ParamFunction,
    pub mode: Mode,
    pub path: SensitivityPath,
    pub timings: BTreeMap<String, f64>,
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: Stage, f: impl FnOnce() -> StageResult<T>) -> StageResult<T> {
    let start = Instant::now();
    let out = f();
    *timings.entry(stage.as_str().to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
    out
}

/// Validates the configuration, builds the system and integrates the
/// reference solution.
pub fn prepare(config: Config) -> StageResult<Session> {
    let mut timings = BTreeMap::new();
    config.validate().at(Stage::Config)?;
    let spec = config.system.resolve().at(Stage::Config)?;
    let (system, p0, mode) = timed(&mut timings, Stage::Parse, || {
        let mut spec = spec.clone();
        if let Some(m) = config.mode {
            spec.mode = m;
        }
        let (system, p0) = spec.build().at(Stage::Parse)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        p0.verify_derivative(0.0, spec.horizon, DERIVATIVE_CHECKS, &mut rng).at(Stage::Parse)?;
        for p in &config.perturbations {
            perturbation(&p.dp, spec.l).at(Stage::Parse)?.verify_derivative(0.0, spec.horizon, DERIVATIVE_CHECKS, &mut rng).at(Stage::Parse)?;
        }
        Ok((system, p0, spec.mode()))
    })?;
    let path = timed(&mut timings, Stage::Sensitivity, || {
        let grid = TimeGrid::uniform(0.0, system.horizon(), config.grid).at(Stage::Sensitivity)?;
        sensitivity_path(&system, &p0, &grid, config.tol).at(Stage::Sensitivity)
    })?;
    Ok(Session {
        config,
        spec,
        system,
        p0,
        mode,
        path,
        timings,
    })
}

fn perturbation(dp: &[String], l: usize) -> paramid_core::Result<ParamFunction> {
    param_from_exprs(&expand_components(dp, l)?)
}

impl Session {
    fn settings(&self) -> Settings {
        Settings {
            grid_points: self.config.grid,
            integrator_tol: self.config.tol,
            mode: self.mode,
            seed: self.config.seed,
        }
    }

    fn report(&self, command: &str) -> AnalysisReport {
        let mut spec = self.spec.clone();
        if let Some(m) = self.config.mode {
            spec.mode = m;
        }
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            system: spec,
            settings: self.settings(),
            determinant_path: None,
            observation_set: None,
            certificates: Vec::new(),
            mininorm: None,
            distinguish: None,
            experiment: None,
            timings: BTreeMap::new(),
        }
    }

    fn finish(&self, mut report: AnalysisReport) -> AnalysisReport {
        report.timings = self.timings.clone();
        report
    }

    pub fn determinant_samples(&self, mode: Mode) -> StageResult<Vec<f64>> {
        self.path.determinant_samples(mode).at(Stage::Zeros)
    }

    pub fn theta(&mut self) -> StageResult<ObservationSet> {
        let (path, mode, opts) = (&self.path, self.mode, self.config.zero_options());
        timed(&mut self.timings, Stage::Zeros, || observation_set(path, mode, &opts).at(Stage::Zeros))
    }

    pub fn certificates(&mut self, obs: &ObservationSet, specs: &[PerturbationSpec]) -> StageResult<Vec<PerturbationCertificates>> {
        let (path, opts, l) = (&self.path, self.config.certify_options(), self.spec.l);
        timed(&mut self.timings, Stage::Certify, || {
            specs
                .iter()
                .map(|ps| {
                    let dp = perturbation(&ps.dp, l).at(Stage::Parse)?;
                    let p = path.p0().plus_scaled(1.0, &dp);
                    let certificates = (0..obs.interval_count())
                        .map(|k| certify_membership(path, obs, &p, k, &opts))
                        .collect::<paramid_core::Result<Vec<_>>>()
                        .at(Stage::Certify)?;
                    let lambda = certificates
                        .iter()
                        .filter(|c| c.passed)
                        .map(|c| lambda_bound(path, c.tau, c.theta, &[(ps.name.clone(), dp.clone())]))
                        .collect::<paramid_core::Result<Vec<_>>>()
                        .at(Stage::Certify)?;
                    Ok(PerturbationCertificates {
                        name: ps.name.clone(),
                        dp: ps.dp.clone(),
                        passed_all: certificates.iter().all(|c| c.passed),
                        certificates,
                        lambda,
                    })
                })
                .collect()
        })
    }

    /// `μA` path and its one-sided slopes at rank drops; needs an ℋ-mode observation set, which
    /// is computed here when the session runs in 𝒦-mode.
    pub fn mininorm(&mut self, obs: &ObservationSet) -> StageResult<MininormPath> {
        let h_obs = if obs.mode == Mode::H {
            obs.clone()
        } else {
            let (path, opts) = (&self.path, self.config.zero_options());
            timed(&mut self.timings, Stage::Zeros, || observation_set(path, Mode::H, &opts).at(Stage::Zeros))?
        };
        let path = &self.path;
        timed(&mut self.timings, Stage::Mininorm, || mininorm_path(path, &h_obs).at(Stage::Mininorm))
    }

    pub fn experiment(&mut self, obs: &ObservationSet) -> StageResult<ExperimentReport> {
        let (path, cfg, l) = (&self.path, &self.config, self.spec.l);
        timed(&mut self.timings, Stage::Experiment, || {
            let family = cfg
                .experiment
                .directions
                .iter()
                .map(|d| Direction::broadcast(d, l))
                .collect::<paramid_core::Result<Vec<_>>>()
                .at(Stage::Parse)?;
            let opts = ExperimentOptions {
                eps_max: cfg.experiment.eps_max,
                separation_tol: None,
                certify: cfg.certify_options(),
            };
            identifiability_experiment(path, obs, &family, &cfg.experiment.epsilons, &opts).at(Stage::Experiment)
        })
    }

    /// `μA` on the analysis grid without the rank-drop analysis.
    pub fn mu_samples(&self) -> Vec<f64> {
        self.path.d_values().iter().map(mininorm).collect()
    }
}

/// Output of one command: the report plus the columns for CSV emission.
pub struct CommandOutput {
    pub report: AnalysisReport,
    pub path_columns: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Nonzero when the analysis itself signals failure, such as a certified
    /// perturbation that is not distinguished.
    pub exit_code: i32,
}

fn columns(session: &Session, mu: Vec<f64>) -> StageResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    Ok((session.path.grid().points().to_vec(), session.determinant_samples(session.mode)?, mu))
}

/// Full pipeline: Θ, certificates, mininorm path (ℋ-mode), experiment.
pub fn run_pipeline(config: Config) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    let obs = s.theta()?;
    let mut report = s.report("analyze");
    report.determinant_path = Some(DeterminantSummary::from_samples(&s.determinant_samples(s.mode)?));
    let specs = s.config.perturbations.clone();
    report.certificates = s.certificates(&obs, &specs)?;
    let mu = if s.mode == Mode::H {
        let m = s.mininorm(&obs)?;
        report.mininorm = Some(MininormSummary::from(&m));
        m.mu
    } else {
        s.mu_samples()
    };
    let exp = s.experiment(&obs)?;
    let exit_code = if exp.counterexamples.is_empty() { 0 } else { 1 };
    report.experiment = Some(exp);
    report.observation_set = Some(obs);
    let path_columns = Some(columns(&s, mu)?);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns,
        exit_code,
    })
}

pub fn run_theta(config: Config) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    let obs = s.theta()?;
    let mut report = s.report("theta");
    report.determinant_path = Some(DeterminantSummary::from_samples(&s.determinant_samples(s.mode)?));
    report.observation_set = Some(obs);
    let path_columns = Some(columns(&s, s.mu_samples())?);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns,
        exit_code: 0,
    })
}

pub fn run_check_class(config: Config) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    let obs = s.theta()?;
    let specs = s.config.perturbations.clone();
    let mut report = s.report("check-class");
    report.certificates = s.certificates(&obs, &specs)?;
    report.observation_set = Some(obs);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns: None,
        exit_code: 0,
    })
}

/// Compares the reference with `p` at `times`, or at `Θ` when absent.
pub fn run_distinguish(config: Config, p: &[String], times: Option<Vec<f64>>) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    let p = perturbation(p, s.spec.l).at(Stage::Parse)?;
    let mut report = s.report("distinguish");
    let times = match times {
        Some(t) => t,
        None => {
            let obs = s.theta()?;
            let t = obs.times();
            report.observation_set = Some(obs);
            t
        }
    };
    let (sys, p0, tol) = (&s.system, &s.p0, s.config.tol);
    let verdict = timed(&mut s.timings, Stage::Distinguish, || distinguish(sys, p0, &p, &times, tol, None).at(Stage::Distinguish))?;
    report.distinguish = Some(verdict);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns: None,
        exit_code: 0,
    })
}

pub fn run_sweep(config: Config) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    let obs = s.theta()?;
    let exp = s.experiment(&obs)?;
    let exit_code = if exp.counterexamples.is_empty() { 0 } else { 1 };
    let mut report = s.report("sweep");
    report.observation_set = Some(obs);
    report.experiment = Some(exp);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns: None,
        exit_code,
    })
}

pub fn run_mininorm(config: Config) -> StageResult<CommandOutput> {
    let mut s = prepare(config)?;
    if s.spec.l > s.spec.n {
        return Err(StageError {
            stage: Stage::Mininorm,
            error: Error::InvalidInput("mininorm path needs l ≤ n".into()),
        });
    }
    s.mode = Mode::H;
    let obs = s.theta()?;
    let m = s.mininorm(&obs)?;
    let mut report = s.report("mininorm-path");
    report.mininorm = Some(MininormSummary::from(&m));
    report.observation_set = Some(obs);
    let path_columns = Some(columns(&s, m.mu)?);
    Ok(CommandOutput {
        report: s.finish(report),
        path_columns,
        exit_code: 0,
    })
}
