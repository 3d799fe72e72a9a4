//! Local identifiability of parameter-functions in ODE systems
//! `ẋ = f(t, x, p(t))` from finitely many state observations.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classes;
pub mod error;
pub mod expr;
pub mod grid;
pub mod identifiability;
pub mod linalg;
pub mod ode;
pub mod registry;
pub mod sensitivity;
pub mod zeros;

pub use error::{Error, ErrorClass, Result};
pub use grid::{TimeGrid, VectorFunctionSamples, DEFAULT_GRID_POINTS};
pub use linalg::Matrix;
pub use ode::{FundamentalMatrix, ParamFunction, SystemModel, Trajectory, DEFAULT_INTEGRATOR_TOL};
pub use sensitivity::{sensitivity_path, PsiKernel, PsiValue, RemainderSample, SensitivityPath};
pub use zeros::{observation_set, Mode, ObservationPoint, ObservationSet, ZeroOptions, ZeroRecord};
pub use classes::{certify_membership, ClassCertificate, CertifyOptions, MininormPath, Variant};
pub use registry::{builtin_system, builtin_systems, ModeChoice, SystemSpec};
pub use identifiability::{distinguish, identifiability_experiment, negative_control, DistinguishVerdict, ExperimentReport};
