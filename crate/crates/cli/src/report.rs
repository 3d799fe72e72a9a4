//! Report documents and their JSON and CSV encodings.
//!
//! Every float is written with 17 significant digits so reports round-trip
//! bit for bit. Wall-clock timings live under the top-level `timings` key
//! and are the only part of a report allowed to differ between runs.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use paramid_core::classes::{ClassCertificate, LambdaBound, MininormPath, RankDrop};
use paramid_core::identifiability::{DistinguishVerdict, ExperimentReport};
use paramid_core::registry::SystemSpec;
use paramid_core::zeros::{Mode, ObservationSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub grid_points: usize,
    pub integrator_tol: f64,
    pub mode: Mode,
    pub seed: u64,
}

/// Summary of `det 𝒟` or `det ℬ` on the analysis grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantSummary {
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
    pub sign_changes: usize,
}

impl DeterminantSummary {
    pub fn from_samples(v: &[f64]) -> Self {
        Self {
            samples: v.len(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_abs: v.iter().fold(0.0, |m, x| m.max(x.abs())),
            sign_changes: sign_changes(v),
        }
    }
}

/// Sign changes between successive nonzero samples, so a zero landing
/// exactly on a grid node still counts.
fn sign_changes(v: &[f64]) -> usize {
    let signs: Vec<f64> = v.iter().filter(|x| **x != 0.0).map(|x| x.signum()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Certificates of one perturbation on every interval of `Θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCertificates {
    pub name: String,
    pub dp: Vec<String>,
    pub certificates: Vec<ClassCertificate>,
    pub lambda: Vec<LambdaBound>,
    pub passed_all: bool,
}

/// `μA` at rank drops; the full path goes to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MininormSummary {
    pub rank_drops: Vec<RankDrop>,
    pub worst_slope_error: f64,
    pub min_mu: f64,
}

impl From<&MininormPath> for MininormSummary {
    fn from(m: &MininormPath) -> Self {
        Self {
            rank_drops: m.rank_drops.clone(),
            worst_slope_error: m.worst_slope_error(),
            min_mu: m.mu.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub command: String,
    pub system: SystemSpec,
    pub settings: Settings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinant_path: Option<DeterminantSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation_set: Option<ObservationSet>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub certificates: Vec<PerturbationCertificates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mininorm: Option<MininormSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinguish: Option<DistinguishVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentReport>,
    /// Stage name to wall time in seconds.
    pub timings: BTreeMap<String, f64>,
}

/// Pretty JSON with floats as `{:.16e}` and non-finite values as `null`.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// CSV with columns `t, det, mu`.
pub fn path_csv(times: &[f64], det: &[f64], mu: &[f64]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "det", "mu"])?;
    for ((t, d), m) in times.iter().zip(det).zip(mu) {
        w.write_record([fmt_f64(*t), fmt_f64(*d), fmt_f64(*m)])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// CSV of experiment rows.
pub fn experiment_csv(report: &ExperimentReport) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["direction", "epsilon", "certified", "distinguished", "separation", "counterexample"])?;
    for r in &report.rows {
        w.write_record([
            r.direction.clone(),
            fmt_f64(r.epsilon),
            r.certified.to_string(),
            r.verdict.distinguished.to_string(),
            fmt_f64(r.verdict.separation),
            r.counterexample.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}
