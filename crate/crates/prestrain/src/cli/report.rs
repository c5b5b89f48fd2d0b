//! Run report types and artifact writing.

use crate::curvature::LeadingFit;
use crate::fields::{ScalarGridField, VectorGridField2};
use crate::gamma::StartSummary;
use crate::probe::{CommutatorReport, ScalingReport};
use crate::regimes::{OptimalityReport, RegimeSpec};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: Status,
    /// Set when the task was run only because another task depends on it.
    pub implicit: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeSummary {
    pub value: f64,
    pub bending: f64,
    pub stretching: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_measure: f64,
    pub starts: Vec<StartSummary>,
    pub distinct_minima: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub scaling: ScalingReport,
    /// Plate-limit energy of the ingredients, when the construction has one.
    pub limit_value: Option<f64>,
    /// Iʰ/h^{2+δ} at the smallest h above the rounding floor.
    pub limit_ratio: Option<f64>,
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorSummary {
    pub label: String,
    pub a: f64,
    pub required_exponent: f64,
    pub report: CommutatorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub partial: bool,
    pub tasks: Vec<TaskStatus>,
    pub regime: Option<RegimeSpec>,
    pub minimize: Option<MinimizeSummary>,
    pub indicators: Option<OptimalityReport>,
    pub curvature: Option<Vec<LeadingFit>>,
    pub probe: Option<ProbeSummary>,
    pub commutator: Option<CommutatorSummary>,
}

impl RunReport {
    pub fn status(&self, task: &str) -> Option<Status> {
        self.tasks.iter().find(|t| t.task == task).map(|t| t.status)
    }

    pub fn failed(&self) -> bool {
        self.tasks.iter().any(|t| t.status == Status::Failed)
    }
}

/// Report plus nodal fields and wall times, which are written to separate files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub v: Option<ScalarGridField>,
    pub w: Option<VectorGridField2>,
    pub timings: BTreeMap<String, f64>,
}

fn io_err(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

impl RunOutcome {
    /// Writes report.json, timings.json and the CSV artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.report).map_err(io_err)?;
        fs::write(dir.join("report.json"), json + "\n")?;
        let timings = serde_json::to_string_pretty(&self.timings).map_err(io_err)?;
        fs::write(dir.join("timings.json"), timings + "\n")?;
        if let Some(v) = &self.v {
            v.to_csv(&dir.join("v.csv")).map_err(io_err)?;
        }
        if let Some(w) = &self.w {
            w.to_csv(&dir.join("w.csv")).map_err(io_err)?;
        }
        if let Some(p) = &self.report.probe {
            p.scaling.write_csv(fs::File::create(dir.join("probe.csv"))?).map_err(io_err)?;
        }
        if let Some(fits) = &self.report.curvature {
            let mut w = csv::Writer::from_path(dir.join("curvature.csv")).map_err(io_err)?;
            w.write_record(["component", "h", "value", "model"]).map_err(io_err)?;
            for f in fits {
                for s in &f.samples {
                    w.write_record([f.component.clone(), format!("{:e}", s.h), format!("{:e}", s.value), format!("{:e}", s.model)])
                        .map_err(io_err)?;
                }
            }
            w.flush()?;
        }
        if let Some(c) = &self.report.commutator {
            let mut w = csv::Writer::from_path(dir.join("commutator.csv")).map_err(io_err)?;
            w.write_record(["epsilon", "defect"]).map_err(io_err)?;
            for (e, d) in c.report.epsilon.iter().zip(&c.report.defect) {
                w.write_record([format!("{e:e}"), format!("{d:e}")]).map_err(io_err)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
