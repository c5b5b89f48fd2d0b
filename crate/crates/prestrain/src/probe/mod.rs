//! 3D energies of explicit recovery deformations and log–log scaling fits.

mod deformation;
mod energy;
pub mod fit;
mod mollify;

pub use deformation::{build_recovery, recovery_from_minimizer, Coefficients, Deformation3D, Ingredient, PointEval, Variant};
pub use energy::{energy3d, gauss_legendre, EnergyEval, Quadrature};
pub use mollify::{commutator_defect, commutator_scaling, mollify, shrunk_nodes, CommutatorReport, Mollified};

use crate::elastic::Material;
use crate::fields::EvalError;
use fit::{geometric_sweep, loglog_fit_trimmed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("inconsistent recovery construction: {0}")]
    Variant(String),
    #[error("mollification radius {epsilon} below the resolvable minimum {minimum}")]
    Epsilon { epsilon: f64, minimum: f64 },
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("prestrain not invertible at {x:?}")]
    Singular { x: [f64; 3] },
    #[error("h sweep needs at least 6 positive values, got {0}")]
    BadSweep(usize),
    #[error("fit: {0}")]
    Fit(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Eight values from 10⁻¹ down to 10^{−2.5}.
pub fn default_h_sweep() -> Vec<f64> {
    geometric_sweep(1e-1, 10f64.powf(-2.5), 8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub variant: Variant,
    pub h: Vec<f64>,
    pub energies: Vec<f64>,
    pub floors: Vec<f64>,
    /// Energy divided by h^predicted.
    pub ratios: Vec<f64>,
    /// Points used in the fit.
    pub fitted: Vec<bool>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub predicted_exponent: f64,
    /// Log residual per point, `None` for points outside the fit.
    pub residuals: Vec<Option<f64>>,
    pub dropped_first: bool,
    pub floor_limited: bool,
    /// Extra label such as "machinery-only".
    pub label: Option<String>,
}

impl ScalingReport {
    pub fn model(&self, h: f64) -> Option<f64> {
        Some(self.intercept?.exp() * h.powf(self.slope?))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ProbeError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["h", "energy", "model"]).map_err(csv_io)?;
        for (h, e) in self.h.iter().zip(&self.energies) {
            let m = self.model(*h).map(|m| format!("{m:e}")).unwrap_or_default();
            w.write_record([format!("{h:e}"), format!("{e:e}"), m]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> ProbeError {
    ProbeError::Io(std::io::Error::other(e))
}

/// Evaluates the 3D energy along `h_sweep` and fits the log–log slope.
pub fn scaling_fit(
    u: &Deformation3D,
    h_sweep: &[f64],
    material: &Material,
    quad: &Quadrature,
    predicted_exponent: f64,
) -> Result<ScalingReport, ProbeError> {
    if h_sweep.len() < 6 || h_sweep.iter().any(|h| !(*h > 0.0)) {
        return Err(ProbeError::BadSweep(h_sweep.len()));
    }
    let evals: Vec<EnergyEval> =
        h_sweep.par_iter().map(|&h| energy3d(u, h, material, quad)).collect::<Result<_, _>>()?;
    let energies: Vec<f64> = evals.iter().map(|e| e.energy).collect();
    let floors: Vec<f64> = evals.iter().map(|e| e.floor).collect();
    let ratios = h_sweep.iter().zip(&energies).map(|(h, e)| e / h.powf(predicted_exponent)).collect();
    let usable: Vec<usize> = (0..h_sweep.len()).filter(|&k| !evals[k].floor_limited()).collect();
    let mut fitted = vec![false; h_sweep.len()];
    let mut residuals = vec![None; h_sweep.len()];
    let (mut slope, mut intercept, mut dropped_first) = (None, None, false);
    let floor_limited = usable.len() < 3;
    if !floor_limited {
        let hx: Vec<f64> = usable.iter().map(|&k| h_sweep[k]).collect();
        let ey: Vec<f64> = usable.iter().map(|&k| energies[k]).collect();
        let (f, dropped) = loglog_fit_trimmed(&hx, &ey).ok_or_else(|| ProbeError::Fit("degenerate sweep".into()))?;
        let used = if dropped { &usable[1..] } else { &usable[..] };
        for (&k, r) in used.iter().zip(&f.residuals) {
            fitted[k] = true;
            residuals[k] = Some(*r);
        }
        slope = Some(f.slope);
        intercept = Some(f.intercept);
        dropped_first = dropped;
    }
    Ok(ScalingReport {
        variant: u.variant,
        h: h_sweep.to_vec(),
        energies,
        floors,
        ratios,
        fitted,
        slope,
        intercept,
        predicted_exponent,
        residuals,
        dropped_first,
        floor_limited,
        label: None,
    })
}
