//! Rescaled 3D energy Iʰ(u) = ∫_{ω×(−½,½)} W(∇u (Aʰ)⁻¹) by tensor Gauss–Legendre quadrature.

use super::deformation::Deformation3D;
use super::ProbeError;
use crate::elastic::{energy_density_perturbed, Material};
use crate::fields::Grid2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Cells of `cells` carry `inplane`² Gauss points; `thickness` points in x₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub cells: Grid2,
    pub inplane: usize,
    pub thickness: usize,
}

impl Quadrature {
    pub fn standard(cells: Grid2) -> Quadrature {
        Quadrature { cells, inplane: 2, thickness: 3 }
    }

    /// Twice as many cells per direction.
    pub fn refined(&self) -> Quadrature {
        Quadrature { cells: self.cells.refined(), ..*self }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>), ProbeError> {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            return Ok((vec![-a, a], vec![1.0, 1.0]));
        }
        3 => {
            let a = (0.6f64).sqrt();
            return Ok((vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]));
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            return Ok((vec![-b, -a, a, b], vec![wb, wa, wa, wb]));
        }
        _ => return Err(ProbeError::Quadrature(format!("{n}-point rule not available (1 to 4)"))),
    };
    Ok((x.to_vec(), w.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEval {
    pub energy: f64,
    /// Energy attributable to rounding in ∇u(Aʰ)⁻¹ − I.
    pub floor: f64,
}

impl EnergyEval {
    pub fn floor_limited(&self) -> bool {
        self.energy <= 1e3 * self.floor
    }
}

pub fn energy3d(u: &Deformation3D, h: f64, material: &Material, quad: &Quadrature) -> Result<EnergyEval, ProbeError> {
    if !(h > 0.0) {
        return Err(ProbeError::Quadrature(format!("h must be positive, got {h}")));
    }
    let (gx, gw) = gauss_legendre(quad.inplane)?;
    let (tx, tw) = gauss_legendre(quad.thickness)?;
    let g = quad.cells;
    if g.nx < 2 || g.ny < 2 {
        return Err(ProbeError::Quadrature("quadrature grid needs at least one cell".into()));
    }
    let (dx, dy) = (g.dx(), g.dy());
    let cell_weight = 0.25 * dx * dy * 0.5;
    let rows: Vec<(f64, f64)> = (0..g.ny - 1)
        .into_par_iter()
        .map(|j| -> Result<(f64, f64), ProbeError> {
            let mut e = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..g.nx - 1 {
                let (cx, cy) = (g.x(i) + 0.5 * dx, g.y(j) + 0.5 * dy);
                for (qy, wy) in gx.iter().zip(&gw) {
                    for (qx, wx) in gx.iter().zip(&gw) {
                        let (x1, x2) = (cx + 0.5 * dx * qx, cy + 0.5 * dy * qy);
                        for (qt, wt) in tx.iter().zip(&tw) {
                            let x3 = h * 0.5 * qt;
                            let pe = u.eval(h, [x1, x2, x3])?;
                            let p = u.prestrain(h, [x1, x2, x3])?;
                            let a = nalgebra::Matrix3::identity() + p;
                            let ainv = a.try_inverse().ok_or(ProbeError::Singular { x: [x1, x2, x3] })?;
                            let gm = (pe.grad_minus_id - p) * ainv;
                            e += cell_weight * wx * wy * wt * energy_density_perturbed(material, &gm);
                            scale = scale.max(pe.grad_minus_id.norm() + p.norm());
                        }
                    }
                }
            }
            Ok((e, scale))
        })
        .collect::<Result<_, _>>()?;
    let energy: f64 = rows.iter().map(|r| r.0).sum();
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    let rounding = f64::EPSILON * scale;
    let floor = g.area() * (material.mu + material.lambda) * rounding * rounding;
    Ok(EnergyEval { energy, floor })
}
