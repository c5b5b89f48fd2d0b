//! Convolution with the compact bump φ(x) ∝ (1 − |x|²)⁴ on nodal data.
//!
//! Near the boundary the data are extended by even reflection; the number
//! of nodes whose stencil reached outside the grid is reported.

use super::fit::{loglog_fit, LogFit};
use super::ProbeError;
use crate::fields::{FieldExpr, Grid2, ScalarGridField, VectorGridField2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Mollified {
    pub field: ScalarGridField,
    pub epsilon: f64,
    /// Nodes whose kernel support left the grid.
    pub reflected_nodes: usize,
}

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r2;
        t * t * t * t
    }
}

/// Discrete kernel offsets and weights, normalized to unit sum.
fn kernel(grid: &Grid2, eps: f64) -> Vec<(isize, isize, f64)> {
    let (dx, dy) = (grid.dx(), grid.dy());
    let px = (eps / dx).ceil() as isize;
    let py = (eps / dy).ceil() as isize;
    let mut k = Vec::new();
    for q in -py..=py {
        for p in -px..=px {
            let (x, y) = (p as f64 * dx / eps, q as f64 * dy / eps);
            let w = bump(x * x + y * y);
            if w > 0.0 {
                k.push((p, q, w));
            }
        }
    }
    let total: f64 = k.iter().map(|t| t.2).sum();
    k.iter_mut().for_each(|t| t.2 /= total);
    k
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period.max(1));
    if m >= n {
        m = period - m;
    }
    m as usize
}

fn check_eps(grid: &Grid2, eps: f64) -> Result<(), ProbeError> {
    let min = 2.0 * grid.dx().max(grid.dy());
    if !(eps >= min) {
        return Err(ProbeError::Epsilon { epsilon: eps, minimum: min });
    }
    Ok(())
}

/// Convolves several fields at the given nodes. Returns one output vector
/// per field (indexed like `nodes`) and the number of nodes whose stencil
/// left the grid.
fn convolve(grid: &Grid2, fields: &[&[f64]], k: &[(isize, isize, f64)], nodes: &[usize]) -> (Vec<Vec<f64>>, usize) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (px, py) = k.iter().fold((0, 0), |(a, b), t| (a.max(t.0.abs()), b.max(t.1.abs())));
    let per_node: Vec<(Vec<f64>, bool)> = nodes
        .par_iter()
        .map(|&n| {
            let (i, j) = grid.ij(n);
            let (i, j) = (i as isize, j as isize);
            let inside = i >= px && j >= py && i + px < nx as isize && j + py < ny as isize;
            let mut acc = vec![0.0; fields.len()];
            for &(p, q, w) in k {
                let (a, b) = (i + p, j + q);
                let idx = if inside { b as usize * nx + a as usize } else { reflect(b, ny) * nx + reflect(a, nx) };
                for (s, f) in acc.iter_mut().zip(fields) {
                    *s += w * f[idx];
                }
            }
            (acc, !inside && k.iter().any(|&(p, q, _)| i + p < 0 || j + q < 0 || i + p >= nx as isize || j + q >= ny as isize))
        })
        .collect();
    let reflected = per_node.iter().filter(|t| t.1).count();
    let out = (0..fields.len()).map(|c| per_node.iter().map(|t| t.0[c]).collect()).collect();
    (out, reflected)
}

pub fn mollify(f: &ScalarGridField, epsilon: f64) -> Result<Mollified, ProbeError> {
    check_eps(&f.grid, epsilon)?;
    let k = kernel(&f.grid, epsilon);
    let nodes: Vec<usize> = (0..f.grid.len()).collect();
    let (mut out, reflected_nodes) = convolve(&f.grid, &[&f.values], &k, &nodes);
    Ok(Mollified { field: ScalarGridField::from_values(f.grid, out.remove(0)), epsilon, reflected_nodes })
}

/// Nodes at distance at least ε from the boundary.
pub fn shrunk_nodes(grid: &Grid2, epsilon: f64) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| {
            let (x, y) = grid.point(k);
            x - grid.x_min >= epsilon && grid.x_max - x >= epsilon && y - grid.y_min >= epsilon && grid.y_max - y >= epsilon
        })
        .collect()
}

/// ‖(g∗φ_ε)⊗² − (g⊗g)∗φ_ε‖_{C⁰} over the shrunk domain, for a gradient field g.
pub fn commutator_defect(g: &VectorGridField2, epsilon: f64) -> Result<f64, ProbeError> {
    let grid = g.grid;
    check_eps(&grid, epsilon)?;
    let k = kernel(&grid, epsilon);
    let g1 = g.component(0).values;
    let g2 = g.component(1).values;
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let (g11, g12, g22) = (prod(&g1, &g1), prod(&g1, &g2), prod(&g2, &g2));
    let nodes = shrunk_nodes(&grid, epsilon);
    let (c, _) = convolve(&grid, &[&g1, &g2, &g11, &g12, &g22], &k, &nodes);
    let mut worst: f64 = 0.0;
    for n in 0..nodes.len() {
        let (m1, m2) = (c[0][n], c[1][n]);
        worst = worst.max((m1 * m1 - c[2][n]).abs()).max((m1 * m2 - c[3][n]).abs()).max((m2 * m2 - c[4][n]).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub epsilon: Vec<f64>,
    pub defect: Vec<f64>,
    pub fit: LogFit,
}

/// Commutator defects of the exact gradient of `v` sampled on `grid`,
/// with the decay exponent in ε.
pub fn commutator_scaling(v: &FieldExpr, grid: &Grid2, epsilon: &[f64]) -> Result<CommutatorReport, ProbeError> {
    let mut vals = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (x, y) = grid.point(k);
        let j = v.eval_jet3(x, y)?;
        vals.push(j.g);
    }
    let g = VectorGridField2 { grid: *grid, values: vals };
    let defect: Vec<f64> = epsilon.iter().map(|&e| commutator_defect(&g, e)).collect::<Result<_, _>>()?;
    let fit = loglog_fit(epsilon, &defect).ok_or(ProbeError::Fit("commutator sweep needs two distinct ε".into()))?;
    Ok(CommutatorReport { epsilon: epsilon.to_vec(), defect, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_preserved() {
        let g = Grid2::unit_square(33).unwrap();
        let m = mollify(&ScalarGridField::from_fn(g, |_, _| 2.5), 0.1).unwrap();
        assert!(m.field.values.iter().all(|v| (v - 2.5).abs() < 1e-14));
        assert!(m.reflected_nodes > 0);
    }

    #[test]
    fn linear_preserved_inside() {
        let g = Grid2::unit_square(41).unwrap();
        let eps = 0.1;
        let m = mollify(&ScalarGridField::from_fn(g, |x, _| x), eps).unwrap();
        for k in shrunk_nodes(&g, eps) {
            assert!((m.field.values[k] - g.point(k).0).abs() < 1e-14);
        }
    }

    #[test]
    fn too_small_epsilon() {
        let g = Grid2::unit_square(11).unwrap();
        assert!(matches!(mollify(&ScalarGridField::zeros(g), 0.15), Err(ProbeError::Epsilon { .. })));
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(2, 5), 2);
    }
}
