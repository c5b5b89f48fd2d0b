//! Finite-difference operators on grid fields.
//!
//! First derivatives use the centered stencil in the interior and the
//! second-order one-sided stencil (−3, 4, −1)/2h on the boundary layer.
//! Second derivatives are compositions of first differences, so the x1 and
//! x2 operators commute exactly as linear maps; this is what makes
//! `curl2 ∘ hessian` and `curlTcurl ∘ symgrad` vanish identically on nodes
//! two layers away from the boundary.

use crate::fields::{Grid2, ScalarGridField, SymGridField2, VectorGridField2};
use crate::linalg::Csr;

/// Stencil (node offset, weight) of the first difference at node `i` of `n`,
/// before division by the spacing.
pub fn first_diff_stencil(i: usize, n: usize) -> [(usize, f64); 3] {
    if i == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if i + 1 == n {
        [(n - 3, 0.5), (n - 2, -2.0), (n - 1, 1.5)]
    } else {
        [(i - 1, -0.5), (i, 0.0), (i + 1, 0.5)]
    }
}

/// Interior and boundary stencils as a named plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilPlan {
    pub interior: [f64; 3],
    pub left: [f64; 3],
    pub right: [f64; 3],
}

pub const STENCIL_PLAN: StencilPlan = StencilPlan {
    interior: [-0.5, 0.0, 0.5],
    left: [-1.5, 2.0, -0.5],
    right: [0.5, -2.0, 1.5],
};

/// ∂/∂x1 of nodal data.
pub fn d1(grid: &Grid2, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv = 1.0 / grid.dx();
    let mut out = vec![0.0; grid.len()];
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let s: f64 = first_diff_stencil(i, nx).iter().map(|&(m, w)| w * f[row + m]).sum();
            out[row + i] = s * inv;
        }
    }
    out
}

/// ∂/∂x2 of nodal data.
pub fn d2(grid: &Grid2, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv = 1.0 / grid.dy();
    let mut out = vec![0.0; grid.len()];
    for j in 0..ny {
        let st = first_diff_stencil(j, ny);
        for i in 0..nx {
            let s: f64 = st.iter().map(|&(m, w)| w * f[m * nx + i]).sum();
            out[j * nx + i] = s * inv;
        }
    }
    out
}

/// Sparse matrices of [`d1`] and [`d2`].
pub fn derivative_matrices(grid: &Grid2) -> (Csr, Csr) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (ix, iy) = (1.0 / grid.dx(), 1.0 / grid.dy());
    let mut t1 = Vec::with_capacity(3 * grid.len());
    let mut t2 = Vec::with_capacity(3 * grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            for (m, w) in first_diff_stencil(i, nx) {
                t1.push((k, grid.idx(m, j), w * ix));
            }
            for (m, w) in first_diff_stencil(j, ny) {
                t2.push((k, grid.idx(i, m), w * iy));
            }
        }
    }
    (Csr::from_triplets(grid.len(), grid.len(), t1), Csr::from_triplets(grid.len(), grid.len(), t2))
}

pub fn grad(v: &ScalarGridField) -> VectorGridField2 {
    let g = &v.grid;
    VectorGridField2::from_components(
        &ScalarGridField::from_values(*g, d1(g, &v.values)),
        &ScalarGridField::from_values(*g, d2(g, &v.values)),
    )
}

/// Hessian with the mixed entry symmetrized, ½(D1D2 + D2D1).
pub fn hessian(v: &ScalarGridField) -> SymGridField2 {
    let g = &v.grid;
    let v1 = d1(g, &v.values);
    let v2 = d2(g, &v.values);
    let v11 = d1(g, &v1);
    let v22 = d2(g, &v2);
    let v12 = d2(g, &v1);
    let v21 = d1(g, &v2);
    let values = (0..g.len()).map(|k| [v11[k], 0.5 * (v12[k] + v21[k]), v22[k]]).collect();
    SymGridField2 { grid: *g, values }
}

pub fn symgrad(w: &VectorGridField2) -> SymGridField2 {
    let g = &w.grid;
    let w1 = w.component(0).values;
    let w2 = w.component(1).values;
    let a = d1(g, &w1);
    let b = d2(g, &w1);
    let c = d1(g, &w2);
    let d = d2(g, &w2);
    let values = (0..g.len()).map(|k| [a[k], 0.5 * (b[k] + c[k]), d[k]]).collect();
    SymGridField2 { grid: *g, values }
}

/// Row-wise curl: (∂₁F₁₂ − ∂₂F₁₁, ∂₁F₂₂ − ∂₂F₂₁).
pub fn curl2(f: &SymGridField2) -> VectorGridField2 {
    let g = &f.grid;
    let f11 = f.component(0).values;
    let f12 = f.component(1).values;
    let f22 = f.component(2).values;
    let a = d1(g, &f12);
    let b = d2(g, &f11);
    let c = d1(g, &f22);
    let d = d2(g, &f12);
    let values = (0..g.len()).map(|k| [a[k] - b[k], c[k] - d[k]]).collect();
    VectorGridField2 { grid: *g, values }
}

/// Scalar curl of a vector field, ∂₁g₂ − ∂₂g₁.
pub fn curl_scalar(v: &VectorGridField2) -> ScalarGridField {
    let g = &v.grid;
    let a = d1(g, &v.component(1).values);
    let b = d2(g, &v.component(0).values);
    ScalarGridField::from_values(*g, a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// curlᵀcurl F computed as curl(curl2 F).
pub fn curl_t_curl(f: &SymGridField2) -> ScalarGridField {
    curl_scalar(&curl2(f))
}

/// ∂₁₁F₂₂ − 2∂₁₂F₁₂ + ∂₂₂F₁₁ with the composed stencils.
pub fn curl_t_curl_expanded(f: &SymGridField2) -> ScalarGridField {
    let g = &f.grid;
    let f11 = f.component(0).values;
    let f12 = f.component(1).values;
    let f22 = f.component(2).values;
    let a = d1(g, &d1(g, &f22));
    let b1 = d1(g, &d2(g, &f12));
    let b2 = d2(g, &d1(g, &f12));
    let c = d2(g, &d2(g, &f11));
    ScalarGridField::from_values(*g, (0..g.len()).map(|k| a[k] - b1[k] - b2[k] + c[k]).collect())
}

pub fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn cof2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

/// Pointwise determinant of a symmetric field.
pub fn det_field(f: &SymGridField2) -> ScalarGridField {
    ScalarGridField::from_values(f.grid, f.values.iter().map(|m| m[0] * m[2] - m[1] * m[1]).collect())
}

/// Pointwise cofactor of a symmetric field.
pub fn cof_field(f: &SymGridField2) -> SymGridField2 {
    SymGridField2 { grid: f.grid, values: f.values.iter().map(|m| [m[2], -m[1], m[0]]).collect() }
}

/// ½ g ⊗ g.
pub fn half_outer(v: &VectorGridField2) -> SymGridField2 {
    SymGridField2 {
        grid: v.grid,
        values: v.values.iter().map(|g| [0.5 * g[0] * g[0], 0.5 * g[0] * g[1], 0.5 * g[1] * g[1]]).collect(),
    }
}

/// Nodes at least two layers from the boundary, where the composed
/// second-difference identities hold exactly.
pub fn doubly_interior(grid: &Grid2) -> Vec<usize> {
    grid.inner_nodes(2)
}

/// Nodes at least one layer from the boundary.
pub fn interior(grid: &Grid2) -> Vec<usize> {
    grid.inner_nodes(1)
}
