//! Stored-energy density and its quadratic forms at the identity.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("shear modulus must be positive, got {0}")]
    Shear(f64),
    #[error("lambda must be non-negative, got {0}")]
    Lambda(f64),
}

/// Isotropic Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { mu: 1.0, lambda: 1.0 }
    }
}

impl Material {
    pub fn new(mu: f64, lambda: f64) -> Result<Material, MaterialError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(MaterialError::Shear(mu));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(MaterialError::Lambda(lambda));
        }
        Ok(Material { mu, lambda })
    }

    /// Plane-stress trace coefficient 2μλ/(2μ + λ).
    pub fn lambda_plane(&self) -> f64 {
        2.0 * self.mu * self.lambda / (2.0 * self.mu + self.lambda)
    }

    /// Q₂ as a 3×3 matrix acting on (m11, m12, m22) of a symmetric 2×2 matrix:
    /// Q₂(m) = mᵀ C m.
    pub fn q2_matrix(&self) -> [[f64; 3]; 3] {
        let (m2, l) = (2.0 * self.mu, self.lambda_plane());
        [[m2 + l, 0.0, l], [0.0, 2.0 * m2, 0.0], [l, 0.0, m2 + l]]
    }

    /// Q₂ of a symmetric matrix given by its upper triangle.
    pub fn q2_sym(&self, m: [f64; 3]) -> f64 {
        let tr = m[0] + m[2];
        2.0 * self.mu * (m[0] * m[0] + 2.0 * m[1] * m[1] + m[2] * m[2]) + self.lambda_plane() * tr * tr
    }

    /// Stress C m (upper triangle) whose contraction with m is Q₂(m).
    pub fn stress2(&self, m: [f64; 3]) -> [f64; 3] {
        let tr = self.lambda_plane() * (m[0] + m[2]);
        [2.0 * self.mu * m[0] + tr, 2.0 * self.mu * m[1], 2.0 * self.mu * m[2] + tr]
    }
}

/// W(F) = (μ/4)|FᵀF − I|² + (λ/8)(tr(FᵀF − I))².
pub fn energy_density(mat: &Material, f: &Matrix3<f64>) -> f64 {
    let c = f.transpose() * f - Matrix3::identity();
    let tr = c.trace();
    0.25 * mat.mu * c.norm_squared() + 0.125 * mat.lambda * tr * tr
}

/// W(I + G) evaluated through the strain ½(G + Gᵀ + GᵀG), which keeps full
/// relative precision when G is tiny.
pub fn energy_density_perturbed(mat: &Material, g: &Matrix3<f64>) -> f64 {
    let e = 0.5 * (g + g.transpose() + g.transpose() * g);
    let tr = e.trace();
    mat.mu * e.norm_squared() + 0.5 * mat.lambda * tr * tr
}

pub fn q3(mat: &Material, m: &Matrix3<f64>) -> f64 {
    let s = 0.5 * (m + m.transpose());
    let tr = m.trace();
    2.0 * mat.mu * s.norm_squared() + mat.lambda * tr * tr
}

pub fn q2(mat: &Material, m: &Matrix2<f64>) -> f64 {
    let s = 0.5 * (m + m.transpose());
    let tr = m.trace();
    2.0 * mat.mu * s.norm_squared() + mat.lambda_plane() * tr * tr
}

fn embed(m: &Matrix2<f64>) -> Matrix3<f64> {
    let mut f = Matrix3::zeros();
    f.fixed_view_mut::<2, 2>(0, 0).copy_from(m);
    f
}

/// Directions of the free completion entries: symmetric (1,3), (2,3) pairs
/// and the (3,3) entry. Skew parts of the third row/column do not enter Q₃.
fn completion_basis() -> [Matrix3<f64>; 3] {
    let mut a = Matrix3::zeros();
    a[(0, 2)] = 1.0;
    a[(2, 0)] = 1.0;
    let mut b = Matrix3::zeros();
    b[(1, 2)] = 1.0;
    b[(2, 1)] = 1.0;
    let mut c = Matrix3::zeros();
    c[(2, 2)] = 1.0;
    [a, b, c]
}

/// Completion F̃ of M with F̃₂ₓ₂ = M minimizing Q₃, so that q3(F̃) = q2(M).
/// The stationarity system is assembled from Q₃ by polarization and solved
/// with a Cholesky factorization.
pub fn complete_to_q2(mat: &Material, m: &Matrix2<f64>) -> Matrix3<f64> {
    let base = embed(m);
    let e = completion_basis();
    let bil = |x: &Matrix3<f64>, y: &Matrix3<f64>| 0.5 * (q3(mat, &(x + y)) - q3(mat, x) - q3(mat, y));
    let h = Matrix3::from_fn(|i, j| bil(&e[i], &e[j]));
    let g = Vector3::from_fn(|i, _| bil(&base, &e[i]));
    let chol = h.cholesky().expect("completion system is positive definite for mu > 0");
    let x = chol.solve(&(-g));
    base + e[0] * x[0] + e[1] * x[1] + e[2] * x[2]
}

/// The completion as a linear map of the symmetric 2×2 input
/// (m11, m12, m22) ↦ (F̃13, F̃23, F̃33), precomputed once per material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionMap {
    cols: [[f64; 3]; 3],
}

impl CompletionMap {
    pub fn new(mat: &Material) -> CompletionMap {
        let mut cols = [[0.0; 3]; 3];
        for (c, col) in cols.iter_mut().enumerate() {
            let mut m = [0.0; 3];
            m[c] = 1.0;
            let f = complete_to_q2(mat, &Matrix2::new(m[0], m[1], m[1], m[2]));
            *col = [f[(0, 2)], f[(1, 2)], f[(2, 2)]];
        }
        CompletionMap { cols }
    }

    pub fn apply(&self, m: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, col) in self.cols.iter().enumerate() {
            for r in 0..3 {
                out[r] += col[r] * m[c];
            }
        }
        out
    }
}
