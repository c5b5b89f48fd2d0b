//! Splitting symmetric 2×2 fields into Hessians plus cofactors of symmetric
//! gradients, and symmetric gradients plus cofactors of Hessians, together
//! with the dual norms ‖·‖_{H⁻¹} and ‖·‖_{H⁻²}.
//!
//! The test spaces are clamped: φ vanishes on the outer node layer and r on
//! the outer two layers. Their derivatives are centered differences of the
//! zero extension, which are skew-adjoint, so the right-hand side of the
//! r-problem is exactly the discrete curlᵀcurl of F. Integrals over the test
//! space use the uniform weight dx·dy on every node.

use crate::diffops::{self, derivative_matrices};
use crate::fields::{Grid2, ScalarGridField, SymGridField2, VectorGridField2};
use crate::linalg::{self, BandCholesky, CgReport, Csr, LinalgError};
use crate::tolerances::{CG_ITERS_PER_NODE, CG_RELATIVE_TOL};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("{what}: CG stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// Conjugate gradients, optionally with a diagonal preconditioner.
    Cg { diag_precond: bool },
    /// Banded Cholesky factorization.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    pub solver: Solver,
    pub tol: f64,
    /// Iteration cap per unknown.
    pub iters_per_unknown: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { solver: Solver::Cg { diag_precond: false }, tol: CG_RELATIVE_TOL, iters_per_unknown: CG_ITERS_PER_NODE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSplit {
    pub v: ScalarGridField,
    pub phi: VectorGridField2,
    pub distance: f64,
    pub solve: CgReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymgradSplit {
    pub r: ScalarGridField,
    pub w: VectorGridField2,
    pub distance: f64,
    pub solve: CgReport,
}

/// Centered differences of the zero extension (N×N, skew-symmetric).
fn zero_ext_diffs(grid: &Grid2) -> (Csr, Csr) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (0.5 / grid.dx(), 0.5 / grid.dy());
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            if i + 1 < nx {
                t1.push((k, grid.idx(i + 1, j), hx));
            }
            if i > 0 {
                t1.push((k, grid.idx(i - 1, j), -hx));
            }
            if j + 1 < ny {
                t2.push((k, grid.idx(i, j + 1), hy));
            }
            if j > 0 {
                t2.push((k, grid.idx(i, j - 1), -hy));
            }
        }
    }
    (Csr::from_triplets(grid.len(), grid.len(), t1), Csr::from_triplets(grid.len(), grid.len(), t2))
}

/// Embeds a scalar operator acting on component `c` of an interleaved
/// 2-vector field (dof = 2·node + c).
fn on_component(op: &Csr, c: usize) -> Csr {
    let mut trips = Vec::with_capacity(op.nnz());
    for r in 0..op.nrows {
        for (col, v) in op.row(r) {
            trips.push((r, 2 * col + c, v));
        }
    }
    Csr::from_triplets(op.nrows, 2 * op.ncols, trips)
}

/// Symmetric-gradient operators (E11, E12, E22) on interleaved vector dofs.
pub(crate) fn symgrad_ops(d1: &Csr, d2: &Csr) -> [Csr; 3] {
    let e11 = on_component(d1, 0);
    let e22 = on_component(d2, 1);
    let e12 = on_component(d2, 0).add_scaled(&on_component(d1, 1), 1.0).scale(0.5);
    [e11, e12, e22]
}

/// Hessian operators (H11, H12, H22) by composition of first differences.
pub(crate) fn hessian_ops(d1: &Csr, d2: &Csr) -> [Csr; 3] {
    let h12 = d1.matmul(d2).add_scaled(&d2.matmul(d1), 1.0).scale(0.5);
    [d1.matmul(d1), h12, d2.matmul(d2)]
}

const FROB: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];

fn frob_matrix() -> Vec<Vec<f64>> {
    FROB.iter().map(|r| r.to_vec()).collect()
}

/// Precomputed operators for one grid.
#[derive(Debug, Clone)]
pub struct Decomposer {
    grid: Grid2,
    opts: DecomposeOptions,
    /// Zero-extension Hessians on the full grid.
    hz: [Csr; 3],
    /// Zero-extension symmetric gradients on the full grid (2N columns).
    ez: [Csr; 3],
    /// Clamped biharmonic form on the doubly-interior nodes.
    bih: Csr,
    bih_free: Vec<usize>,
    /// Korn form on interior vector dofs.
    korn: Csr,
    korn_free: Vec<usize>,
    /// Dirichlet 5-point Laplacian (times dx·dy) on interior nodes.
    lap: Csr,
    lap_free: Vec<usize>,
}

impl Decomposer {
    pub fn new(grid: &Grid2) -> Decomposer {
        Decomposer::with_options(grid, DecomposeOptions::default())
    }

    pub fn with_options(grid: &Grid2, opts: DecomposeOptions) -> Decomposer {
        let w = grid.dx() * grid.dy();
        let uniform = vec![w; grid.len()];
        let (dz1, dz2) = zero_ext_diffs(grid);
        let hz = hessian_ops(&dz1, &dz2);
        let ez = symgrad_ops(&dz1, &dz2);

        let bih_free = grid.inner_nodes(2);
        let bih = linalg::weighted_normal(&[&hz[0], &hz[1], &hz[2]], &frob_matrix(), &uniform).submatrix(&bih_free);

        let korn_free: Vec<usize> = grid.inner_nodes(1).iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let korn = linalg::weighted_normal(&[&ez[0], &ez[1], &ez[2]], &frob_matrix(), &uniform).submatrix(&korn_free);

        let lap_free = grid.inner_nodes(1);
        let (ax, ay) = (w / (grid.dx() * grid.dx()), w / (grid.dy() * grid.dy()));
        let mut pos = vec![usize::MAX; grid.len()];
        for (n, &k) in lap_free.iter().enumerate() {
            pos[k] = n;
        }
        let mut trips = Vec::new();
        for (n, &k) in lap_free.iter().enumerate() {
            let (i, j) = grid.ij(k);
            trips.push((n, n, 2.0 * ax + 2.0 * ay));
            for (nb, a) in [
                (grid.idx(i - 1, j), ax),
                (grid.idx(i + 1, j), ax),
                (grid.idx(i, j - 1), ay),
                (grid.idx(i, j + 1), ay),
            ] {
                if pos[nb] != usize::MAX {
                    trips.push((n, pos[nb], -a));
                }
            }
        }
        let lap = Csr::from_triplets(lap_free.len(), lap_free.len(), trips);
        Decomposer { grid: *grid, opts, hz, ez, bih, bih_free, korn, korn_free, lap, lap_free }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    fn weight(&self) -> f64 {
        self.grid.dx() * self.grid.dy()
    }

    fn solve(&self, what: &'static str, a: &Csr, b: &[f64]) -> Result<(Vec<f64>, CgReport), DecomposeError> {
        match self.opts.solver {
            Solver::Direct => {
                let x = BandCholesky::factor(a, &[])?.solve(b);
                let r = a.matvec(&x);
                let res: Vec<f64> = r.iter().zip(b).map(|(p, q)| p - q).collect();
                let bn = linalg::norm(b);
                let rel = if bn > 0.0 { linalg::norm(&res) / bn } else { 0.0 };
                Ok((x, CgReport { iterations: 0, relative_residual: rel, converged: true }))
            }
            Solver::Cg { diag_precond } => {
                let inv: Option<Vec<f64>> = diag_precond.then(|| a.diagonal().iter().map(|d| 1.0 / d).collect());
                let mut x = vec![0.0; b.len()];
                let rep = linalg::cg(
                    |p, q| a.matvec_into(p, q),
                    b,
                    &mut x,
                    self.opts.tol,
                    self.opts.iters_per_unknown * b.len().max(1),
                    inv.as_deref(),
                );
                if !rep.converged {
                    return Err(DecomposeError::NotConverged { what, iterations: rep.iterations, residual: rep.relative_residual });
                }
                Ok((x, rep))
            }
        }
    }

    /// ‖g‖_{H⁻²}: solves the clamped biharmonic problem with load g.
    pub fn h_minus2_norm(&self, g: &ScalarGridField) -> Result<f64, DecomposeError> {
        let w = self.weight();
        let b: Vec<f64> = self.bih_free.iter().map(|&k| w * g.values[k]).collect();
        let (z, _) = self.solve("h_minus2_norm", &self.bih, &b)?;
        Ok(linalg::dot(&b, &z).max(0.0).sqrt())
    }

    /// ‖g‖_{H⁻¹} of a scalar field (Dirichlet Poisson problem).
    pub fn h_minus1_norm(&self, g: &ScalarGridField) -> Result<f64, DecomposeError> {
        let w = self.weight();
        let b: Vec<f64> = self.lap_free.iter().map(|&k| w * g.values[k]).collect();
        let (z, _) = self.solve("h_minus1_norm", &self.lap, &b)?;
        Ok(linalg::dot(&b, &z).max(0.0).sqrt())
    }

    /// ‖g‖_{H⁻¹} of a vector field, componentwise.
    pub fn h_minus1_norm_vec(&self, g: &VectorGridField2) -> Result<f64, DecomposeError> {
        let a = self.h_minus1_norm(&g.component(0))?;
        let b = self.h_minus1_norm(&g.component(1))?;
        Ok((a * a + b * b).sqrt())
    }

    /// Distance from F to cofactors of symmetric gradients of clamped φ
    /// (the complement of discrete Hessians); v is recovered from the remainder.
    pub fn project_out_hessian(&self, f: &SymGridField2) -> Result<HessianSplit, DecomposeError> {
        let g = &self.grid;
        let w = self.weight();
        let comp = |c: usize| f.component(c).values;
        let (f11, f12, f22) = (comp(0), comp(1), comp(2));
        // ⟨F, cof sym∇α⟩ = ⟨F11, E22 α⟩ − 2⟨F12, E12 α⟩ + ⟨F22, E11 α⟩.
        let mut full = self.ez[2].tmatvec(&f11);
        let t12 = self.ez[1].tmatvec(&f12);
        let t22 = self.ez[0].tmatvec(&f22);
        for i in 0..full.len() {
            full[i] = w * (full[i] - 2.0 * t12[i] + t22[i]);
        }
        let b: Vec<f64> = self.korn_free.iter().map(|&d| full[d]).collect();
        let (x, rep) = self.solve("project_out_hessian", &self.korn, &b)?;
        let distance = linalg::dot(&b, &x).max(0.0).sqrt();

        let mut phi_dofs = vec![0.0; 2 * g.len()];
        for (&d, &v) in self.korn_free.iter().zip(&x) {
            phi_dofs[d] = v;
        }
        let e: Vec<Vec<f64>> = self.ez.iter().map(|op| op.matvec(&phi_dofs)).collect();
        // remainder F − cof sym∇φ
        let rem = SymGridField2 {
            grid: *g,
            values: (0..g.len()).map(|k| [f11[k] - e[2][k], f12[k] + e[1][k], f22[k] - e[0][k]]).collect(),
        };
        let v = fit_hessian(&rem)?;
        let phi = VectorGridField2 { grid: *g, values: (0..g.len()).map(|k| [phi_dofs[2 * k], phi_dofs[2 * k + 1]]).collect() };
        Ok(HessianSplit { v, phi, distance, solve: rep })
    }

    /// Distance from F to symmetric gradients, computed as ‖∇²r‖ for the
    /// clamped r solving ⟨∇²r, ∇²α⟩ = ⟨F, cof∇²α⟩; w is recovered from the remainder.
    pub fn project_out_symgrad(&self, f: &SymGridField2) -> Result<SymgradSplit, DecomposeError> {
        let g = &self.grid;
        let w = self.weight();
        let comp = |c: usize| f.component(c).values;
        let (f11, f12, f22) = (comp(0), comp(1), comp(2));
        let mut full = self.hz[2].tmatvec(&f11);
        let t12 = self.hz[1].tmatvec(&f12);
        let t22 = self.hz[0].tmatvec(&f22);
        for i in 0..full.len() {
            full[i] = w * (full[i] - 2.0 * t12[i] + t22[i]);
        }
        let b: Vec<f64> = self.bih_free.iter().map(|&k| full[k]).collect();
        let (x, rep) = self.solve("project_out_symgrad", &self.bih, &b)?;
        let distance = linalg::dot(&b, &x).max(0.0).sqrt();

        let mut r = vec![0.0; g.len()];
        for (&k, &v) in self.bih_free.iter().zip(&x) {
            r[k] = v;
        }
        let h: Vec<Vec<f64>> = self.hz.iter().map(|op| op.matvec(&r)).collect();
        let rem = SymGridField2 {
            grid: *g,
            values: (0..g.len()).map(|k| [f11[k] - h[2][k], f12[k] + h[1][k], f22[k] - h[0][k]]).collect(),
        };
        let wf = fit_symgrad(&rem)?;
        Ok(SymgradSplit { r: ScalarGridField::from_values(*g, r), w: wf, distance, solve: rep })
    }

    /// Σ_k dx·dy ⟨F − cof∇²r, cof∇²α⟩ for a clamped test field α given on
    /// the full grid (used to check orthogonality).
    pub fn symgrad_residual_pairing(&self, f: &SymGridField2, r: &ScalarGridField, alpha: &ScalarGridField) -> f64 {
        let w = self.weight();
        let hr: Vec<Vec<f64>> = self.hz.iter().map(|op| op.matvec(&r.values)).collect();
        let ha: Vec<Vec<f64>> = self.hz.iter().map(|op| op.matvec(&alpha.values)).collect();
        let mut s = 0.0;
        for k in 0..self.grid.len() {
            let m = f.values[k];
            // F − cof∇²r and cof∇²α
            let a = [m[0] - hr[2][k], m[1] + hr[1][k], m[2] - hr[0][k]];
            let c = [ha[2][k], -ha[1][k], ha[0][k]];
            s += w * (a[0] * c[0] + 2.0 * a[1] * c[1] + a[2] * c[2]);
        }
        s
    }

    /// Free (doubly-interior) nodes of the clamped biharmonic space.
    pub fn free_nodes(&self) -> &[usize] {
        &self.bih_free
    }

    pub(crate) fn biharmonic_matrix(&self) -> &Csr {
        &self.bih
    }

    pub(crate) fn biharmonic_free(&self) -> &[usize] {
        &self.bih_free
    }
}

pub fn project_out_hessian(f: &SymGridField2) -> Result<HessianSplit, DecomposeError> {
    Decomposer::new(&f.grid).project_out_hessian(f)
}

pub fn project_out_symgrad(f: &SymGridField2) -> Result<SymgradSplit, DecomposeError> {
    Decomposer::new(&f.grid).project_out_symgrad(f)
}

pub fn h_minus1_norm(g: &ScalarGridField) -> Result<f64, DecomposeError> {
    Decomposer::new(&g.grid).h_minus1_norm(g)
}

pub fn h_minus1_norm_vec(g: &VectorGridField2) -> Result<f64, DecomposeError> {
    Decomposer::new(&g.grid).h_minus1_norm_vec(g)
}

pub fn h_minus2_norm(g: &ScalarGridField) -> Result<f64, DecomposeError> {
    Decomposer::new(&g.grid).h_minus2_norm(g)
}

/// Corner nodes pinned to remove affine functions from a scalar least-squares fit.
pub(crate) fn affine_pins(grid: &Grid2) -> Vec<usize> {
    vec![grid.idx(0, 0), grid.idx(grid.nx - 1, 0), grid.idx(0, grid.ny - 1)]
}

/// Dofs pinned to remove infinitesimal rigid motions from a vector fit.
pub(crate) fn rigid_pins(grid: &Grid2) -> Vec<usize> {
    let k = grid.idx(grid.nx - 1, 0);
    vec![0, 1, 2 * k + 1]
}

/// Least-squares v with ∇²v ≈ target (trapezoid weights), normalized to
/// zero mean and zero mean gradient.
pub fn fit_hessian(target: &SymGridField2) -> Result<ScalarGridField, LinalgError> {
    let g = &target.grid;
    let wts = g.trapezoid_weights();
    let (d1, d2) = derivative_matrices(g);
    let h = hessian_ops(&d1, &d2);
    let k = linalg::weighted_normal(&[&h[0], &h[1], &h[2]], &frob_matrix(), &wts);
    let mut rhs = vec![0.0; g.len()];
    for (c, op) in h.iter().enumerate() {
        let t: Vec<f64> = (0..g.len()).map(|n| FROB[c][c] * wts[n] * target.values[n][c]).collect();
        for (r, v) in rhs.iter_mut().zip(op.tmatvec(&t)) {
            *r += v;
        }
    }
    let v = BandCholesky::factor(&k, &affine_pins(g))?.solve(&rhs);
    Ok(normalize_affine(&ScalarGridField::from_values(*g, v)))
}

/// Least-squares w with sym∇w ≈ target (trapezoid weights), normalized to
/// zero mean and zero mean rotation.
pub fn fit_symgrad(target: &SymGridField2) -> Result<VectorGridField2, LinalgError> {
    let g = &target.grid;
    let wts = g.trapezoid_weights();
    let (d1, d2) = derivative_matrices(g);
    let e = symgrad_ops(&d1, &d2);
    let k = linalg::weighted_normal(&[&e[0], &e[1], &e[2]], &frob_matrix(), &wts);
    let mut rhs = vec![0.0; 2 * g.len()];
    for (c, op) in e.iter().enumerate() {
        let t: Vec<f64> = (0..g.len()).map(|n| FROB[c][c] * wts[n] * target.values[n][c]).collect();
        for (r, v) in rhs.iter_mut().zip(op.tmatvec(&t)) {
            *r += v;
        }
    }
    let x = BandCholesky::factor(&k, &rigid_pins(g))?.solve(&rhs);
    let w = VectorGridField2 { grid: *g, values: (0..g.len()).map(|n| [x[2 * n], x[2 * n + 1]]).collect() };
    Ok(normalize_rigid(&w))
}

fn weighted_mean(w: &[f64], f: &[f64]) -> f64 {
    linalg::dot(w, f) / w.iter().sum::<f64>()
}

/// Subtracts the affine function with the same mean and mean gradient.
pub fn normalize_affine(v: &ScalarGridField) -> ScalarGridField {
    let g = &v.grid;
    let wts = g.trapezoid_weights();
    let gr = diffops::grad(v);
    let a1 = weighted_mean(&wts, &gr.component(0).values);
    let a2 = weighted_mean(&wts, &gr.component(1).values);
    let xs: Vec<f64> = (0..g.len()).map(|k| g.point(k).0).collect();
    let ys: Vec<f64> = (0..g.len()).map(|k| g.point(k).1).collect();
    let (xm, ym) = (weighted_mean(&wts, &xs), weighted_mean(&wts, &ys));
    let shifted: Vec<f64> = (0..g.len()).map(|k| v.values[k] - a1 * (xs[k] - xm) - a2 * (ys[k] - ym)).collect();
    let m = weighted_mean(&wts, &shifted);
    ScalarGridField::from_values(*g, shifted.into_iter().map(|x| x - m).collect())
}

/// Subtracts the infinitesimal rigid motion with the same mean and mean rotation.
pub fn normalize_rigid(w: &VectorGridField2) -> VectorGridField2 {
    let g = &w.grid;
    let wts = g.trapezoid_weights();
    let w1 = w.component(0).values;
    let w2 = w.component(1).values;
    let rot: Vec<f64> = {
        let a = diffops::d1(g, &w2);
        let b = diffops::d2(g, &w1);
        a.iter().zip(&b).map(|(p, q)| 0.5 * (p - q)).collect()
    };
    let theta = weighted_mean(&wts, &rot);
    let xs: Vec<f64> = (0..g.len()).map(|k| g.point(k).0).collect();
    let ys: Vec<f64> = (0..g.len()).map(|k| g.point(k).1).collect();
    let (xm, ym) = (weighted_mean(&wts, &xs), weighted_mean(&wts, &ys));
    let a: Vec<f64> = (0..g.len()).map(|k| w1[k] + theta * (ys[k] - ym)).collect();
    let b: Vec<f64> = (0..g.len()).map(|k| w2[k] - theta * (xs[k] - xm)).collect();
    let (ma, mb) = (weighted_mean(&wts, &a), weighted_mean(&wts, &b));
    VectorGridField2 { grid: *g, values: (0..g.len()).map(|k| [a[k] - ma, b[k] - mb]).collect() }
}
