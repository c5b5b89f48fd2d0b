//! Discrete plate functionals
//!
//! I(v, w) = (1/24) ∫ Q₂(∇²v + M_b) + ½ ∫ Q₂(sym∇w + c_v ½(∇v)⊗² − M_s)
//!
//! on nodal grid fields with one-sided boundary differences and trapezoid
//! quadrature, together with the functional
//!
//! Ī₀(v) = ‖∇²v + B̄‖²_{L²} + ‖det∇²v + curlᵀcurl S̄‖²_{H⁻²}.
//!
//! The w-problem is always solved exactly with a pinned Cholesky factor of
//! the Korn-type stiffness. Quartic v-problems use preconditioned L-BFGS with
//! the bending stiffness as the initial inverse Hessian.

use crate::decompose::{affine_pins, hessian_ops, rigid_pins, symgrad_ops, Decomposer};
use crate::diffops::{curl_t_curl, derivative_matrices};
use crate::elastic::Material;
use crate::fields::{Grid2, ScalarGridField, SymField3, SymGridField2, VectorGridField2};
use crate::linalg::{self, BandCholesky, Csr, LinalgError};
use crate::regimes::{offsets, Offsets, RegimeSpec, TheoremCase};
use crate::tolerances::{DISTINCT_MINIMA_GAP, ZERO_BLOCK_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GammaError {
    #[error("case {0} has no plate functional")]
    NoLimit(TheoremCase),
    #[error("case {case} needs S_2x2 = 0 but max |S_2x2| = {max_abs:e}")]
    RecipeMismatch { case: TheoremCase, max_abs: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub value: f64,
    pub bending: f64,
    pub stretching: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when gᵀP⁻¹g ≤ tol · max(J(0), J(start)).
    pub tol: f64,
    pub memory: usize,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iter: 1000, tol: 1e-12, memory: 10, random_starts: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub label: String,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub v: ScalarGridField,
    pub w: VectorGridField2,
    pub value: f64,
    pub bending: f64,
    pub stretching: f64,
    pub iterations: usize,
    pub converged: bool,
    /// gᵀP⁻¹g at the returned iterate.
    pub gradient_measure: f64,
    pub starts: Vec<StartSummary>,
    /// Values of the distinct local minima found, ascending.
    pub distinct_minima: Vec<f64>,
}

/// Assembled functional on one grid. Immutable after assembly.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    pub spec: RegimeSpec,
    pub material: Material,
    pub grid: Grid2,
    pub offsets: Offsets,
    c_v: f64,
    cq: [[f64; 3]; 3],
    weights: Vec<f64>,
    d1: Csr,
    d2: Csr,
    h: [Csr; 3],
    e: [Csr; 3],
    kb: BandCholesky,
    kw: BandCholesky,
    v_pins: Vec<usize>,
}

fn cq_rows(m: &[[f64; 3]; 3], s: f64) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|x| s * x).collect()).collect()
}

/// Σ_ab C_ab Aₐᵀ (w ∘ m_b) for pointwise 3-vectors m.
fn pull_back(ops: &[Csr; 3], c: &[[f64; 3]; 3], w: &[f64], m: &[[f64; 3]]) -> Vec<f64> {
    let mut out = vec![0.0; ops[0].ncols];
    for (a, op) in ops.iter().enumerate() {
        let t: Vec<f64> = (0..w.len()).map(|k| w[k] * (0..3).map(|b| c[a][b] * m[k][b]).sum::<f64>()).collect();
        for (o, x) in out.iter_mut().zip(op.tmatvec(&t)) {
            *o += x;
        }
    }
    out
}

fn apply3(ops: &[Csr; 3], x: &[f64]) -> Vec<[f64; 3]> {
    let a: Vec<Vec<f64>> = ops.iter().map(|op| op.matvec(x)).collect();
    (0..a[0].len()).map(|k| [a[0][k], a[1][k], a[2][k]]).collect()
}

fn quad(c: &[[f64; 3]; 3], m: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            s += m[a] * c[a][b] * m[b];
        }
    }
    s
}

fn interleave(w: &VectorGridField2) -> Vec<f64> {
    w.values.iter().flat_map(|p| [p[0], p[1]]).collect()
}

fn deinterleave(grid: Grid2, x: &[f64]) -> VectorGridField2 {
    VectorGridField2 { grid, values: x.chunks(2).map(|p| [p[0], p[1]]).collect() }
}

/// Assembles the functional of a plate-limit case from sampled S and B.
pub fn assemble(spec: &RegimeSpec, s: &SymField3, b: &SymField3, material: &Material) -> Result<EnergyFunctional, GammaError> {
    if !spec.theorem_case.has_limit() {
        return Err(GammaError::NoLimit(spec.theorem_case));
    }
    if s.grid != b.grid {
        return Err(GammaError::GridMismatch);
    }
    if spec.theorem_case.needs_s22_zero() {
        let m = s.block22().max_abs();
        if m > ZERO_BLOCK_TOL {
            return Err(GammaError::RecipeMismatch { case: spec.theorem_case, max_abs: m });
        }
    }
    EnergyFunctional::from_offsets(spec, material, offsets(spec, s, b))
}

impl EnergyFunctional {
    /// Assembly from precomputed offset fields.
    pub fn from_offsets(spec: &RegimeSpec, material: &Material, offsets: Offsets) -> Result<EnergyFunctional, GammaError> {
        let grid = offsets.bending.grid;
        if offsets.stretching.grid != grid {
            return Err(GammaError::GridMismatch);
        }
        let weights = grid.trapezoid_weights();
        let (d1, d2) = derivative_matrices(&grid);
        let h = hessian_ops(&d1, &d2);
        let e = symgrad_ops(&d1, &d2);
        let cq = material.q2_matrix();
        let kb_mat = linalg::weighted_normal(&[&h[0], &h[1], &h[2]], &cq_rows(&cq, 1.0 / 12.0), &weights);
        let kw_mat = linalg::weighted_normal(&[&e[0], &e[1], &e[2]], &cq_rows(&cq, 1.0), &weights);
        let v_pins = affine_pins(&grid);
        let kb = BandCholesky::factor(&kb_mat, &v_pins)?;
        let kw = BandCholesky::factor(&kw_mat, &rigid_pins(&grid))?;
        let c_v = if offsets.halfgradv2 { 1.0 } else { 0.0 };
        Ok(EnergyFunctional {
            spec: spec.clone(),
            material: *material,
            grid,
            offsets,
            c_v,
            cq,
            weights,
            d1,
            d2,
            h,
            e,
            kb,
            kw,
            v_pins,
        })
    }

    /// Whether the v-problem is quartic.
    pub fn is_nonconvex(&self) -> bool {
        self.c_v != 0.0
    }

    fn bending_strain(&self, v: &[f64]) -> Vec<[f64; 3]> {
        let mut m = apply3(&self.h, v);
        for (x, o) in m.iter_mut().zip(&self.offsets.bending.values) {
            for c in 0..3 {
                x[c] += o[c];
            }
        }
        m
    }

    /// c_v ½(∇v)⊗² − M_s, the w-independent part of the stretching strain.
    fn stretching_load(&self, v: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>, Vec<f64>) {
        let g1 = self.d1.matvec(v);
        let g2 = self.d2.matvec(v);
        let c = 0.5 * self.c_v;
        let t = (0..self.grid.len())
            .map(|k| {
                let o = self.offsets.stretching.values[k];
                [c * g1[k] * g1[k] - o[0], c * g1[k] * g2[k] - o[1], c * g2[k] * g2[k] - o[2]]
            })
            .collect();
        (t, g1, g2)
    }

    fn evaluate_raw(&self, v: &[f64], w: &[f64]) -> Energy {
        let mb = self.bending_strain(v);
        let (t, _, _) = self.stretching_load(v);
        let sw = apply3(&self.e, w);
        let mut bending = 0.0;
        let mut stretching = 0.0;
        for k in 0..self.grid.len() {
            bending += self.weights[k] * quad(&self.cq, mb[k]) / 24.0;
            let e = [sw[k][0] + t[k][0], sw[k][1] + t[k][1], sw[k][2] + t[k][2]];
            stretching += 0.5 * self.weights[k] * quad(&self.cq, e);
        }
        Energy { value: bending + stretching, bending, stretching }
    }

    pub fn evaluate(&self, v: &ScalarGridField, w: &VectorGridField2) -> Energy {
        self.evaluate_raw(&v.values, &interleave(w))
    }

    /// Exact minimizer w*(v) of the stretching term (rigid gauge pinned).
    pub fn inner_solve(&self, v: &ScalarGridField) -> VectorGridField2 {
        deinterleave(self.grid, &self.inner_raw(&v.values))
    }

    fn inner_raw(&self, v: &[f64]) -> Vec<f64> {
        let (t, _, _) = self.stretching_load(v);
        let mut rhs = pull_back(&self.e, &self.cq, &self.weights, &t);
        rhs.iter_mut().for_each(|x| *x = -*x);
        self.kw.solve_in_place(&mut rhs);
        rhs
    }

    /// Gradient of I in w at (v, w).
    pub fn stretching_gradient(&self, v: &ScalarGridField, w: &VectorGridField2) -> Vec<f64> {
        let (t, _, _) = self.stretching_load(&v.values);
        let sw = apply3(&self.e, &interleave(w));
        let strain: Vec<[f64; 3]> = (0..t.len()).map(|k| [sw[k][0] + t[k][0], sw[k][1] + t[k][1], sw[k][2] + t[k][2]]).collect();
        pull_back(&self.e, &self.cq, &self.weights, &strain)
    }

    /// min over w of I(v, w), computed with the exact inner solve.
    pub fn reduced_energy(&self, v: &ScalarGridField) -> f64 {
        self.reduced_raw(&v.values).0
    }

    /// Bending term plus ½ the squared L² distance of the stretching load
    /// M_s − c_v ½(∇v)⊗² from symmetric gradients. Equivalent to the
    /// reduced energy up to the eigenvalue bounds of Q₂.
    pub fn reduced_energy_distance(&self, v: &ScalarGridField, dec: &Decomposer) -> Result<f64, crate::decompose::DecomposeError> {
        let mb = self.bending_strain(&v.values);
        let bending: f64 = (0..self.grid.len()).map(|k| self.weights[k] * quad(&self.cq, mb[k]) / 24.0).sum();
        let (t, _, _) = self.stretching_load(&v.values);
        let load = SymGridField2 { grid: self.grid, values: t.iter().map(|m| [-m[0], -m[1], -m[2]]).collect() };
        let split = dec.project_out_symgrad(&load)?;
        Ok(bending + 0.5 * split.distance * split.distance)
    }

    /// Reduced objective J(v) and its gradient.
    fn reduced_raw(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let w = self.inner_raw(v);
        let mb = self.bending_strain(v);
        let (t, g1, g2) = self.stretching_load(v);
        let sw = apply3(&self.e, &w);
        let n = self.grid.len();
        let mut value = 0.0;
        let mut tau = vec![[0.0; 3]; n];
        for k in 0..n {
            value += self.weights[k] * quad(&self.cq, mb[k]) / 24.0;
            let e = [sw[k][0] + t[k][0], sw[k][1] + t[k][1], sw[k][2] + t[k][2]];
            value += 0.5 * self.weights[k] * quad(&self.cq, e);
            for a in 0..3 {
                tau[k][a] = (0..3).map(|b| self.cq[a][b] * e[b]).sum();
            }
        }
        let mut grad = pull_back(&self.h, &self.cq, &self.weights, &mb);
        grad.iter_mut().for_each(|x| *x /= 12.0);
        if self.c_v != 0.0 {
            let p1: Vec<f64> = (0..n).map(|k| self.weights[k] * (tau[k][0] * g1[k] + 0.5 * tau[k][1] * g2[k])).collect();
            let p2: Vec<f64> = (0..n).map(|k| self.weights[k] * (0.5 * tau[k][1] * g1[k] + tau[k][2] * g2[k])).collect();
            for (g, (a, b)) in grad.iter_mut().zip(self.d1.tmatvec(&p1).into_iter().zip(self.d2.tmatvec(&p2))) {
                *g += self.c_v * (a + b);
            }
        }
        (value, grad)
    }

    /// Gradient of the reduced objective in v.
    pub fn reduced_gradient(&self, v: &ScalarGridField) -> Vec<f64> {
        self.reduced_raw(&v.values).1
    }

    fn package(&self, v: Vec<f64>, iterations: usize, converged: bool, gpg: f64, starts: Vec<StartSummary>, minima: Vec<f64>) -> MinimizeResult {
        let w = self.inner_raw(&v);
        let en = self.evaluate_raw(&v, &w);
        MinimizeResult {
            v: ScalarGridField::from_values(self.grid, v),
            w: deinterleave(self.grid, &w),
            value: en.value,
            bending: en.bending,
            stretching: en.stretching,
            iterations,
            converged,
            gradient_measure: gpg,
            starts,
            distinct_minima: minima,
        }
    }

    fn start_fields(&self, opts: &MinimizeOptions) -> Vec<(String, Vec<f64>)> {
        let g = self.grid;
        let scale = self.offsets.bending.max_abs().max(self.offsets.stretching.max_abs().sqrt()).max(1.0);
        let mut starts = vec![("zero".to_string(), vec![0.0; g.len()])];
        for r in 0..opts.random_starts {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            let mut coef = [[0.0; 4]; 4];
            for (i, row) in coef.iter_mut().enumerate() {
                for (j, c) in row.iter_mut().enumerate() {
                    if (2..=3).contains(&(i + j)) {
                        *c = scale * rng.random_range(-1.0..1.0);
                    }
                }
            }
            let v: Vec<f64> = (0..g.len())
                .map(|k| {
                    let (x, y) = g.point(k);
                    let xs = 2.0 * (x - g.x_min) / (g.x_max - g.x_min) - 1.0;
                    let ys = 2.0 * (y - g.y_min) / (g.y_max - g.y_min) - 1.0;
                    let mut s = 0.0;
                    for (i, row) in coef.iter().enumerate() {
                        for (j, c) in row.iter().enumerate() {
                            s += c * xs.powi(i as i32) * ys.powi(j as i32);
                        }
                    }
                    s
                })
                .collect();
            starts.push((format!("random-{r}"), v));
        }
        starts
    }

    /// Minimizes I over (v, w). Quadratic cases are solved directly; quartic
    /// cases run L-BFGS from a zero start and `random_starts` seeded
    /// polynomial starts and return the best.
    pub fn minimize(&self, opts: &MinimizeOptions) -> MinimizeResult {
        let n = self.grid.len();
        if !self.is_nonconvex() {
            let mut rhs = pull_back(&self.h, &self.cq, &self.weights, &self.offsets.bending.values);
            rhs.iter_mut().for_each(|x| *x /= -12.0);
            self.kb.solve_in_place(&mut rhs);
            let (value, g) = self.reduced_raw(&rhs);
            let gpg = linalg::dot(&g, &self.precond(&g));
            let starts = vec![StartSummary { label: "direct".into(), value, iterations: 1, converged: true }];
            return self.package(rhs, 1, true, gpg, starts, vec![value]);
        }
        let f_ref = self.reduced_raw(&vec![0.0; n]).0;
        let runs: Vec<(String, LbfgsOutcome)> = self
            .start_fields(opts)
            .into_par_iter()
            .map(|(label, x0)| {
                let out = lbfgs(|x| self.reduced_raw(x), |g| self.precond(g), &self.v_pins, x0, f_ref, opts);
                (label, out)
            })
            .collect();
        let starts: Vec<StartSummary> = runs
            .iter()
            .map(|(l, o)| StartSummary { label: l.clone(), value: o.value, iterations: o.iterations, converged: o.converged })
            .collect();
        let minima = distinct_minima(runs.iter().map(|(_, o)| o.value));
        let best = runs
            .into_iter()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
            .map(|(_, o)| o)
            .expect("at least the zero start");
        self.package(best.x, best.iterations, best.converged, best.gpg, starts, minima)
    }

    fn precond(&self, g: &[f64]) -> Vec<f64> {
        self.kb.solve(g)
    }
}

fn distinct_minima(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| x - l > DISTINCT_MINIMA_GAP) {
            out.push(x);
        }
    }
    out
}

struct LbfgsOutcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    gpg: f64,
}

/// L-BFGS with initial inverse Hessian P⁻¹ and Armijo backtracking.
/// Gradient entries at `fixed` are zeroed so those unknowns never move.
fn lbfgs<F, P>(f: F, precond: P, fixed: &[usize], x0: Vec<f64>, f_ref: f64, opts: &MinimizeOptions) -> LbfgsOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&[f64]) -> Vec<f64>,
{
    let project = |g: &mut Vec<f64>| {
        for &i in fixed {
            g[i] = 0.0;
        }
    };
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    project(&mut g);
    let threshold = opts.tol * f_ref.max(fx).max(f64::MIN_POSITIVE);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut gpg = linalg::dot(&g, &precond(&g));
    for it in 0..opts.max_iter {
        if gpg <= threshold {
            return LbfgsOutcome { x, value: fx, iterations: it, converged: true, gpg };
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * linalg::dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut r = precond(&q);
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * linalg::dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut slope = linalg::dot(&g, &d);
        if slope >= 0.0 {
            hist.clear();
            d = precond(&g).iter().map(|x| -x).collect();
            slope = linalg::dot(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (fnew, gnew) = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, mut gnew)) = accepted else {
            return LbfgsOutcome { x, value: fx, iterations: it, converged: gpg <= threshold * 1e3, gpg };
        };
        project(&mut gnew);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = linalg::dot(&s, &y);
        if sy > 1e-16 * linalg::norm(&s) * linalg::norm(&y) && sy > 0.0 {
            hist.push((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.remove(0);
            }
        }
        x = xn;
        fx = fnew;
        g = gnew;
        gpg = linalg::dot(&g, &precond(&g));
    }
    let converged = gpg <= threshold;
    LbfgsOutcome { x, value: fx, iterations: opts.max_iter, converged, gpg }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfValue {
    pub total: f64,
    /// ‖∇²v + B̄‖²_{L²}.
    pub hessian_term: f64,
    /// ‖det∇²v + curlᵀcurl S̄‖²_{H⁻²}.
    pub det_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfMinimum {
    pub v: ScalarGridField,
    pub value: InfValue,
    pub iterations: usize,
    pub converged: bool,
}

const FROB: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];

/// Ī₀(v) = ‖∇²v + B̄‖²_{L²} + ‖det∇²v + curlᵀcurl S̄‖²_{H⁻²}.
#[derive(Debug, Clone)]
pub struct InfFunctional {
    grid: Grid2,
    bbar: SymGridField2,
    ccs: Vec<f64>,
    weights: Vec<f64>,
    h: [Csr; 3],
    bih: BandCholesky,
    bih_free: Vec<usize>,
    cell: f64,
    pre: BandCholesky,
    pins: Vec<usize>,
}

impl InfFunctional {
    pub fn new(bbar: &SymGridField2, sbar: &SymGridField2) -> Result<InfFunctional, LinalgError> {
        InfFunctional::with_decomposer(bbar, sbar, &Decomposer::new(&bbar.grid))
    }

    pub fn with_decomposer(bbar: &SymGridField2, sbar: &SymGridField2, dec: &Decomposer) -> Result<InfFunctional, LinalgError> {
        let grid = bbar.grid;
        let weights = grid.trapezoid_weights();
        let (d1, d2) = derivative_matrices(&grid);
        let h = hessian_ops(&d1, &d2);
        let bih = BandCholesky::factor(dec.biharmonic_matrix(), &[])?;
        let k = linalg::weighted_normal(&[&h[0], &h[1], &h[2]], &cq_rows(&FROB, 2.0), &weights);
        let pins = affine_pins(&grid);
        let pre = BandCholesky::factor(&k, &pins)?;
        Ok(InfFunctional {
            grid,
            bbar: bbar.clone(),
            ccs: curl_t_curl(sbar).values,
            weights,
            h,
            bih,
            bih_free: dec.biharmonic_free().to_vec(),
            cell: grid.dx() * grid.dy(),
            pre,
            pins,
        })
    }

    fn value_grad(&self, v: &[f64], want_grad: bool) -> (InfValue, Vec<f64>) {
        let hv = apply3(&self.h, v);
        let n = self.grid.len();
        let m: Vec<[f64; 3]> = (0..n).map(|k| {
            let b = self.bbar.values[k];
            [hv[k][0] + b[0], hv[k][1] + b[1], hv[k][2] + b[2]]
        }).collect();
        let hessian_term: f64 = (0..n).map(|k| self.weights[k] * quad(&FROB, m[k])).sum();
        let g: Vec<f64> = (0..n).map(|k| hv[k][0] * hv[k][2] - hv[k][1] * hv[k][1] + self.ccs[k]).collect();
        let mut z: Vec<f64> = self.bih_free.iter().map(|&k| self.cell * g[k]).collect();
        let b = z.clone();
        self.bih.solve_in_place(&mut z);
        let det_term = linalg::dot(&b, &z).max(0.0);
        let value = InfValue { total: hessian_term + det_term, hessian_term, det_term };
        if !want_grad {
            return (value, Vec::new());
        }
        let mut grad = pull_back(&self.h, &cq_rows_fixed(2.0), &self.weights, &m);
        // d(det) · δv = H22 δH11 − 2 H12 δH12 + H11 δH22
        let mut zf = vec![0.0; n];
        for (&k, &x) in self.bih_free.iter().zip(&z) {
            zf[k] = 2.0 * self.cell * x;
        }
        let t = [
            (0..n).map(|k| zf[k] * hv[k][2]).collect::<Vec<f64>>(),
            (0..n).map(|k| -2.0 * zf[k] * hv[k][1]).collect(),
            (0..n).map(|k| zf[k] * hv[k][0]).collect(),
        ];
        for (op, ta) in self.h.iter().zip(&t) {
            for (gi, x) in grad.iter_mut().zip(op.tmatvec(ta)) {
                *gi += x;
            }
        }
        (value, grad)
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<InfValue, crate::decompose::DecomposeError> {
        Ok(self.value_grad(v, false).0)
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        self.value_grad(v, true).1
    }

    /// Direct minimization of Ī₀ from each of the given starts plus zero.
    pub fn minimize(&self, starts: &[Vec<f64>], opts: &MinimizeOptions) -> InfMinimum {
        let n = self.grid.len();
        let f_ref = self.value_grad(&vec![0.0; n], false).0.total;
        let mut all = vec![vec![0.0; n]];
        all.extend(starts.iter().cloned());
        let best = all
            .into_par_iter()
            .map(|x0| {
                lbfgs(
                    |x| {
                        let (v, g) = self.value_grad(x, true);
                        (v.total, g)
                    },
                    |g| self.pre.solve(g),
                    &self.pins,
                    x0,
                    f_ref,
                    opts,
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("zero start");
        let value = self.value_grad(&best.x, false).0;
        InfMinimum { v: ScalarGridField::from_values(self.grid, best.x), value, iterations: best.iterations, converged: best.converged }
    }
}

fn cq_rows_fixed(s: f64) -> [[f64; 3]; 3] {
    FROB.map(|r| r.map(|x| s * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SymExpr3;
    use crate::regimes::classify_exponents;

    fn functional(alpha: f64, gamma: f64, z: bool, s: &[(usize, usize, &str)], b: &[(usize, usize, &str)], n: usize) -> EnergyFunctional {
        let g = Grid2::unit_square(n).unwrap();
        let spec = classify_exponents(alpha, gamma, z).unwrap();
        let s = SymExpr3::from_entries(s).unwrap().sample(&g).unwrap();
        let b = SymExpr3::from_entries(b).unwrap().sample(&g).unwrap();
        assemble(&spec, &s, &b, &Material::default()).unwrap()
    }

    #[test]
    fn zero_prestrain_zero_energy() {
        let e = functional(4.0, 2.0, false, &[], &[], 17);
        let r = e.minimize(&MinimizeOptions::default());
        assert!(r.value <= 1e-12, "{}", r.value);
        let z = e.evaluate(&ScalarGridField::zeros(e.grid), &VectorGridField2::zeros(e.grid));
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn reduced_gradient_matches_differences() {
        let e = functional(4.0, 2.0, false, &[(0, 0, "x1*x2"), (1, 1, "x1^2")], &[(0, 0, "x2")], 13);
        let v = ScalarGridField::from_fn(e.grid, |x, y| (2.0 * x + y).sin() * 0.3 + x * x * y);
        let g = e.reduced_gradient(&v);
        for k in [20usize, 50, 84, 100] {
            let mut p = v.clone();
            let mut m = v.clone();
            let h = 1e-5;
            p.values[k] += h;
            m.values[k] -= h;
            let fd = (e.reduced_energy(&p) - e.reduced_energy(&m)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn inner_solve_is_stationary() {
        let e = functional(4.0, 2.0, false, &[(0, 1, "x1^2")], &[(1, 1, "x1")], 13);
        let v = ScalarGridField::from_fn(e.grid, |x, y| x * y * y);
        let w = e.inner_solve(&v);
        let r = e.stretching_gradient(&v, &w);
        let scale = e.evaluate(&v, &w).value.max(1e-12);
        assert!(linalg::norm(&r) <= 1e-8 * scale.sqrt().max(1.0));
        let base = e.evaluate(&v, &w).value;
        let mut w2 = w.clone();
        w2.values[30][0] += 1e-3;
        assert!(e.evaluate(&v, &w2).value > base);
    }

    #[test]
    fn quartic_homogeneity() {
        let e = functional(4.0, 2.0, false, &[], &[], 9);
        let v = ScalarGridField::from_fn(e.grid, |x, y| x * x - y * x);
        let w = VectorGridField2::from_fn(e.grid, |x, y| [x * y, y * y]);
        let c = 50.0;
        let a = e.evaluate(&v, &w).value;
        let b = e.evaluate(&v.scaled(c), &VectorGridField2 { grid: w.grid, values: w.values.iter().map(|p| [c * c * p[0], c * c * p[1]]).collect() }).value;
        assert!((b / c.powi(4) / e.evaluate(&v, &w).stretching - 1.0).abs() < 1e-2, "{a} {b}");
    }

    #[test]
    fn cylinder_with_matching_stretch_is_free() {
        let e = functional(4.0, 2.0, false, &[(0, 0, "x1^2/2")], &[(0, 0, "-1")], 17);
        let r = e.minimize(&MinimizeOptions::default());
        assert!(r.value <= 1e-10, "{}", r.value);
    }

    #[test]
    fn linear_case_direct_solve() {
        let e = functional(6.0, 3.0, false, &[], &[(0, 0, "x2")], 17);
        assert!(!e.is_nonconvex());
        let r = e.minimize(&MinimizeOptions::default());
        assert!(r.value > 1e-4 && r.stretching.abs() < 1e-20);
        assert!(linalg::norm(&e.reduced_gradient(&r.v)) < 1e-10);
    }

    #[test]
    fn minima_deduplication() {
        assert_eq!(distinct_minima([1.0, 1.0 + 1e-9, 2.0].into_iter()), vec![1.0, 2.0]);
    }

    #[test]
    fn inf_gradient_matches_differences() {
        let g = Grid2::unit_square(13).unwrap();
        let bbar = SymGridField2::from_fn(g, |x, y| [y, x * 0.5, x * y]);
        let sbar = SymGridField2::from_fn(g, |x, y| [x * x, 0.0, y * x]);
        let f = InfFunctional::new(&bbar, &sbar).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|k| { let (x, y) = g.point(k); x * x * y + 0.2 * (3.0 * y).cos() }).collect();
        let grad = f.gradient(&v);
        for k in [28usize, 60, 90] {
            let h = 1e-5;
            let mut p = v.clone();
            let mut m = v.clone();
            p[k] += h;
            m[k] -= h;
            let fd = (f.evaluate(&p).unwrap().total - f.evaluate(&m).unwrap().total) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * grad[k].abs().max(1e-3), "{k}: {fd} vs {}", grad[k]);
        }
    }
}
