//! Sparse matrices, conjugate gradients and a banded Cholesky factorization.
//!
//! The solvers here are deliberately small: every system assembled by the
//! crate is symmetric, lives on a tensor-product grid and has a bandwidth of
//! a few grid rows.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from (row, col, value) triplets; duplicates are summed
    /// and explicit zeros are kept out.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Csr {
        trips.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut data: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr { nrows, ncols, indptr, indices, data }.pruned()
    }

    fn pruned(self) -> Csr {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Csr {
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yr = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// y = Aᵀ x.
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trips.push((c, r, v));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, trips)
    }

    /// Sparse product self · other.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                if acc[c] != 0.0 {
                    indices.push(c);
                    data.push(acc[c]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        Csr { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }
    }

    pub fn scale(&self, s: f64) -> Csr {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// diag(d) · self.
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.data[k] *= d[r];
            }
        }
        out.pruned()
    }

    /// self + s · other.
    pub fn add_scaled(&self, other: &Csr, s: f64) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trips = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trips.push((r, c, v));
            }
            for (c, v) in other.row(r) {
                trips.push((r, c, s * v));
            }
        }
        Csr::from_triplets(self.nrows, self.ncols, trips)
    }

    /// Keeps the rows and columns listed in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.ncols.max(self.nrows)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut trips = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                if map[c] != usize::MAX {
                    trips.push((new_r, map[c], v));
                }
            }
        }
        Csr::from_triplets(keep.len(), keep.len(), trips)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for r in 0..self.nrows {
            for (c, _) in self.row(r) {
                bw = bw.max(r.abs_diff(c));
            }
        }
        bw
    }
}

/// Σ_ab c[a][b] · Aₐᵀ diag(w) A_b, the stiffness matrix of a pointwise
/// quadratic form m ↦ mᵀ C m with m = (A₀x, A₁x, …) integrated with weights w.
pub fn weighted_normal(ops: &[&Csr], c: &[Vec<f64>], w: &[f64]) -> Csr {
    let n = ops[0].ncols;
    let mut total = Csr::from_triplets(n, n, Vec::new());
    let transposed: Vec<Csr> = ops.iter().map(|a| a.transpose()).collect();
    for (b, ob) in ops.iter().enumerate() {
        let wb = ob.scale_rows(w);
        for (a, at) in transposed.iter().enumerate() {
            if c[a][b] == 0.0 {
                continue;
            }
            total = total.add_scaled(&at.matmul(&wb), c[a][b]);
        }
    }
    total
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for an SPD operator. `x` holds the initial guess on
/// entry and the solution on exit. An optional diagonal preconditioner is
/// given as the inverse diagonal.
pub fn cg<F>(
    mut apply: F,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    inv_diag: Option<&[f64]>,
) -> CgReport
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgReport { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let precond = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => z.iter_mut().zip(r.iter().zip(d)).for_each(|(zi, (ri, di))| *zi = ri * di),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return CgReport { iterations: 0, relative_residual: rel, converged: true };
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return CgReport { iterations: it, relative_residual: rel, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return CgReport { iterations: it, relative_residual: rel, converged: true };
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgReport { iterations: max_iter, relative_residual: rel, converged: false }
}

/// Cholesky factorization in band storage. Rows listed as `fixed` are
/// replaced by identity rows, which pins those unknowns to zero and removes
/// null spaces (rigid motions, affine functions) before factorization.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    fixed: Vec<bool>,
}

impl BandCholesky {
    pub fn factor(a: &Csr, fixed: &[usize]) -> Result<BandCholesky, LinalgError> {
        if a.nrows != a.ncols {
            return Err(LinalgError::Dimension(format!("{}x{} is not square", a.nrows, a.ncols)));
        }
        let n = a.nrows;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut is_fixed = vec![false; n];
        for &f in fixed {
            is_fixed[f] = true;
        }
        // Row i stores entries j in [i - bw, i] at offset j + bw - i.
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            if is_fixed[i] {
                l[i * w + bw] = 1.0;
                continue;
            }
            for (j, v) in a.row(i) {
                if j <= i && !is_fixed[j] {
                    l[i * w + j + bw - i] = v;
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let j0 = j.saturating_sub(bw).max(i0);
                let mut s = l[i * w + j + bw - i];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in j0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: i, value: s });
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Ok(BandCholesky { n, bw, l, fixed: is_fixed })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A x = b in place; pinned unknowns come back as zero.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            if self.fixed[i] {
                b[i] = 0.0;
            }
        }
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[ri + k] * b[k];
            }
            b[i] = s / self.l[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            let s = b[i] / self.l[ri + i];
            b[i] = s;
            for k in i.saturating_sub(bw)..i {
                b[k] -= self.l[ri + k] * s;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 1, 0.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn matmul_and_transpose_agree_with_dense() {
        let a = Csr::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = Csr::from_triplets(3, 2, vec![(0, 1, 4.0), (1, 0, 5.0), (2, 0, 6.0)]);
        let c = a.matmul(&b);
        assert_eq!(c.get(0, 0), 12.0);
        assert_eq!(c.get(0, 1), 4.0);
        assert_eq!(c.get(1, 0), 15.0);
        assert_eq!(a.transpose().get(2, 0), 2.0);
        assert_eq!(a.tmatvec(&[1.0, 1.0]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn cg_and_cholesky_solve_the_same_system() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 40];
        let rep = cg(|p, q| a.matvec_into(p, q), &b, &mut x, 1e-13, 1000, None);
        assert!(rep.converged);
        let chol = BandCholesky::factor(&a, &[]).unwrap();
        let y = chol.solve(&b);
        for i in 0..40 {
            assert!((x[i] - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn pinned_rows_are_zero() {
        let a = laplace_1d(10);
        let chol = BandCholesky::factor(&a, &[3]).unwrap();
        let x = chol.solve(&[1.0; 10]);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(BandCholesky::factor(&a, &[]).is_err());
    }
}
