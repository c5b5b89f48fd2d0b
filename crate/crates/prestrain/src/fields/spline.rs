//! Tensor-product cubic B-spline interpolation of nodal data with
//! not-a-knot end conditions. Used to turn grid minimizers back into
//! functions with exact derivatives up to third order.

use super::field::ScalarGridField;
use super::grid::Grid2;
use super::jet::Jet3;
use nalgebra::DMatrix;

/// Maps nodal values to the n + 2 B-spline coefficients along one axis.
fn coefficient_map(n: usize) -> DMatrix<f64> {
    let m = n + 2;
    let mut a = DMatrix::<f64>::zeros(m, m);
    // Row 0 and row m-1 hold the not-a-knot conditions (third-derivative
    // continuity across knots 1 and n-2); rows 1..=n interpolate.
    let nak = [-1.0, 4.0, -6.0, 4.0, -1.0];
    for (c, w) in nak.iter().enumerate() {
        a[(0, c)] = *w;
        a[(m - 1, m - 5 + c)] = *w;
    }
    for k in 0..n {
        a[(k + 1, k)] = 1.0 / 6.0;
        a[(k + 1, k + 1)] = 4.0 / 6.0;
        a[(k + 1, k + 2)] = 1.0 / 6.0;
    }
    let inv = a.lu().try_inverse().expect("not-a-knot spline system is nonsingular");
    inv.columns(1, n).into_owned()
}

/// Cubic B-spline basis values and their first three derivatives on [0, 1].
fn basis(s: f64) -> [[f64; 4]; 4] {
    let t = 1.0 - s;
    [
        [t * t * t / 6.0, (3.0 * s * s * s - 6.0 * s * s + 4.0) / 6.0, (-3.0 * s * s * s + 3.0 * s * s + 3.0 * s + 1.0) / 6.0, s * s * s / 6.0],
        [-t * t / 2.0, (3.0 * s * s - 4.0 * s) / 2.0, (-3.0 * s * s + 2.0 * s + 1.0) / 2.0, s * s / 2.0],
        [t, 3.0 * s - 2.0, -3.0 * s + 1.0, s],
        [-1.0, 3.0, -3.0, 1.0],
    ]
}

#[derive(Debug, Clone)]
pub struct Spline2 {
    grid: Grid2,
    /// Coefficients c[(i, j)], i over x1 (nx + 2), j over x2 (ny + 2).
    coef: DMatrix<f64>,
}

impl Spline2 {
    pub fn interpolate(f: &ScalarGridField) -> Spline2 {
        let g = f.grid;
        let data = DMatrix::from_fn(g.nx, g.ny, |i, j| f.values[g.idx(i, j)]);
        let mx = coefficient_map(g.nx);
        let my = if g.ny == g.nx { mx.clone() } else { coefficient_map(g.ny) };
        let coef = &mx * data * my.transpose();
        Spline2 { grid: g, coef }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    fn locate(x: f64, x0: f64, h: f64, n: usize) -> (usize, f64) {
        let u = (x - x0) / h;
        let k = (u.floor().max(0.0) as usize).min(n - 2);
        (k, u - k as f64)
    }

    pub fn jet3(&self, x1: f64, x2: f64) -> Jet3 {
        let g = &self.grid;
        let (hx, hy) = (g.dx(), g.dy());
        let (kx, sx) = Self::locate(x1, g.x_min, hx, g.nx);
        let (ky, sy) = Self::locate(x2, g.y_min, hy, g.ny);
        let bx = basis(sx);
        let by = basis(sy);
        // d[p][q] = ∂^p_1 ∂^q_2 for p + q ≤ 3.
        let mut d = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                let c = self.coef[(kx + a, ky + b)];
                for p in 0..4 {
                    for q in 0..4 - p {
                        d[p][q] += c * bx[p][a] * by[q][b];
                    }
                }
            }
        }
        for (p, row) in d.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                *v /= hx.powi(p as i32) * hy.powi(q as i32);
            }
        }
        Jet3 {
            v: d[0][0],
            g: [d[1][0], d[0][1]],
            h: [d[2][0], d[1][1], d[0][2]],
            t: [d[3][0], d[2][1], d[1][2], d[0][3]],
        }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.jet3(x1, x2).v
    }
}
