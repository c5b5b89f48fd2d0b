//! Forward-mode jets in two variables.
//!
//! [`Jet3`] carries derivatives up to third order; it is what the
//! expression evaluator propagates. [`Jet2`] is the public value/gradient/
//! Hessian view. Symmetric derivative arrays are indexed by how many of the
//! differentiation indices equal `x2`: `hess[k]` is ∂^{2-k}_1 ∂^k_2 and
//! `third[k]` is ∂^{3-k}_1 ∂^k_2.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl From<Jet3> for Jet2 {
    fn from(j: Jet3) -> Self {
        Jet2 {
            value: j.v,
            grad: j.g,
            hess: [[j.h[0], j.h[1]], [j.h[1], j.h[2]]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [f64; 3],
    pub t: [f64; 4],
}

/// Index triples (i ≤ j ≤ k) for the four third-derivative slots.
const TRIPLES: [[usize; 3]; 4] = [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]];

impl Jet3 {
    pub fn constant(c: f64) -> Jet3 {
        Jet3 { v: c, ..Default::default() }
    }

    /// The coordinate function x_{k+1} evaluated at `value`.
    pub fn variable(k: usize, value: f64) -> Jet3 {
        let mut g = [0.0; 2];
        g[k] = 1.0;
        Jet3 { v: value, g, ..Default::default() }
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.t[i + j + k]
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.g.iter().all(|x| x.is_finite())
            && self.h.iter().all(|x| x.is_finite())
            && self.t.iter().all(|x| x.is_finite())
    }

    pub fn scale(self, c: f64) -> Jet3 {
        Jet3 {
            v: c * self.v,
            g: self.g.map(|x| c * x),
            h: self.h.map(|x| c * x),
            t: self.t.map(|x| c * x),
        }
    }

    /// f ∘ self, given f and its first three derivatives at `self.v`.
    pub fn compose(self, f: [f64; 4]) -> Jet3 {
        let u = &self;
        let g = [f[1] * u.g[0], f[1] * u.g[1]];
        let mut h = [0.0; 3];
        for (k, hk) in h.iter_mut().enumerate() {
            let (i, j) = if k == 0 { (0, 0) } else if k == 1 { (0, 1) } else { (1, 1) };
            *hk = f[2] * u.g[i] * u.g[j] + f[1] * u.h[k];
        }
        let mut t = [0.0; 4];
        for (m, tm) in t.iter_mut().enumerate() {
            let [i, j, k] = TRIPLES[m];
            *tm = f[3] * u.g[i] * u.g[j] * u.g[k]
                + f[2] * (u.hess(i, j) * u.g[k] + u.hess(i, k) * u.g[j] + u.hess(j, k) * u.g[i])
                + f[1] * u.t[m];
        }
        Jet3 { v: f[0], g, h, t }
    }

    pub fn recip(self) -> Jet3 {
        let x = self.v;
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sin(self) -> Jet3 {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Jet3 {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(self) -> Jet3 {
        let e = self.v.exp();
        self.compose([e; 4])
    }

    pub fn ln(self) -> Jet3 {
        let x = self.v;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn sqrt(self) -> Jet3 {
        let x = self.v;
        let s = x.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    pub fn abs(self) -> Jet3 {
        let sgn = if self.v > 0.0 {
            1.0
        } else if self.v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.compose([self.v.abs(), sgn, 0.0, 0.0])
    }

    /// Integer power by repeated squaring, exact for polynomials.
    pub fn powi(self, n: i64) -> Jet3 {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self;
        let mut acc = Jet3::constant(1.0);
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    /// Real power with a constant exponent.
    pub fn powf(self, c: f64) -> Jet3 {
        if c.fract() == 0.0 && c.abs() <= 1024.0 {
            return self.powi(c as i64);
        }
        let x = self.v;
        self.compose([
            x.powf(c),
            c * x.powf(c - 1.0),
            c * (c - 1.0) * x.powf(c - 2.0),
            c * (c - 1.0) * (c - 2.0) * x.powf(c - 3.0),
        ])
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3 {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
            t: [self.t[0] + o.t[0], self.t[1] + o.t[1], self.t[2] + o.t[2], self.t[3] + o.t[3]],
        }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        self + (-o)
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, b: Jet3) -> Jet3 {
        let a = &self;
        let g = [a.g[0] * b.v + a.v * b.g[0], a.g[1] * b.v + a.v * b.g[1]];
        let mut h = [0.0; 3];
        for (k, hk) in h.iter_mut().enumerate() {
            let (i, j) = if k == 0 { (0, 0) } else if k == 1 { (0, 1) } else { (1, 1) };
            *hk = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
        }
        let mut t = [0.0; 4];
        for (m, tm) in t.iter_mut().enumerate() {
            let [i, j, k] = TRIPLES[m];
            *tm = a.t[m] * b.v
                + a.hess(i, j) * b.g[k]
                + a.hess(i, k) * b.g[j]
                + a.hess(j, k) * b.g[i]
                + a.g[i] * b.hess(j, k)
                + a.g[j] * b.hess(i, k)
                + a.g[k] * b.hess(i, j)
                + a.v * b.t[m];
        }
        Jet3 { v: a.v * b.v, g, h, t }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_coordinates() {
        let j = Jet3::variable(0, 2.0) * Jet3::variable(1, 3.0);
        let j2: Jet2 = j.into();
        assert_eq!(j2.value, 6.0);
        assert_eq!(j2.grad, [3.0, 2.0]);
        assert_eq!(j2.hess, [[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn cubic_third_derivatives() {
        // x1^2 x2 : ∂111 = 0, ∂112 = 2, ∂122 = 0
        let x = Jet3::variable(0, 0.7);
        let y = Jet3::variable(1, -1.3);
        let j = x.powi(2) * y;
        assert_eq!(j.t, [0.0, 2.0, 0.0, 0.0]);
        let k = y.powi(3);
        assert_eq!(k.t[3], 6.0);
    }

    #[test]
    fn chain_rule_against_closed_form() {
        let x = Jet3::variable(0, 0.4);
        let y = Jet3::variable(1, 0.9);
        let j = (x * y).sin();
        let s = (0.4f64 * 0.9).sin();
        let c = (0.4f64 * 0.9).cos();
        assert!((j.h[1] - (c - 0.36 * s)).abs() < 1e-15);
        assert!((j.t[0] - (-0.9f64.powi(3) * c)).abs() < 1e-15);
    }

    #[test]
    fn recip_roundtrip() {
        let x = Jet3::variable(0, 1.7) + Jet3::variable(1, 0.2).powi(2);
        let one = x * x.recip();
        assert!((one.v - 1.0).abs() < 1e-15);
        assert!(one.g.iter().chain(one.h.iter()).chain(one.t.iter()).all(|v| v.abs() < 1e-14));
    }
}
