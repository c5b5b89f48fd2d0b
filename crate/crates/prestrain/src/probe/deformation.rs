//! Explicit recovery deformations u^h(x', x₃) with exact gradients.
//!
//! Every variant has the form u − id = U₀(x') + x₃U₁(x') + x₃²U₂(x'), with
//! x₃ the physical thickness coordinate. The in-plane ingredients are carried
//! as first-order duals built from third-order jets, so ∇u is exact.

use super::ProbeError;
use crate::elastic::{CompletionMap, Material};
use crate::fields::{sym3_slot, EvalError, FieldExpr, Jet3, ScalarGridField, Spline2, SymExpr3};
use crate::gamma::MinimizeResult;
use crate::regimes::{RegimeSpec, TheoremCase};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Recseq0,
    Recseq,
    Recseq5,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Recseq0 => "recseq0",
            Variant::Recseq => "recseq",
            Variant::Recseq5 => "recseq5",
        }
    }

    /// Variant matching a theorem case that has a plate limit.
    pub fn for_case(case: TheoremCase) -> Option<Variant> {
        match case {
            TheoremCase::T11i | TheoremCase::T11ii | TheoremCase::T11iii => Some(Variant::Recseq),
            TheoremCase::T14i | TheoremCase::T14ii | TheoremCase::T14iii => Some(Variant::Recseq5),
            _ => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = ProbeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recseq0" => Ok(Variant::Recseq0),
            "recseq" => Ok(Variant::Recseq),
            "recseq5" => Ok(Variant::Recseq5),
            other => Err(ProbeError::Variant(format!("unknown variant '{other}'"))),
        }
    }
}

/// A scalar midplate field: a grid spline or an analytic expression.
#[derive(Debug, Clone)]
pub enum Ingredient {
    Spline(Spline2),
    Expr(FieldExpr),
}

impl Ingredient {
    pub fn zero() -> Ingredient {
        Ingredient::Expr(FieldExpr::constant(0.0))
    }

    pub fn from_grid(f: &ScalarGridField) -> Ingredient {
        Ingredient::Spline(Spline2::interpolate(f))
    }

    pub fn jet3(&self, x1: f64, x2: f64) -> Result<Jet3, EvalError> {
        match self {
            Ingredient::Spline(s) => Ok(s.jet3(x1, x2)),
            Ingredient::Expr(e) => e.eval_jet3(x1, x2),
        }
    }
}

impl From<FieldExpr> for Ingredient {
    fn from(e: FieldExpr) -> Self {
        Ingredient::Expr(e)
    }
}

/// Value with its in-plane gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct D {
    v: f64,
    g: [f64; 2],
}

impl D {
    fn val(j: &Jet3) -> D {
        D { v: j.v, g: j.g }
    }
    #[allow(clippy::self_named_constructors)]
    fn d(j: &Jet3, k: usize) -> D {
        D { v: j.g[k], g: [j.hess(k, 0), j.hess(k, 1)] }
    }
    fn dd(j: &Jet3, k: usize, l: usize) -> D {
        D { v: j.hess(k, l), g: [j.third(k, l, 0), j.third(k, l, 1)] }
    }
}

impl Add for D {
    type Output = D;
    fn add(self, o: D) -> D {
        D { v: self.v + o.v, g: [self.g[0] + o.g[0], self.g[1] + o.g[1]] }
    }
}

impl Sub for D {
    type Output = D;
    fn sub(self, o: D) -> D {
        self + (-o)
    }
}

impl Neg for D {
    type Output = D;
    fn neg(self) -> D {
        self * -1.0
    }
}

impl Mul for D {
    type Output = D;
    fn mul(self, o: D) -> D {
        D {
            v: self.v * o.v,
            g: [self.g[0] * o.v + self.v * o.g[0], self.g[1] * o.v + self.v * o.g[1]],
        }
    }
}

impl Mul<f64> for D {
    type Output = D;
    fn mul(self, c: f64) -> D {
        D { v: self.v * c, g: [self.g[0] * c, self.g[1] * c] }
    }
}

impl Mul<D> for f64 {
    type Output = D;
    fn mul(self, d: D) -> D {
        d * self
    }
}

fn complete(map: &CompletionMap, m: [D; 3]) -> [D; 3] {
    let v = map.apply(m.map(|d| d.v));
    let g0 = map.apply(m.map(|d| d.g[0]));
    let g1 = map.apply(m.map(|d| d.g[1]));
    std::array::from_fn(|r| D { v: v[r], g: [g0[r], g1[r]] })
}

/// Scalar coefficients of the correction fields at finite h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c_s: f64,
    pub c_v: f64,
    pub c_b: f64,
    pub c_ss: f64,
    pub c_a: f64,
    pub c_sb: f64,
}

/// Displacement, deformation gradient and ∇u − I at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub u: Vector3<f64>,
    pub grad: Matrix3<f64>,
    pub grad_minus_id: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct Deformation3D {
    pub variant: Variant,
    pub v: Ingredient,
    pub w: [Ingredient; 2],
    pub s: SymExpr3,
    pub b: SymExpr3,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    /// When false the correction fields d, d̄ (and b⃗ for recseq0) are zero.
    pub corrections: bool,
    /// Global rotation applied after the construction.
    pub rotation: Matrix3<f64>,
    completion: CompletionMap,
}

#[allow(clippy::too_many_arguments)]
pub fn build_recovery(
    variant: Variant,
    v: Ingredient,
    w: [Ingredient; 2],
    s: &SymExpr3,
    b: &SymExpr3,
    alpha: f64,
    gamma: f64,
    delta: f64,
    material: &Material,
) -> Result<Deformation3D, ProbeError> {
    if ![alpha, gamma, delta].iter().all(|e| e.is_finite() && *e > 0.0) {
        return Err(ProbeError::Variant(format!("exponents must be positive: α={alpha}, γ={gamma}, δ={delta}")));
    }
    const EPS: f64 = 1e-12;
    match variant {
        Variant::Recseq0 => {
            if (delta - alpha / 2.0).abs() > EPS {
                return Err(ProbeError::Variant(format!("recseq0 requires δ = α/2, got δ={delta}, α={alpha}")));
            }
        }
        Variant::Recseq => {
            if delta < 2.0 - EPS || alpha < 2.0 + delta - EPS || gamma < delta - EPS {
                return Err(ProbeError::Variant(format!(
                    "recseq requires 2 ≤ δ ≤ γ and α ≥ 2+δ, got α={alpha}, γ={gamma}, δ={delta}"
                )));
            }
        }
        Variant::Recseq5 => {
            if !(0..2).all(|a| (a..2).all(|c| s.entry(a, c).is_zero_literal())) {
                return Err(ProbeError::Variant("recseq5 requires the in-plane block of S to vanish".into()));
            }
            if delta < 2.0 - EPS || alpha < delta - EPS || gamma < delta - EPS {
                return Err(ProbeError::Variant(format!(
                    "recseq5 requires 2 ≤ δ ≤ min(α, γ), got α={alpha}, γ={gamma}, δ={delta}"
                )));
            }
        }
    }
    Ok(Deformation3D {
        variant,
        v,
        w,
        s: s.clone(),
        b: b.clone(),
        alpha,
        gamma,
        delta,
        corrections: true,
        rotation: Matrix3::identity(),
        completion: CompletionMap::new(material),
    })
}

/// Recovery deformation built from a plate-limit minimizer.
pub fn recovery_from_minimizer(
    spec: &RegimeSpec,
    min: &MinimizeResult,
    s: &SymExpr3,
    b: &SymExpr3,
    material: &Material,
) -> Result<Deformation3D, ProbeError> {
    let variant = Variant::for_case(spec.theorem_case)
        .ok_or_else(|| ProbeError::Variant(format!("case {} has no recovery construction", spec.theorem_case)))?;
    let delta = spec.delta.ok_or_else(|| ProbeError::Variant("regime has no δ".into()))?;
    build_recovery(
        variant,
        Ingredient::from_grid(&min.v),
        [Ingredient::from_grid(&min.w.component(0)), Ingredient::from_grid(&min.w.component(1))],
        s,
        b,
        spec.alpha,
        spec.gamma,
        delta,
        material,
    )
}

impl Deformation3D {
    pub fn without_corrections(mut self) -> Self {
        self.corrections = false;
        self
    }

    pub fn rotated(mut self, r: Matrix3<f64>) -> Self {
        self.rotation = r * self.rotation;
        self
    }

    pub fn coefficients(&self, h: f64) -> Coefficients {
        let (a, g, d) = (self.alpha, self.gamma, self.delta);
        Coefficients {
            c_s: h.powf(a / 2.0 - 1.0 - d / 2.0),
            c_v: h.powf(d / 2.0 - 1.0),
            c_b: h.powf((g - d) / 2.0),
            c_ss: h.powf(a - 1.0 - d / 2.0),
            c_a: h.powf(a / 2.0 - 1.0),
            c_sb: h.powf((a - d) / 2.0),
        }
    }

    /// A^h − I = h^{α/2}S + x₃h^{γ/2}B at physical x₃.
    pub fn prestrain(&self, h: f64, x: [f64; 3]) -> Result<Matrix3<f64>, EvalError> {
        let (ha, hg) = (h.powf(self.alpha / 2.0), h.powf(self.gamma / 2.0));
        let mut p = Matrix3::zeros();
        for a in 0..3 {
            for c in a..3 {
                let sv = self.s.entry(a, c).eval(x[0], x[1])?;
                let bv = self.b.entry(a, c).eval(x[0], x[1])?;
                let e = ha * sv + x[2] * hg * bv;
                p[(a, c)] = e;
                p[(c, a)] = e;
            }
        }
        Ok(p)
    }

    /// Correction fields (d, d̄) at x'. Both zero when corrections are off
    /// or for recseq0.
    pub fn corrections_at(&self, h: f64, x1: f64, x2: f64) -> Result<([f64; 3], [f64; 3]), EvalError> {
        let (d, db) = self.correction_duals(h, x1, x2)?;
        Ok((d.map(|x| x.v), db.map(|x| x.v)))
    }

    fn correction_duals(&self, h: f64, x1: f64, x2: f64) -> Result<([D; 3], [D; 3]), EvalError> {
        let zero = [D::default(); 3];
        if !self.corrections || self.variant == Variant::Recseq0 {
            return Ok((zero, zero));
        }
        let c = self.coefficients(h);
        let jv = self.v.jet3(x1, x2)?;
        let jw = [self.w[0].jet3(x1, x2)?, self.w[1].jet3(x1, x2)?];
        let sj = self.s.jets(x1, x2)?;
        let bj = self.b.jets(x1, x2)?;
        let sv = |a: usize, b: usize| D::val(&sj[sym3_slot(a, b)]);
        let sd = |a: usize, b: usize, k: usize| D::d(&sj[sym3_slot(a, b)], k);
        let bv = |a: usize, b: usize| D::val(&bj[sym3_slot(a, b)]);
        let dv = [D::d(&jv, 0), D::d(&jv, 1)];
        let gv2 = dv[0] * dv[0] + dv[1] * dv[1];
        let symgrad_w = [D::d(&jw[0], 0), 0.5 * (D::d(&jw[0], 1) + D::d(&jw[1], 0)), D::d(&jw[1], 1)];
        let half_vv = [0.5 * c.c_v * dv[0] * dv[0], 0.5 * c.c_v * dv[0] * dv[1], 0.5 * c.c_v * dv[1] * dv[1]];
        let hess = [D::dd(&jv, 0, 0), D::dd(&jv, 0, 1), D::dd(&jv, 1, 1)];
        let b22 = [bv(0, 0), bv(0, 1), bv(1, 1)];

        let (d, dbar);
        match self.variant {
            Variant::Recseq => {
                let s22 = [sv(0, 0), sv(0, 1), sv(1, 1)];
                let ms: [D; 3] = std::array::from_fn(|k| -c.c_s * s22[k] + half_vv[k] + symgrad_w[k]);
                let f = complete(&self.completion, ms);
                d = [
                    2.0 * (f[0] + c.c_s * sv(0, 2)),
                    2.0 * (f[1] + c.c_s * sv(1, 2)),
                    f[2] + c.c_s * sv(2, 2) - 0.5 * c.c_v * gv2,
                ];
                let mb: [D; 3] = std::array::from_fn(|k| hess[k] + c.c_b * b22[k]);
                let fb = complete(&self.completion, mb);
                dbar = [
                    2.0 * (c.c_b * bv(0, 2) - fb[0]),
                    2.0 * (c.c_b * bv(1, 2) - fb[1]),
                    c.c_b * bv(2, 2) - fb[2],
                ];
            }
            Variant::Recseq5 => {
                let s = [sv(0, 2), sv(1, 2)];
                let s33 = sv(2, 2);
                let ss = [s[0] * s[0], s[0] * s[1], s[1] * s[1]];
                let ms: [D; 3] = std::array::from_fn(|k| -0.5 * c.c_ss * ss[k] + half_vv[k] + symgrad_w[k]);
                let f = complete(&self.completion, ms);
                d = [
                    2.0 * f[0] + c.c_ss * s33 * s[0] - c.c_a * s33 * dv[0],
                    2.0 * f[1] + c.c_ss * s33 * s[1] - c.c_a * s33 * dv[1],
                    f[2] - 1.5 * c.c_ss * (ss[0] + ss[2]) + 2.0 * c.c_a * (s[0] * dv[0] + s[1] * dv[1]) - 0.5 * c.c_v * gv2,
                ];
                let symgrad_s = [sd(0, 2, 0), 0.5 * (sd(0, 2, 1) + sd(1, 2, 0)), sd(1, 2, 1)];
                let mb: [D; 3] = std::array::from_fn(|k| hess[k] + c.c_b * b22[k] - 2.0 * c.c_sb * symgrad_s[k]);
                let fb = complete(&self.completion, mb);
                dbar = [
                    2.0 * c.c_b * bv(0, 2) - c.c_sb * sd(2, 2, 0) - 2.0 * fb[0],
                    2.0 * c.c_b * bv(1, 2) - c.c_sb * sd(2, 2, 1) - 2.0 * fb[1],
                    c.c_b * bv(2, 2) - fb[2],
                ];
            }
            Variant::Recseq0 => unreachable!(),
        }
        Ok((d, dbar))
    }

    /// (U₀, U₁, U₂) with u − id = U₀ + x₃U₁ + x₃²U₂.
    fn layers(&self, h: f64, x1: f64, x2: f64) -> Result<[[D; 3]; 3], EvalError> {
        let jv = self.v.jet3(x1, x2)?;
        let jw = [self.w[0].jet3(x1, x2)?, self.w[1].jet3(x1, x2)?];
        let v = D::val(&jv);
        let dv = [D::d(&jv, 0), D::d(&jv, 1)];
        let w = [D::val(&jw[0]), D::val(&jw[1])];
        let sj = self.s.jets(x1, x2)?;
        let sv = |a: usize, b: usize| D::val(&sj[sym3_slot(a, b)]);
        match self.variant {
            Variant::Recseq0 => {
                let b1 = h.powf(self.delta / 2.0);
                let (b2, b3) = (b1 * b1, b1 * b1 * b1);
                let u0 = [b2 * w[0], b2 * w[1], b1 * v];
                let gv2 = dv[0] * dv[0] + dv[1] * dv[1];
                let s = [sv(0, 2), sv(1, 2)];
                let s33 = sv(2, 2);
                let bvec = if self.corrections {
                    // (∇w)ᵀ∇v: component i is Σ_k ∂_i w_k ∂_k v
                    let gw = |k: usize, i: usize| D::d(&jw[k], i);
                    [
                        -1.0 * s33 * dv[0] + 0.5 * gv2 * dv[0] + gw(0, 0) * dv[0] + gw(1, 0) * dv[1],
                        -1.0 * s33 * dv[1] + 0.5 * gv2 * dv[1] + gw(0, 1) * dv[0] + gw(1, 1) * dv[1],
                        2.0 * (dv[0] * s[0] + dv[1] * s[1]),
                    ]
                } else {
                    [D::default(); 3]
                };
                let u1 = [
                    -b1 * dv[0] + 2.0 * b2 * s[0] + b3 * bvec[0],
                    -b1 * dv[1] + 2.0 * b2 * s[1] + b3 * bvec[1],
                    b2 * (s33 - 0.5 * gv2) + b3 * bvec[2],
                ];
                Ok([u0, u1, [D::default(); 3]])
            }
            Variant::Recseq | Variant::Recseq5 => {
                let a = h.powf(self.delta / 2.0);
                let (d, dbar) = self.correction_duals(h, x1, x2)?;
                let u0 = [h * a * w[0], h * a * w[1], a * v];
                let mut u1 = [-a * dv[0] + h * a * d[0], -a * dv[1] + h * a * d[1], h * a * d[2]];
                if self.variant == Variant::Recseq5 {
                    let ha = h.powf(self.alpha / 2.0);
                    u1[0] = u1[0] + 2.0 * ha * sv(0, 2);
                    u1[1] = u1[1] + 2.0 * ha * sv(1, 2);
                    u1[2] = u1[2] + ha * sv(2, 2);
                }
                let u2 = dbar.map(|x| 0.5 * a * x);
                Ok([u0, u1, u2])
            }
        }
    }

    /// u and ∇u at (x₁, x₂, x₃) with physical x₃.
    pub fn eval(&self, h: f64, x: [f64; 3]) -> Result<PointEval, EvalError> {
        let [u0, u1, u2] = self.layers(h, x[0], x[1])?;
        let t = x[2];
        let mut disp = Vector3::zeros();
        let mut du = Matrix3::zeros();
        for r in 0..3 {
            disp[r] = u0[r].v + t * u1[r].v + t * t * u2[r].v;
            for j in 0..2 {
                du[(r, j)] = u0[r].g[j] + t * u1[r].g[j] + t * t * u2[r].g[j];
            }
            du[(r, 2)] = u1[r].v + 2.0 * t * u2[r].v;
        }
        let p = Vector3::new(x[0], x[1], x[2]);
        let r = &self.rotation;
        let grad_minus_id = if *r == Matrix3::identity() { du } else { (r - Matrix3::identity()) + r * du };
        Ok(PointEval { u: r * (p + disp), grad: Matrix3::identity() + grad_minus_id, grad_minus_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expression;

    fn expr(s: &str) -> Ingredient {
        Ingredient::Expr(parse_expression(s).unwrap())
    }

    fn sym(l: &[(usize, usize, &str)]) -> SymExpr3 {
        SymExpr3::from_entries(l).unwrap()
    }

    fn fd_check(u: &Deformation3D, h: f64, x: [f64; 3]) -> f64 {
        let g = u.eval(h, x).unwrap().grad;
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            let mut p = x;
            let mut m = x;
            p[j] += step;
            m[j] -= step;
            let fd = (u.eval(h, p).unwrap().u - u.eval(h, m).unwrap().u) / (2.0 * step);
            for r in 0..3 {
                worst = worst.max((fd[r] - g[(r, j)]).abs());
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mat = Material::new(1.0, 1.0).unwrap();
        let s = sym(&[(0, 0, "x1*x2"), (1, 1, "sin(x1)"), (0, 2, "x2^2"), (2, 2, "x1")]);
        let b = sym(&[(0, 1, "x1^2"), (1, 1, "x2"), (1, 2, "x1*x2"), (2, 2, "1")]);
        let v = expr("x1^2*x2 + cos(x2)");
        let w = [expr("x1*x2^2"), expr("sin(x1+x2)")];
        for (var, a, g, d) in [(Variant::Recseq, 6.0, 3.0, 3.0), (Variant::Recseq0, 3.0, 2.0, 1.5)] {
            let u = build_recovery(var, v.clone(), w.clone(), &s, &b, a, g, d, &mat).unwrap();
            assert!(fd_check(&u, 0.3, [0.2, 0.7, 0.05]) < 1e-8, "{var:?}");
        }
        let s5 = sym(&[(0, 2, "x2^2"), (1, 2, "x1*x2"), (2, 2, "x1")]);
        let u = build_recovery(Variant::Recseq5, v, w, &s5, &b, 3.0, 3.0, 3.0, &mat).unwrap();
        assert!(fd_check(&u, 0.3, [0.4, 0.1, -0.1]) < 1e-8);
    }

    #[test]
    fn trivial_ingredients_give_identity() {
        let mat = Material::new(1.0, 1.0).unwrap();
        let z = SymExpr3::zero();
        for (var, a, g, d) in [(Variant::Recseq, 4.0, 2.0, 2.0), (Variant::Recseq5, 2.0, 2.0, 2.0), (Variant::Recseq0, 2.0, 2.0, 1.0)] {
            let u = build_recovery(var, Ingredient::zero(), [Ingredient::zero(), Ingredient::zero()], &z, &z, a, g, d, &mat)
                .unwrap();
            let p = u.eval(0.1, [0.3, 0.4, 0.02]).unwrap();
            assert_eq!(p.grad_minus_id, Matrix3::zeros());
            assert_eq!(p.u, Vector3::new(0.3, 0.4, 0.02));
        }
    }

    #[test]
    fn recseq5_first_order_thickness_term() {
        let mat = Material::new(1.0, 1.0).unwrap();
        let s = sym(&[(0, 2, "x2"), (1, 2, "x1^2"), (2, 2, "3")]);
        let z = SymExpr3::zero();
        let u = build_recovery(Variant::Recseq5, Ingredient::zero(), [Ingredient::zero(), Ingredient::zero()], &s, &z, 2.0, 2.0, 2.0, &mat)
            .unwrap()
            .without_corrections();
        let (h, x) = (0.01, [0.3, 0.5]);
        let col = u.eval(h, [x[0], x[1], 0.0]).unwrap().grad_minus_id.column(2).into_owned();
        let ha = h.powf(1.0);
        assert!((col - ha * Vector3::new(2.0 * 0.5, 2.0 * 0.09, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn variant_preconditions() {
        let mat = Material::new(1.0, 1.0).unwrap();
        let z = SymExpr3::zero();
        let zw = || [Ingredient::zero(), Ingredient::zero()];
        assert!(build_recovery(Variant::Recseq, Ingredient::zero(), zw(), &z, &z, 3.0, 2.0, 2.0, &mat).is_err());
        assert!(build_recovery(Variant::Recseq0, Ingredient::zero(), zw(), &z, &z, 3.0, 2.0, 2.0, &mat).is_err());
        let s = sym(&[(0, 1, "x1")]);
        assert!(build_recovery(Variant::Recseq5, Ingredient::zero(), zw(), &s, &z, 2.0, 2.0, 2.0, &mat).is_err());
    }
}
