//! Riemann curvature of the prestrain metric 𝒢 = AᵀA with
//! A = I + h^{α/2} S(x') + x₃ h^{γ/2} B(x'), evaluated pointwise from exact
//! jets of the expression entries, and fits of its leading order in h.

use crate::fields::{EvalError, Jet3, SymExpr3};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("metric is not positive definite at h = {h:e}")]
    NotPositiveDefinite { h: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("bad component label {0:?}; expected e.g. \"12,13\"")]
    BadComponent(String),
    #[error("sweep needs at least 6 positive values, got {0}")]
    BadSweep(usize),
}

type M3 = Matrix3<f64>;

/// 𝒢 with its first and second derivatives in (x1, x2, x3).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub g: M3,
    /// d[k] = ∂_k 𝒢.
    pub d: [M3; 3],
    /// dd[k][l] = ∂_k ∂_l 𝒢.
    pub dd: [[M3; 3]; 3],
}

impl MetricJet {
    /// Jet of AᵀA from a jet of A.
    pub fn from_frame(a: &M3, da: &[M3; 3], dda: &[[M3; 3]; 3]) -> MetricJet {
        let g = a.transpose() * a;
        let d = std::array::from_fn(|k| da[k].transpose() * a + a.transpose() * da[k]);
        let dd = std::array::from_fn(|k| {
            std::array::from_fn(|l| {
                dda[k][l].transpose() * a
                    + da[k].transpose() * da[l]
                    + da[l].transpose() * da[k]
                    + a.transpose() * dda[k][l]
            })
        });
        MetricJet { g, d, dd }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g.cholesky().is_some()
    }
}

fn sym_matrix(f: impl Fn(usize) -> f64) -> M3 {
    let idx = |a: usize, b: usize| crate::fields::sym3_slot(a, b);
    M3::from_fn(|a, b| f(idx(a, b)))
}

/// Values, first and second x'-derivatives of a symmetric expression matrix.
fn expr_jet(m: &SymExpr3, x1: f64, x2: f64) -> Result<(M3, [M3; 2], [[M3; 2]; 2]), EvalError> {
    let j: [Jet3; 6] = m.jets(x1, x2)?;
    let v = sym_matrix(|s| j[s].v);
    let d = [sym_matrix(|s| j[s].g[0]), sym_matrix(|s| j[s].g[1])];
    let dd = std::array::from_fn(|k| std::array::from_fn(|l| sym_matrix(|s| j[s].hess(k, l))));
    Ok((v, d, dd))
}

/// Exact jet of 𝒢ʰ at (x1, x2, x3).
pub fn metric_jet(s: &SymExpr3, b: &SymExpr3, alpha: f64, gamma: f64, h: f64, point: [f64; 3]) -> Result<MetricJet, CurvatureError> {
    let (ca, cb) = (h.powf(alpha / 2.0), h.powf(gamma / 2.0));
    let x3 = point[2];
    let (sv, sd, sdd) = expr_jet(s, point[0], point[1])?;
    let (bv, bd, bdd) = expr_jet(b, point[0], point[1])?;
    let a = M3::identity() + sv * ca + bv * (x3 * cb);
    let da = [sd[0] * ca + bd[0] * (x3 * cb), sd[1] * ca + bd[1] * (x3 * cb), bv * cb];
    let mut dda = [[M3::zeros(); 3]; 3];
    for k in 0..2 {
        for l in 0..2 {
            dda[k][l] = sdd[k][l] * ca + bdd[k][l] * (x3 * cb);
        }
        dda[k][2] = bd[k] * cb;
        dda[2][k] = bd[k] * cb;
    }
    let jet = MetricJet::from_frame(&a, &da, &dda);
    if !jet.is_positive_definite() {
        return Err(CurvatureError::NotPositiveDefinite { h });
    }
    Ok(jet)
}

/// Christoffel matrices Γ_a with (Γ_a)[b][c] = Γᵇ_{ac}, and their
/// derivatives ∂_d Γ_a.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub gamma: [M3; 3],
    /// dgamma[d][a] = ∂_d Γ_a.
    pub dgamma: [[M3; 3]; 3],
}

pub fn christoffel(jet: &MetricJet) -> Christoffel {
    let inv = jet.g.try_inverse().expect("metric_jet checks positive definiteness");
    // t[a][m][c] = ∂_a 𝒢_mc + ∂_c 𝒢_ma − ∂_m 𝒢_ac
    let t = |a: usize, m: usize, c: usize| jet.d[a][(m, c)] + jet.d[c][(m, a)] - jet.d[m][(a, c)];
    let dt = |e: usize, a: usize, m: usize, c: usize| jet.dd[e][a][(m, c)] + jet.dd[e][c][(m, a)] - jet.dd[e][m][(a, c)];
    let dinv: [M3; 3] = std::array::from_fn(|e| -inv * jet.d[e] * inv);
    let gamma = std::array::from_fn(|a| M3::from_fn(|b, c| 0.5 * (0..3).map(|m| inv[(b, m)] * t(a, m, c)).sum::<f64>()));
    let dgamma = std::array::from_fn(|e| {
        std::array::from_fn(|a| {
            M3::from_fn(|b, c| 0.5 * (0..3).map(|m| dinv[e][(b, m)] * t(a, m, c) + inv[(b, m)] * dt(e, a, m, c)).sum::<f64>())
        })
    });
    Christoffel { gamma, dgamma }
}

/// Fully lowered curvature R_{ab,cd} (0-based storage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannTensor {
    pub r: [[[[f64; 3]; 3]; 3]; 3],
}

impl RiemannTensor {
    /// Component with 1-based indices as written, e.g. `get(1, 2, 1, 3)` = R_{12,13}.
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.r[a - 1][b - 1][c - 1][d - 1]
    }

    pub fn component(&self, c: Component) -> f64 {
        let [a, b, cc, d] = c.indices;
        self.get(a, b, cc, d)
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().flatten().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest violation of the skew, pair and first Bianchi symmetries,
    /// relative to the largest component.
    pub fn symmetry_defect(&self) -> f64 {
        let r = &self.r;
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        worst = worst
                            .max((r[a][b][c][d] + r[b][a][c][d]).abs())
                            .max((r[a][b][c][d] + r[a][b][d][c]).abs())
                            .max((r[a][b][c][d] - r[c][d][a][b]).abs())
                            .max((r[a][b][c][d] + r[a][c][d][b] + r[a][d][b][c]).abs());
                    }
                }
            }
        }
        let m = self.max_abs();
        if m == 0.0 { worst } else { worst / m }
    }
}

/// R^·_{·,cd} = ∂_cΓ_d − ∂_dΓ_c + Γ_cΓ_d − Γ_dΓ_c, lowered with 𝒢.
pub fn riemann_from_jet(jet: &MetricJet) -> RiemannTensor {
    let ch = christoffel(jet);
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for c in 0..3 {
        for d in 0..3 {
            let up = ch.dgamma[c][d] - ch.dgamma[d][c] + ch.gamma[c] * ch.gamma[d] - ch.gamma[d] * ch.gamma[c];
            let low = jet.g * up;
            for a in 0..3 {
                for b in 0..3 {
                    r[a][b][c][d] = low[(a, b)];
                }
            }
        }
    }
    RiemannTensor { r }
}

pub fn riemann(s: &SymExpr3, b: &SymExpr3, alpha: f64, gamma: f64, h: f64, point: [f64; 3]) -> Result<RiemannTensor, CurvatureError> {
    Ok(riemann_from_jet(&metric_jet(s, b, alpha, gamma, h, point)?))
}

/// A curvature component R_{ab,cd}, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub indices: [usize; 4],
}

impl Component {
    pub const R1212: Component = Component { indices: [1, 2, 1, 2] };
    pub const R1213: Component = Component { indices: [1, 2, 1, 3] };
    pub const R1223: Component = Component { indices: [1, 2, 2, 3] };
    pub const R1313: Component = Component { indices: [1, 3, 1, 3] };
    pub const R1323: Component = Component { indices: [1, 3, 2, 3] };
    pub const R2323: Component = Component { indices: [2, 3, 2, 3] };
    pub const ALL: [Component; 6] =
        [Component::R1212, Component::R1213, Component::R1223, Component::R1313, Component::R1323, Component::R2323];

    pub fn label(&self) -> String {
        let i = self.indices;
        format!("{}{},{}{}", i[0], i[1], i[2], i[3])
    }
}

impl std::str::FromStr for Component {
    type Err = CurvatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits: Vec<usize> = s.chars().filter(|c| !matches!(c, ',' | ' ' | 'R' | '_')).map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>().ok_or_else(|| CurvatureError::BadComponent(s.into()))?;
        if digits.len() != 4 || digits.iter().any(|&d| !(1..=3).contains(&d)) {
            return Err(CurvatureError::BadComponent(s.into()));
        }
        Ok(Component { indices: [digits[0], digits[1], digits[2], digits[3]] })
    }
}

/// One term c·h^p of a leading-order expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exponent: f64,
    pub coefficient: f64,
}

/// Expansion terms of a component at x₃ = 0 in the covered formulas,
/// with coefficients from exact jets. With S₂ₓ₂ ≡ 0 the R₁₂,₁₂ expansion
/// carries the h^α and h^{(α+γ)/2} terms of the out-of-plane shear s = (S₃₁, S₃₂).
pub fn formula_terms(s: &SymExpr3, b: &SymExpr3, alpha: f64, gamma: f64, comp: Component, x: [f64; 2]) -> Result<Vec<Term>, CurvatureError> {
    let sj = s.jets(x[0], x[1])?;
    let bj = b.jets(x[0], x[1])?;
    let slot = crate::fields::sym3_slot;
    let se = |a: usize, c: usize| sj[slot(a, c)];
    let be = |a: usize, c: usize| bj[slot(a, c)];
    let s22_zero = [(0, 0), (0, 1), (1, 1)].iter().all(|&(a, c)| s.entry(a, c).is_zero_literal());
    // curl of s = (S31, S32) and its gradient
    let (s1, s2) = (se(0, 2), se(1, 2));
    let grad_curl = |k: usize| s2.hess(0, k) - s1.hess(1, k);
    // row-wise curl of B₂ₓ₂
    let curl_b = [be(0, 1).g[0] - be(0, 0).g[1], be(1, 1).g[0] - be(0, 1).g[1]];
    let t = |exponent: f64, coefficient: f64| Term { exponent, coefficient };
    let (a2, g2) = (alpha / 2.0, gamma / 2.0);
    let terms = match comp.indices {
        [1, 2, 1, 2] => {
            let det_b = be(0, 0).v * be(1, 1).v - be(0, 1).v * be(0, 1).v;
            if s22_zero {
                let det_s = s1.g[0] * s2.g[1] - s1.g[1] * s2.g[0];
                // ⟨∇curl s, s⊥⟩ with s⊥ = (−s2, s1)
                let perp = -s2.v * grad_curl(0) + s1.v * grad_curl(1);
                // ⟨B₂ₓ₂ : cof ∇s⟩, ∇s with rows ∇s1, ∇s2
                let cof = [[s2.g[1], -s2.g[0]], [-s1.g[1], s1.g[0]]];
                let bm = [[be(0, 0).v, be(0, 1).v], [be(0, 1).v, be(1, 1).v]];
                let pair: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| bm[i][j] * cof[i][j]).sum();
                vec![t(alpha, -3.0 * det_s + perp), t(gamma, -det_b), t(a2 + g2, 2.0 * pair)]
            } else {
                let ccs = se(1, 1).hess(0, 0) - 2.0 * se(0, 1).hess(0, 1) + se(0, 0).hess(1, 1);
                vec![t(a2, -ccs), t(gamma, -det_b)]
            }
        }
        [1, 2, 1, 3] => vec![t(a2, -grad_curl(0)), t(g2, curl_b[0])],
        [1, 2, 2, 3] => vec![t(a2, -grad_curl(1)), t(g2, curl_b[1])],
        [1, 3, 1, 3] => vec![t(a2, -se(2, 2).hess(0, 0)), t(g2, 2.0 * be(0, 2).g[0])],
        [1, 3, 2, 3] => vec![t(a2, -se(2, 2).hess(0, 1)), t(g2, be(1, 2).g[0] + be(0, 2).g[1])],
        [2, 3, 2, 3] => vec![t(a2, -se(2, 2).hess(1, 1)), t(g2, 2.0 * be(1, 2).g[1])],
        _ => return Err(CurvatureError::BadComponent(comp.label())),
    };
    Ok(terms)
}

/// Leading term: the smallest exponent whose combined coefficient is nonzero.
/// Terms sharing an exponent are added.
pub fn leading_term(terms: &[Term], zero_tol: f64) -> Option<Term> {
    let mut merged: Vec<Term> = Vec::new();
    for t in terms {
        match merged.iter_mut().find(|m| crate::tolerances::exp_eq(m.exponent, t.exponent)) {
            Some(m) => m.coefficient += t.coefficient,
            None => merged.push(*t),
        }
    }
    merged.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
    merged.into_iter().find(|t| t.coefficient.abs() > zero_tol)
}

/// 8 geometric values from 10⁻¹ down to 10^{-3.5}.
pub fn default_sweep() -> Vec<f64> {
    (0..8).map(|k| 10f64.powf(-1.0 - 2.5 * k as f64 / 7.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub h: f64,
    pub value: f64,
    pub model: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub component: String,
    /// Least-squares slope of log|R| against log h; None when vanishing.
    pub exponent: Option<f64>,
    /// Richardson-extrapolated limit of R/h^{p} at the predicted exponent.
    pub coefficient: Option<f64>,
    pub predicted_exponent: Option<f64>,
    pub predicted_coefficient: Option<f64>,
    pub vanishing: bool,
    pub samples: Vec<SweepSample>,
}

/// Components below this magnitude everywhere on the sweep are reported as vanishing.
pub const VANISHING_TOL: f64 = 1e-13;

/// Limit of a sequence by repeated Aitken Δ² on its tail.
pub fn aitken_limit(q: &[f64]) -> f64 {
    let mut seq = q.to_vec();
    while seq.len() >= 3 {
        let mut next = Vec::with_capacity(seq.len() - 2);
        for w in seq.windows(3) {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let den = d2 - d1;
            if den.abs() <= 1e-14 * w[2].abs().max(1e-300) || !den.is_finite() {
                next.push(w[2]);
            } else {
                next.push(w[2] - d2 * d2 / den);
            }
        }
        if next.len() < 3 {
            return *next.last().unwrap();
        }
        seq = next;
    }
    *seq.last().unwrap()
}

/// Sweeps h at (x1, x2, 0), fits the decay exponent of one component and
/// extrapolates its coefficient at the predicted exponent.
pub fn leading_fit(
    s: &SymExpr3,
    b: &SymExpr3,
    alpha: f64,
    gamma: f64,
    comp: Component,
    point: [f64; 2],
    sweep: &[f64],
) -> Result<LeadingFit, CurvatureError> {
    if sweep.len() < 6 || sweep.iter().any(|&h| !(h > 0.0)) {
        return Err(CurvatureError::BadSweep(sweep.len()));
    }
    let mut hs = sweep.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let values: Vec<f64> = hs
        .iter()
        .map(|&h| riemann(s, b, alpha, gamma, h, [point[0], point[1], 0.0]).map(|r| r.component(comp)))
        .collect::<Result<_, _>>()?;
    let terms = formula_terms(s, b, alpha, gamma, comp, point)?;
    let scale = terms.iter().map(|t| t.coefficient.abs()).fold(1.0, f64::max);
    let lead = leading_term(&terms, 1e-12 * scale);
    let model = |h: f64| lead.map_or(0.0, |t| t.coefficient * h.powf(t.exponent));
    let samples: Vec<SweepSample> = hs
        .iter()
        .zip(&values)
        .map(|(&h, &v)| SweepSample { h, value: v, model: model(h), residual: v - model(h) })
        .collect();
    let vanishing = values.iter().all(|v| v.abs() <= VANISHING_TOL);
    if vanishing {
        return Ok(LeadingFit {
            component: comp.label(),
            exponent: None,
            coefficient: None,
            predicted_exponent: lead.map(|t| t.exponent),
            predicted_coefficient: lead.map(|t| t.coefficient),
            vanishing,
            samples,
        });
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let coefficient = lead.map(|t| {
        let q: Vec<f64> = hs.iter().zip(&values).map(|(h, v)| v / h.powf(t.exponent)).collect();
        aitken_limit(&q)
    });
    Ok(LeadingFit {
        component: comp.label(),
        exponent: Some(slope),
        coefficient,
        predicted_exponent: lead.map(|t| t.exponent),
        predicted_coefficient: lead.map(|t| t.coefficient),
        vanishing,
        samples,
    })
}
