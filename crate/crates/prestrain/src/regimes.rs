//! Regime classification, optimality indicators and the constructive
//! upper bound on the infimum of the reduced plate functional.

use crate::decompose::{DecomposeError, Decomposer};
use crate::diffops::{self, curl2, curl_t_curl, det_field, half_outer, symgrad};
use crate::fields::{ScalarGridField, SymField3, SymGridField2};
use crate::gamma::{InfFunctional, InfValue};
use crate::tolerances::{exp_eq, exp_le, exp_lt, INDICATOR_REL_TOL, ZERO_BLOCK_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremCase {
    #[serde(rename = "T1.1-i")]
    T11i,
    #[serde(rename = "T1.1-ii")]
    T11ii,
    #[serde(rename = "T1.1-iii")]
    T11iii,
    #[serde(rename = "T1.4-i")]
    T14i,
    #[serde(rename = "T1.4-ii")]
    T14ii,
    #[serde(rename = "T1.4-iii")]
    T14iii,
    #[serde(rename = "T1.2-scaling-only")]
    ScalingOnly,
    #[serde(rename = "unsupported")]
    Unsupported,
}

impl TheoremCase {
    pub fn label(&self) -> &'static str {
        match self {
            TheoremCase::T11i => "T1.1-i",
            TheoremCase::T11ii => "T1.1-ii",
            TheoremCase::T11iii => "T1.1-iii",
            TheoremCase::T14i => "T1.4-i",
            TheoremCase::T14ii => "T1.4-ii",
            TheoremCase::T14iii => "T1.4-iii",
            TheoremCase::ScalingOnly => "T1.2-scaling-only",
            TheoremCase::Unsupported => "unsupported",
        }
    }

    /// Cases with an assembled plate functional.
    pub fn has_limit(&self) -> bool {
        !matches!(self, TheoremCase::ScalingOnly | TheoremCase::Unsupported)
    }

    /// Cases that require a vanishing in-plane stretching block.
    pub fn needs_s22_zero(&self) -> bool {
        matches!(self, TheoremCase::T14i | TheoremCase::T14ii | TheoremCase::T14iii)
    }
}

impl std::fmt::Display for TheoremCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which prestrain terms enter the bending and stretching integrands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Recipe {
    pub bending_includes_b: bool,
    pub bending_includes_symgrad_s: bool,
    pub stretching_includes_s22: bool,
    pub stretching_includes_halfgradv2: bool,
    pub stretching_includes_half_s_sq: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub theorem_case: TheoremCase,
    pub alpha: f64,
    pub gamma: f64,
    pub s22_zero: bool,
    /// Scaling exponent δ of the out-of-plane displacement (limit cases only).
    pub delta: Option<f64>,
    /// Exponent p with inf I^h ≤ C h^p.
    pub predicted_exponent: Option<f64>,
    /// True when every exponent below `predicted_exponent` is attainable
    /// but the value itself is not claimed.
    pub exponent_is_supremum: bool,
    pub recipe: Recipe,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("alpha and gamma must be positive and finite, got alpha={alpha}, gamma={gamma}")]
    BadExponents { alpha: f64, gamma: f64 },
    #[error("s22_zero was asserted but max |S_2x2| = {max_abs:e} exceeds {tol:e}")]
    InconsistentS22 { max_abs: f64, tol: f64 },
    #[error("case {0} has no plate functional")]
    NoLimit(TheoremCase),
    #[error(transparent)]
    Solver(#[from] DecomposeError),
}

/// Max-norm of the in-plane block of S.
pub fn s22_max_abs(s: &SymField3) -> f64 {
    s.block22().max_abs()
}

/// Classifies the exponents after checking the asserted s22_zero flag against S.
pub fn classify(alpha: f64, gamma: f64, s: &SymField3, _b: &SymField3, s22_zero: bool) -> Result<RegimeSpec, RegimeError> {
    if s22_zero {
        let m = s22_max_abs(s);
        if m > ZERO_BLOCK_TOL {
            return Err(RegimeError::InconsistentS22 { max_abs: m, tol: ZERO_BLOCK_TOL });
        }
    }
    classify_exponents(alpha, gamma, s22_zero)
}

/// Classification from the exponents and the S₂ₓ₂ ≡ 0 flag alone.
pub fn classify_exponents(alpha: f64, gamma: f64, s22_zero: bool) -> Result<RegimeSpec, RegimeError> {
    if !(alpha > 0.0 && gamma > 0.0 && alpha.is_finite() && gamma.is_finite()) {
        return Err(RegimeError::BadExponents { alpha, gamma });
    }
    let mut notes = Vec::new();
    let limit = |case: TheoremCase, delta: f64, notes: Vec<String>| {
        let recipe = if case.needs_s22_zero() {
            Recipe {
                bending_includes_b: exp_eq(gamma, delta),
                bending_includes_symgrad_s: exp_eq(alpha, delta),
                stretching_includes_s22: false,
                stretching_includes_halfgradv2: exp_eq(delta, 2.0),
                stretching_includes_half_s_sq: exp_eq(alpha, 2.0),
            }
        } else {
            Recipe {
                bending_includes_b: exp_eq(gamma, delta),
                bending_includes_symgrad_s: false,
                stretching_includes_s22: exp_eq(alpha, 2.0 + delta),
                stretching_includes_halfgradv2: exp_eq(delta, 2.0),
                stretching_includes_half_s_sq: false,
            }
        };
        RegimeSpec {
            theorem_case: case,
            alpha,
            gamma,
            s22_zero,
            delta: Some(delta),
            predicted_exponent: Some(2.0 + delta),
            exponent_is_supremum: false,
            recipe,
            notes,
        }
    };

    if s22_zero && exp_le(2.0, alpha) && exp_le(2.0, gamma) {
        if exp_eq(alpha, 2.0) {
            return Ok(limit(TheoremCase::T14i, 2.0, notes));
        }
        if exp_eq(gamma, 2.0) {
            return Ok(limit(TheoremCase::T14ii, 2.0, notes));
        }
        return Ok(limit(TheoremCase::T14iii, alpha.min(gamma), notes));
    }
    if exp_le(4.0, alpha) && exp_le(2.0, gamma) {
        if exp_eq(gamma, 2.0) {
            return Ok(limit(TheoremCase::T11i, 2.0, notes));
        }
        if exp_le(gamma, alpha - 2.0) {
            if exp_lt(gamma, alpha - 2.0) {
                notes.push("next scaling conjectured: h^{(4+γ)∧2γ∧α} once curl B₂ₓ₂ ≡ 0".into());
            }
            return Ok(limit(TheoremCase::T11ii, gamma, notes));
        }
        if exp_eq(alpha, 4.0) {
            notes.push("α = 4: the ½(∇v)⊗² term is kept in the stretching integrand".into());
        }
        return Ok(limit(TheoremCase::T11iii, alpha - 2.0, notes));
    }
    if exp_lt(alpha, 4.0) {
        let cap = 5.0 * alpha / 6.0 + 2.0 / 3.0;
        let (exponent, sup) = if exp_le(4.0 / 7.0, alpha) {
            if exp_lt(2.0 + gamma, cap) {
                (2.0 + gamma, false)
            } else {
                (cap, true)
            }
        } else {
            (2.0 * alpha, false)
        };
        notes.push("upper bound only; no plate functional is assembled in this range".into());
        return Ok(RegimeSpec {
            theorem_case: TheoremCase::ScalingOnly,
            alpha,
            gamma,
            s22_zero,
            delta: None,
            predicted_exponent: Some(exponent),
            exponent_is_supremum: sup,
            recipe: Recipe::default(),
            notes,
        });
    }
    notes.push(format!(
        "α = {alpha} ≥ 4 with γ = {gamma} < 2 lies outside the covered regimes (constrained theories)"
    ));
    Ok(RegimeSpec {
        theorem_case: TheoremCase::Unsupported,
        alpha,
        gamma,
        s22_zero,
        delta: None,
        predicted_exponent: None,
        exponent_is_supremum: false,
        recipe: Recipe::default(),
        notes,
    })
}

/// Fixed fields of the plate functional:
/// bending Q₂(∇²v + M_b), stretching Q₂(sym∇w [+ ½(∇v)⊗²] − M_s).
#[derive(Debug, Clone, PartialEq)]
pub struct Offsets {
    pub bending: SymGridField2,
    pub stretching: SymGridField2,
    pub bending_active: bool,
    pub stretching_active: bool,
    pub halfgradv2: bool,
}

/// Offsets with coefficients (c_b, c_sb) on B₂ₓ₂ and −2 sym∇s, and
/// (c_s, c_ss) on S₂ₓ₂ and ½ s⊗s; the plate limit uses all ones.
pub fn offsets_scaled(spec: &RegimeSpec, s: &SymField3, b: &SymField3, c: [f64; 4]) -> Offsets {
    let g = s.grid;
    let r = &spec.recipe;
    let mut bending = SymGridField2::zeros(g);
    if r.bending_includes_b {
        bending = bending.add_scaled(&b.block22(), c[0]);
    }
    if r.bending_includes_symgrad_s {
        bending = bending.add_scaled(&symgrad(&s.col3()), -2.0 * c[1]);
    }
    let mut stretching = SymGridField2::zeros(g);
    if r.stretching_includes_s22 {
        stretching = stretching.add_scaled(&s.block22(), c[2]);
    }
    if r.stretching_includes_half_s_sq {
        stretching = stretching.add_scaled(&half_outer(&s.col3()), c[3]);
    }
    Offsets {
        bending,
        stretching,
        bending_active: r.bending_includes_b || r.bending_includes_symgrad_s,
        stretching_active: r.stretching_includes_s22 || r.stretching_includes_half_s_sq,
        halfgradv2: r.stretching_includes_halfgradv2,
    }
}

pub fn offsets(spec: &RegimeSpec, s: &SymField3, b: &SymField3) -> Offsets {
    offsets_scaled(spec, s, b, [1.0; 4])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Optimal,
    Suboptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualNorm {
    #[serde(rename = "H-1")]
    HMinus1,
    #[serde(rename = "H-2")]
    HMinus2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub norm: DualNorm,
    pub dual_norm: f64,
    pub l2_norm: f64,
    pub max_abs: f64,
    pub nonvanishing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub theorem_case: TheoremCase,
    pub indicators: Vec<Indicator>,
    pub scale: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

fn indicator_names(case: TheoremCase, spec: &RegimeSpec) -> (&'static str, &'static str) {
    match case {
        TheoremCase::T11i | TheoremCase::T11ii => (
            "curl B22",
            if spec.recipe.stretching_includes_halfgradv2 {
                if spec.recipe.stretching_includes_s22 {
                    "det B22 + curlTcurl S22"
                } else {
                    "det B22"
                }
            } else {
                "curlTcurl S22"
            },
        ),
        TheoremCase::T11iii => ("curl B22", "curlTcurl S22"),
        TheoremCase::T14i => (
            if spec.recipe.bending_includes_b { "curl B22 - grad curl s" } else { "grad curl s" },
            if spec.recipe.bending_includes_b {
                "det(B22 - 2 sym grad s) + 1/2 curlTcurl (s x s)"
            } else {
                "4 det(sym grad s) + 1/2 curlTcurl (s x s)"
            },
        ),
        TheoremCase::T14ii => ("curl B22", "det B22"),
        TheoremCase::T14iii => (
            match (spec.recipe.bending_includes_b, spec.recipe.bending_includes_symgrad_s) {
                (true, true) => "curl B22 - grad curl s",
                (true, false) => "curl B22",
                _ => "grad curl s",
            },
            "none",
        ),
        _ => ("none", "none"),
    }
}

fn weighted_l2(values: impl Iterator<Item = f64>, nodes: &[usize], w: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    nodes.iter().map(|&k| w * v[k] * v[k]).sum::<f64>().sqrt()
}

/// Evaluates the curl-type (H⁻¹) and scalar (H⁻²) compatibility indicators
/// of the case and issues the verdict.
pub fn optimality_indicators(s: &SymField3, b: &SymField3, spec: &RegimeSpec) -> Result<OptimalityReport, RegimeError> {
    if !spec.theorem_case.has_limit() {
        return Err(RegimeError::NoLimit(spec.theorem_case));
    }
    let grid = s.grid;
    let dec = Decomposer::new(&grid);
    let off = offsets(spec, s, b);
    let scale = s.max_abs() + b.max_abs();
    let threshold = INDICATOR_REL_TOL * scale.max(scale * scale);
    let w = grid.dx() * grid.dy();
    let (curl_name, scalar_name) = indicator_names(spec.theorem_case, spec);
    let mut indicators = Vec::new();

    if off.bending_active {
        let c = curl2(&off.bending);
        let nodes = grid.inner_nodes(1);
        let dual = dec.h_minus1_norm_vec(&c)?;
        let l2 = weighted_l2(c.values.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()), &nodes, w);
        let max_abs = nodes.iter().map(|&k| c.values[k][0].abs().max(c.values[k][1].abs())).fold(0.0, f64::max);
        indicators.push(Indicator {
            name: curl_name.to_string(),
            norm: DualNorm::HMinus1,
            dual_norm: dual,
            l2_norm: l2,
            max_abs,
            nonvanishing: dual > threshold,
        });
    }
    if off.halfgradv2 || off.stretching_active {
        let mut g = curl_t_curl(&off.stretching);
        if off.halfgradv2 {
            let d = det_field(&off.bending);
            for (x, y) in g.values.iter_mut().zip(&d.values) {
                *x += y;
            }
        }
        let nodes = diffops::doubly_interior(&grid);
        let dual = dec.h_minus2_norm(&g)?;
        let l2 = weighted_l2(g.values.iter().copied(), &nodes, w);
        let max_abs = nodes.iter().map(|&k| g.values[k].abs()).fold(0.0, f64::max);
        indicators.push(Indicator {
            name: scalar_name.to_string(),
            norm: DualNorm::HMinus2,
            dual_norm: dual,
            l2_norm: l2,
            max_abs,
            nonvanishing: dual > threshold,
        });
    }
    let verdict = if indicators.iter().any(|i| i.nonvanishing) { Verdict::Optimal } else { Verdict::Suboptimal };
    Ok(OptimalityReport { theorem_case: spec.theorem_case, indicators, scale, threshold, verdict })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfBound {
    /// Ī₀(v*) ≥ inf Ī₀.
    pub upper_value: f64,
    pub terms: InfValue,
    pub certificate: ScalarGridField,
    /// ‖curl B̄‖²_{H⁻¹}.
    pub curl_b_sq: f64,
    /// ‖det B̄ + curlᵀcurl S̄‖²_{H⁻²}.
    pub compat_sq: f64,
}

/// Upper bound on inf Ī₀ from v* = argmin ‖∇²v + B̄‖, obtained by splitting
/// −B̄ into a Hessian and a cofactor of a clamped symmetric gradient.
pub fn infbound_constructive(s: &SymField3, b: &SymField3) -> Result<InfBound, DecomposeError> {
    let grid = s.grid;
    let dec = Decomposer::new(&grid);
    let bbar = b.block22();
    let sbar = s.block22();
    let split = dec.project_out_hessian(&bbar.scaled(-1.0))?;
    let functional = InfFunctional::with_decomposer(&bbar, &sbar, &dec)?;
    let terms = functional.evaluate(&split.v.values)?;
    let curl_b = dec.h_minus1_norm_vec(&curl2(&bbar))?;
    let mut g = curl_t_curl(&sbar);
    for (x, y) in g.values.iter_mut().zip(det_field(&bbar).values) {
        *x += y;
    }
    let compat = dec.h_minus2_norm(&g)?;
    Ok(InfBound {
        upper_value: terms.total,
        terms,
        certificate: split.v,
        curl_b_sq: curl_b * curl_b,
        compat_sq: compat * compat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(a: f64, g: f64, z: bool) -> RegimeSpec {
        classify_exponents(a, g, z).unwrap()
    }

    #[test]
    fn von_karman_case() {
        let s = case(4.0, 2.0, false);
        assert_eq!(s.theorem_case, TheoremCase::T11i);
        assert_eq!(s.delta, Some(2.0));
        assert_eq!(s.predicted_exponent, Some(4.0));
        assert!(s.recipe.bending_includes_b && s.recipe.stretching_includes_halfgradv2 && s.recipe.stretching_includes_s22);
    }

    #[test]
    fn intermediate_case() {
        let s = case(6.0, 3.0, false);
        assert_eq!(s.theorem_case, TheoremCase::T11ii);
        assert_eq!(s.delta, Some(3.0));
        assert_eq!(s.predicted_exponent, Some(5.0));
        assert!(!s.recipe.stretching_includes_s22 && !s.recipe.stretching_includes_halfgradv2);
        assert!(case(6.0, 4.0, false).recipe.stretching_includes_s22);
    }

    #[test]
    fn stretching_dominated_case() {
        let s = case(4.0, 3.0, false);
        assert_eq!(s.theorem_case, TheoremCase::T11iii);
        assert_eq!(s.delta, Some(2.0));
        assert!(s.recipe.stretching_includes_halfgradv2 && s.recipe.stretching_includes_s22 && !s.recipe.bending_includes_b);
        let s = case(6.0, 5.0, false);
        assert_eq!(s.delta, Some(4.0));
        assert!(!s.recipe.stretching_includes_halfgradv2);
    }

    #[test]
    fn vanishing_s22_cases() {
        let s = case(2.0, 2.0, true);
        assert_eq!(s.theorem_case, TheoremCase::T14i);
        assert_eq!(s.predicted_exponent, Some(4.0));
        let r = s.recipe;
        assert!(r.bending_includes_symgrad_s && r.bending_includes_b && r.stretching_includes_half_s_sq && r.stretching_includes_halfgradv2);
        assert_eq!(case(3.0, 2.0, true).theorem_case, TheoremCase::T14ii);
        let s = case(3.0, 4.0, true);
        assert_eq!(s.theorem_case, TheoremCase::T14iii);
        assert_eq!(s.delta, Some(3.0));
        assert!(s.recipe.bending_includes_symgrad_s && !s.recipe.bending_includes_b);
        let s = case(3.0, 3.0, true);
        assert!(s.recipe.bending_includes_symgrad_s && s.recipe.bending_includes_b);
    }

    #[test]
    fn scaling_only_and_unsupported() {
        let s = case(3.0, 0.5, false);
        assert_eq!(s.theorem_case, TheoremCase::ScalingOnly);
        assert_eq!(s.predicted_exponent, Some(2.5));
        let s = case(2.0, 3.0, false);
        assert!(s.exponent_is_supremum);
        assert!((s.predicted_exponent.unwrap() - (5.0 / 3.0 + 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(case(0.5, 1.0, false).predicted_exponent, Some(1.0));
        assert_eq!(case(5.0, 1.0, false).theorem_case, TheoremCase::Unsupported);
    }

    #[test]
    fn inconsistent_flag() {
        let g = crate::fields::Grid2::unit_square(5).unwrap();
        let s = crate::fields::SymExpr3::from_entries(&[(0, 0, "x1")]).unwrap().sample(&g).unwrap();
        let b = SymField3::zeros(g);
        assert!(matches!(classify(2.0, 2.0, &s, &b, true), Err(RegimeError::InconsistentS22 { .. })));
        assert!(classify(2.0, 2.0, &s, &b, false).is_ok());
    }
}
