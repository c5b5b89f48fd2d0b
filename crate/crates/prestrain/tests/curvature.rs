use nalgebra::Matrix3;
use prestrain::curvature::{riemann, riemann_from_jet, MetricJet};
use prestrain::fields::{parse_expression, Jet3, SymExpr3};
use proptest::prelude::*;

type M3 = Matrix3<f64>;

/// Φ(x) = x + Σ c·x^m over monomials of degree 2 and 3, with jets of ∇Φ.
struct PolyMap {
    terms: Vec<(usize, [u32; 3], f64)>,
}

impl PolyMap {
    fn new(c: &[f64]) -> PolyMap {
        let mut monos = Vec::new();
        for a in 0..=3u32 {
            for b in 0..=3 - a {
                for d in 0..=3 - a - b {
                    if a + b + d >= 2 {
                        monos.push([a, b, d]);
                    }
                }
            }
        }
        let terms = (0..3).flat_map(|i| monos.iter().map(move |m| (i, *m))).zip(c.iter().cycle()).map(|((i, m), &c)| (i, m, c)).collect();
        PolyMap { terms }
    }

    /// ∂^e of the monomial x^m at x.
    fn mono(m: [u32; 3], e: [u32; 3], x: [f64; 3]) -> f64 {
        let mut v = 1.0;
        for k in 0..3 {
            if e[k] > m[k] {
                return 0.0;
            }
            let fall: u32 = (m[k] - e[k] + 1..=m[k]).product();
            v *= fall as f64 * x[k].powi((m[k] - e[k]) as i32);
        }
        v
    }

    /// ∂^e of ∇Φ: entry (i, j) is ∂^e ∂_j Φ_i.
    fn frame(&self, e: [u32; 3], x: [f64; 3]) -> M3 {
        let mut a = if e == [0, 0, 0] { M3::identity() } else { M3::zeros() };
        for &(i, m, c) in &self.terms {
            for j in 0..3 {
                let mut ee = e;
                ee[j] += 1;
                a[(i, j)] += c * Self::mono(m, ee, x);
            }
        }
        a
    }
}

fn unit(k: usize) -> [u32; 3] {
    let mut e = [0; 3];
    e[k] = 1;
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_metrics_are_flat(c in prop::collection::vec(-0.15f64..0.15, 20), x in prop::array::uniform3(-0.5f64..0.5)) {
        let phi = PolyMap::new(&c);
        let a = phi.frame([0, 0, 0], x);
        prop_assume!(a.determinant().abs() > 0.2);
        let da: [M3; 3] = std::array::from_fn(|k| phi.frame(unit(k), x));
        let dda: [[M3; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|l| {
            let mut e = unit(k);
            e[l] += 1;
            phi.frame(e, x)
        }));
        let jet = MetricJet::from_frame(&a, &da, &dda);
        let scale = jet.dd.iter().flatten().map(|m| m.norm()).fold(1.0, f64::max);
        let r = riemann_from_jet(&jet);
        prop_assert!(r.max_abs() <= 1e-8 * scale, "{}", r.max_abs());
    }

    #[test]
    fn shear_curvature_identity(
        i in 0usize..6, j in 0usize..6,
        x in 0.0f64..1.0, y in 0.0f64..1.0,
    ) {
        // 4 det(sym∇s) + ½ curlᵀcurl(s⊗s) = 3 det∇s − ⟨∇curl s, s⊥⟩
        let pool = ["x2^2", "x1*x2 - x1", "sin(x1 + 2*x2)", "exp(x1/2)*x2", "cos(x2)*x1^2", "x1^3 - x2"];
        let s1 = parse_expression(pool[i]).unwrap().eval_jet3(x, y).unwrap();
        let s2 = parse_expression(pool[j]).unwrap().eval_jet3(x, y).unwrap();
        let d = |f: &Jet3, k: usize| f.g[k];
        let sym12 = 0.5 * (d(&s1, 1) + d(&s2, 0));
        let det_sym = d(&s1, 0) * d(&s2, 1) - sym12 * sym12;
        let (f11, f12, f22) = (s1 * s1, s1 * s2, s2 * s2);
        let ctc = f11.hess(1, 1) - 2.0 * f12.hess(0, 1) + f22.hess(0, 0);
        let lhs = 4.0 * det_sym + 0.5 * ctc;
        let det = d(&s1, 0) * d(&s2, 1) - d(&s1, 1) * d(&s2, 0);
        let grad_curl = [s2.hess(0, 0) - s1.hess(1, 0), s2.hess(0, 1) - s1.hess(1, 1)];
        let perp = [-s2.v, s1.v];
        let rhs = 3.0 * det - (grad_curl[0] * perp[0] + grad_curl[1] * perp[1]);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn riemann_symmetries_hold() {
    let s = SymExpr3::parse(["x1*x2", "sin(x1)", "x2^2", "1", "x1", "cos(x2)"]).unwrap();
    let b = SymExpr3::parse(["x2", "0", "x1^2", "exp(x1)", "0", "1"]).unwrap();
    for h in [0.1, 0.01, 0.001] {
        let r = riemann(&s, &b, 3.0, 2.5, h, [0.3, 0.4, 0.2 * h]).unwrap();
        assert!(r.max_abs() > 0.0);
        assert!(r.symmetry_defect() <= 1e-9);
    }
}
