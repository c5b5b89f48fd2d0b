#![allow(clippy::needless_range_loop)]

use prestrain::diffops::{
    cof2, curl2, curl_t_curl, det_field, doubly_interior, grad, half_outer, hessian, interior, symgrad,
};
use prestrain::fields::{Grid2, ScalarGridField, SymGridField2, VectorGridField2};
use proptest::prelude::*;

/// Integer-coefficient polynomial of total degree ≤ 4; its difference
/// quotients on a dyadic grid are exact in floating point.
fn poly(c: &[i8]) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, y| {
        let mut k = 0;
        let mut s = 0.0;
        for i in 0..=4 {
            for j in 0..=4 - i {
                s += c[k] as f64 * x.powi(i) * y.powi(j);
                k += 1;
            }
        }
        s
    }
}

fn dyadic() -> Grid2 {
    Grid2::new(-1.0, 1.0, -1.0, 1.0, 17, 17).unwrap()
}

proptest! {
    #[test]
    fn curl_of_hessian_vanishes(c in prop::collection::vec(-6i8..=6, 15)) {
        let g = dyadic();
        let r = curl2(&hessian(&ScalarGridField::from_fn(g, poly(&c))));
        for k in doubly_interior(&g) {
            prop_assert_eq!(r.values[k], [0.0, 0.0]);
        }
    }

    #[test]
    fn curl_t_curl_of_symgrad_vanishes(a in prop::collection::vec(-6i8..=6, 15), b in prop::collection::vec(-6i8..=6, 15)) {
        let g = dyadic();
        let (p, q) = (poly(&a), poly(&b));
        let r = curl_t_curl(&symgrad(&VectorGridField2::from_fn(g, |x, y| [p(x, y), q(x, y)])));
        for k in doubly_interior(&g) {
            prop_assert_eq!(r.values[k], 0.0);
        }
    }

    #[test]
    fn cofactor_preserves_frobenius_norm(m in prop::array::uniform4(-10.0f64..10.0)) {
        let m = [[m[0], m[1]], [m[2], m[3]]];
        let c = cof2(m);
        let n = |a: [[f64; 2]; 2]| a.iter().flatten().map(|x| x * x).sum::<f64>();
        prop_assert!((n(c) - n(m)).abs() <= 1e-12 * n(m).max(1.0));
    }

    #[test]
    fn rigid_motions_have_no_strain(a in -3.0f64..3.0, b in -3.0f64..3.0, t in -3.0f64..3.0) {
        let g = Grid2::unit_square(9).unwrap();
        let e = symgrad(&VectorGridField2::from_fn(g, |x, y| [a - t * y, b + t * x]));
        prop_assert!(e.max_abs() < 1e-12);
    }
}

/// max interior error of each operator against its analytic value
fn errors(n: usize) -> [f64; 5] {
    let g = Grid2::unit_square(n).unwrap();
    let v = |x: f64, y: f64| (2.0 * x).sin() * (x + y).cos();
    let f = ScalarGridField::from_fn(g, v);
    let w = VectorGridField2::from_fn(g, |x, y| [(x * y).sin(), (x - 2.0 * y).cos()]);
    let m = SymGridField2::from_fn(g, |x, y| [(x * y).cos(), x.sin() * y, (x + y * y).exp()]);
    let mut err = [0.0f64; 5];
    let gv = grad(&f);
    let hv = hessian(&f);
    let sw = symgrad(&w);
    let cm = curl2(&m);
    let ctc = curl_t_curl(&m);
    for k in interior(&g) {
        let (x, y) = g.point(k);
        let (s2, c2, s, c) = ((2.0 * x).sin(), (2.0 * x).cos(), (x + y).sin(), (x + y).cos());
        let exact_grad = [2.0 * c2 * c - s2 * s, -s2 * s];
        err[0] = err[0].max((gv.values[k][0] - exact_grad[0]).abs()).max((gv.values[k][1] - exact_grad[1]).abs());
        let exact_sym = [y * (x * y).cos(), 0.5 * (x * (x * y).cos() - (x - 2.0 * y).sin()), 2.0 * (x - 2.0 * y).sin()];
        for i in 0..3 {
            err[2] = err[2].max((sw.values[k][i] - exact_sym[i]).abs());
        }
        // row-wise curl ∂₁F_{a2} − ∂₂F_{a1}
        let c0 = x.cos() * y + x * (x * y).sin();
        let c1 = (x + y * y).exp() - x.sin();
        err[3] = err[3].max((cm.values[k][0] - c0).abs()).max((cm.values[k][1] - c1).abs());
    }
    // composed second differences are only second order away from the boundary ring
    for k in doubly_interior(&g) {
        let (x, y) = g.point(k);
        let (s2, c2, s, c) = ((2.0 * x).sin(), (2.0 * x).cos(), (x + y).sin(), (x + y).cos());
        let exact_hess = [-5.0 * s2 * c - 4.0 * c2 * s, -2.0 * c2 * s - s2 * c, -s2 * c];
        for i in 0..3 {
            err[1] = err[1].max((hv.values[k][i] - exact_hess[i]).abs());
        }
        // ∂₂₂F₁₁ − 2∂₁₂F₁₂ + ∂₁₁F₂₂
        let d22 = -x * x * (x * y).cos();
        let d12 = x.cos();
        let d11 = (x + y * y).exp();
        err[4] = err[4].max((ctc.values[k] - (d22 - 2.0 * d12 + d11)).abs());
    }
    err
}

#[test]
fn operators_converge_at_second_order() {
    let (a, b) = (errors(33), errors(65));
    for i in 0..5 {
        let ratio = a[i] / b[i];
        assert!((3.5..=4.5).contains(&ratio), "operator {i}: error ratio {ratio} ({} → {})", a[i], b[i]);
    }
}

#[test]
fn determinant_identity_is_second_order() {
    let err = |n: usize| {
        let g = Grid2::unit_square(n).unwrap();
        let f = ScalarGridField::from_fn(g, |x, y| x.exp() * y.sin() + x * x * y);
        let a = curl_t_curl(&half_outer(&grad(&f)));
        let b = det_field(&hessian(&f));
        doubly_interior(&g).iter().map(|&k| (a.values[k] + b.values[k]).abs()).fold(0.0, f64::max)
    };
    let order = (err(33) / err(65)).log2();
    assert!(order > 1.8, "{order}");
}
