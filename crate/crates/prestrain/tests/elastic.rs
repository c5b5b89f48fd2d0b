use nalgebra::{Matrix2, Matrix3, Rotation3, Vector3};
use prestrain::elastic::{complete_to_q2, energy_density, q2, q3, CompletionMap, Material};
use proptest::prelude::*;

fn material() -> impl Strategy<Value = Material> {
    (0.1f64..5.0, 0.0f64..5.0).prop_map(|(m, l)| Material::new(m, l).unwrap())
}

fn mat2() -> impl Strategy<Value = Matrix2<f64>> {
    prop::array::uniform4(-2.0f64..2.0).prop_map(|a| Matrix2::new(a[0], a[1], a[2], a[3]))
}

fn mat3() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-2.0f64..2.0).prop_map(|a| Matrix3::from_row_slice(&a))
}

fn embed(m: &Matrix2<f64>, col: [f64; 3], row: [f64; 2]) -> Matrix3<f64> {
    Matrix3::new(m[(0, 0)], m[(0, 1)], col[0], m[(1, 0)], m[(1, 1)], col[1], row[0], row[1], col[2])
}

proptest! {
    #[test]
    fn q2_is_minimum_over_completions(mat in material(), m in mat2(), c in prop::array::uniform3(-3.0f64..3.0), r in prop::array::uniform2(-3.0f64..3.0)) {
        let q = q2(&mat, &m);
        prop_assert!(q <= q3(&mat, &embed(&m, c, r)) + 1e-12 * q.max(1.0));
        let best = complete_to_q2(&mat, &m);
        prop_assert!((q3(&mat, &best) - q).abs() <= 1e-12 * q.max(1.0));
    }

    #[test]
    fn forms_are_quadratic(mat in material(), a in mat3(), b in mat3(), t in -3.0f64..3.0) {
        let scale = q3(&mat, &a).max(q3(&mat, &b)).max(1.0);
        prop_assert!((q3(&mat, &(a * t)) - t * t * q3(&mat, &a)).abs() <= 1e-12 * scale * (t * t).max(1.0));
        let lhs = q3(&mat, &(a + b)) + q3(&mat, &(a - b));
        prop_assert!((lhs - 2.0 * q3(&mat, &a) - 2.0 * q3(&mat, &b)).abs() <= 1e-12 * 4.0 * scale);
        let (a2, b2) = (a.fixed_view::<2, 2>(0, 0).into_owned(), b.fixed_view::<2, 2>(0, 0).into_owned());
        let lhs = q2(&mat, &(a2 + b2)) + q2(&mat, &(a2 - b2));
        prop_assert!((lhs - 2.0 * q2(&mat, &a2) - 2.0 * q2(&mat, &b2)).abs() <= 1e-12 * 4.0 * scale);
    }

    #[test]
    fn completion_map_matches_direct_completion(mat in material(), a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let map = CompletionMap::new(&mat).apply([a, b, c]);
        let full = complete_to_q2(&mat, &Matrix2::new(a, b, b, c));
        for (k, (i, j)) in [(0, 2), (1, 2), (2, 2)].into_iter().enumerate() {
            prop_assert!((map[k] - full[(i, j)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn energy_is_frame_invariant(mat in material(), f in mat3(), axis in prop::array::uniform3(-1.0f64..1.0), angle in 0.0f64..6.3) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let f = f + Matrix3::identity();
        let (a, b) = (energy_density(&mat, &f), energy_density(&mat, &(r.matrix() * f)));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn hessian_at_identity_reproduces_q3() {
    let mat = Material::new(1.3, 0.7).unwrap();
    let t = 1e-4;
    let w0 = energy_density(&mat, &Matrix3::identity());
    assert_eq!(w0, 0.0);
    let mut basis = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let mut e = Matrix3::zeros();
            e[(i, j)] = 1.0;
            basis.push(e);
        }
    }
    basis.push(Matrix3::new(0.3, -1.0, 0.2, 0.5, 1.1, -0.4, 0.0, 0.9, -0.6));
    for g in basis {
        let id = Matrix3::identity();
        let fd = (energy_density(&mat, &(id + g * t)) + energy_density(&mat, &(id - g * t)) - 2.0 * w0) / (t * t);
        let q = q3(&mat, &g);
        assert!((fd - q).abs() <= 1e-6 * q.max(1e-12), "{g}: {fd} vs {q}");
    }
}

#[test]
fn reference_values() {
    let unit = Material::new(1.0, 1.0).unwrap();
    assert!((q2(&unit, &Matrix2::identity()) - 20.0 / 3.0).abs() < 1e-14);
    assert!((unit.lambda_plane() - 2.0 / 3.0).abs() < 1e-15);
    assert!(Material::new(0.0, 1.0).is_err());
}
