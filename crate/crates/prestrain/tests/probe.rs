use nalgebra::{Rotation3, Unit, Vector3};
use prestrain::elastic::Material;
use prestrain::fields::{parse_expression, Grid2, ScalarGridField, SymExpr3, VectorGridField2};
use prestrain::probe::fit::geometric_sweep;
use prestrain::probe::{
    build_recovery, commutator_defect, energy3d, mollify, scaling_fit, shrunk_nodes, Deformation3D, Ingredient, Quadrature, Variant,
};

fn expr(s: &str) -> Ingredient {
    Ingredient::Expr(parse_expression(s).unwrap())
}

fn sym(l: &[(usize, usize, &str)]) -> SymExpr3 {
    SymExpr3::from_entries(l).unwrap()
}

fn quad() -> Quadrature {
    Quadrature::standard(Grid2::unit_square(9).unwrap())
}

/// T1.1-ii style construction with every ingredient nonzero.
fn generic(material: &Material) -> Deformation3D {
    let s = sym(&[(0, 0, "x2^2"), (0, 1, "x1/3"), (0, 2, "x1*x2"), (2, 2, "sin(x1)")]);
    let b = sym(&[(0, 0, "x2"), (1, 1, "1"), (1, 2, "x1^2")]);
    build_recovery(Variant::Recseq, expr("x1^2*x2/4"), [expr("x1*x2"), expr("cos(x1)/5")], &s, &b, 6.0, 3.0, 3.0, material).unwrap()
}

#[test]
fn corrections_vanish_when_completions_are_trivial() {
    // λ = 0 makes every completion zero; with v = 0 and S_{i3} = 0 and B_{i3} = 0
    // both correction fields vanish identically.
    let material = Material::new(1.0, 0.0).unwrap();
    let s = sym(&[(0, 0, "x2^2"), (1, 1, "x1")]);
    let b = sym(&[(0, 0, "x2"), (0, 1, "x1*x2")]);
    let u = build_recovery(Variant::Recseq, Ingredient::zero(), [expr("x1*x2"), expr("sin(x2)")], &s, &b, 6.0, 3.0, 3.0, &material)
        .unwrap();
    for h in [0.1, 0.01] {
        for (x, y) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            let (d, db) = u.corrections_at(h, x, y).unwrap();
            assert_eq!(d, [0.0; 3]);
            assert_eq!(db, [0.0; 3]);
        }
        let with = energy3d(&u, h, &material, &quad()).unwrap().energy;
        let without = energy3d(&u.clone().without_corrections(), h, &material, &quad()).unwrap().energy;
        assert!(with > 0.0);
        assert_eq!(with, without);
    }
}

#[test]
fn corrections_are_off_when_disabled() {
    let material = Material::new(1.0, 1.0).unwrap();
    let u = generic(&material);
    let (d, _) = u.corrections_at(0.05, 0.3, 0.4).unwrap();
    assert!(d.iter().any(|x| *x != 0.0));
    let u = u.without_corrections();
    assert_eq!(u.corrections_at(0.05, 0.3, 0.4).unwrap(), ([0.0; 3], [0.0; 3]));
}

#[test]
fn energy_is_frame_invariant() {
    let material = Material::new(1.0, 1.0).unwrap();
    let u = generic(&material);
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.0, 0.6)), 1.1).into_inner();
    for h in [0.1, 0.02] {
        let a = energy3d(&u, h, &material, &quad()).unwrap().energy;
        let b = energy3d(&u.clone().rotated(r), h, &material, &quad()).unwrap().energy;
        assert!((a - b).abs() <= 1e-9 * a, "h={h}: {a} vs {b}");
    }
}

#[test]
fn zero_prestrain_identity_has_zero_energy() {
    let material = Material::new(1.0, 1.0).unwrap();
    let u = build_recovery(
        Variant::Recseq,
        Ingredient::zero(),
        [Ingredient::zero(), Ingredient::zero()],
        &SymExpr3::zero(),
        &SymExpr3::zero(),
        4.0,
        2.0,
        2.0,
        &material,
    )
    .unwrap();
    assert_eq!(energy3d(&u, 0.05, &material, &quad()).unwrap().energy, 0.0);
}

#[test]
fn quadrature_self_converges() {
    let material = Material::new(1.0, 1.0).unwrap();
    let u = generic(&material);
    let (q, r) = (quad(), quad().refined());
    for h in [0.1, 0.03, 0.01] {
        let a = energy3d(&u, h, &material, &q).unwrap().energy;
        let b = energy3d(&u, h, &material, &r).unwrap().energy;
        assert!((a - b).abs() <= 5e-3 * b, "h={h}: {a} vs {b}");
    }
    let sweep = geometric_sweep(0.1, 10f64.powf(-2.5), 8);
    let a = scaling_fit(&u, &sweep, &material, &q, 5.0).unwrap();
    let b = scaling_fit(&u, &sweep, &material, &r, 5.0).unwrap();
    assert!((a.slope.unwrap() - b.slope.unwrap()).abs() <= 0.05);
}

#[test]
fn variant_preconditions_are_enforced() {
    let m = Material::new(1.0, 1.0).unwrap();
    let z = || [Ingredient::zero(), Ingredient::zero()];
    let zero = SymExpr3::zero();
    let inplane = sym(&[(0, 1, "x1")]);
    assert!(build_recovery(Variant::Recseq0, Ingredient::zero(), z(), &zero, &zero, 4.0, 2.0, 1.5, &m).is_err());
    assert!(build_recovery(Variant::Recseq0, Ingredient::zero(), z(), &zero, &zero, 4.0, 2.0, 2.0, &m).is_ok());
    assert!(build_recovery(Variant::Recseq, Ingredient::zero(), z(), &zero, &zero, 6.0, 3.0, 1.5, &m).is_err());
    assert!(build_recovery(Variant::Recseq, Ingredient::zero(), z(), &zero, &zero, 4.5, 3.0, 3.0, &m).is_err());
    assert!(build_recovery(Variant::Recseq5, Ingredient::zero(), z(), &inplane, &zero, 3.0, 3.0, 3.0, &m).is_err());
    assert!(build_recovery(Variant::Recseq5, Ingredient::zero(), z(), &zero, &zero, 3.0, 3.0, 3.0, &m).is_ok());
    assert!(build_recovery(Variant::Recseq, Ingredient::zero(), z(), &zero, &zero, -1.0, 3.0, 3.0, &m).is_err());
    assert!("recseq7".parse::<Variant>().is_err());
}

#[test]
fn mollifier_preserves_constants_and_linear_gradients_commute() {
    let g = Grid2::unit_square(41).unwrap();
    for eps in [0.06, 0.1, 0.2] {
        let m = mollify(&ScalarGridField::from_fn(g, |_, _| -1.25), eps).unwrap();
        assert!(m.field.values.iter().all(|v| (v + 1.25).abs() < 1e-13));
        let lin = mollify(&ScalarGridField::from_fn(g, |x, y| 3.0 * x - y), eps).unwrap();
        for k in shrunk_nodes(&g, eps) {
            let (x, y) = g.point(k);
            assert!((lin.field.values[k] - (3.0 * x - y)).abs() < 1e-12);
        }
        // ∇v constant for linear v, so the commutator is zero
        let grad = VectorGridField2::from_fn(g, |_, _| [3.0, -1.0]);
        assert!(commutator_defect(&grad, eps).unwrap() < 1e-12);
        // a genuinely varying gradient gives a positive defect
        let curved = VectorGridField2::from_fn(g, |x, y| [(4.0 * x).sin(), x * y]);
        assert!(commutator_defect(&curved, eps).unwrap() > 1e-6);
    }
}
