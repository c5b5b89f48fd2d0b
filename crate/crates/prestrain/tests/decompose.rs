use prestrain::decompose::{DecomposeOptions, Decomposer, Solver};
use prestrain::diffops::{curl2, curl_t_curl, hessian, symgrad};
use prestrain::fields::{Grid2, ScalarGridField, SymGridField2, VectorGridField2};

fn grid(n: usize) -> Grid2 {
    Grid2::unit_square(n).unwrap()
}

fn smooth(g: Grid2, k: f64) -> SymGridField2 {
    SymGridField2::from_fn(g, move |x, y| [(k * x).sin() * y, (x * y * k).cos(), x * x - (k * y).sin()])
}

#[test]
fn symgrad_residual_is_orthogonal_to_clamped_cofactors() {
    let g = grid(33);
    let dec = Decomposer::new(&g);
    let f = smooth(g, 2.3);
    let split = dec.project_out_symgrad(&f).unwrap();
    let zero = ScalarGridField::zeros(g);
    for (p, q) in [(1.0, 0.0), (0.5, 2.0), (3.0, -1.0), (-2.0, 1.5)] {
        // test fields live on the free nodes of the clamped space
        let free: std::collections::HashSet<usize> = dec.free_nodes().iter().copied().collect();
        let mut alpha = ScalarGridField::from_fn(g, |x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2) * (p + q * x * y + (q * x).sin()));
        for k in 0..g.len() {
            if !free.contains(&k) {
                alpha.values[k] = 0.0;
            }
        }
        let scale = dec.symgrad_residual_pairing(&f, &zero, &alpha).abs();
        let pair = dec.symgrad_residual_pairing(&f, &split.r, &alpha);
        assert!(pair.abs() <= 1e-6 * scale, "{pair} vs scale {scale}");
    }
}

#[test]
fn solvers_agree_on_distances() {
    let g = grid(25);
    let f = smooth(g, 1.7);
    let cg = Decomposer::new(&g);
    let direct = Decomposer::with_options(&g, DecomposeOptions { solver: Solver::Direct, ..Default::default() });
    let pre = Decomposer::with_options(&g, DecomposeOptions { solver: Solver::Cg { diag_precond: true }, ..Default::default() });
    let a = cg.project_out_symgrad(&f).unwrap();
    let b = direct.project_out_symgrad(&f).unwrap();
    let c = pre.project_out_symgrad(&f).unwrap();
    assert!((a.distance - b.distance).abs() <= 1e-9 * b.distance);
    assert!((c.distance - b.distance).abs() <= 1e-9 * b.distance);
    let a = cg.project_out_hessian(&f).unwrap();
    let b = direct.project_out_hessian(&f).unwrap();
    assert!((a.distance - b.distance).abs() <= 1e-9 * b.distance);
    // v is unique up to affine functions, so the recovered Hessians coincide
    let (ha, hb) = (hessian(&a.v), hessian(&b.v));
    let diff = ha.add_scaled(&hb, -1.0).max_abs();
    assert!(diff <= 1e-6 * hb.max_abs().max(1.0), "{diff}");
}

#[test]
fn hessian_distance_and_curl_vanish_together() {
    let g = grid(33);
    let dec = Decomposer::new(&g);
    let v = ScalarGridField::from_fn(g, |x, y| (2.0 * x).sin() * y + x * y * y * y);
    let f = hessian(&v);
    let d = dec.project_out_hessian(&f).unwrap().distance;
    let c = dec.h_minus1_norm_vec(&curl2(&f)).unwrap();
    let scale = f.max_abs();
    assert!(d <= 1e-6 * scale && c <= 1e-10 * scale, "{d} {c}");
    // perturbing by a curl-carrying field makes both positive
    let g2 = f.add_scaled(&SymGridField2::from_fn(g, |_, y| [y, 0.0, 0.0]), 0.1);
    assert!(dec.project_out_hessian(&g2).unwrap().distance > 1e-4);
    assert!(dec.h_minus1_norm_vec(&curl2(&g2)).unwrap() > 1e-4);
}

#[test]
fn symgrad_distance_matches_dual_norm_and_vanishes_on_gradients() {
    let g = grid(33);
    let dec = Decomposer::new(&g);
    for k in [0.7, 1.9, 3.1] {
        let f = smooth(g, k);
        let a = dec.project_out_symgrad(&f).unwrap().distance;
        let b = dec.h_minus2_norm(&curl_t_curl(&f)).unwrap();
        assert!((a - b).abs() <= 0.02 * b);
    }
    let w = VectorGridField2::from_fn(g, |x, y| [(x + y).sin(), x * x * y]);
    let f = symgrad(&w);
    assert!(dec.project_out_symgrad(&f).unwrap().distance <= 1e-8 * f.max_abs());
}
