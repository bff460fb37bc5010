use nsf_core::basis::StreamBasis;
use nsf_core::grid::{Grid, ScalarField, VectorField};
use nsf_core::linalg::asymmetry;
use nsf_core::transport::{advect_density, level_set_measure, FaceFluxes};
use proptest::collection::vec;
use proptest::prelude::*;

fn field(g: &Grid, vals: &[f64]) -> ScalarField {
    ScalarField::new((0..g.n_nodes()).map(|k| vals[k % vals.len()]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_linear_and_monotone(a in vec(-5.0f64..5.0, 1..40), b in vec(-5.0f64..5.0, 1..40), s in -3.0f64..3.0) {
        let g = Grid::new(9, 6, 1.3, 0.7).unwrap();
        let (f, h) = (field(&g, &a), field(&g, &b));
        let comb = ScalarField::new(f.values.iter().zip(&h.values).map(|(x, y)| x + s * y).collect());
        let lin = g.integrate(&f) + s * g.integrate(&h);
        prop_assert!((g.integrate(&comb) - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        let hi = ScalarField::new(f.values.iter().zip(&h.values).map(|(x, y)| x.max(*y)).collect());
        prop_assert!(g.integrate(&hi) >= g.integrate(&f));
    }

    #[test]
    fn stencils_exact_on_constants(c in -10.0f64..10.0, d in -10.0f64..10.0) {
        let g = Grid::new(7, 5, 2.0, 1.0).unwrap();
        let f = ScalarField::constant(&g, c);
        let gr = g.grad(&f);
        prop_assert!(gr.x.iter().chain(&gr.y).all(|v| *v == 0.0));
        let n = g.n_nodes();
        let v = VectorField { x: vec![c; n], y: vec![d; n] };
        prop_assert!(g.div(&v).values.iter().all(|x| *x == 0.0));
        prop_assert!(g.laplacian_neumann(&f).values.iter().all(|x| x.abs() <= 1e-12 * c.abs()));
    }

    #[test]
    fn reconstruction_is_no_slip_and_solenoidal(c in vec(-1.0f64..1.0, 10)) {
        let g = Grid::new(24, 20, 1.0, 0.8).unwrap();
        let b = StreamBasis::new(&g, 10).unwrap();
        let v = b.reconstruct(&c).unwrap();
        let scale = v.max_grad().max(1e-300);
        for k in 0..g.n_nodes() {
            if g.is_boundary(k) {
                prop_assert!(v.u.x[k].abs().max(v.u.y[k].abs()) <= 1e-13 * scale.max(1.0));
            }
        }
        prop_assert!(v.max_divergence() <= 1e-10 * scale);
    }

    #[test]
    fn assembled_matrices_symmetric(r in vec(0.1f64..3.0, 1..30), c in vec(-1.0f64..1.0, 6)) {
        let g = Grid::unit(16).unwrap();
        let b = StreamBasis::new(&g, 6).unwrap();
        let rho = field(&g, &r);
        prop_assert!(asymmetry(&b.assemble_weighted_gram(&rho).unwrap()) <= 1e-13);
        prop_assert!(asymmetry(&b.assemble_strain(&rho).unwrap()) <= 1e-13);
        prop_assert!(asymmetry(&b.assemble_viscous(&rho, 0.1).unwrap()) <= 1e-13);
        prop_assert!(asymmetry(b.gradient_gram()) <= 1e-13);
        // cᵀT(u)c = ∫(u·∇u)·u vanishes up to quadrature error
        let w = b.reconstruct(&c).unwrap().u;
        let t = b.assemble_convection(&ScalarField::constant(&g, 1.0), &w).unwrap();
        let cv = nalgebra::DVector::from_column_slice(&c);
        let scale = t.abs().max() * cv.norm_squared();
        prop_assert!(cv.dot(&(&t * &cv)).abs() <= 1e-2 * scale.max(1e-300));
    }

    #[test]
    fn semi_lagrangian_maximum_principle(r in vec(0.5f64..3.0, 1..60), ux in vec(-3.0f64..3.0, 1..60), uy in vec(-3.0f64..3.0, 1..60), s in 0.0f64..1.0) {
        let g = Grid::unit(12).unwrap();
        let rho = field(&g, &r);
        let u = VectorField { x: field(&g, &ux).values, y: field(&g, &uy).values };
        let dt = (s * 5.0 * g.hx() / u.max_abs().max(1e-12)).max(1e-9);
        let out = advect_density(&g, &rho, &u, dt).unwrap();
        prop_assert!(out.min() >= rho.min() && out.max() <= rho.max());
    }

    #[test]
    fn full_range_level_set_is_domain(r in vec(0.0f64..3.0, 1..60)) {
        let g = Grid::new(10, 8, 1.5, 0.5).unwrap();
        let rho = field(&g, &r);
        prop_assert!((level_set_measure(&g, &rho, 0.0, rho.max()).unwrap() - g.area()).abs() <= 1e-14);
    }

    #[test]
    fn upwind_transport_conservative_monotone(r in vec(0.5f64..3.0, 1..60), psi in vec(-1.0f64..1.0, 144)) {
        let g = Grid::unit(12).unwrap();
        let ff = FaceFluxes::from_stream(&g, &psi).unwrap();
        let rho = field(&g, &r);
        let dt = 0.95 / ff.cfl(&g, 1.0).max(1e-12);
        let out = ff.advect(&g, &rho, dt).unwrap();
        prop_assert!((g.integrate(&out) - g.integrate(&rho)).abs() <= 1e-13 * g.integrate(&rho));
        prop_assert!(out.min() >= rho.min() - 1e-13 && out.max() <= rho.max() + 1e-13);
    }
}

#[test]
fn laplacians_agree_in_interior() {
    let f = |x: f64, y: f64| (2.0 * x).cos() * (y * y + 1.0).ln();
    let mut errs = Vec::new();
    for n in [16, 32] {
        let g = Grid::unit(n).unwrap();
        let s = g.sample(f);
        let a = g.div(&g.grad(&s));
        let b = g.laplacian_neumann(&s);
        let mut e: f64 = 0.0;
        for k in 0..g.n_nodes() {
            let (i, j) = g.ij(k);
            if i > 1 && j > 1 && i + 2 < n && j + 2 < n {
                e = e.max((a.values[k] - b.values[k]).abs());
            }
        }
        errs.push(e);
    }
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
}
