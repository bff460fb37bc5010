use nsf_core::basis::StreamBasis;
use nsf_core::coefficients::{ConductivityLaw, ViscosityLaw};
use nsf_core::grid::{Grid, ScalarField};
use nsf_core::momentum::step_momentum;
use nsf_core::thermal::{dissipation_field, step_temperature, Linearization, ThermalStepParams};
use nsf_core::transport::FaceFluxes;
use proptest::collection::vec;
use proptest::prelude::*;

fn field(g: &Grid, vals: &[f64]) -> ScalarField {
    ScalarField::new((0..g.n_nodes()).map(|k| vals[(k * 7) % vals.len()]).collect())
}

fn linearization(newton: bool) -> Linearization {
    if newton {
        Linearization::KirchhoffNewton
    } else {
        Linearization::LaggedCoefficient
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pure_diffusion_comparison_and_conservation(
        t in vec(0.0f64..3.0, 2..50),
        r in vec(0.2f64..2.0, 1..50),
        dt in 1e-3f64..0.5,
        newton in any::<bool>(),
    ) {
        let g = Grid::new(10, 8, 1.0, 0.9).unwrap();
        let theta = field(&g, &t);
        let rho = field(&g, &r);
        let law = ConductivityLaw::quadratic(0.1, 0.4).unwrap();
        let mut p = ThermalStepParams::new(dt, 0.0).unwrap();
        p.linearization = linearization(newton);
        let zero = ScalarField::constant(&g, 0.0);
        let out = step_temperature(&g, &theta, &rho, &rho, &FaceFluxes::zeros(&g), &zero, &p, &law).unwrap();
        let slack = 1e-9 * theta.max().max(1.0);
        prop_assert!(out.theta.min() >= theta.min() - slack && out.theta.max() <= theta.max() + slack);
        let before = g.integrate_with(|k| rho.values[k] * theta.values[k]);
        let after = g.integrate_with(|k| rho.values[k] * out.theta.values[k]);
        prop_assert!((after - before).abs() <= 1e-10 * before.max(1e-300));
    }

    #[test]
    fn temperature_stays_nonnegative(
        t in vec(0.0f64..3.0, 2..50),
        d in vec(0.0f64..5.0, 1..50),
        psi in vec(-1e-2f64..1e-2, 80),
        delta in 0.0f64..0.9,
        newton in any::<bool>(),
    ) {
        let g = Grid::new(10, 8, 1.0, 0.9).unwrap();
        let ff = FaceFluxes::from_stream(&g, &psi).unwrap();
        let dt = 0.9 / ff.cfl(&g, 1.0).max(1.0);
        let rho = ScalarField::constant(&g, 1.0);
        let rho_new = ff.advect(&g, &rho, dt).unwrap();
        let law = ConductivityLaw::quadratic(0.05, 0.5).unwrap();
        let mut p = ThermalStepParams::new(dt, delta).unwrap();
        p.linearization = linearization(newton);
        let out = step_temperature(&g, &field(&g, &t), &rho_new, &rho, &ff, &field(&g, &d), &p, &law).unwrap();
        prop_assert!(out.theta.min() >= 0.0);
    }

    #[test]
    fn dissipation_is_nonnegative(c in vec(-2.0f64..2.0, 8), m in vec(0.0f64..3.0, 1..30)) {
        let g = Grid::unit(16).unwrap();
        let b = StreamBasis::new(&g, 8).unwrap();
        let d = dissipation_field(&field(&g, &m), &b.reconstruct(&c).unwrap());
        prop_assert!(d.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn kinetic_energy_never_increases(
        c in vec(-1.0f64..1.0, 6),
        w in vec(-1.0f64..1.0, 6),
        r0 in vec(0.5f64..2.0, 1..30),
        r1 in vec(0.5f64..2.0, 1..30),
        t in vec(0.0f64..2.0, 1..30),
        dt in 1e-3f64..1.0,
    ) {
        let g = Grid::unit(16).unwrap();
        let b = StreamBasis::new(&g, 6).unwrap();
        let law = ViscosityLaw::canonical(0.3, 1.0).unwrap();
        let adv = b.reconstruct(&w).unwrap().u;
        let out = step_momentum(&b, &c, &field(&g, &r0), &field(&g, &r1), &field(&g, &t), Some(&adv), dt, 1e-3, &law).unwrap();
        prop_assert!(out.kinetic_new <= out.kinetic_old * (1.0 + 1e-12));
        prop_assert!(out.numerical_dissipation(dt) >= -1e-12 * out.kinetic_old);
    }

    #[test]
    fn momentum_step_is_linear(c in vec(-1.0f64..1.0, 5), r in vec(0.5f64..2.0, 1..30), t in vec(0.0f64..2.0, 1..30)) {
        let g = Grid::unit(12).unwrap();
        let b = StreamBasis::new(&g, 5).unwrap();
        let law = ViscosityLaw::canonical(0.5, 1.0).unwrap();
        let (rho, theta) = (field(&g, &r), field(&g, &t));
        let one = step_momentum(&b, &c, &rho, &rho, &theta, None, 0.05, 1e-3, &law).unwrap();
        let c2: Vec<f64> = c.iter().map(|x| 2.0 * x).collect();
        let two = step_momentum(&b, &c2, &rho, &rho, &theta, None, 0.05, 1e-3, &law).unwrap();
        for (a, b) in one.c.iter().zip(&two.c) {
            prop_assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn eps_alone_damps_when_viscosity_vanishes() {
    // θ ≡ 0 gives μ ≡ 0 for the degenerate law
    let g = Grid::unit(16).unwrap();
    let b = StreamBasis::new(&g, 1).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let cold = ScalarField::constant(&g, 0.0);
    let law = ViscosityLaw::canonical(1.0, 1.0).unwrap();
    let m = b.assemble_weighted_gram(&one).unwrap()[(0, 0)];
    let a = b.gradient_gram()[(0, 0)];
    for eps in [1e-3, 1e-2] {
        let out = step_momentum(&b, &[1.0], &one, &one, &cold, None, 0.1, eps, &law).unwrap();
        assert!((out.c[0] - m / (m + 0.1 * eps * a)).abs() < 1e-13);
        assert_eq!(out.strain_work, 0.0);
    }
    let frozen = step_momentum(&b, &[1.0], &one, &one, &cold, None, 0.1, 0.0, &law).unwrap();
    assert!((frozen.c[0] - 1.0).abs() < 1e-14);
}
