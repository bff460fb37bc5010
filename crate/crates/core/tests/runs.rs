use nsf_core::coefficients::RenormFunction;
use nsf_core::config::{parse_config, serialize_config};
use nsf_core::coupler::{run_simulation, Profile, RunConfig, Trajectory};
use nsf_core::degiorgi::{certify, ladder_run, level_energy, truncation_phi, DeGiorgiLadder};
use nsf_core::diagnostics::{check_energy_inequality, diagnostics_records, renorm_residual, Spatial, Temporal, TestFunction};
use nsf_core::grid::Grid;
use nsf_core::io::{diagnostics_csv, read_snapshot, write_snapshot, Snapshot, CSV_COLUMNS};
use nsf_core::thermal::Linearization;
use proptest::prelude::*;

fn quick() -> RunConfig {
    RunConfig { nx: 16, ny: 16, n_modes: 4, t_final: 0.1, dt: 0.01, ..RunConfig::default() }
}

fn run(c: &RunConfig) -> Trajectory {
    run_simulation(c).unwrap()
}

#[test]
fn density_bounds_energy_and_certificate() {
    let c = quick();
    let traj = run(&c);
    for s in &traj.states {
        assert!(s.rho.min() >= c.initial.rho_min - 1e-13 && s.rho.max() <= c.initial.rho_max + 1e-13);
    }
    assert!(check_energy_inequality(&traj).unwrap().passes);
    let cert = ladder_run(&traj, c.initial.theta_floor, 6, 0.0, c.delta).unwrap();
    assert!(cert.decay_ok && cert.bound_holds);
    assert!(cert.u.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn determinism() {
    let c = quick();
    let (a, b) = (run(&c), run(&c));
    assert_eq!(a.states, b.states);
    assert_eq!(diagnostics_csv(&diagnostics_records(&a, None)), diagnostics_csv(&diagnostics_records(&b, None)));
}

#[test]
fn hot_trajectory_has_empty_level_sets() {
    let mut c = quick();
    c.initial.theta_floor = 1.0;
    c.initial.theta_peak = 1.5;
    c.delta = 1e-6;
    c.t_final = 0.03;
    let traj = run(&c);
    assert!(traj.min_theta() >= 1.0 - 1e-3);
    let cert = ladder_run(&traj, 1.0, 5, 0.0, c.delta).unwrap();
    assert!(cert.u[1..].iter().all(|u| *u == 0.0));
    assert!(cert.decay_ok);
    assert!((cert.lower_bound - (-cert.m).exp()).abs() < 1e-15);
}

#[test]
fn level_energy_of_a_frozen_state() {
    let mut c = quick();
    c.t_final = 0.0;
    c.initial.momentum.clear();
    c.initial.rho_profile = Profile::Uniform;
    c.initial.theta_profile = Profile::Uniform;
    c.initial.theta_floor = 0.02;
    c.initial.theta_peak = 0.02;
    let traj = run(&c);
    let ladder = DeGiorgiLadder::new(4.0, 0.005, 3).unwrap();
    for k in 0..=3 {
        let ck = ladder.level(k);
        let expect = (c.delta + c.initial.rho_min) * (ck / 0.025).ln().max(0.0);
        let u = level_energy(&traj, k, &ladder, c.delta).unwrap();
        assert!((u - expect).abs() <= 1e-13 * expect.max(1.0), "k = {k}: {u} vs {expect}");
    }
}

#[test]
fn adversarial_cold_spot_breaks_the_certificate() {
    let c = quick();
    let mut traj = run(&c);
    let m = traj.states.len() / 2;
    let k = traj.grid.idx(8, 8);
    traj.states[m].theta.values[k] = 1e-4;
    let cert = ladder_run(&traj, c.initial.theta_floor, 8, 0.0, c.delta).unwrap();
    assert!(!cert.decay_ok);
    assert!(!cert.bound_holds);
}

#[test]
fn renorm_residuals_across_exponents() {
    let traj = run(&quick());
    let phi = TestFunction::new(Temporal::Quadratic, Spatial::Cosine);
    let mut res = Vec::new();
    for l in [1.0, 0.5, 0.25] {
        let r = renorm_residual(&traj, &RenormFunction::power(l).unwrap(), &phi).unwrap();
        assert!(r.passes, "l = {l}: {r:?}");
        res.push(r.residual);
    }
    // the defect shrinks with l: h flattens toward the constant l → 0 limit
    assert!(res[0] <= res[1] && res[1] <= res[2] && res[2] <= 0.0, "{res:?}");
}

#[test]
fn lagged_linearization_also_satisfies_energy_inequality() {
    let c = RunConfig { linearization: Linearization::LaggedCoefficient, ..quick() };
    let traj = run(&c);
    assert!(check_energy_inequality(&traj).unwrap().passes);
}

#[test]
fn csv_header_and_snapshot_format_are_pinned() {
    let traj = run(&RunConfig { t_final: 0.02, ..quick() });
    let csv = diagnostics_csv(&diagnostics_records(&traj, Some(-1.5)));
    let header = "step,time,dt,picard_iterations,kinetic,thermal,total,cum_viscous_dissipation,cum_eps_dissipation,cum_sink,\
rho_min,rho_max,theta_min,theta_max,u_h1,theta_h1,theta_l3,energy_slack,renorm_residual";
    assert_eq!(csv.lines().next().unwrap(), header);
    assert_eq!(CSV_COLUMNS.join(","), header);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,0.00000000000000000e0,0.00000000000000000e0,0,"));
    assert!(rows[1].ends_with(','));
    assert!(rows[3].ends_with(",-1.50000000000000000e0"));

    let g = Grid::new(4, 4, 2.0, 2.0).unwrap();
    let f = g.sample(|x, y| x - 0.5 * y);
    let text = write_snapshot(&Snapshot::new("rho", &g, 0.25, &f));
    let golden = include_str!("golden/snapshot_4x4.txt");
    assert_eq!(text, golden);
    assert_eq!(read_snapshot(golden).unwrap().values, f.values);
}

#[test]
fn certify_with_custom_exponents() {
    let traj = run(&quick());
    let ladder = DeGiorgiLadder::with_exponents(5.0, 0.0, 4, 3.0, 0.5).unwrap();
    assert!((ladder.gamma() - 1.75).abs() < 1e-15);
    let cert = certify(&traj, &ladder, traj.config.delta).unwrap();
    assert_eq!(cert.u.len(), 5);
    assert!(DeGiorgiLadder::with_exponents(5.0, 0.0, 4, 1.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_non_increasing_in_omega(theta in 0.0f64..2.0, ck in 0.01f64..1.0, w1 in 0.001f64..1.0, w2 in 0.001f64..1.0) {
        let (lo, hi) = if w1 < w2 { (w1, w2) } else { (w2, w1) };
        prop_assert!(truncation_phi(theta, ck, hi).unwrap() <= truncation_phi(theta, ck, lo).unwrap());
    }

    #[test]
    fn config_round_trip(
        nx in 4usize..200,
        lx in 0.1f64..10.0,
        dt in 1e-5f64..0.1,
        delta in 1e-4f64..0.5,
        eps in 0.0f64..1.0,
        slope in 0.01f64..5.0,
        k_lo in 0.001f64..1.0,
        mom in proptest::collection::vec(-1.0f64..1.0, 0..4),
        newton in any::<bool>(),
    ) {
        let mut c = RunConfig { nx, lx, dt, delta, eps, ..RunConfig::default() };
        c.viscosity = nsf_core::coefficients::ViscosityLaw::canonical(slope, 0.7).unwrap();
        c.conductivity = nsf_core::coefficients::ConductivityLaw::quadratic(k_lo, 2.0 * k_lo).unwrap();
        c.initial.momentum = mom;
        c.initial.rho_min = 1.0;
        c.linearization = if newton { Linearization::KirchhoffNewton } else { Linearization::LaggedCoefficient };
        prop_assert_eq!(parse_config(&serialize_config(&c)).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn level_energies_non_increasing(floor in 0.01f64..0.5, peak in 0.5f64..2.0, a in -0.05f64..0.05) {
        let mut c = RunConfig { nx: 12, ny: 12, n_modes: 3, t_final: 0.04, dt: 0.01, ..RunConfig::default() };
        c.initial.theta_floor = floor;
        c.initial.theta_peak = peak;
        c.initial.momentum = vec![a, -a];
        let traj = run(&c);
        let ladder = DeGiorgiLadder::for_floor(floor, 0.0, 6).unwrap();
        let u: Vec<f64> = (0..=6).map(|k| level_energy(&traj, k, &ladder, c.delta).unwrap()).collect();
        prop_assert!(u.windows(2).all(|w| w[1] <= w[0]), "{:?}", u);
    }
}
