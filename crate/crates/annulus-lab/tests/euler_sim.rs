use std::f64::consts::{PI, TAU};

use annulus_lab::euler_sim::{
    conservation_report, run, step, transport_step, SimConfig, Simulation, VelocityInterpolant,
};
use annulus_lab::geometry::{make_grid, wrap_angle, ScalarField, Vec2};
use annulus_lab::Error;
use once_cell::sync::Lazy;

static SIM_32: Lazy<Simulation> = Lazy::new(|| {
    Simulation::new(SimConfig::new(32, 128, 0.01, 1.0, TAU, 1).unwrap()).unwrap()
});

static SIM_64: Lazy<Simulation> = Lazy::new(|| {
    Simulation::new(SimConfig::new(64, 256, 2e-3, 1.0, TAU, 1).unwrap()).unwrap()
});

/// Compactly supported angular bump: flat plateau for |θ| ≤ 0.1, quintic
/// smoothstep shoulders, zero for |θ| ≥ 1.5. Its extrema are flat
/// regions, so grid nodes attain them exactly.
fn angular_bump(theta: f64) -> f64 {
    let mut t = wrap_angle(theta);
    if t > PI {
        t -= TAU;
    }
    let x = t.abs();
    if x <= 0.1 {
        1.0
    } else if x >= 1.5 {
        0.0
    } else {
        let s = (1.5 - x) / 1.4;
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

fn c0_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn bicubic_interpolation_is_exact_on_radial_cubics() {
    let grid = make_grid(32, 128).unwrap();
    let cubic = |r: f64| (r - 1.0) * ((r - 1.0) * (r - 1.0) - 0.4) + 0.2;
    // Polar components cubic in r and constant in θ interpolate exactly.
    let field = |p: Vec2| {
        let r = p.norm();
        let rhat = p / r;
        rhat * cubic(r) + Vec2::new(-rhat.y, rhat.x) * (-0.5 * cubic(r))
    };
    let vel = VelocityInterpolant::from_fn(grid, field).unwrap();
    for &r in &[1.0f64, 1.003, 1.27, 1.5001, 1.83, 1.997, 2.0] {
        for &theta in &[0.0f64, 0.41, 2.0, 4.713, 6.1] {
            let p = Vec2::new(r * theta.cos(), r * theta.sin());
            let err = (vel.eval(p) - field(p)).norm();
            assert!(err < 1e-13, "r = {r}, θ = {theta}, err = {err:.3e}");
        }
    }
}

#[test]
fn bicubic_interpolation_converges_at_fourth_order_in_theta() {
    let grid = make_grid(8, 256).unwrap();
    let field = |p: Vec2| {
        let theta = p.y.atan2(p.x);
        let rhat = p / p.norm();
        rhat * theta.sin() + Vec2::new(-rhat.y, rhat.x) * (2.0 * theta).cos()
    };
    let vel = VelocityInterpolant::from_fn(grid, field).unwrap();
    // Cubic Lagrange remainder: (h⁴/24)·max|s(s−1)(s−2)(s−3)|·|∂⁴| with
    // h = 2π/256 and the cos 2θ component contributing |∂⁴| = 16.
    for k in 0..40 {
        let theta = 0.013 + 0.157 * k as f64;
        let p = Vec2::new(1.4 * theta.cos(), 1.4 * theta.sin());
        let err = (vel.eval(p) - field(p)).norm();
        assert!(err < 2e-7, "θ = {theta}, err = {err:.3e}");
    }
}

#[test]
fn interpolant_reports_sup_speed_and_rejects_bad_input() {
    let grid = make_grid(8, 16).unwrap();
    let vel = VelocityInterpolant::from_fn(grid.clone(), |p| Vec2::new(0.0, 3.0 * p.norm()))
        .unwrap();
    assert!((vel.sup_speed() - 6.0).abs() < 1e-14);

    assert!(matches!(
        VelocityInterpolant::new(grid.clone(), vec![Vec2::zeros(); 5]),
        Err(Error::GridMismatch(_))
    ));
    let mut bad = vec![Vec2::zeros(); grid.node_count()];
    bad[3] = Vec2::new(f64::NAN, 0.0);
    assert!(matches!(
        VelocityInterpolant::new(grid, bad),
        Err(Error::NonFiniteField { index: 3 })
    ));
}

#[test]
fn zero_vorticity_is_a_fixed_point() {
    let omega0 = ScalarField::zeros(SIM_32.grid().clone());
    let snapshots = SIM_32.run_to(&omega0, 0.05).unwrap();
    assert_eq!(snapshots.len(), 6);
    for s in &snapshots {
        assert!(s.omega.values.iter().all(|&v| v == 0.0));
        assert_eq!(s.diagnostics.energy, snapshots[0].diagnostics.energy);
        assert_eq!(s.diagnostics.enstrophy, 0.0);
        assert!(s.circulation_residual() < 1e-12 * TAU);
    }
    // Pure swirl of circulation 2π: energy = ½ ∫ r⁻² dA = π ln 2.
    assert!((snapshots[0].diagnostics.energy - PI * 2.0f64.ln()).abs() < 1e-3);
}

#[test]
fn radial_vorticity_is_numerically_steady() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, _| (r - 1.5) * (r - 1.5)).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 1.0).unwrap();
    let last = snapshots.last().unwrap();
    assert!((last.t - 1.0).abs() < 1e-9);
    let drift = c0_diff(&last.omega, &omega0);
    assert!(drift < 1e-8, "steady radial profile drifted by {drift:.3e}");
}

#[test]
fn radial_run_conserves_enstrophy_over_long_horizon() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, _| 0.2 * (PI * (r - 1.0)).sin()).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 10.0).unwrap();
    let report = conservation_report(&snapshots).unwrap();
    assert!(
        report.enstrophy_drift < 1e-6,
        "enstrophy drift {:.3e}",
        report.enstrophy_drift
    );
    assert_eq!(report.range_violation, 0.0);
}

#[test]
fn patch_rotates_with_the_swirl() {
    let grid = make_grid(64, 256).unwrap();
    let swirl = annulus_lab::euler_sim::swirl_velocity(TAU);
    let vel = VelocityInterpolant::from_fn(grid.clone(), swirl).unwrap();
    let mut omega =
        ScalarField::from_fn(grid.clone(), |_, theta| 0.25 * angular_bump(theta)).unwrap();
    let dt = 2e-3;
    let steps = 500;
    for _ in 0..steps {
        let (next, _) = transport_step(&omega, &vel, dt).unwrap();
        omega = next;
    }
    let t = dt * steps as f64;
    let reference = ScalarField::from_fn(grid, |r, theta| {
        0.25 * angular_bump(theta - t / (r * r))
    }).unwrap();
    let err = c0_diff(&omega, &reference);
    assert!(err < 1e-3, "rotated patch error {err:.3e} at t = {t}");
}

#[test]
fn one_step_is_reversible() {
    let omega0 = ScalarField::from_fn(SIM_64.grid().clone(), |_, theta| {
        0.25 * angular_bump(theta)
    }).unwrap();
    let (_, velocity) = SIM_64.prepare(omega0.clone(), 0.0).unwrap();
    let (forward, _) = transport_step(&omega0, &velocity, 2e-3).unwrap();
    let (back, _) = transport_step(&forward, &velocity, -2e-3).unwrap();
    let err = c0_diff(&back, &omega0);
    assert!(err < 1e-6, "round trip error {err:.3e}");
}

#[test]
fn vorticity_range_never_grows() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, theta| {
        (PI * (r - 1.0)).sin() * (3.0 * theta + 0.4).cos()
    }).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 0.5).unwrap();
    let d0 = snapshots[0].diagnostics;
    for s in &snapshots[1..] {
        assert!(s.diagnostics.omega_max <= d0.omega_max);
        assert!(s.diagnostics.omega_min >= d0.omega_min);
    }
    let report = conservation_report(&snapshots).unwrap();
    assert_eq!(report.range_violation, 0.0);
    assert!(report.energy_drift < 5e-3);
}

#[test]
fn circulation_is_constant_across_snapshots() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, theta| {
        0.5 * (PI * (r - 1.0)).sin() * (2.0 * theta).cos()
    }).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 0.2).unwrap();
    assert!(snapshots.len() >= 2);
    for s in &snapshots {
        assert!(
            s.circulation_residual() <= 1e-8 * (1.0 + s.sigma1.abs()),
            "circulation residual {:.3e} at t = {}",
            s.circulation_residual(),
            s.t
        );
    }
}

#[test]
fn config_enforces_the_time_step_bound() {
    assert!(SimConfig::new(64, 256, 6.3e-3, 1.0, TAU, 1).is_ok());
    assert!(matches!(
        SimConfig::new(64, 256, 6.5e-3, 1.0, TAU, 1),
        Err(Error::CflViolation(_))
    ));
    // Stronger swirl tightens the bound.
    assert!(matches!(
        SimConfig::new(64, 256, 6.3e-3, 1.0, 2.0 * TAU, 1),
        Err(Error::CflViolation(_))
    ));
    assert!(matches!(
        SimConfig::new(64, 256, -1e-3, 1.0, TAU, 1),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        SimConfig::new(64, 256, 2e-3, -1.0, TAU, 1),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        SimConfig::new(64, 256, 2e-3, 1.0, TAU, 0),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn oversized_displacement_is_rejected_at_the_step() {
    let grid = make_grid(32, 128).unwrap();
    let vel =
        VelocityInterpolant::from_fn(grid.clone(), annulus_lab::euler_sim::swirl_velocity(TAU))
            .unwrap();
    let omega = ScalarField::from_fn(grid, |r, _| r - 1.0).unwrap();
    assert!(matches!(
        transport_step(&omega, &vel, 0.05),
        Err(Error::CflViolation(_))
    ));
    assert!(transport_step(&omega, &vel, 0.005).is_ok());
}

#[test]
fn zero_horizon_yields_the_initial_snapshot_only() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, _| r).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 0.0).unwrap();
    assert_eq!(snapshots.len(), 1);
    assert_eq!(snapshots[0].t, 0.0);
    assert_eq!(snapshots[0].omega.values, omega0.values);
}

#[test]
fn partial_final_step_lands_exactly_on_the_horizon() {
    let omega0 = ScalarField::from_fn(SIM_32.grid().clone(), |r, _| (r - 1.5) * (r - 1.5)).unwrap();
    let snapshots = SIM_32.run_to(&omega0, 0.015).unwrap();
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 3);
    assert!((times[1] - 0.01).abs() < 1e-12);
    assert!((times[2] - 0.015).abs() < 1e-12);
}

#[test]
fn snapshot_cadence_thins_the_output() {
    let config = SimConfig::new(32, 128, 0.01, 0.1, TAU, 5).unwrap();
    let omega0 = ScalarField::from_fn(make_grid(32, 128).unwrap(), |r, _| (r - 1.5) * (r - 1.5)).unwrap();
    let snapshots = run(&config, &omega0).unwrap();
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 3);
    assert!((times[1] - 0.05).abs() < 1e-12);
    assert!((times[2] - 0.10).abs() < 1e-12);
}

#[test]
fn single_step_convenience_matches_the_simulation_path() {
    let grid = make_grid(32, 128).unwrap();
    let omega0 = ScalarField::from_fn(grid, |r, theta| 0.3 * (PI * (r - 1.0)).sin() * theta.cos()).unwrap();
    let (state0, velocity) = SIM_32.prepare(omega0, 0.0).unwrap();
    let (expected, _) = SIM_32.advance(&state0, &velocity, 0.01).unwrap();
    let via_free_fn = step(&state0, 0.01).unwrap();
    assert_eq!(via_free_fn.omega.values, expected.omega.values);
    assert_eq!(via_free_fn.diagnostics, expected.diagnostics);
}

#[test]
fn non_finite_vorticity_aborts_the_run() {
    let grid = SIM_32.grid().clone();
    let mut values = vec![0.0; grid.node_count()];
    values[17] = f64::NAN;
    let omega0 = ScalarField {
        grid,
        values,
    };
    match SIM_32.run_to(&omega0, 0.05) {
        Err(Error::NonFiniteState { t, details }) => {
            assert_eq!(t, 0.0);
            assert!(details.contains("17"), "details: {details}");
        }
        other => panic!("expected NonFiniteState, got {other:?}"),
    }
}

#[test]
fn conservation_report_requires_two_snapshots() {
    let omega0 = ScalarField::zeros(SIM_32.grid().clone());
    let snapshots = SIM_32.run_to(&omega0, 0.0).unwrap();
    assert!(matches!(
        conservation_report(&snapshots),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn mismatched_grid_is_rejected() {
    let other = ScalarField::zeros(make_grid(16, 64).unwrap());
    assert!(matches!(
        SIM_32.prepare(other.clone(), 0.0),
        Err(Error::GridMismatch(_))
    ));
    let vel = VelocityInterpolant::from_fn(SIM_32.grid().clone(), |_| Vec2::zeros()).unwrap();
    assert!(matches!(
        transport_step(&other, &vel, 0.01),
        Err(Error::GridMismatch(_))
    ));
}
