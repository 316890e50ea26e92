//! Velocity-reconstruction tests. The axisymmetric oracle (Stokes plus a
//! 1D Simpson integral of the enclosed vorticity) is validated against
//! closed forms before any production path is compared to it.

use std::f64::consts::TAU;

use annulus_lab::biot_savart::{eval_vhat, eval_vtilde, GridVelocitySolver};
use annulus_lab::geometry::{c0_norm, make_grid, perp, PolarGrid, ScalarField, Vec2};
use annulus_lab::Error;
use once_cell::sync::Lazy;
use proptest::prelude::*;

static SOLVER_64: Lazy<GridVelocitySolver> =
    Lazy::new(|| GridVelocitySolver::new(&make_grid(64, 256).unwrap()).unwrap());
static SOLVER_32: Lazy<GridVelocitySolver> =
    Lazy::new(|| GridVelocitySolver::new(&make_grid(32, 128).unwrap()).unwrap());

fn smooth_field(grid: &PolarGrid) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |r, th| {
        (std::f64::consts::PI * (r - 1.0)).sin() * ((2.0 * th).cos() + 0.5 * (3.0 * th).sin())
            + 0.3 * (2.0 - r) * (r - 1.0)
    })
    .unwrap()
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Tangential speed of the axisymmetric flow with radial vorticity
/// profile `omega` and Γ₁ circulation `sigma1`, from the circulation
/// budget `2πr·u_θ(r) = σ₁ + 2π ∫₁^r s ω(s) ds` (composite Simpson).
fn axisymmetric_speed(omega: impl Fn(f64) -> f64, sigma1: f64, r: f64) -> f64 {
    let n = 4096;
    let h = (r - 1.0) / n as f64;
    let mut acc = omega(1.0) + r * omega(r);
    for k in 1..n {
        let s = 1.0 + k as f64 * h;
        acc += s * omega(s) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let enclosed = TAU * acc * h / 3.0;
    (sigma1 + enclosed) / (TAU * r)
}

#[test]
fn axisymmetric_oracle_matches_closed_forms() {
    // ω ≡ 1 encloses π(r²−1); ω = s encloses 2π(r³−1)/3.
    for r in [1.0, 1.25, 1.5, 2.0] {
        let u = axisymmetric_speed(|_| 1.0, 0.0, r);
        assert!((u - (r * r - 1.0) / (2.0 * r)).abs() < 1e-12, "ω≡1 at {r}");
        let u = axisymmetric_speed(|s| s, 0.0, r);
        assert!((u - (r.powi(3) - 1.0) / (3.0 * r)).abs() < 1e-12, "ω=r at {r}");
        let u = axisymmetric_speed(|_| 1.0, TAU, r);
        let expect = 1.0 / r + (r * r - 1.0) / (2.0 * r);
        assert!((u - expect).abs() < 1e-12, "σ₁=2π at {r}");
    }
}

// ---------------------------------------------------------------------------
// Swirl component
// ---------------------------------------------------------------------------

#[test]
fn vhat_unit_circulation_examples() {
    let points = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)];
    let v = eval_vhat(TAU, &points).unwrap();
    assert!((v[0] - Vec2::new(0.0, 1.0)).norm() < 1e-15);
    assert!((v[1] - Vec2::new(-0.5, 0.0)).norm() < 1e-15);

    // Scaling in σ₁ is linear.
    let v3 = eval_vhat(3.0 * TAU, &points).unwrap();
    assert!((v3[0] - Vec2::new(0.0, 3.0)).norm() < 1e-14);
}

#[test]
fn vhat_rejects_bad_input() {
    let err = eval_vhat(TAU, &[Vec2::new(0.5, 0.0)]).unwrap_err();
    assert!(matches!(err, Error::PointOutsideAnnulus { .. }));
    let err = eval_vhat(TAU, &[Vec2::new(3.0, 0.0)]).unwrap_err();
    assert!(matches!(err, Error::PointOutsideAnnulus { .. }));
    let err = eval_vhat(f64::NAN, &[Vec2::new(1.5, 0.0)]).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
}

// ---------------------------------------------------------------------------
// Free-space volume integral
// ---------------------------------------------------------------------------

#[test]
fn vtilde_uniform_vorticity_matches_enclosed_area_law() {
    let grid = make_grid(64, 256).unwrap();
    let omega = ScalarField::from_fn(grid, |_, _| 1.0).unwrap();
    let points = [
        Vec2::new(1.43, 0.71),
        Vec2::new(-1.1, 1.2),
        Vec2::new(0.3, -1.45),
        Vec2::new(1.9, 0.2),
    ];
    let v = eval_vtilde(&omega, &points).unwrap();
    for (x, vi) in points.iter().zip(&v) {
        let r = x.norm();
        let expect = perp(*x) * ((r * r - 1.0) / (2.0 * r) / r);
        assert!(
            (vi - expect).norm() < 1e-3,
            "at {x:?}: {vi:?} vs {expect:?}"
        );
    }
}

#[test]
fn vtilde_rejects_points_outside_annulus() {
    let grid = make_grid(16, 32).unwrap();
    let omega = ScalarField::from_fn(grid, |_, _| 1.0).unwrap();
    let err = eval_vtilde(&omega, &[Vec2::new(0.2, 0.1)]).unwrap_err();
    assert!(matches!(err, Error::PointOutsideAnnulus { .. }));
}

#[test]
fn fft_tables_match_direct_quadrature() {
    // The convolution path and the direct evaluator share the coupling
    // function, so at grid nodes they differ only by summation order.
    let solver = &SOLVER_32;
    let omega = smooth_field(solver.grid());
    let field = solver.solve(&omega, 0.0).unwrap();
    let grid = solver.grid();
    let samples: Vec<(usize, usize)> = vec![
        (0, 0),
        (0, 77),
        (1, 12),
        (7, 100),
        (15, 3),
        (16, 64),
        (24, 90),
        (30, 127),
        (31, 50),
    ];
    let points: Vec<Vec2> = samples.iter().map(|&(i, j)| grid.cartesian(i, j)).collect();
    let direct = eval_vtilde(&omega, &points).unwrap();
    let scale = 1.0 + c0_norm(&omega);
    for (k, &(i, j)) in samples.iter().enumerate() {
        let fast = field.vtilde[grid.idx(i, j)];
        assert!(
            (fast - direct[k]).norm() < 1e-10 * scale,
            "node ({i},{j}): {fast:?} vs {:?}",
            direct[k]
        );
    }
}

// ---------------------------------------------------------------------------
// Full decomposition
// ---------------------------------------------------------------------------

#[test]
fn uniform_vorticity_total_profile() {
    let solver = &SOLVER_64;
    let grid = solver.grid();
    let omega = ScalarField::from_fn(grid.clone(), |_, _| 1.0).unwrap();
    for sigma1 in [0.0, TAU] {
        let field = solver.solve(&omega, sigma1).unwrap();
        let mut worst = 0.0f64;
        for &i in &[0usize, 1, 16, 32, 47, 62, 63] {
            for &j in &[0usize, 40, 128, 200] {
                let x = grid.cartesian(i, j);
                let r = grid.rs[i];
                let expect = perp(x) * (axisymmetric_speed(|_| 1.0, sigma1, r) / r);
                worst = worst.max((field.total(grid.idx(i, j)) - expect).norm());
            }
        }
        assert!(worst < 1e-3, "σ₁={sigma1}: worst node error {worst}");
    }
}

#[test]
fn boundary_conditions_hold_exactly() {
    let solver = &SOLVER_64;
    let omega = smooth_field(solver.grid());
    let scale = 1.0 + c0_norm(&omega);
    for sigma1 in [0.0, TAU, -3.0] {
        let field = solver.solve(&omega, sigma1).unwrap();
        assert!(
            field.boundary_normal_residual() < 1e-13 * scale,
            "normal residual {}",
            field.boundary_normal_residual()
        );
        let circ = field.circulation_gamma1();
        assert!(
            (circ - sigma1).abs() < 1e-12 * (1.0 + sigma1.abs()),
            "σ₁={sigma1}: circulation {circ}"
        );
        let (d1, d2) = field.compatibility_defect;
        assert!(
            d1.abs() < 1e-4 * scale && d2.abs() < 1e-4 * scale,
            "compatibility defect ({d1}, {d2})"
        );
    }
}

#[test]
fn solve_is_linear_in_omega() {
    let solver = &SOLVER_32;
    let grid = solver.grid();
    let omega1 = smooth_field(grid);
    let omega2 = ScalarField::from_fn(grid.clone(), |r, th| (r - 1.0) * (2.0 - r) * th.cos()).unwrap();
    let (alpha, beta) = (1.7, -0.6);
    let combo = ScalarField::new(
        grid.clone(),
        omega1
            .values
            .iter()
            .zip(&omega2.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect(),
    )
    .unwrap();
    let f1 = solver.solve(&omega1, 0.0).unwrap();
    let f2 = solver.solve(&omega2, 0.0).unwrap();
    let fc = solver.solve(&combo, 0.0).unwrap();
    let mut worst = 0.0f64;
    for k in 0..grid.node_count() {
        let expect = f1.total(k) * alpha + f2.total(k) * beta;
        worst = worst.max((fc.total(k) - expect).norm());
    }
    assert!(worst < 1e-11, "linearity defect {worst}");
}

#[test]
fn sigma1_shifts_only_the_swirl() {
    let solver = &SOLVER_32;
    let grid = solver.grid();
    let omega = smooth_field(grid);
    let f0 = solver.solve(&omega, 0.0).unwrap();
    let f1 = solver.solve(&omega, TAU).unwrap();
    for k in 0..grid.node_count() {
        assert_eq!(f0.vtilde[k], f1.vtilde[k]);
        assert_eq!(f0.grad_phi[k], f1.grad_phi[k]);
        let x = grid.cartesian(k / grid.n_theta, k % grid.n_theta);
        let expect = perp(x) / x.norm_squared();
        assert!(((f1.vhat[k] - f0.vhat[k]) - expect).norm() < 1e-13);
    }
    assert!((f1.vhat_coefficient - f0.vhat_coefficient - 1.0).abs() < 1e-13);
}

/// Sup of the centered-difference polar divergence
/// `(1/r)∂_r(r u_r) + (1/r)∂_θ u_θ` over the interior rings.
fn divergence_sup(solver: &GridVelocitySolver, omega: &ScalarField) -> f64 {
    let grid = solver.grid();
    let field = solver.solve(omega, TAU).unwrap();
    let (n_r, n) = (grid.n_r, grid.n_theta);
    let mut u_r = vec![0.0; n_r * n];
    let mut u_t = vec![0.0; n_r * n];
    for i in 0..n_r {
        for j in 0..n {
            let nv = Vec2::new(grid.thetas[j].cos(), grid.thetas[j].sin());
            let v = field.total(grid.idx(i, j));
            u_r[grid.idx(i, j)] = v.dot(&nv);
            u_t[grid.idx(i, j)] = v.dot(&perp(nv));
        }
    }
    let (dr, dth) = (grid.dr(), grid.dtheta());
    let mut worst = 0.0f64;
    for i in 1..n_r - 1 {
        let r = grid.rs[i];
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            let radial = (grid.rs[i + 1] * u_r[grid.idx(i + 1, j)]
                - grid.rs[i - 1] * u_r[grid.idx(i - 1, j)])
                / (2.0 * dr * r);
            let angular = (u_t[grid.idx(i, jp)] - u_t[grid.idx(i, jm)]) / (2.0 * dth * r);
            worst = worst.max((radial + angular).abs());
        }
    }
    worst
}

#[test]
fn total_velocity_is_discretely_divergence_free() {
    let omega = smooth_field(SOLVER_64.grid());
    let fine = divergence_sup(&SOLVER_64, &omega);
    assert!(fine < 1e-3 * c0_norm(&omega), "divergence {fine:.3e}");

    let coarse = divergence_sup(&SOLVER_32, &smooth_field(SOLVER_32.grid()));
    assert!(
        fine < coarse,
        "divergence did not decrease under refinement: {coarse:.3e} → {fine:.3e}"
    );
}

#[test]
fn velocity_bound_ratio_is_resolution_stable() {
    // sup|ṽ + ∇φ| ≤ C·sup|ω| with C independent of the grid: the measured
    // ratio must agree across a refinement step.
    let mut ratios = Vec::new();
    for solver in [&*SOLVER_32, &*SOLVER_64] {
        let omega = smooth_field(solver.grid());
        let field = solver.solve(&omega, 0.0).unwrap();
        let sup: f64 = (0..solver.grid().node_count())
            .map(|k| (field.vtilde[k] + field.grad_phi[k]).norm())
            .fold(0.0, f64::max);
        ratios.push(sup / c0_norm(&omega));
    }
    let rel = (ratios[1] / ratios[0] - 1.0).abs();
    assert!(rel < 0.2, "ratios {ratios:?}");
}

#[test]
fn zero_vorticity_gives_pure_swirl() {
    let solver = &SOLVER_32;
    let omega = ScalarField::zeros(solver.grid().clone());
    let field = solver.solve(&omega, TAU).unwrap();
    for k in 0..solver.grid().node_count() {
        assert_eq!(field.vtilde[k], Vec2::zeros());
        assert_eq!(field.grad_phi[k], Vec2::zeros());
        assert_eq!(field.total(k), field.vhat[k]);
    }
    assert!((field.sup_speed() - 1.0).abs() < 1e-12);
    assert!((field.circulation_gamma1() - TAU).abs() < 1e-12);
}

#[test]
fn mismatched_grid_and_bad_sigma_are_rejected() {
    let solver = &SOLVER_32;
    let other = make_grid(64, 256).unwrap();
    let omega = ScalarField::zeros(other);
    assert!(matches!(
        solver.solve(&omega, 0.0).unwrap_err(),
        Error::GridMismatch(_)
    ));
    let omega = ScalarField::zeros(solver.grid().clone());
    assert!(matches!(
        solver.solve(&omega, f64::INFINITY).unwrap_err(),
        Error::InvalidParameter(_)
    ));
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Any band-limited vorticity yields an impermeable field whose Γ₁
    /// circulation equals σ₁ to rounding.
    #[test]
    fn band_limited_vorticity_satisfies_wall_conditions(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        c0 in -1.0f64..1.0,
        sigma1 in -5.0f64..5.0,
    ) {
        let solver = &SOLVER_32;
        let omega = ScalarField::from_fn(solver.grid().clone(), |r, th| {
            let env = (std::f64::consts::PI * (r - 1.0)).sin();
            let mut v = c0 * env;
            for (m, (&am, &bm)) in a.iter().zip(&b).enumerate() {
                let k = (m + 1) as f64;
                v += env * (am * (k * th).cos() + bm * (k * th).sin());
            }
            v
        }).unwrap();
        let field = solver.solve(&omega, sigma1).unwrap();
        let scale = 1.0 + c0_norm(&omega);
        prop_assert!(field.boundary_normal_residual() < 1e-12 * scale);
        prop_assert!((field.circulation_gamma1() - sigma1).abs() < 1e-10 * (1.0 + sigma1.abs()));
        prop_assert!(field.totals().iter().all(|v| v.x.is_finite() && v.y.is_finite()));
    }
}
