//! Time integration of the vorticity transport equation
//! `∂_t ω + u·∇ω = 0` with the velocity reconstructed from ω every step.
//!
//! The scheme is semi-Lagrangian: each node traces its characteristic
//! backward with a classical 4-stage integrator through the step's frozen
//! velocity, and ω is picked up at the foot by bicubic Lagrange
//! interpolation (periodic in θ, clamped stencils in r). The interpolant
//! is clamped to the range of its own 4×4 stencil, which makes the
//! discrete maximum principle exact — the range of ω can never grow —
//! while leaving resolved smooth extrema untouched (their stencil
//! contains the crest node, so the clamp is inactive there).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::biot_savart::GridVelocitySolver;
use crate::geometry::{make_grid, perp, wrap_angle, PolarGrid, ScalarField, Vec2};
use crate::{Error, Result};

/// Cubic Lagrange weights on four consecutive uniform nodes, local
/// coordinate `s ∈ [0, 3]` measured from the first stencil node.
#[inline]
fn lagrange_weights(s: f64) -> [f64; 4] {
    let s1 = s - 1.0;
    let s2 = s - 2.0;
    let s3 = s - 3.0;
    [
        -s1 * s2 * s3 / 6.0,
        s * s2 * s3 / 2.0,
        -s * s1 * s3 / 2.0,
        s * s1 * s2 / 6.0,
    ]
}

/// 4×4 interpolation stencil for a point: radial base row (clamped to the
/// grid), angular base column (periodic), and the two weight vectors.
struct Stencil {
    base_r: usize,
    base_j: isize,
    wr: [f64; 4],
    wt: [f64; 4],
}

fn stencil_for(grid: &PolarGrid, p: Vec2) -> Stencil {
    let r = p.norm().clamp(grid.annulus.r_inner, grid.annulus.r_outer);
    let theta = wrap_angle(p.y.atan2(p.x));
    let fr = (r - grid.annulus.r_inner) / grid.dr();
    let base_r = ((fr.floor() as isize) - 1).clamp(0, grid.n_r as isize - 4) as usize;
    let sr = fr - base_r as f64;
    let ft = theta / grid.dtheta();
    let jt = ft.floor() as isize;
    let st = ft - jt as f64 + 1.0;
    Stencil {
        base_r,
        base_j: jt - 1,
        wr: lagrange_weights(sr),
        wt: lagrange_weights(st),
    }
}

/// Bicubic interpolant of a velocity grid. The node values are stored as
/// polar components `(v·r̂, v·t̂)` and rotated back to Cartesian at the
/// query point: an axisymmetric swirl then interpolates to an exactly
/// tangential field, so circles advect to circles. Queries clamp the
/// radius into the annulus, matching the radial foot projection of the
/// transport step.
#[derive(Debug, Clone)]
pub struct VelocityInterpolant {
    pub grid: PolarGrid,
    radial: Vec<f64>,
    tangential: Vec<f64>,
}

impl VelocityInterpolant {
    pub fn new(grid: PolarGrid, values: Vec<Vec2>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "velocity has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite()))
        {
            return Err(Error::NonFiniteField { index: k });
        }
        let mut radial = Vec::with_capacity(values.len());
        let mut tangential = Vec::with_capacity(values.len());
        for (k, v) in values.iter().enumerate() {
            let theta = grid.thetas[k % grid.n_theta];
            let rhat = Vec2::new(theta.cos(), theta.sin());
            radial.push(v.dot(&rhat));
            tangential.push(v.dot(&perp(rhat)));
        }
        Ok(Self {
            grid,
            radial,
            tangential,
        })
    }

    /// Sample a prescribed velocity field at the grid nodes (test and
    /// diagnostic harness for driving transport with a known flow).
    pub fn from_fn(grid: PolarGrid, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|k| f(grid.cartesian(k / grid.n_theta, k % grid.n_theta)))
            .collect();
        Self::new(grid, values)
    }

    pub fn eval(&self, p: Vec2) -> Vec2 {
        let st = stencil_for(&self.grid, p);
        let n = self.grid.n_theta as isize;
        let mut vr = 0.0;
        let mut vt = 0.0;
        for (a, &wra) in st.wr.iter().enumerate() {
            let row = (st.base_r + a) * self.grid.n_theta;
            for (b, &wtb) in st.wt.iter().enumerate() {
                let j = (st.base_j + b as isize).rem_euclid(n) as usize;
                let w = wra * wtb;
                vr += self.radial[row + j] * w;
                vt += self.tangential[row + j] * w;
            }
        }
        let rhat = p / p.norm();
        rhat * vr + perp(rhat) * vt
    }

    /// Cartesian velocity at a grid node.
    pub fn node_value(&self, k: usize) -> Vec2 {
        let theta = self.grid.thetas[k % self.grid.n_theta];
        let rhat = Vec2::new(theta.cos(), theta.sin());
        rhat * self.radial[k] + perp(rhat) * self.tangential[k]
    }

    /// Largest node speed.
    pub fn sup_speed(&self) -> f64 {
        self.radial
            .iter()
            .zip(&self.tangential)
            .fold(0.0f64, |m, (r, t)| m.max(r.hypot(*t)))
    }
}

/// Interpolate ω at a point with the quasi-monotone clamp: the bicubic
/// value is clipped to the min/max of its 4×4 stencil.
fn interp_omega(field: &ScalarField, p: Vec2) -> f64 {
    let grid = &field.grid;
    let st = stencil_for(grid, p);
    let n = grid.n_theta as isize;
    let mut value = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, &wra) in st.wr.iter().enumerate() {
        let row = (st.base_r + a) * grid.n_theta;
        for (b, &wtb) in st.wt.iter().enumerate() {
            let j = (st.base_j + b as isize).rem_euclid(n) as usize;
            let v = field.values[row + j];
            value += v * (wra * wtb);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    value.clamp(lo, hi)
}

/// One semi-Lagrangian transport step of ω through a frozen velocity:
/// backward 4-stage characteristic feet, radial projection of feet that
/// leave the annulus (returned as a count), clamped bicubic pickup.
/// Negative `dt` transports backward (used by reversibility checks).
pub fn transport_step(
    omega: &ScalarField,
    velocity: &VelocityInterpolant,
    dt: f64,
) -> Result<(ScalarField, usize)> {
    if omega.grid != velocity.grid {
        return Err(Error::GridMismatch(
            "vorticity and velocity grids differ".into(),
        ));
    }
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParameter(format!("dt = {dt} is invalid")));
    }
    let grid = &omega.grid;
    let min_cell = grid.dr().min(grid.annulus.r_inner * grid.dtheta());
    let mut values = Vec::with_capacity(grid.node_count());
    let mut projected = 0usize;
    let mut max_disp = 0.0f64;
    for i in 0..grid.n_r {
        for j in 0..grid.n_theta {
            let x = grid.cartesian(i, j);
            let k1 = -velocity.eval(x);
            let k2 = -velocity.eval(x + k1 * (0.5 * dt));
            let k3 = -velocity.eval(x + k2 * (0.5 * dt));
            let k4 = -velocity.eval(x + k3 * dt);
            let mut foot = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            max_disp = max_disp.max((foot - x).norm());
            let r = foot.norm();
            if r < grid.annulus.r_inner || r > grid.annulus.r_outer {
                projected += 1;
                let r_clamped = r.clamp(grid.annulus.r_inner, grid.annulus.r_outer);
                foot *= r_clamped / r;
            }
            values.push(interp_omega(omega, foot));
        }
    }
    if max_disp > min_cell {
        return Err(Error::CflViolation(format!(
            "step displacement {max_disp:.3e} exceeds one cell {min_cell:.3e}"
        )));
    }
    Ok((ScalarField::new(grid.clone(), values)?, projected))
}

/// Per-snapshot conserved-quantity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Kinetic energy `½∫|u|² dA`.
    pub energy: f64,
    /// Enstrophy `∫ω² dA`.
    pub enstrophy: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Measured Γ₁ circulation of the reconstructed velocity.
    pub circulation: f64,
}

/// The simulation state at one time.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub omega: ScalarField,
    pub sigma1: f64,
    pub diagnostics: Diagnostics,
    /// Characteristic feet radially projected back into the annulus
    /// during the step that produced this state.
    pub feet_projected: usize,
}

impl SimState {
    /// |measured circulation − σ₁|.
    pub fn circulation_residual(&self) -> f64 {
        (self.diagnostics.circulation - self.sigma1).abs()
    }
}

/// Run parameters. Construction enforces the CFL-style accuracy bound
/// `dt · (|σ₁|/2π + 1/4) ≤ 0.5 · min(Δr, Δθ)` — the velocity estimate is
/// the swirl maximum plus the perturbation regime bound 1/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_r: usize,
    pub n_theta: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sigma1: f64,
    /// Snapshot cadence in steps (≥ 1; the initial and final states are
    /// always included).
    pub output_every: usize,
}

impl SimConfig {
    pub fn new(
        n_r: usize,
        n_theta: usize,
        dt: f64,
        t_end: f64,
        sigma1: f64,
        output_every: usize,
    ) -> Result<Self> {
        let grid = make_grid(n_r, n_theta)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be > 0")));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} must be ≥ 0"
            )));
        }
        if !sigma1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma1 = {sigma1} is not finite"
            )));
        }
        if output_every == 0 {
            return Err(Error::InvalidParameter(
                "output_every must be ≥ 1".into(),
            ));
        }
        let speed_estimate = sigma1.abs() / TAU + 0.25;
        let min_cell = grid.dr().min(grid.annulus.r_inner * grid.dtheta());
        if dt * speed_estimate > 0.5 * min_cell {
            return Err(Error::CflViolation(format!(
                "dt = {dt} violates dt·{speed_estimate:.3} ≤ 0.5·{min_cell:.4e}"
            )));
        }
        Ok(Self {
            n_r,
            n_theta,
            dt,
            t_end,
            sigma1,
            output_every,
        })
    }

    pub fn grid(&self) -> Result<PolarGrid> {
        make_grid(self.n_r, self.n_theta)
    }
}

/// A reusable simulation: the velocity solver's tables are assembled once
/// for the grid and shared by every step.
pub struct Simulation {
    config: SimConfig,
    grid: PolarGrid,
    solver: GridVelocitySolver,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let grid = config.grid()?;
        let solver = GridVelocitySolver::new(&grid)?;
        Ok(Self {
            config,
            grid,
            solver,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    /// Solve the velocity for a vorticity field and package the state
    /// with its diagnostics plus the transport interpolant.
    pub fn prepare(&self, omega: ScalarField, t: f64) -> Result<(SimState, VelocityInterpolant)> {
        if omega.grid != self.grid {
            return Err(Error::GridMismatch(
                "vorticity grid does not match the simulation grid".into(),
            ));
        }
        if let Some(k) = omega.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                t,
                details: format!("vorticity is non-finite at node {k}"),
            });
        }
        let field = self.solver.solve(&omega, self.config.sigma1)?;
        let weights = self.grid.area_weights();
        let mut energy = 0.0;
        let mut enstrophy = 0.0;
        let mut omega_min = f64::INFINITY;
        let mut omega_max = f64::NEG_INFINITY;
        for (k, &w) in weights.iter().enumerate() {
            energy += 0.5 * w * field.total(k).norm_squared();
            let o = omega.values[k];
            enstrophy += w * o * o;
            omega_min = omega_min.min(o);
            omega_max = omega_max.max(o);
        }
        let diagnostics = Diagnostics {
            energy,
            enstrophy,
            omega_min,
            omega_max,
            circulation: field.circulation_gamma1(),
        };
        let velocity = VelocityInterpolant::new(self.grid.clone(), field.totals())?;
        Ok((
            SimState {
                t,
                omega,
                sigma1: self.config.sigma1,
                diagnostics,
                feet_projected: 0,
            },
            velocity,
        ))
    }

    /// Advance one step with the state's frozen velocity, then re-solve
    /// for the new state's velocity and diagnostics.
    pub fn advance(
        &self,
        state: &SimState,
        velocity: &VelocityInterpolant,
        dt: f64,
    ) -> Result<(SimState, VelocityInterpolant)> {
        let (omega_new, projected) =
            transport_step(&state.omega, velocity, dt).map_err(|e| match e {
                Error::NonFiniteField { index } => Error::NonFiniteState {
                    t: state.t,
                    details: format!("vorticity became non-finite at node {index}"),
                },
                other => other,
            })?;
        let (mut next, vel_next) = self.prepare(omega_new, state.t + dt)?;
        next.feet_projected = projected;
        Ok((next, vel_next))
    }

    /// Integrate from `t = 0` to the configured `t_end`, returning
    /// snapshots at the configured cadence (initial and final states
    /// always included).
    pub fn run(&self, omega0: &ScalarField) -> Result<Vec<SimState>> {
        self.run_to(omega0, self.config.t_end)
    }

    /// [`Simulation::run`] with an explicit horizon, so one solver can
    /// serve runs of different lengths.
    pub fn run_to(&self, omega0: &ScalarField, t_end: f64) -> Result<Vec<SimState>> {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} must be ≥ 0"
            )));
        }
        let dt = self.config.dt;
        let n_whole = (t_end / dt + 1e-9).floor() as usize;
        let remainder = t_end - n_whole as f64 * dt;
        let (mut state, mut velocity) = self.prepare(omega0.clone(), 0.0)?;
        let mut snapshots = vec![state.clone()];
        for k in 1..=n_whole {
            let (next, vel_next) = self.advance(&state, &velocity, dt)?;
            state = next;
            velocity = vel_next;
            if k % self.config.output_every == 0 && !(k == n_whole && remainder <= 1e-12) {
                snapshots.push(state.clone());
            }
        }
        if remainder > 1e-12 {
            let (next, _) = self.advance(&state, &velocity, remainder)?;
            state = next;
        }
        if t_end > 0.0 {
            snapshots.push(state);
        }
        Ok(snapshots)
    }
}

/// One-off single step: assembles a solver for the state's grid, so use
/// [`Simulation`] for loops.
pub fn step(state: &SimState, dt: f64) -> Result<SimState> {
    let grid = &state.omega.grid;
    let config = SimConfig::new(grid.n_r, grid.n_theta, dt.abs(), dt.abs(), state.sigma1, 1)?;
    let sim = Simulation::new(config)?;
    let (prepared, velocity) = sim.prepare(state.omega.clone(), state.t)?;
    let (next, _) = sim.advance(&prepared, &velocity, dt)?;
    Ok(next)
}

/// Integrate `omega0` under `config` (solver assembled once).
pub fn run(config: &SimConfig, omega0: &ScalarField) -> Result<Vec<SimState>> {
    Simulation::new(config.clone())?.run(omega0)
}

/// Relative conserved-quantity drifts over a snapshot sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// max_t |E(t) − E(0)| / |E(0)| (absolute drift when E(0) = 0).
    pub energy_drift: f64,
    /// max_t |Z(t) − Z(0)| / |Z(0)| (absolute drift when Z(0) = 0).
    pub enstrophy_drift: f64,
    /// max(0, max_t max|ω(t)| − max|ω(0)|).
    pub range_violation: f64,
}

pub fn conservation_report(snapshots: &[SimState]) -> Result<ConservationReport> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter(
            "conservation report needs at least 2 snapshots".into(),
        ));
    }
    let d0 = snapshots[0].diagnostics;
    let sup0 = d0.omega_min.abs().max(d0.omega_max.abs());
    let rel = |q: f64, q0: f64| {
        let diff = (q - q0).abs();
        if q0.abs() > 0.0 {
            diff / q0.abs()
        } else {
            diff
        }
    };
    let mut report = ConservationReport {
        energy_drift: 0.0,
        enstrophy_drift: 0.0,
        range_violation: 0.0,
    };
    for s in &snapshots[1..] {
        let d = s.diagnostics;
        report.energy_drift = report.energy_drift.max(rel(d.energy, d0.energy));
        report.enstrophy_drift = report.enstrophy_drift.max(rel(d.enstrophy, d0.enstrophy));
        let sup = d.omega_min.abs().max(d.omega_max.abs());
        report.range_violation = report.range_violation.max(sup - sup0);
    }
    report.range_violation = report.range_violation.max(0.0);
    Ok(report)
}

/// The swirl `u* = (σ₁/2π)(−x₂, x₁)/|x|²` by itself, as a closed-form
/// velocity (diagnostics and prescribed-flow tests).
pub fn swirl_velocity(sigma1: f64) -> impl Fn(Vec2) -> Vec2 {
    move |p: Vec2| perp(p) * (sigma1 / (TAU * p.norm_squared()))
}
