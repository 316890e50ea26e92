//! Command-line entry point: argument parsing, flat `key=value` config
//! files, run orchestration, and artifact emission for the eight
//! subcommands.
//!
//! Exit codes: 0 — the run completed and every checked verdict passed
//! (or the subcommand has no verdicts); 1 — the run completed but a
//! verdict failed; 2 — usage, config, or runtime error. Parameters
//! resolve as flag → config entry → default, and unrecognized config
//! keys abort before any work starts.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::besov::spectrum;
use crate::biot_savart::solve_velocity;
use crate::euler_sim::{
    conservation_report, swirl_velocity, SimConfig, Simulation, VelocityInterpolant,
    transport_step,
};
use crate::geometry::{make_grid, ScalarField, Vec2};
use crate::io;
use crate::lagrangian::{
    advect_line, winding_separation, MaterialLine, SampledVelocity, DEFAULT_GAP_THRESHOLD,
    DEFAULT_MARKER_CAP,
};
use crate::measure_recurrence::{an_set_check, recurrence_statistics, FiniteSystem};
use crate::pendulum::{
    classify_orbit, energy, recurrence_time, trajectory, PendulumState, RecurrenceMetric,
};
use crate::recurrence_lab::{
    build_xi, nonrecurrence_experiment_observed, XiSpec, OUTPUT_INTERVAL,
};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "annulus-lab",
    version,
    about = "Numerical laboratory for non-recurrence of the 2D Euler flow on an annulus"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the velocity decomposition v̂ + ṽ + ∇φ for one vorticity field.
    SolveVelocity(SolveVelocityArgs),
    /// Integrate the vorticity transport and write snapshot files.
    Simulate(SimulateArgs),
    /// Advect a material line through a simulation and record its snapshots.
    TrackLine(TrackLineArgs),
    /// Run the non-recurrence experiment and write the verdict report.
    Nonrecurrence(NonrecurrenceArgs),
    /// Integrate the pendulum; optionally search for a recurrence or draw
    /// the phase portrait. Completion is this subcommand's success
    /// criterion: a rotation orbit that never returns still exits 0.
    Pendulum(PendulumArgs),
    /// Exact Poincaré recurrence statistics for a random permutation system.
    RecurrenceDemo(RecurrenceDemoArgs),
    /// Dyadic-shell Besov and Sobolev norms of a torus field.
    BesovNorm(BesovNormArgs),
    /// Refinement study for the advection core or the velocity solver.
    ConvergenceStudy(ConvergenceStudyArgs),
}

// ------------------------------------------------------------- config file

/// Parsed `key=value` config file with typo detection: every key must be
/// consumed by the active subcommand's resolution pass.
struct ConfigMap {
    entries: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl ConfigMap {
    fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            used: BTreeSet::new(),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "config line {} is not key=value: {line:?}",
                    k + 1
                ))
            })?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::InvalidParameter(format!(
                    "config key {key} given twice"
                )));
            }
        }
        Ok(Self {
            entries,
            used: BTreeSet::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    /// Call after resolving every parameter the subcommand knows;
    /// leftover keys are typos and abort the run.
    fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "unknown config key(s): {}",
                unknown.join(", ")
            )))
        }
    }
}

fn parse_config_value<T: FromStr>(key: &str, text: &str) -> Result<T> {
    text.parse::<T>().map_err(|_| {
        Error::InvalidParameter(format!("config value {key} = {text:?} does not parse"))
    })
}

fn resolve<T: FromStr>(flag: Option<T>, cfg: &mut ConfigMap, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        cfg.take(key);
        return Ok(v);
    }
    match cfg.take(key) {
        Some(text) => parse_config_value(key, &text),
        None => Ok(default),
    }
}

fn resolve_opt<T: FromStr>(flag: Option<T>, cfg: &mut ConfigMap, key: &str) -> Result<Option<T>> {
    if let Some(v) = flag {
        cfg.take(key);
        return Ok(Some(v));
    }
    match cfg.take(key) {
        Some(text) => parse_config_value(key, &text).map(Some),
        None => Ok(None),
    }
}

fn resolve_flag(flag: bool, cfg: &mut ConfigMap, key: &str) -> Result<bool> {
    if flag {
        cfg.take(key);
        return Ok(true);
    }
    match cfg.take(key) {
        Some(text) => parse_config_value(key, &text),
        None => Ok(false),
    }
}

/// `64x256` → (n_r, n_theta).
fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("grid {text:?} is not of the form 64x256"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let n_r = a.trim().parse::<usize>().map_err(|_| bad())?;
    let n_theta = b.trim().parse::<usize>().map_err(|_| bad())?;
    Ok((n_r, n_theta))
}

/// `a..b` (half-open) or `a..=b` (inclusive) → the listed indices.
fn parse_set(text: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::InvalidParameter(format!(
            "set {text:?} is not a range of the form 0..99 or 0..=99"
        ))
    };
    let (a, b, inclusive) = match text.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => {
            let (a, b) = text.split_once("..").ok_or_else(bad)?;
            (a, b, false)
        }
    };
    let lo = a.trim().parse::<usize>().map_err(|_| bad())?;
    let hi = b.trim().parse::<usize>().map_err(|_| bad())?;
    let hi = if inclusive { hi + 1 } else { hi };
    if hi <= lo {
        return Err(bad());
    }
    Ok((lo..hi).collect())
}

// --------------------------------------------------------------- dispatch

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point: parse `argv`, run, translate to the exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::empty(),
    };
    match cli.command {
        Command::SolveVelocity(args) => solve_velocity_cmd(args, &mut cfg),
        Command::Simulate(args) => simulate_cmd(args, &mut cfg),
        Command::TrackLine(args) => track_line_cmd(args, &mut cfg),
        Command::Nonrecurrence(args) => nonrecurrence_cmd(args, &mut cfg),
        Command::Pendulum(args) => pendulum_cmd(args, &mut cfg),
        Command::RecurrenceDemo(args) => recurrence_demo_cmd(args, &mut cfg),
        Command::BesovNorm(args) => besov_norm_cmd(args, &mut cfg),
        Command::ConvergenceStudy(args) => convergence_study_cmd(args, &mut cfg),
    }
}

/// Initial vorticity: a `r,theta,value` CSV when given, else the default
/// angular bump scaled by `epsilon`.
fn load_omega(
    omega: Option<&Path>,
    grid_spec: Option<&str>,
    epsilon: f64,
) -> Result<ScalarField> {
    match omega {
        Some(path) => {
            let field = io::read_scalar_field_csv(path)?;
            if let Some(spec) = grid_spec {
                let (n_r, n_theta) = parse_grid(spec)?;
                if (n_r, n_theta) != (field.grid.n_r, field.grid.n_theta) {
                    return Err(Error::GridMismatch(format!(
                        "--grid {n_r}x{n_theta} but {} holds a {}x{} field",
                        path.display(),
                        field.grid.n_r,
                        field.grid.n_theta
                    )));
                }
            }
            Ok(field)
        }
        None => {
            let (n_r, n_theta) = parse_grid(grid_spec.unwrap_or("64x256"))?;
            let grid = make_grid(n_r, n_theta)?;
            build_xi(&XiSpec::with_defaults(epsilon)?, &grid)
        }
    }
}

// ---------------------------------------------------------- solve-velocity

#[derive(Args)]
struct SolveVelocityArgs {
    /// Vorticity CSV (`r,theta,value`); default is ω ≡ 1 on --grid.
    #[arg(long)]
    omega: Option<PathBuf>,
    /// Grid `n_r x n_theta` (default 64x256; must match --omega if both given).
    #[arg(long)]
    grid: Option<String>,
    /// Γ₁ circulation σ₁ (default 2π).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Velocity decomposition CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional single-layer density CSV destination.
    #[arg(long)]
    density_out: Option<PathBuf>,
}

fn solve_velocity_cmd(args: SolveVelocityArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let sigma1 = resolve(args.sigma1, cfg, "sigma1", TAU)?;
    let omega_path = resolve_opt(args.omega, cfg, "omega")?;
    let grid_spec = resolve_opt::<String>(args.grid, cfg, "grid")?;
    let out = resolve(args.out, cfg, "out", PathBuf::from("velocity.csv"))?;
    let density_out = resolve_opt::<PathBuf>(args.density_out, cfg, "density-out")?;
    cfg.finish()?;

    let omega = match &omega_path {
        Some(path) => load_omega(Some(path), grid_spec.as_deref(), 0.0)?,
        None => {
            let (n_r, n_theta) = parse_grid(grid_spec.as_deref().unwrap_or("64x256"))?;
            ScalarField::from_fn(make_grid(n_r, n_theta)?, |_, _| 1.0)?
        }
    };
    let v = solve_velocity(&omega, sigma1)?;
    io::write_velocity_samples_csv(&out, &v)?;
    if let Some(path) = &density_out {
        io::write_boundary_density_csv(path, &v.density)?;
    }
    println!(
        "velocity on {}x{} written to {}",
        v.grid.n_r,
        v.grid.n_theta,
        out.display()
    );
    println!("sup |v|                  = {:.6e}", v.sup_speed());
    println!(
        "Γ₁ circulation residual  = {:.3e}",
        (v.circulation_gamma1() - sigma1).abs()
    );
    println!(
        "boundary normal residual = {:.3e}",
        v.boundary_normal_residual()
    );
    Ok(0)
}

// ----------------------------------------------------------------- simulate

#[derive(Args)]
struct SimulateArgs {
    /// Grid `n_r x n_theta`.
    #[arg(long)]
    grid: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Γ₁ circulation σ₁ (default 2π).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Initial vorticity CSV; default is the angular bump from --epsilon.
    #[arg(long)]
    omega: Option<PathBuf>,
    /// Bump scale for the default initial vorticity.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Snapshot directory (`omega_NNNN.csv` + `omega_NNNN.json`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Snapshot cadence in steps (default ≈ every 0.1 time units).
    #[arg(long)]
    output_every: Option<usize>,
}

fn simulate_cmd(args: SimulateArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let grid_spec = resolve_opt::<String>(args.grid, cfg, "grid")?;
    let dt = resolve(args.dt, cfg, "dt", 2e-3)?;
    let t_end = resolve(args.t_end, cfg, "t-end", 1.0)?;
    let sigma1 = resolve(args.sigma1, cfg, "sigma1", TAU)?;
    let omega_path = resolve_opt::<PathBuf>(args.omega, cfg, "omega")?;
    let epsilon = resolve(args.epsilon, cfg, "epsilon", 0.1)?;
    let out_dir = resolve(args.out_dir, cfg, "out-dir", PathBuf::from("snapshots"))?;
    let default_every = ((0.1 / dt).round() as usize).max(1);
    let output_every = resolve(args.output_every, cfg, "output-every", default_every)?;
    cfg.finish()?;

    let omega0 = load_omega(omega_path.as_deref(), grid_spec.as_deref(), epsilon)?;
    let config = SimConfig::new(
        omega0.grid.n_r,
        omega0.grid.n_theta,
        dt,
        t_end,
        sigma1,
        output_every,
    )?;
    let snapshots = Simulation::new(config)?.run(&omega0)?;
    for (k, state) in snapshots.iter().enumerate() {
        io::write_scalar_field_csv(&out_dir.join(format!("omega_{k:04}.csv")), &state.omega)?;
        io::write_json(
            &out_dir.join(format!("omega_{k:04}.json")),
            &io::SnapshotSidecar::from(state),
        )?;
    }
    let report = conservation_report(&snapshots)?;
    println!(
        "{} snapshots written to {}",
        snapshots.len(),
        out_dir.display()
    );
    println!("energy drift    = {:.3e}", report.energy_drift);
    println!("enstrophy drift = {:.3e}", report.enstrophy_drift);
    println!("range violation = {:.3e}", report.range_violation);
    Ok(0)
}

// --------------------------------------------------------------- track-line

#[derive(Args)]
struct TrackLineArgs {
    /// Grid `n_r x n_theta`.
    #[arg(long)]
    grid: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Γ₁ circulation σ₁ (default 2π).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Initial vorticity CSV; default is the angular bump from --epsilon.
    #[arg(long)]
    omega: Option<PathBuf>,
    /// Bump scale for the default initial vorticity.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed marker count on the ray θ = 0 (endpoints on the walls).
    #[arg(long)]
    markers: Option<usize>,
    /// Refinement gap threshold (chord length).
    #[arg(long)]
    gap_threshold: Option<f64>,
    /// Snapshot cadence in time units.
    #[arg(long)]
    interval: Option<f64>,
    /// Line snapshot CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional directory for per-snapshot annulus SVGs.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

fn track_line_cmd(args: TrackLineArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let grid_spec = resolve_opt::<String>(args.grid, cfg, "grid")?;
    let dt = resolve(args.dt, cfg, "dt", 2e-3)?;
    let t_end = resolve(args.t_end, cfg, "t-end", 1.0)?;
    let sigma1 = resolve(args.sigma1, cfg, "sigma1", TAU)?;
    let omega_path = resolve_opt::<PathBuf>(args.omega, cfg, "omega")?;
    let epsilon = resolve(args.epsilon, cfg, "epsilon", 0.1)?;
    let markers = resolve(args.markers, cfg, "markers", 51)?;
    let gap_threshold = resolve(args.gap_threshold, cfg, "gap-threshold", DEFAULT_GAP_THRESHOLD)?;
    let interval = resolve(args.interval, cfg, "interval", OUTPUT_INTERVAL)?;
    let out = resolve(args.out, cfg, "out", PathBuf::from("line.csv"))?;
    let svg_dir = resolve_opt::<PathBuf>(args.svg_dir, cfg, "svg-dir")?;
    cfg.finish()?;

    if markers < 2 {
        return Err(Error::InvalidParameter(format!(
            "markers = {markers} must be at least 2"
        )));
    }
    let omega0 = load_omega(omega_path.as_deref(), grid_spec.as_deref(), epsilon)?;
    let config = SimConfig::new(omega0.grid.n_r, omega0.grid.n_theta, dt, t_end, sigma1, 1)?;
    let sim = Simulation::new(config)?;

    let seed: Vec<Vec2> = (0..markers)
        .map(|k| Vec2::new(1.0 + k as f64 / (markers - 1) as f64, 0.0))
        .collect();
    let mut line = MaterialLine::new(seed, gap_threshold, DEFAULT_MARKER_CAP)?;
    let (mut state, mut velocity) = sim.prepare(omega0, 0.0)?;
    let mut snaps = vec![(state.t, line.clone())];
    let mut svg_index = 0usize;
    let mut emit_svg = |state: &crate::euler_sim::SimState, line: &MaterialLine| -> Result<()> {
        if let Some(dir) = &svg_dir {
            let svg = io::annulus_svg(&state.omega, Some(line), &format!("t = {:.2}", state.t));
            io::atomic_write(&dir.join(format!("snapshot_{svg_index:04}.svg")), &svg)?;
            svg_index += 1;
        }
        Ok(())
    };
    emit_svg(&state, &line)?;

    let n_whole = (t_end / dt + 1e-9).floor() as usize;
    let remainder = t_end - n_whole as f64 * dt;
    let steps_per_interval = ((interval / dt).round() as usize).max(1);
    let mut done = 0usize;
    while done < n_whole {
        let t0 = state.t;
        let chunk = steps_per_interval.min(n_whole - done);
        let mut samples = vec![(state.t, velocity.clone())];
        for _ in 0..chunk {
            let (next, vel) = sim.advance(&state, &velocity, dt)?;
            state = next;
            velocity = vel;
            samples.push((state.t, velocity.clone()));
        }
        done += chunk;
        if done >= n_whole && remainder > 1e-12 {
            let (next, vel) = sim.advance(&state, &velocity, remainder)?;
            state = next;
            velocity = vel;
            samples.push((state.t, velocity.clone()));
        }
        let sampled = SampledVelocity::new(samples)?;
        line = advect_line(&line, sampled.as_fn(), t0, state.t, dt)?;
        snaps.push((state.t, line.clone()));
        emit_svg(&state, &line)?;
    }

    io::write_line_snapshots_csv(&out, &snaps)?;
    println!("{} line snapshots written to {}", snaps.len(), out.display());
    println!("markers           = {}", line.len());
    println!("winding separation = {:.6}", winding_separation(&line));
    println!("max gap            = {:.6}", line.max_gap());
    Ok(0)
}

// ------------------------------------------------------------ nonrecurrence

#[derive(Args)]
struct NonrecurrenceArgs {
    /// Recurrence-ball radius ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Grid `n_r x n_theta`.
    #[arg(long)]
    grid: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon (the verdicts need t_end > 8π/3·1.1 ≈ 9.22).
    #[arg(long)]
    t_end: Option<f64>,
    /// Γ₁ circulation σ₁ (default 2π; the mechanism assumes 2π).
    #[arg(long)]
    sigma1: Option<f64>,
    /// Optional perturbation CSV added to the bump (C¹ norm must stay < ε).
    #[arg(long)]
    perturb: Option<PathBuf>,
    /// Report JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional line snapshot CSV destination.
    #[arg(long)]
    line_out: Option<PathBuf>,
    /// Optional directory for per-snapshot annulus SVGs.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

fn nonrecurrence_cmd(args: NonrecurrenceArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let epsilon = resolve(args.epsilon, cfg, "epsilon", 0.1)?;
    let grid_spec = resolve(args.grid, cfg, "grid", "64x256".to_string())?;
    let dt = resolve(args.dt, cfg, "dt", 2e-3)?;
    let t_end = resolve(args.t_end, cfg, "t-end", 25.1)?;
    let sigma1 = resolve(args.sigma1, cfg, "sigma1", TAU)?;
    let perturb = resolve_opt::<PathBuf>(args.perturb, cfg, "perturb")?;
    let out = resolve(args.out, cfg, "out", PathBuf::from("report.json"))?;
    let line_out = resolve_opt::<PathBuf>(args.line_out, cfg, "line-out")?;
    let svg_dir = resolve_opt::<PathBuf>(args.svg_dir, cfg, "svg-dir")?;
    cfg.finish()?;

    let (n_r, n_theta) = parse_grid(&grid_spec)?;
    let config = SimConfig::new(n_r, n_theta, dt, t_end, sigma1, 1)?;
    let perturbation = match &perturb {
        Some(path) => io::read_scalar_field_csv(path)?,
        None => ScalarField::zeros(make_grid(n_r, n_theta)?),
    };

    let mut svg_index = 0usize;
    let mut line_snaps: Vec<(f64, MaterialLine)> = Vec::new();
    let report = nonrecurrence_experiment_observed(epsilon, &perturbation, &config, |state, line| {
        if let Some(dir) = &svg_dir {
            let svg = io::annulus_svg(&state.omega, Some(line), &format!("t = {:.2}", state.t));
            io::atomic_write(&dir.join(format!("snapshot_{svg_index:04}.svg")), &svg)?;
            svg_index += 1;
        }
        if line_out.is_some() {
            line_snaps.push((state.t, line.clone()));
        }
        Ok(())
    })?;

    io::write_json(&out, &report)?;
    if let Some(path) = &line_out {
        io::write_line_snapshots_csv(path, &line_snaps)?;
    }

    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    let verdict = |pass: bool| if pass { "pass" } else { "FAIL" };
    let v = report.verdicts;
    println!("distance         {}", verdict(v.distance));
    println!("winding          {}", verdict(v.winding));
    println!("intersect_mminus {}", verdict(v.intersect_mminus));
    println!("v_bound          {}", verdict(v.v_bound));
    println!("report written to {}", out.display());
    Ok(if v.all_pass() { 0 } else { 1 })
}

// --------------------------------------------------------------- pendulum

#[derive(Args)]
struct PendulumArgs {
    /// Initial angle.
    #[arg(long)]
    x0: Option<f64>,
    /// Initial angular velocity.
    #[arg(long)]
    y0: Option<f64>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon.
    #[arg(long)]
    t_max: Option<f64>,
    /// Record one trajectory row every this many steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Trajectory CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Search for the first return into the δ-ball around the start.
    /// NotFound is the expected physics for rotation orbits and exits 0.
    #[arg(long)]
    recurrence: bool,
    /// Recurrence ball radius δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Angle metric for the recurrence search: unwrapped (the universal
    /// cover, where rotation orbits drift away forever) or wrapped (the
    /// phase cylinder, where every orbit is periodic).
    #[arg(long)]
    metric: Option<String>,
    /// Recurrence report JSON destination (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Phase-portrait SVG destination (cat's eyes from a grid of orbits).
    #[arg(long)]
    portrait: Option<PathBuf>,
}

#[derive(Serialize)]
struct PendulumRecurrenceReport {
    x0: f64,
    y0: f64,
    energy: f64,
    class: String,
    delta: f64,
    metric: String,
    recurrence: &'static str,
    time: Option<f64>,
}

fn pendulum_cmd(args: PendulumArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let x0 = resolve(args.x0, cfg, "x0", 0.0)?;
    let y0 = resolve(args.y0, cfg, "y0", 2.5)?;
    let dt = resolve(args.dt, cfg, "dt", 1e-3)?;
    let t_max = resolve(args.t_max, cfg, "t-max", 100.0)?;
    let record_every = resolve(args.record_every, cfg, "record-every", 10)?;
    let out = resolve_opt::<PathBuf>(args.out, cfg, "out")?;
    let recurrence = resolve_flag(args.recurrence, cfg, "recurrence")?;
    let delta = resolve(args.delta, cfg, "delta", 0.1)?;
    let metric_name = resolve(args.metric, cfg, "metric", "unwrapped".to_string())?;
    let report_path = resolve_opt::<PathBuf>(args.report, cfg, "report")?;
    let portrait = resolve_opt::<PathBuf>(args.portrait, cfg, "portrait")?;
    cfg.finish()?;

    let s0 = PendulumState::new(x0, y0);
    println!(
        "pendulum x0 = {x0}, y0 = {y0}: H = {:.6}, {} orbit",
        energy(&s0),
        classify_orbit(&s0)
    );

    if let Some(path) = &out {
        let states = trajectory(&s0, dt, t_max, record_every)?;
        io::write_trajectory_csv(path, &states)?;
        println!("{} trajectory rows written to {}", states.len(), path.display());
    }

    if recurrence {
        let metric = match metric_name.as_str() {
            "wrapped" => RecurrenceMetric::Wrapped,
            "unwrapped" => RecurrenceMetric::Unwrapped,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "metric {other:?} must be wrapped or unwrapped"
                )))
            }
        };
        let time = recurrence_time(&s0, delta, t_max, dt, metric)?;
        let report = PendulumRecurrenceReport {
            x0,
            y0,
            energy: energy(&s0),
            class: classify_orbit(&s0).to_string(),
            delta,
            metric: metric_name,
            recurrence: if time.is_some() { "found" } else { "not_found" },
            time,
        };
        let json = serde_json::to_string_pretty(&report)?;
        match &report_path {
            Some(path) => {
                io::atomic_write(path, &format!("{json}\n"))?;
                println!("recurrence report written to {}", path.display());
            }
            None => println!("{json}"),
        }
    }

    if let Some(path) = &portrait {
        let mut polylines: Vec<Vec<(f64, f64)>> = Vec::new();
        let librations = [0.4, 0.8, 1.2, 1.6, 1.95];
        let rotations = [2.1, -2.1, 2.4, -2.4, 2.7, -2.7];
        for y in librations {
            let states = trajectory(&PendulumState::new(0.0, y), 1e-3, 20.0, 20)?;
            polylines.push(states.iter().map(|s| (s.x, s.y)).collect());
        }
        for y in rotations {
            let states = trajectory(&PendulumState::new(-PI, y), 1e-3, 20.0, 20)?;
            // wrap x to [−π, π) and split the polyline at branch jumps
            let mut segment: Vec<(f64, f64)> = Vec::new();
            let mut prev_x = f64::NAN;
            for s in &states {
                let x = (s.x + PI).rem_euclid(TAU) - PI;
                if !segment.is_empty() && (x - prev_x).abs() > PI {
                    polylines.push(std::mem::take(&mut segment));
                }
                segment.push((x, s.y));
                prev_x = x;
            }
            polylines.push(segment);
        }
        let svg = io::phase_portrait_svg(&polylines, (-PI, PI), (-3.0, 3.0));
        io::atomic_write(path, &svg)?;
        println!("phase portrait written to {}", path.display());
    }

    Ok(0)
}

// ---------------------------------------------------------- recurrence-demo

#[derive(Args)]
struct RecurrenceDemoArgs {
    /// State space size.
    #[arg(long)]
    n: Option<usize>,
    /// Permutation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// The set E as a range `a..b` or `a..=b`.
    #[arg(long)]
    set: Option<String>,
    /// Return-time CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Depth of the nested-set check A_0 ⊇ ... ⊇ A_n.
    #[arg(long)]
    n_max: Option<usize>,
}

fn recurrence_demo_cmd(args: RecurrenceDemoArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let n = resolve(args.n, cfg, "n", 1000)?;
    let seed = resolve(args.seed, cfg, "seed", 42)?;
    let set_spec = resolve(args.set, cfg, "set", "0..100".to_string())?;
    let out = resolve(args.out, cfg, "out", PathBuf::from("stats.csv"))?;
    let n_max = resolve(args.n_max, cfg, "n-max", 10)?;
    cfg.finish()?;

    let sys = FiniteSystem::random(n, seed)?;
    let e = parse_set(&set_spec)?;
    let stats = recurrence_statistics(&sys, &e)?;
    io::write_return_times_csv(&out, &stats)?;

    let worst = stats.iter().map(|rt| rt.time).max().unwrap_or(0);
    let an = an_set_check(&sys, &e, n_max)?;
    println!("{} return times written to {}", stats.len(), out.display());
    println!("max return time      = {worst} (bound n = {n})");
    println!("E ⊆ A₀               = {}", an.e_inside_a0);
    println!("A-sets nested        = {}", an.nested);
    println!("μ(A_i) all equal     = {}", an.measures_equal);
    println!("exceptional set size = {}", an.exceptional_count);
    let ok = worst <= n
        && an.e_inside_a0
        && an.nested
        && an.measures_equal
        && an.exceptional_count == 0;
    Ok(if ok { 0 } else { 1 })
}

// -------------------------------------------------------------- besov-norm

#[derive(Args)]
struct BesovNormArgs {
    /// Torus field CSV (`x,y,value`, square grid).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Besov/Sobolev smoothness s.
    #[arg(long)]
    s: Option<f64>,
    /// Also report the Sobolev norm at s − eps (embedding comparison).
    #[arg(long)]
    eps: Option<f64>,
    /// Report JSON destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ShellRow {
    k: u32,
    energy: f64,
    weighted: f64,
}

#[derive(Serialize)]
struct BesovReport {
    n: usize,
    s: f64,
    eps: Option<f64>,
    besov: f64,
    sobolev_s: f64,
    sobolev_s_minus_eps: Option<f64>,
    last_complete_shell: u32,
    unresolved_energy: f64,
    per_shell: Vec<ShellRow>,
}

fn besov_norm_cmd(args: BesovNormArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let input = resolve_opt::<PathBuf>(args.input, cfg, "input")?
        .ok_or_else(|| Error::InvalidParameter("--input is required".into()))?;
    let s = resolve(args.s, cfg, "s", 2.0)?;
    let eps = resolve_opt(args.eps, cfg, "eps")?;
    let out = resolve_opt::<PathBuf>(args.out, cfg, "out")?;
    cfg.finish()?;

    if let Some(e) = eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps = {e} must be positive"
            )));
        }
    }
    let w = io::read_torus_field_csv(&input)?;
    let sp = spectrum(&w);
    let shells = sp.shells();
    let per_shell: Vec<ShellRow> = shells
        .shell_energy
        .iter()
        .enumerate()
        .map(|(k, &energy)| ShellRow {
            k: k as u32,
            energy,
            weighted: 4.0f64.powf(k as f64 * s) * energy,
        })
        .collect();
    let report = BesovReport {
        n: w.n,
        s,
        eps,
        besov: sp.besov_norm(s),
        sobolev_s: sp.sobolev_norm(s),
        sobolev_s_minus_eps: eps.map(|e| sp.sobolev_norm(s - e)),
        last_complete_shell: sp.last_complete_shell(),
        unresolved_energy: shells.unresolved_energy,
        per_shell,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &out {
        Some(path) => {
            io::atomic_write(path, &format!("{json}\n"))?;
            println!("besov report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(0)
}

// ------------------------------------------------------- convergence-study

#[derive(Args)]
struct ConvergenceStudyArgs {
    /// Study target: rotation (advection core vs. the exact swirl
    /// rotation) or swirl (velocity solver vs. the radial oracle).
    #[arg(long)]
    target: Option<String>,
    /// Number of refinement levels (each doubles both grid directions).
    #[arg(long)]
    levels: Option<usize>,
    /// Coarsest grid `n_r x n_theta`.
    #[arg(long)]
    grid: Option<String>,
    /// Rotation horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Study table CSV destination (stdout only when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn convergence_study_cmd(args: ConvergenceStudyArgs, cfg: &mut ConfigMap) -> Result<i32> {
    let target = resolve(args.target, cfg, "target", "rotation".to_string())?;
    let levels = resolve(args.levels, cfg, "levels", 3)?;
    let grid_spec = resolve(args.grid, cfg, "grid", "32x128".to_string())?;
    let t_end = resolve(args.t_end, cfg, "t-end", 1.0)?;
    let out = resolve_opt::<PathBuf>(args.out, cfg, "out")?;
    cfg.finish()?;

    if levels == 0 || levels > 5 {
        return Err(Error::InvalidParameter(format!(
            "levels = {levels} must be in 1..=5"
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t-end = {t_end} must be positive"
        )));
    }
    let (nr0, nt0) = parse_grid(&grid_spec)?;

    let mut rows: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    for level in 0..levels {
        let n_r = nr0 << level;
        let n_theta = nt0 << level;
        let (dt, max_error) = match target.as_str() {
            "rotation" => rotation_error(n_r, n_theta, t_end)?,
            "swirl" => (0.0, swirl_error(n_r, n_theta)?),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "target {other:?} must be rotation or swirl"
                )))
            }
        };
        rows.push((level, n_r, n_theta, dt, max_error));
    }

    let mut csv = String::from("level,n_r,n_theta,dt,max_error,order\n");
    println!("level  grid        dt         max_error   order");
    for (k, &(level, n_r, n_theta, dt, err)) in rows.iter().enumerate() {
        let order = if k == 0 {
            String::new()
        } else {
            format!("{:.2}", (rows[k - 1].4 / err).log2())
        };
        csv.push_str(&format!(
            "{level},{n_r},{n_theta},{dt:.16e},{err:.16e},{order}\n"
        ));
        println!(
            "{level:<6} {:<11} {dt:<10.3e} {err:<11.3e} {order}",
            format!("{n_r}x{n_theta}")
        );
    }
    if let Some(path) = &out {
        io::atomic_write(path, &csv)?;
        println!("study table written to {}", path.display());
    }
    Ok(0)
}

/// March the semi-Lagrangian core through the frozen swirl `u*` and
/// compare with the exact rotation `ω₀(r, θ − t/r²)` at `t_end`.
fn rotation_error(n_r: usize, n_theta: usize, t_end: f64) -> Result<(f64, f64)> {
    let grid = make_grid(n_r, n_theta)?;
    let omega0 = |r: f64, theta: f64| (PI * (r - 1.0)).sin() * (2.0 * theta).cos();
    let mut omega = ScalarField::from_fn(grid.clone(), omega0)?;
    let velocity = VelocityInterpolant::from_fn(grid.clone(), swirl_velocity(TAU))?;
    let dt_target = 2e-3 * 256.0 / n_theta as f64;
    let n_steps = (t_end / dt_target).round().max(1.0);
    let dt = t_end / n_steps;
    for _ in 0..n_steps as usize {
        omega = transport_step(&omega, &velocity, dt)?.0;
    }
    let exact = ScalarField::from_fn(grid, |r, theta| omega0(r, theta - t_end / (r * r)))?;
    let err = omega
        .values
        .iter()
        .zip(&exact.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((dt, err))
}

/// Solve ω ≡ 1 with σ₁ = 0 and compare the tangential speed with the
/// analytic `u_θ(r) = (r² − 1)/(2r)`, normalized by its sup 3/4.
fn swirl_error(n_r: usize, n_theta: usize) -> Result<f64> {
    let grid = make_grid(n_r, n_theta)?;
    let omega = ScalarField::from_fn(grid.clone(), |_, _| 1.0)?;
    let v = solve_velocity(&omega, 0.0)?;
    let mut worst = 0.0f64;
    for i in 0..grid.n_r {
        let r = grid.rs[i];
        let exact = (r * r - 1.0) / (2.0 * r);
        for j in 0..grid.n_theta {
            let speed = v.total(grid.idx(i, j)).norm();
            worst = worst.max((speed - exact).abs());
        }
    }
    Ok(worst / 0.75)
}
