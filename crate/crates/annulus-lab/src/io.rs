//! Artifact emission and parsing: the per-module CSV schemas, JSON
//! reports, and self-contained SVG renderings.
//!
//! Every writer is atomic — the bytes land in a temp file in the
//! destination directory, which is then renamed over the target — so an
//! interrupted run never leaves a truncated artifact behind. Numeric CSV
//! columns use `{:.16e}`, which round-trips `f64` exactly; identical
//! inputs therefore produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::besov::TorusField;
use crate::biot_savart::VelocityField;
use crate::boundary_integral::BoundaryDensity;
use crate::euler_sim::SimState;
use crate::geometry::{make_grid, ScalarField};
use crate::lagrangian::MaterialLine;
use crate::measure_recurrence::ReturnTime;
use crate::pendulum::{energy, PendulumState};
use crate::{Error, Result};

/// Write `contents` to `path` atomically, creating parent directories as
/// needed. The temp file carries the process id, so concurrent writers
/// targeting the same path cannot corrupt each other's staging file.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| {
        Error::InvalidParameter(format!("output path {} has no file name", path.display()))
    })?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Serialize as pretty-printed JSON with a trailing newline and write
/// atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, &text)
}

/// The JSON sidecar accompanying each vorticity snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SnapshotSidecar {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub circulation: f64,
}

impl From<&SimState> for SnapshotSidecar {
    fn from(s: &SimState) -> Self {
        Self {
            t: s.t,
            energy: s.diagnostics.energy,
            enstrophy: s.diagnostics.enstrophy,
            omega_min: s.diagnostics.omega_min,
            omega_max: s.diagnostics.omega_max,
            circulation: s.diagnostics.circulation,
        }
    }
}

// ---------------------------------------------------------------- CSV out

/// `r,theta,value` rows, row-major in (i_r, j_theta).
pub fn scalar_field_csv(field: &ScalarField) -> String {
    let g = &field.grid;
    let mut s = String::with_capacity(64 * g.node_count() + 16);
    s.push_str("r,theta,value\n");
    for i in 0..g.n_r {
        for j in 0..g.n_theta {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                g.rs[i],
                g.thetas[j],
                field.value(i, j)
            );
        }
    }
    s
}

pub fn write_scalar_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    atomic_write(path, &scalar_field_csv(field))
}

/// `x,y,vhat_x,vhat_y,vtilde_x,vtilde_y,gphi_x,gphi_y,total_x,total_y`
/// rows per grid node, row-major in (i_r, j_theta).
pub fn velocity_samples_csv(v: &VelocityField) -> String {
    let g = &v.grid;
    let mut s = String::with_capacity(200 * g.node_count() + 64);
    s.push_str("x,y,vhat_x,vhat_y,vtilde_x,vtilde_y,gphi_x,gphi_y,total_x,total_y\n");
    for i in 0..g.n_r {
        for j in 0..g.n_theta {
            let k = g.idx(i, j);
            let p = g.cartesian(i, j);
            let total = v.total(k);
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x,
                p.y,
                v.vhat[k].x,
                v.vhat[k].y,
                v.vtilde[k].x,
                v.vtilde[k].y,
                v.grad_phi[k].x,
                v.grad_phi[k].y,
                total.x,
                total.y
            );
        }
    }
    s
}

pub fn write_velocity_samples_csv(path: &Path, v: &VelocityField) -> Result<()> {
    atomic_write(path, &velocity_samples_csv(v))
}

/// `circle,theta,f` rows: the Γ₁ nodes (circle = 1) then the Γ₂ nodes
/// (circle = 2).
pub fn boundary_density_csv(f: &BoundaryDensity) -> String {
    let mut s = String::with_capacity(64 * f.f_values.len() + 16);
    s.push_str("circle,theta,f\n");
    for (theta, value) in f.quad1.thetas.iter().zip(f.gamma1_values()) {
        let _ = writeln!(s, "1,{theta:.16e},{value:.16e}");
    }
    for (theta, value) in f.quad2.thetas.iter().zip(f.gamma2_values()) {
        let _ = writeln!(s, "2,{theta:.16e},{value:.16e}");
    }
    s
}

pub fn write_boundary_density_csv(path: &Path, f: &BoundaryDensity) -> Result<()> {
    atomic_write(path, &boundary_density_csv(f))
}

/// `t,marker_index,x,y,theta_unwrapped` rows for a sequence of material
/// line snapshots, concatenated in time order; `marker_index` restarts at
/// zero for each snapshot.
pub fn line_snapshots_csv(snapshots: &[(f64, MaterialLine)]) -> String {
    let total: usize = snapshots.iter().map(|(_, l)| l.len()).sum();
    let mut s = String::with_capacity(100 * total + 48);
    s.push_str("t,marker_index,x,y,theta_unwrapped\n");
    for (t, line) in snapshots {
        for (k, (p, u)) in line
            .markers()
            .iter()
            .zip(line.unwrapped_theta())
            .enumerate()
        {
            let _ = writeln!(s, "{t:.16e},{k},{:.16e},{:.16e},{u:.16e}", p.x, p.y);
        }
    }
    s
}

pub fn write_line_snapshots_csv(path: &Path, snapshots: &[(f64, MaterialLine)]) -> Result<()> {
    atomic_write(path, &line_snapshots_csv(snapshots))
}

/// `t,x,y,energy` rows for a pendulum trajectory.
pub fn trajectory_csv(states: &[PendulumState]) -> String {
    let mut s = String::with_capacity(80 * states.len() + 16);
    s.push_str("t,x,y,energy\n");
    for st in states {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            st.t,
            st.x,
            st.y,
            energy(st)
        );
    }
    s
}

pub fn write_trajectory_csv(path: &Path, states: &[PendulumState]) -> Result<()> {
    atomic_write(path, &trajectory_csv(states))
}

/// `point,return_time` rows for the finite-system recurrence statistics.
pub fn return_times_csv(stats: &[ReturnTime]) -> String {
    let mut s = String::with_capacity(16 * stats.len() + 20);
    s.push_str("point,return_time\n");
    for rt in stats {
        let _ = writeln!(s, "{},{}", rt.point, rt.time);
    }
    s
}

pub fn write_return_times_csv(path: &Path, stats: &[ReturnTime]) -> Result<()> {
    atomic_write(path, &return_times_csv(stats))
}

/// `x,y,value` rows for a square torus field, row-major in (i_x, i_y) on
/// the uniform [0, 2π)² grid.
pub fn torus_field_csv(w: &TorusField) -> String {
    let h = std::f64::consts::TAU / w.n as f64;
    let mut s = String::with_capacity(64 * w.values.len() + 16);
    s.push_str("x,y,value\n");
    for a in 0..w.n {
        for b in 0..w.n {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                a as f64 * h,
                b as f64 * h,
                w.values[a * w.n + b]
            );
        }
    }
    s
}

pub fn write_torus_field_csv(path: &Path, w: &TorusField) -> Result<()> {
    atomic_write(path, &torus_field_csv(w))
}

// ----------------------------------------------------------------- CSV in

/// Split one CSV line into exactly `n` columns, reporting the 1-based
/// line number on failure.
fn split_columns(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != n {
        return Err(Error::CsvParse(format!(
            "line {lineno}: expected {n} columns, found {}",
            cols.len()
        )));
    }
    Ok(cols)
}

fn parse_float(text: &str, column: &str, lineno: usize) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| {
        Error::CsvParse(format!(
            "line {lineno}: column {column} value {text:?} is not a number"
        ))
    })
}

fn expect_header(lines: &mut std::str::Lines, want: &str) -> Result<()> {
    match lines.next() {
        Some(h) if h.trim() == want => Ok(()),
        Some(h) => Err(Error::CsvParse(format!(
            "header {h:?} does not match the schema {want:?}"
        ))),
        None => Err(Error::CsvParse("empty file".into())),
    }
}

/// Parse the `r,theta,value` schema back into a [`ScalarField`]. The grid
/// shape is inferred from the row-major layout (the leading rows share
/// r = 1), then each row's coordinates are checked against the
/// reconstructed uniform grid.
pub fn parse_scalar_field_csv(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines();
    expect_header(&mut lines, "r,theta,value")?;
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 3, lineno)?;
        rows.push((
            parse_float(cols[0], "r", lineno)?,
            parse_float(cols[1], "theta", lineno)?,
            parse_float(cols[2], "value", lineno)?,
        ));
    }
    if rows.is_empty() {
        return Err(Error::CsvParse("no data rows".into()));
    }
    let first_r = rows[0].0;
    let n_theta = rows.iter().take_while(|row| row.0 == first_r).count();
    if n_theta == 0 || rows.len() % n_theta != 0 {
        return Err(Error::CsvParse(format!(
            "{} rows do not tile an n_r × {n_theta} grid",
            rows.len()
        )));
    }
    let n_r = rows.len() / n_theta;
    let grid = make_grid(n_r, n_theta).map_err(|e| Error::CsvParse(e.to_string()))?;
    let mut values = Vec::with_capacity(rows.len());
    for i in 0..n_r {
        for j in 0..n_theta {
            let (r, theta, value) = rows[grid.idx(i, j)];
            if (r - grid.rs[i]).abs() > 1e-12 || (theta - grid.thetas[j]).abs() > 1e-12 {
                return Err(Error::CsvParse(format!(
                    "line {}: node ({r}, {theta}) is off the uniform {n_r}×{n_theta} grid",
                    grid.idx(i, j) + 2
                )));
            }
            values.push(value);
        }
    }
    ScalarField::new(grid, values).map_err(|e| Error::CsvParse(e.to_string()))
}

pub fn read_scalar_field_csv(path: &Path) -> Result<ScalarField> {
    parse_scalar_field_csv(&fs::read_to_string(path)?)
}

/// Parse the `x,y,value` torus schema; the side length is inferred from
/// the row count, which must be a perfect square.
pub fn parse_torus_field_csv(text: &str) -> Result<TorusField> {
    let mut lines = text.lines();
    expect_header(&mut lines, "x,y,value")?;
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_columns(line, 3, lineno)?;
        parse_float(cols[0], "x", lineno)?;
        parse_float(cols[1], "y", lineno)?;
        values.push(parse_float(cols[2], "value", lineno)?);
    }
    let n = (values.len() as f64).sqrt().round() as usize;
    if n * n != values.len() {
        return Err(Error::CsvParse(format!(
            "{} rows are not a square grid",
            values.len()
        )));
    }
    TorusField::new(n, values).map_err(|e| Error::CsvParse(e.to_string()))
}

pub fn read_torus_field_csv(path: &Path) -> Result<TorusField> {
    parse_torus_field_csv(&fs::read_to_string(path)?)
}

// -------------------------------------------------------------------- SVG

/// Diverging blue–white–red fill for a value scaled to [−1, 1].
fn heat_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

/// Annulus snapshot: an ω heat layer of annular cells, the two boundary
/// circles, and (optionally) the material line as a polyline. The heat
/// layer is subsampled to at most 48×96 cells to keep files desk-sized.
///
/// Coordinates are emitted with the y-axis flipped so the mathematical
/// orientation (counterclockwise positive) matches the rendered image.
pub fn annulus_svg(omega: &ScalarField, line: Option<&MaterialLine>, title: &str) -> String {
    let g = &omega.grid;
    let mut s = String::new();
    s.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-2.3 -2.3 4.6 4.6\" \
         width=\"720\" height=\"720\">\n",
    );
    let _ = writeln!(
        s,
        "<title>{}</title>",
        title.replace('&', "&amp;").replace('<', "&lt;")
    );
    s.push_str("<rect x=\"-2.3\" y=\"-2.3\" width=\"4.6\" height=\"4.6\" fill=\"white\"/>\n");

    let scale = omega
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let stride_r = g.n_r.div_ceil(48);
    let stride_t = g.n_theta.div_ceil(96);
    let is: Vec<usize> = (0..g.n_r).step_by(stride_r).chain([g.n_r - 1]).collect();
    let js: Vec<usize> = (0..g.n_theta).step_by(stride_t).chain([0]).collect();
    s.push_str("<g stroke=\"none\">\n");
    for w in is.windows(2) {
        let (i0, i1) = (w[0], w[1]);
        if i0 == i1 {
            continue;
        }
        for w in js.windows(2) {
            let (j0, j1) = (w[0], w[1]);
            let mean = 0.25
                * (omega.value(i0, j0)
                    + omega.value(i0, j1)
                    + omega.value(i1, j0)
                    + omega.value(i1, j1));
            let corners = [(i0, j0), (i1, j0), (i1, j1), (i0, j1)];
            let pts: Vec<String> = corners
                .iter()
                .map(|&(i, j)| {
                    let p = g.cartesian(i, j);
                    format!("{:.4},{:.4}", p.x, -p.y)
                })
                .collect();
            let _ = writeln!(
                s,
                "<polygon points=\"{}\" fill=\"{}\"/>",
                pts.join(" "),
                heat_color(mean / scale)
            );
        }
    }
    s.push_str("</g>\n");

    s.push_str(
        "<circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"black\" stroke-width=\"0.02\"/>\n",
    );
    s.push_str(
        "<circle cx=\"0\" cy=\"0\" r=\"2\" fill=\"none\" stroke=\"black\" stroke-width=\"0.02\"/>\n",
    );

    if let Some(line) = line {
        let pts: Vec<String> = line
            .markers()
            .iter()
            .map(|p| format!("{:.4},{:.4}", p.x, -p.y))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#007700\" stroke-width=\"0.025\"/>",
            pts.join(" ")
        );
    }

    s.push_str("</svg>\n");
    s
}

/// Phase portrait: one polyline per trajectory inside an axis box spanning
/// `x_range × y_range` (data beyond the box is drawn as-is and clipped by
/// the viewport).
pub fn phase_portrait_svg(
    trajectories: &[Vec<(f64, f64)>],
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> String {
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    let w = (x1 - x0).max(1e-9);
    let h = (y1 - y0).max(1e-9);
    let margin = 0.05 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.4} {:.4} {:.4} {:.4}\" \
         width=\"900\" height=\"{:.0}\">",
        x0 - margin,
        -y1 - margin,
        w + 2.0 * margin,
        h + 2.0 * margin,
        900.0 * (h + 2.0 * margin) / (w + 2.0 * margin)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{:.4}\" y=\"{:.4}\" width=\"{:.4}\" height=\"{:.4}\" fill=\"white\" \
         stroke=\"black\" stroke-width=\"{:.4}\"/>",
        x0,
        -y1,
        w,
        h,
        0.004 * w
    );
    let stroke = 0.003 * w;
    for traj in trajectories {
        let pts: Vec<String> = traj
            .iter()
            .map(|&(x, y)| format!("{x:.4},{:.4}", -y))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#003377\" stroke-width=\"{stroke:.4}\"/>",
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
