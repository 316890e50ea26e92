//! Flow-map machinery: advect marker points along a velocity field,
//! track a material line together with the winding separation of its
//! endpoints, and check area preservation of advected patches.
//!
//! Trajectories solve `dx/dt = u(t, x)` with the classical 4-stage
//! integrator. Markers seated on a boundary circle at the start are
//! projected back onto it after every step, which removes the O(dt⁵)
//! radial drift of the integrator — the circles are invariant under any
//! wall-tangential field, so the projection is exact in the continuum.
//! Interior markers that step outside the annulus are clamped to the
//! nearest wall when the overshoot is within tolerance and reported as
//! escaped otherwise.

use std::f64::consts::{PI, TAU};

use crate::euler_sim::VelocityInterpolant;
use crate::geometry::{wrap_angle, Annulus, Vec2};
use crate::{Error, Result};

/// Default maximum Euclidean gap between adjacent line markers.
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.02;

/// Default refinement cap; stretching is near-linear in time for the
/// flows studied here, so counts stay far below it in practice.
pub const DEFAULT_MARKER_CAP: usize = 1_000_000;

/// Band within which a marker counts as seated on a boundary circle.
const WALL_SEAT_TOL: f64 = 1e-9;

/// Largest tolerated overshoot past a wall before a step errors out;
/// smaller excursions are clamped back to the wall radius.
const ESCAPE_TOL: f64 = 1e-6;

/// Smallest angular difference `to − from` on the circle, in `(−π, π]`.
fn signed_delta(to: f64, from: f64) -> f64 {
    let d = wrap_angle(to - from);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Clone, Copy, PartialEq)]
enum WallSeat {
    Inner,
    Outer,
    Interior,
}

impl WallSeat {
    fn classify(radius: f64) -> Self {
        if (radius - 1.0).abs() <= WALL_SEAT_TOL {
            WallSeat::Inner
        } else if (radius - 2.0).abs() <= WALL_SEAT_TOL {
            WallSeat::Outer
        } else {
            WallSeat::Interior
        }
    }
}

struct MarkerState {
    position: Vec2,
    unwrapped: f64,
    seat: WallSeat,
}

impl MarkerState {
    fn new(index: usize, position: Vec2, unwrapped: f64) -> Result<Self> {
        if !position.x.is_finite() || !position.y.is_finite() {
            return Err(Error::NonFiniteField { index });
        }
        let radius = position.norm();
        if !Annulus::new().contains(position, WALL_SEAT_TOL) {
            return Err(Error::PointOutsideAnnulus {
                x: position.x,
                y: position.y,
            });
        }
        Ok(Self {
            position,
            unwrapped,
            seat: WallSeat::classify(radius),
        })
    }
}

fn rk4_step(velocity: &impl Fn(f64, Vec2) -> Vec2, t: f64, x: Vec2, h: f64) -> Vec2 {
    let k1 = velocity(t, x);
    let k2 = velocity(t + 0.5 * h, x + k1 * (0.5 * h));
    let k3 = velocity(t + 0.5 * h, x + k2 * (0.5 * h));
    let k4 = velocity(t + h, x + k3 * h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// March every marker from `t0` to `t1` in substeps of magnitude `dt`
/// (signed by the direction of the interval), maintaining the unwrapped
/// angle incrementally. Each substep keeps the swept chord below half
/// the marker's radius, which bounds the angular increment well away
/// from π and makes the branch choice of the unwrapping unambiguous.
fn advance_markers(
    states: &mut [MarkerState],
    velocity: &impl Fn(f64, Vec2) -> Vec2,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<()> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "advection step dt = {dt} must be positive and finite"
        )));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "advection horizon [{t0}, {t1}] must be finite"
        )));
    }
    let span = (t1 - t0).abs();
    let direction = if t1 >= t0 { 1.0 } else { -1.0 };
    let n_whole = (span / dt + 1e-9).floor() as usize;
    let remainder = span - n_whole as f64 * dt;
    let mut t = t0;
    for step in 0..=n_whole {
        let h = if step < n_whole {
            direction * dt
        } else if remainder > 1e-12 {
            direction * remainder
        } else {
            break;
        };
        for (k, state) in states.iter_mut().enumerate() {
            let before = state.position;
            let r_before = before.norm();
            let mut after = rk4_step(velocity, t, before, h);
            if !after.x.is_finite() || !after.y.is_finite() {
                return Err(Error::NonFiniteState {
                    t,
                    details: format!("marker {k} became non-finite during a step"),
                });
            }
            let displacement = (after - before).norm();
            if displacement > 0.5 * r_before {
                return Err(Error::CflViolation(format!(
                    "marker {k} swept a chord of {displacement:.3e} in one step, \
                     above half its radius {r_before:.3}; reduce dt"
                )));
            }
            let radius = after.norm();
            match state.seat {
                WallSeat::Inner => after *= 1.0 / radius,
                WallSeat::Outer => after *= 2.0 / radius,
                WallSeat::Interior => {
                    if !(1.0..=2.0).contains(&radius) {
                        if !(1.0 - ESCAPE_TOL..=2.0 + ESCAPE_TOL).contains(&radius) {
                            return Err(Error::MarkerEscape { index: k, radius });
                        }
                        let wall = if radius < 1.0 { 1.0 } else { 2.0 };
                        after *= wall / radius;
                    }
                }
            }
            state.unwrapped += signed_delta(
                after.y.atan2(after.x),
                before.y.atan2(before.x),
            );
            state.position = after;
        }
        t += h;
    }
    Ok(())
}

/// Advect a set of marker points through `u(t, x)` from `t0` to `t1`
/// in substeps of `dt` (a trailing partial step lands exactly on `t1`;
/// `t1 < t0` integrates backward). The supplier must be defined in an
/// O(|u|·dt) neighborhood of the annulus and tangential at the walls.
/// Markers starting on a boundary circle are projected back onto it
/// after every step.
pub fn advect_points(
    points: &[Vec2],
    velocity: impl Fn(f64, Vec2) -> Vec2,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<Vec2>> {
    let mut states = points
        .iter()
        .enumerate()
        .map(|(k, &p)| MarkerState::new(k, p, 0.0))
        .collect::<Result<Vec<_>>>()?;
    advance_markers(&mut states, &velocity, t0, t1, dt)?;
    Ok(states.into_iter().map(|s| s.position).collect())
}

/// An ordered chain of marker points in the annulus with a continuous
/// angular coordinate per marker (no 2π jumps across time or along the
/// chain) and a refinement rule that keeps adjacent gaps below a
/// threshold.
#[derive(Debug, Clone)]
pub struct MaterialLine {
    markers: Vec<Vec2>,
    unwrapped_theta: Vec<f64>,
    gap_threshold: f64,
    marker_cap: usize,
}

impl MaterialLine {
    /// Wrap an ordered marker chain. The angular coordinate of the first
    /// marker is its principal angle; each subsequent marker continues
    /// the chain along the nearest branch. Markers are kept verbatim —
    /// call [`MaterialLine::refined`] to enforce the gap threshold.
    pub fn new(markers: Vec<Vec2>, gap_threshold: f64, marker_cap: usize) -> Result<Self> {
        if markers.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a material line needs at least 2 markers, got {}",
                markers.len()
            )));
        }
        if !gap_threshold.is_finite() || gap_threshold <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gap threshold {gap_threshold} must be positive and finite"
            )));
        }
        if marker_cap < markers.len() {
            return Err(Error::InvalidParameter(format!(
                "marker cap {marker_cap} is below the initial count {}",
                markers.len()
            )));
        }
        let mut unwrapped = Vec::with_capacity(markers.len());
        for (k, &m) in markers.iter().enumerate() {
            if !m.x.is_finite() || !m.y.is_finite() {
                return Err(Error::NonFiniteField { index: k });
            }
            if !Annulus::new().contains(m, WALL_SEAT_TOL) {
                return Err(Error::PointOutsideAnnulus { x: m.x, y: m.y });
            }
            let angle = m.y.atan2(m.x);
            if k == 0 {
                unwrapped.push(angle);
            } else {
                let prev: f64 = unwrapped[k - 1];
                let prev_angle = markers[k - 1].y.atan2(markers[k - 1].x);
                unwrapped.push(prev + signed_delta(angle, prev_angle));
            }
        }
        Ok(Self {
            markers,
            unwrapped_theta: unwrapped,
            gap_threshold,
            marker_cap,
        })
    }

    /// The radial segment from `(1, 0)` to `(2, 0)` with `n_markers`
    /// uniformly spaced markers and the default gap threshold and cap.
    pub fn radial_seed(n_markers: usize) -> Result<Self> {
        if n_markers < 2 {
            return Err(Error::InvalidParameter(format!(
                "a radial seed needs at least 2 markers, got {n_markers}"
            )));
        }
        let markers = (0..n_markers)
            .map(|k| Vec2::new(1.0 + k as f64 / (n_markers - 1) as f64, 0.0))
            .collect();
        Self::new(markers, DEFAULT_GAP_THRESHOLD, DEFAULT_MARKER_CAP)
    }

    pub fn markers(&self) -> &[Vec2] {
        &self.markers
    }

    /// Continuous angular coordinate per marker; differs from the
    /// principal `atan2` angle by an exact integer multiple of 2π.
    pub fn unwrapped_theta(&self) -> &[f64] {
        &self.unwrapped_theta
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn gap_threshold(&self) -> f64 {
        self.gap_threshold
    }

    pub fn marker_cap(&self) -> usize {
        self.marker_cap
    }

    /// Largest Euclidean distance between adjacent markers.
    pub fn max_gap(&self) -> f64 {
        self.markers
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .fold(0.0, f64::max)
    }

    /// Whether any marker lies in the open left half-plane `x₁ < 0`.
    pub fn intersects_left_half(&self) -> bool {
        self.markers.iter().any(|m| m.x < 0.0)
    }

    /// Insert midpoints until every adjacent gap is at or below the
    /// threshold (up to a 1e−9 relative slack that absorbs roundoff in
    /// the chord sums). New markers interpolate the chain as local
    /// cubics in `(r, θ_unwrapped)` over the chord-length parameter, so
    /// circular arcs refine with their radius preserved exactly and the
    /// angular coordinate stays on its branch by construction.
    pub fn refined(&self) -> Result<Self> {
        let mut markers = self.markers.clone();
        let mut unwrapped = self.unwrapped_theta.clone();
        let oversize = self.gap_threshold * (1.0 + 1e-9);
        loop {
            let gaps: Vec<f64> = markers.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            if gaps.iter().all(|&g| g <= oversize) {
                break;
            }
            let radii: Vec<f64> = markers.iter().map(|m| m.norm()).collect();
            let mut new_markers = Vec::with_capacity(markers.len() + gaps.len());
            let mut new_unwrapped = Vec::with_capacity(markers.len() + gaps.len());
            for k in 0..markers.len() - 1 {
                new_markers.push(markers[k]);
                new_unwrapped.push(unwrapped[k]);
                if gaps[k] > oversize {
                    let lo = k.saturating_sub(1);
                    let hi = (k + 2).min(markers.len() - 1);
                    let mut params = Vec::with_capacity(hi - lo + 1);
                    let mut s = 0.0;
                    for idx in lo..=hi {
                        if idx > lo {
                            s += (markers[idx] - markers[idx - 1]).norm();
                        }
                        params.push(s);
                    }
                    let mid = (params[k - lo] + params[k + 1 - lo]) / 2.0;
                    let r_mid = lagrange_eval(&params, &radii[lo..=hi], mid).clamp(1.0, 2.0);
                    let u_mid = lagrange_eval(&params, &unwrapped[lo..=hi], mid);
                    new_markers.push(Vec2::new(r_mid * u_mid.cos(), r_mid * u_mid.sin()));
                    new_unwrapped.push(u_mid);
                }
            }
            new_markers.push(*markers.last().expect("nonempty"));
            new_unwrapped.push(*unwrapped.last().expect("nonempty"));
            if new_markers.len() > self.marker_cap {
                return Err(Error::RefinementExplosion {
                    cap: self.marker_cap,
                });
            }
            markers = new_markers;
            unwrapped = new_unwrapped;
        }
        Ok(Self {
            markers,
            unwrapped_theta: unwrapped,
            gap_threshold: self.gap_threshold,
            marker_cap: self.marker_cap,
        })
    }
}

/// Full-product Lagrange interpolation through up to a handful of nodes.
fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in ys.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if j != i {
                w *= (x - xj) / (xs[i] - xj);
            }
        }
        total += w * yi;
    }
    total
}

/// Advect a material line from `t0` to `t1` in substeps of `dt`, then
/// refine it once so adjacent gaps respect the threshold. Call once per
/// output interval: the refinement interpolates the line's shape at
/// `t1`, which stays accurate as long as stretching between calls is
/// modest.
pub fn advect_line(
    line: &MaterialLine,
    velocity: impl Fn(f64, Vec2) -> Vec2,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<MaterialLine> {
    let mut states = line
        .markers
        .iter()
        .zip(&line.unwrapped_theta)
        .enumerate()
        .map(|(k, (&m, &u))| MarkerState::new(k, m, u))
        .collect::<Result<Vec<_>>>()?;
    advance_markers(&mut states, &velocity, t0, t1, dt)?;
    let advected = MaterialLine {
        markers: states.iter().map(|s| s.position).collect(),
        unwrapped_theta: states.iter().map(|s| s.unwrapped).collect(),
        gap_threshold: line.gap_threshold,
        marker_cap: line.marker_cap,
    };
    advected.refined()
}

/// Unwrapped angle of the first marker minus that of the last: positive
/// when the first end leads counterclockwise. For a line seeded across
/// the annulus with its first marker on the inner circle, this is the
/// winding separation of the two ends.
pub fn winding_separation(line: &MaterialLine) -> f64 {
    line.unwrapped_theta[0] - line.unwrapped_theta[line.unwrapped_theta.len() - 1]
}

/// A closed polygonal patch in the annulus; the vertex list is
/// implicitly closed (the last vertex connects back to the first).
#[derive(Debug, Clone)]
pub struct Patch {
    vertices: Vec<Vec2>,
}

impl Patch {
    /// Wrap a simple (non-self-intersecting) polygon with vertices in
    /// the annulus.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a patch needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for (k, &v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::NonFiniteField { index: k });
            }
            if !Annulus::new().contains(v, WALL_SEAT_TOL) {
                return Err(Error::PointOutsideAnnulus { x: v.x, y: v.y });
            }
        }
        let n = vertices.len();
        for a in 0..n {
            for b in a + 1..n {
                let shares_vertex = b == a + 1 || (a == 0 && b == n - 1);
                if shares_vertex {
                    continue;
                }
                if segments_cross(
                    vertices[a],
                    vertices[(a + 1) % n],
                    vertices[b],
                    vertices[(b + 1) % n],
                ) {
                    return Err(Error::ConstraintViolation(format!(
                        "patch edges {a} and {b} intersect; the polygon must be simple"
                    )));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Split every edge into equal subsegments no longer than `max_gap`;
    /// simplicity is inherited from the original polygon.
    pub fn densified(&self, max_gap: f64) -> Result<Self> {
        if !max_gap.is_finite() || max_gap <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "densification gap {max_gap} must be positive and finite"
            )));
        }
        let n = self.vertices.len();
        let mut dense = Vec::new();
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let pieces = ((b - a).norm() / max_gap).ceil().max(1.0) as usize;
            for p in 0..pieces {
                dense.push(a + (b - a) * (p as f64 / pieces as f64));
            }
        }
        Ok(Self { vertices: dense })
    }

    /// Shoelace signed area: positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut twice = 0.0;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        twice / 2.0
    }
}

/// Shoelace signed area of the patch polygon.
pub fn patch_area(patch: &Patch) -> f64 {
    patch.signed_area()
}

/// Advect every patch vertex; the flow is a diffeomorphism, so
/// simplicity is preserved and not rechecked.
pub fn advect_patch(
    patch: &Patch,
    velocity: impl Fn(f64, Vec2) -> Vec2,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Patch> {
    let vertices = advect_points(&patch.vertices, velocity, t0, t1, dt)?;
    Ok(Patch { vertices })
}

/// Proper or improper crossing of segments `a0a1` and `b0b1` that share
/// no endpoint, by the standard orientation test; collinear overlap
/// counts as a crossing.
fn segments_cross(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let orient = |p: Vec2, q: Vec2, r: Vec2| -> f64 {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    };
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |p: Vec2, q: Vec2, r: Vec2| -> bool {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on_segment(b0, b1, a0))
        || (d2 == 0.0 && on_segment(b0, b1, a1))
        || (d3 == 0.0 && on_segment(a0, a1, b0))
        || (d4 == 0.0 && on_segment(a0, a1, b1))
}

/// A time-dependent velocity field assembled from solver snapshots,
/// interpolated linearly in time between consecutive sample instants
/// and held constant outside the sampled range.
pub struct SampledVelocity {
    times: Vec<f64>,
    fields: Vec<VelocityInterpolant>,
}

impl SampledVelocity {
    /// Wrap `(t, field)` samples; times must be finite and strictly
    /// increasing.
    pub fn new(samples: Vec<(f64, VelocityInterpolant)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "a sampled velocity needs at least one snapshot".into(),
            ));
        }
        if samples.iter().any(|(t, _)| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "snapshot times must be finite".into(),
            ));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(format!(
                    "snapshot times must increase strictly: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let (times, fields) = samples.into_iter().unzip();
        Ok(Self { times, fields })
    }

    /// First and last sample instants.
    pub fn time_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("nonempty"))
    }

    /// Velocity at `(t, x)`; `t` is clamped into the sampled range.
    pub fn velocity(&self, t: f64, x: Vec2) -> Vec2 {
        if self.fields.len() == 1 {
            return self.fields[0].eval(x);
        }
        let hi = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let lo = hi - 1;
        let s = ((t - self.times[lo]) / (self.times[hi] - self.times[lo])).clamp(0.0, 1.0);
        self.fields[lo].eval(x) * (1.0 - s) + self.fields[hi].eval(x) * s
    }

    /// Closure form for the advection routines.
    pub fn as_fn(&self) -> impl Fn(f64, Vec2) -> Vec2 + '_ {
        move |t, x| self.velocity(t, x)
    }
}
