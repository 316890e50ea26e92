//! The planar pendulum `ẋ = y, ẏ = −sin x`: symplectic integration,
//! separatrix classification, and recurrence-time measurement.
//!
//! Inside the cat's eyes (energy `H = y²/2 − cos x < 1`) every orbit is
//! periodic and recurs; outside (`H > 1`) the angle drifts monotonically on
//! the universal cover and never returns — the finite-dimensional picture
//! of recurrence versus escape.

use crate::{Error, Result};

/// Phase-space state; `x` is the unwrapped angle on ℝ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PendulumState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, t: 0.0 }
    }
}

/// Conserved energy `H = y²/2 − cos x`.
pub fn energy(s: &PendulumState) -> f64 {
    0.5 * s.y * s.y - s.x.cos()
}

/// Orbit class relative to the separatrix energy `H = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    Libration,
    Separatrix,
    Rotation,
}

impl std::fmt::Display for OrbitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            OrbitClass::Libration => "libration",
            OrbitClass::Separatrix => "separatrix",
            OrbitClass::Rotation => "rotation",
        };
        f.write_str(name)
    }
}

/// One kick–drift–kick Störmer–Verlet step (2nd order, symplectic; the
/// one-step map has Jacobian determinant exactly 1).
pub fn pendulum_step(s: &PendulumState, dt: f64) -> Result<PendulumState> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(Error::InvalidParameter(format!(
            "pendulum step dt = {dt} must lie in (0, 0.1]"
        )));
    }
    let y_half = s.y - 0.5 * dt * s.x.sin();
    let x_new = s.x + dt * y_half;
    let y_new = y_half - 0.5 * dt * x_new.sin();
    Ok(PendulumState {
        x: x_new,
        y: y_new,
        t: s.t + dt,
    })
}

/// Classify by energy: `H < 1` libration (inside the cat's eyes),
/// `|H − 1| ≤ 1e−9` separatrix, `H > 1` rotation (drifts to infinity).
pub fn classify_orbit(s: &PendulumState) -> OrbitClass {
    let h = energy(s);
    if (h - 1.0).abs() <= 1e-9 {
        OrbitClass::Separatrix
    } else if h < 1.0 {
        OrbitClass::Libration
    } else {
        OrbitClass::Rotation
    }
}

/// Distance convention for the return-ball test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceMetric {
    /// Angle differences taken mod 2π (the pendulum's cylinder).
    Wrapped,
    /// Plain differences on the universal cover — the drift demonstration.
    Unwrapped,
}

fn ball_distance(s: &PendulumState, s0: &PendulumState, metric: RecurrenceMetric) -> f64 {
    let dx = match metric {
        RecurrenceMetric::Unwrapped => s.x - s0.x,
        RecurrenceMetric::Wrapped => {
            let d = (s.x - s0.x) % std::f64::consts::TAU;
            let d = if d < 0.0 { d + std::f64::consts::TAU } else { d };
            d.min(std::f64::consts::TAU - d)
        }
    };
    let dy = s.y - s0.y;
    dx.hypot(dy)
}

/// Time of the first return into the δ-ball around the initial state:
/// the orbit must first leave the ball; the reported time is the closest
/// approach within the first re-entry episode (entry-crossing times lead
/// the true return by `O(δ/speed)`, which would swamp tight period
/// measurements). `None` if no return happens before `t_max`.
pub fn recurrence_time(
    s0: &PendulumState,
    delta: f64,
    t_max: f64,
    dt: f64,
    metric: RecurrenceMetric,
) -> Result<Option<f64>> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "recurrence ball radius delta = {delta} must be positive"
        )));
    }
    let mut s = *s0;
    let mut escaped = false;
    // (distance, time) of the running closest approach inside the ball
    let mut best: Option<(f64, f64)> = None;
    let n_steps = (t_max / dt).ceil() as u64;
    for _ in 0..n_steps {
        s = pendulum_step(&s, dt)?;
        let d = ball_distance(&s, s0, metric);
        if !escaped {
            if d > delta {
                escaped = true;
            }
        } else if d <= delta {
            match best {
                Some((bd, bt)) if d >= bd => return Ok(Some(bt)),
                _ => best = Some((d, s.t - s0.t)),
            }
        } else if let Some((_, bt)) = best {
            return Ok(Some(bt));
        }
    }
    Ok(best.map(|(_, bt)| bt))
}

/// Integrate and collect states every `record_every` steps (the initial
/// state included); used by the CLI trajectory and portrait outputs.
pub fn trajectory(
    s0: &PendulumState,
    dt: f64,
    t_max: f64,
    record_every: usize,
) -> Result<Vec<PendulumState>> {
    let n_steps = (t_max / dt).ceil() as u64;
    let every = record_every.max(1) as u64;
    let mut out = vec![*s0];
    let mut s = *s0;
    for k in 0..n_steps {
        s = pendulum_step(&s, dt)?;
        if (k + 1) % every == 0 {
            out.push(s);
        }
    }
    if out.last() != Some(&s) {
        out.push(s);
    }
    Ok(out)
}

/// Libration period by the complete elliptic integral: a swing released at
/// amplitude `a` (energy `H = −cos a`) has period `T = 4·K(sin(a/2))`,
/// with `K` evaluated by the arithmetic–geometric mean.
pub fn libration_period(h: f64) -> Result<f64> {
    if !(-1.0..1.0).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "libration requires −1 < H < 1, got {h}"
        )));
    }
    let a = (-h).acos();
    let k = (0.5 * a).sin();
    Ok(4.0 * complete_elliptic_k(k))
}

/// Complete elliptic integral `K(k) = ∫₀^{π/2} (1 − k² sin²φ)^{−1/2} dφ`
/// via `K = π / (2·agm(1, √(1 − k²)))`.
pub fn complete_elliptic_k(k: f64) -> f64 {
    let mut a: f64 = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    while (a - b).abs() > 1e-15 * a {
        let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
        a = an;
        b = bn;
    }
    std::f64::consts::PI / (2.0 * a)
}
