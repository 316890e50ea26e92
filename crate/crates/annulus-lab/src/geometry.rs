//! Annulus geometry, polar tensor grids, discrete norms, and quadrature
//! rules shared by every other module.
//!
//! The domain is fixed: `M = { x ∈ ℝ² | 1 ≤ |x| ≤ 2 }` with boundary
//! circles Γ₁ (`|x| = 1`) and Γ₂ (`|x| = 2`). Grids are tensor products of
//! uniformly spaced radial nodes (both boundaries included) and uniformly
//! spaced angles `θ_j = 2πj/n_θ`.

use std::f64::consts::TAU;

use crate::{Error, Result};

/// 2D vector; re-exported alias used across the crate.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Rotate a vector by +90°: `(x, y) ↦ (−y, x)`.
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// The fixed annular domain `1 ≤ |x| ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Annulus {
    pub const fn new() -> Self {
        Self {
            r_inner: 1.0,
            r_outer: 2.0,
        }
    }

    /// Whether a point lies in the closed annulus, within `tol` radially.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        let r = p.norm();
        r >= self.r_inner - tol && r <= self.r_outer + tol
    }
}

impl Default for Annulus {
    fn default() -> Self {
        Self::new()
    }
}

/// A boundary circle of the annulus: Γ₁ is the inner unit circle, Γ₂ the
/// outer radius-2 circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCircle {
    Gamma1,
    Gamma2,
}

impl BoundaryCircle {
    pub fn radius(self) -> f64 {
        match self {
            BoundaryCircle::Gamma1 => 1.0,
            BoundaryCircle::Gamma2 => 2.0,
        }
    }

    /// 1-based index used in serialized output (`circle` column).
    pub fn index(self) -> u8 {
        match self {
            BoundaryCircle::Gamma1 => 1,
            BoundaryCircle::Gamma2 => 2,
        }
    }
}

/// Polar tensor grid over the annulus.
///
/// Radial nodes are uniform in `[1, 2]` and include both boundaries;
/// angular nodes are `θ_j = 2πj/n_theta`. Node storage is row-major in
/// `(i_r, j_theta)`: node index `i · n_theta + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub annulus: Annulus,
    pub n_r: usize,
    pub n_theta: usize,
    pub rs: Vec<f64>,
    pub thetas: Vec<f64>,
}

/// Build a polar grid. Rejects under-resolved grids (`n_r < 8`,
/// `n_theta < 16`) and odd angular counts.
pub fn make_grid(n_r: usize, n_theta: usize) -> Result<PolarGrid> {
    if n_r < 8 {
        return Err(Error::InvalidParameter(format!(
            "n_r = {n_r} is below the minimum of 8"
        )));
    }
    if n_theta < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_theta = {n_theta} is below the minimum of 16"
        )));
    }
    if !n_theta.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n_theta = {n_theta} must be even"
        )));
    }
    let annulus = Annulus::new();
    let dr = (annulus.r_outer - annulus.r_inner) / (n_r - 1) as f64;
    let rs = (0..n_r).map(|i| annulus.r_inner + i as f64 * dr).collect();
    let thetas = (0..n_theta).map(|j| TAU * j as f64 / n_theta as f64).collect();
    Ok(PolarGrid {
        annulus,
        n_r,
        n_theta,
        rs,
        thetas,
    })
}

impl PolarGrid {
    pub fn node_count(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn dr(&self) -> f64 {
        (self.annulus.r_outer - self.annulus.r_inner) / (self.n_r - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    /// Row-major node index.
    #[inline]
    pub fn idx(&self, i_r: usize, j_theta: usize) -> usize {
        i_r * self.n_theta + j_theta
    }

    /// Polar coordinates of a node.
    #[inline]
    pub fn node(&self, i_r: usize, j_theta: usize) -> (f64, f64) {
        (self.rs[i_r], self.thetas[j_theta])
    }

    /// Cartesian image of a node.
    #[inline]
    pub fn cartesian(&self, i_r: usize, j_theta: usize) -> Vec2 {
        let (r, theta) = self.node(i_r, j_theta);
        Vec2::new(r * theta.cos(), r * theta.sin())
    }

    /// Area quadrature weights per node, row-major: `r_i Δr Δθ` with the
    /// trapezoid half-weight on the two boundary rings, so that the weights
    /// sum exactly to the annulus area 3π.
    pub fn area_weights(&self) -> Vec<f64> {
        let dr = self.dr();
        let dth = self.dtheta();
        let mut w = Vec::with_capacity(self.node_count());
        for (i, &r) in self.rs.iter().enumerate() {
            let radial = if i == 0 || i == self.n_r - 1 { 0.5 } else { 1.0 };
            let wi = r * radial * dr * dth;
            w.extend(std::iter::repeat_n(wi, self.n_theta));
        }
        w
    }
}

/// Scalar field sampled on a polar grid (row-major values).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    /// Wrap raw values; rejects length mismatch and non-finite entries.
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { index });
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(r, θ)` at every node.
    pub fn from_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..grid.n_r {
            for j in 0..grid.n_theta {
                let (r, theta) = grid.node(i, j);
                values.push(f(r, theta));
            }
        }
        Self::new(grid, values)
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    #[inline]
    pub fn value(&self, i_r: usize, j_theta: usize) -> f64 {
        self.values[self.grid.idx(i_r, j_theta)]
    }

    /// Pointwise difference; the grids must match.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "fields live on different grids".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ScalarField::new(self.grid.clone(), values)
    }
}

/// Discrete sup norm: `max |f|` over grid nodes.
pub fn c0_norm(f: &ScalarField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete C¹ norm: `max( ‖f‖_∞ , ‖∇f‖_∞ )` with the gradient
/// `(∂_r f, (1/r) ∂_θ f)` by 2nd-order centered differences (one-sided at
/// the radial boundaries, periodic in θ) and Cartesian magnitude.
pub fn c1_norm(f: &ScalarField) -> f64 {
    c0_norm(f).max(gradient_sup(f))
}

/// Sup over nodes of the discrete gradient magnitude of `f`.
pub fn gradient_sup(f: &ScalarField) -> f64 {
    let g = &f.grid;
    let (n_r, n_t) = (g.n_r, g.n_theta);
    let (dr, dth) = (g.dr(), g.dtheta());
    let mut sup: f64 = 0.0;
    for i in 0..n_r {
        let r = g.rs[i];
        for j in 0..n_t {
            let d_r = if i == 0 {
                (-3.0 * f.value(0, j) + 4.0 * f.value(1, j) - f.value(2, j)) / (2.0 * dr)
            } else if i == n_r - 1 {
                (3.0 * f.value(n_r - 1, j) - 4.0 * f.value(n_r - 2, j) + f.value(n_r - 3, j))
                    / (2.0 * dr)
            } else {
                (f.value(i + 1, j) - f.value(i - 1, j)) / (2.0 * dr)
            };
            let jp = (j + 1) % n_t;
            let jm = (j + n_t - 1) % n_t;
            let d_t = (f.value(i, jp) - f.value(i, jm)) / (2.0 * dth) / r;
            sup = sup.max(d_r.hypot(d_t));
        }
    }
    sup
}

/// Arc-length quadrature on a boundary circle: equal-weight trapezoid rule
/// on equally spaced angles (spectrally accurate on closed curves).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub circle: BoundaryCircle,
    pub n_b: usize,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Build the trapezoid quadrature with `n_b` nodes on a boundary circle.
pub fn boundary_quadrature(circle: BoundaryCircle, n_b: usize) -> Result<BoundaryQuadrature> {
    if n_b < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_b = {n_b} is below the minimum of 16"
        )));
    }
    let radius = circle.radius();
    let thetas = (0..n_b).map(|q| TAU * q as f64 / n_b as f64).collect();
    let weights = vec![TAU * radius / n_b as f64; n_b];
    Ok(BoundaryQuadrature {
        circle,
        n_b,
        thetas,
        weights,
    })
}

impl BoundaryQuadrature {
    pub fn radius(&self) -> f64 {
        self.circle.radius()
    }

    /// Cartesian position of node `q`.
    #[inline]
    pub fn point(&self, q: usize) -> Vec2 {
        let r = self.radius();
        Vec2::new(r * self.thetas[q].cos(), r * self.thetas[q].sin())
    }

    /// Unit radial direction `n = x/|x|` at node `q` (the convention used
    /// throughout the moment equation, on both circles).
    #[inline]
    pub fn normal(&self, q: usize) -> Vec2 {
        Vec2::new(self.thetas[q].cos(), self.thetas[q].sin())
    }
}

/// Wrap an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta % TAU;
    if t < 0.0 {
        t + TAU
    } else {
        t
    }
}
