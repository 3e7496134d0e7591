//! Uniform tensor-product grids over `(0, L) x (-B, B)` and sampled fields.
//!
//! A [`Field`] stores one explicit boundary layer: node `(i, j)` with
//! `i in 0..=nx+1`, `j in 0..=ny+1` sits at `(i * hx, -B + j * hy)`. Nodes with
//! `i == 0`, `i == nx + 1`, `j == 0` or `j == ny + 1` lie on the walls.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible number of interior points per axis.
pub const MIN_INTERIOR_POINTS: usize = 8;

/// Ratio between a strip's truncation half-width and the y-support radius of
/// the data placed on it.
pub const STRIP_TRUNCATION_FACTOR: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{name} must be finite and positive, got {value}")]
    BadDimension { name: &'static str, value: f64 },
    #[error("{axis} has {count} interior points, at least {MIN_INTERIOR_POINTS} are required")]
    TooFewPoints { axis: &'static str, count: usize },
    #[error("sampled function is not finite at ({x}, {y}): {value}")]
    NonFiniteSample { x: f64, y: f64, value: f64 },
    #[error("field has {got} values, grid expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("field contains a non-finite value at node ({i}, {j})")]
    NonFiniteValue { i: usize, j: usize },
    #[error(
        "strip truncation half-width {half_width} is below {STRIP_TRUNCATION_FACTOR} x the datum's y-support radius {support}"
    )]
    StripTooNarrow { half_width: f64, support: f64 },
}

/// Whether `B` is a physical half-width or the truncation of `y in R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Rectangle,
    TruncatedStrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    half_width: f64,
    nx: usize,
    ny: usize,
    kind: DomainKind,
}

impl Grid {
    pub fn new(length: f64, half_width: f64, nx: usize, ny: usize, kind: DomainKind) -> Result<Self, GeometryError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(GeometryError::BadDimension { name: "L", value: length });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GeometryError::BadDimension { name: "B", value: half_width });
        }
        if nx < MIN_INTERIOR_POINTS {
            return Err(GeometryError::TooFewPoints { axis: "nx", count: nx });
        }
        if ny < MIN_INTERIOR_POINTS {
            return Err(GeometryError::TooFewPoints { axis: "ny", count: ny });
        }
        Ok(Self { length, half_width, nx, ny, kind })
    }

    pub fn rectangle(length: f64, half_width: f64, nx: usize, ny: usize) -> Result<Self, GeometryError> {
        Self::new(length, half_width, nx, ny, DomainKind::Rectangle)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn hx(&self) -> f64 {
        self.length / (self.nx + 1) as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.half_width / (self.ny + 1) as f64
    }

    /// Node count per axis including both walls.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx + 2, self.ny + 2)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    /// Flat index of node `(i, j)`; y runs fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 2) + j
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.hy()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx + 1 || j == self.ny + 1
    }

    /// Same spacing and length, half-width scaled by `factor`. The new `ny` is
    /// rounded so that `hy` stays as close as possible to the original.
    pub fn widened(&self, factor: f64) -> Result<Self, GeometryError> {
        let cells = ((self.ny + 1) as f64 * factor).round() as usize;
        let ny = cells.saturating_sub(1);
        let half_width = 0.5 * self.hy() * cells as f64;
        Self::new(self.length, half_width, self.nx, ny, self.kind)
    }
}

/// Real samples of a function on every node of a [`Grid`], boundary layer included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    dirichlet_clean: bool,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.node_count()], dirichlet_clean: true }
    }

    /// Samples `f` at all nodes.
    pub fn sample<F>(grid: Grid, f: F) -> Result<Self, GeometryError>
    where
        F: Fn(f64, f64) -> f64,
    {
        let (mx, my) = grid.shape();
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..mx {
            let x = grid.x(i);
            for j in 0..my {
                let y = grid.y(j);
                let value = f(x, y);
                if !value.is_finite() {
                    return Err(GeometryError::NonFiniteSample { x, y, value });
                }
                values.push(value);
            }
        }
        let mut field = Self { grid, values, dirichlet_clean: false };
        field.dirichlet_clean = field.boundary_is_zero();
        Ok(field)
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != grid.node_count() {
            return Err(GeometryError::ShapeMismatch { expected: grid.node_count(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let my = grid.ny() + 2;
            return Err(GeometryError::NonFiniteValue { i: k / my, j: k % my });
        }
        let mut field = Self { grid, values, dirichlet_clean: false };
        field.dirichlet_clean = field.boundary_is_zero();
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_clean(&self) -> bool {
        self.dirichlet_clean
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Writes one node. Writing a non-zero value on a wall clears the clean flag.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = value;
        if value != 0.0 && self.grid.is_boundary(i, j) {
            self.dirichlet_clean = false;
        }
    }

    /// Zeroes the boundary layer and marks the field clean. Interior nodes are untouched.
    pub fn enforce_dirichlet(mut self) -> Self {
        let (mx, my) = self.grid.shape();
        for j in 0..my {
            self.values[self.grid.index(0, j)] = 0.0;
            self.values[self.grid.index(mx - 1, j)] = 0.0;
        }
        for i in 0..mx {
            self.values[self.grid.index(i, 0)] = 0.0;
            self.values[self.grid.index(i, my - 1)] = 0.0;
        }
        self.dirichlet_clean = true;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute value over the boundary layer.
    pub fn max_abs_trace(&self) -> f64 {
        let (mx, my) = self.grid.shape();
        let mut m = 0.0_f64;
        for i in 0..mx {
            for j in 0..my {
                if self.grid.is_boundary(i, j) {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    /// Largest `|y|` among nodes holding a non-zero value; 0 for the zero field.
    pub fn y_support_radius(&self) -> f64 {
        let (mx, my) = self.grid.shape();
        let mut r = 0.0_f64;
        for i in 0..mx {
            for j in 0..my {
                if self.get(i, j) != 0.0 {
                    r = r.max(self.grid.y(j).abs());
                }
            }
        }
        r
    }

    fn boundary_is_zero(&self) -> bool {
        self.max_abs_trace() == 0.0
    }
}

/// Checks the truncation rule `B_trunc >= 4 r` for data placed on a truncated strip.
pub fn check_strip_truncation(grid: &Grid, support_radius: f64) -> Result<(), GeometryError> {
    if grid.half_width() < STRIP_TRUNCATION_FACTOR * support_radius {
        return Err(GeometryError::StripTooNarrow { half_width: grid.half_width(), support: support_radius });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_follows_definition() {
        let g = Grid::rectangle(2.0 * PI, PI, 63, 63).unwrap();
        assert_eq!(g.hx(), 2.0 * PI / 64.0);
        assert_eq!(g.hy(), 2.0 * PI / 64.0);
        assert_eq!(g.x(64), 64.0 * g.hx());
        assert_eq!(g.y(0), -PI);
    }

    #[test]
    fn rejects_coarse_and_degenerate_grids() {
        assert_eq!(Grid::rectangle(1.0, 1.0, 7, 8), Err(GeometryError::TooFewPoints { axis: "nx", count: 7 }));
        assert!(matches!(Grid::rectangle(-1.0, 1.0, 8, 8), Err(GeometryError::BadDimension { name: "L", .. })));
        assert!(matches!(Grid::rectangle(1.0, f64::NAN, 8, 8), Err(GeometryError::BadDimension { name: "B", .. })));
        assert!(matches!(Grid::rectangle(f64::INFINITY, 1.0, 8, 8), Err(GeometryError::BadDimension { .. })));
    }

    #[test]
    fn counterexample_rectangle_hosts_clean_mode() {
        let g = Grid::rectangle(4.0 * PI / 3f64.sqrt(), PI, 127, 127).unwrap();
        let f = Field::sample(g, |x, y| (y / 2.0).cos() * (1.0 - (3f64.sqrt() * x / 2.0).cos())).unwrap();
        assert!(f.max_abs_trace() < 1e-14);
        let cleaned = f.clone().enforce_dirichlet();
        let diff = f.values().iter().zip(cleaned.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-14);
    }

    #[test]
    fn constant_field_is_not_clean_until_enforced() {
        let g = Grid::rectangle(1.0, 1.0, 8, 9).unwrap();
        let ones = Field::sample(g, |_, _| 1.0).unwrap();
        assert!(!ones.is_clean());
        assert!(ones.values().iter().all(|&v| v == 1.0));
        let clean = ones.enforce_dirichlet();
        assert!(clean.is_clean());
        for i in 0..10 {
            for j in 0..11 {
                let expected = if g.is_boundary(i, j) { 0.0 } else { 1.0 };
                assert_eq!(clean.get(i, j), expected);
            }
        }
    }

    #[test]
    fn enforce_dirichlet_is_idempotent_bitwise() {
        let g = Grid::rectangle(3.0, 0.5, 12, 9).unwrap();
        let f = Field::sample(g, |x, y| (x * 1.3).sin() + y * y + 0.1).unwrap();
        let once = f.enforce_dirichlet();
        let twice = once.clone().enforce_dirichlet();
        let a: Vec<u64> = once.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = twice.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_rejects_non_finite() {
        let g = Grid::rectangle(1.0, 1.0, 8, 8).unwrap();
        assert!(matches!(Field::sample(g, |x, _| 1.0 / x), Err(GeometryError::NonFiniteSample { .. })));
    }

    #[test]
    fn node_coordinates_have_no_drift() {
        let g = Grid::rectangle(0.1, 0.3, 999, 999).unwrap();
        for i in 0..=1000 {
            assert_eq!(g.x(i), i as f64 * (0.1 / 1000.0));
            assert_eq!(g.y(i), -0.3 + i as f64 * (0.6 / 1000.0));
        }
    }

    #[test]
    fn widened_strip_keeps_spacing() {
        let g = Grid::new(2.0, 4.0, 63, 127, DomainKind::TruncatedStrip).unwrap();
        let w = g.widened(1.5).unwrap();
        assert_eq!(w.ny(), 191);
        assert!((w.half_width() - 6.0).abs() < 1e-12);
        assert!((w.hy() - g.hy()).abs() < 1e-15);
    }

    #[test]
    fn strip_truncation_rule() {
        let g = Grid::new(2.0, 4.0, 15, 63, DomainKind::TruncatedStrip).unwrap();
        assert!(check_strip_truncation(&g, 1.0).is_ok());
        assert!(check_strip_truncation(&g, 1.01).is_err());
        let packet = Field::sample(g, |_, y| if y.abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert!(packet.y_support_radius() <= 1.0);
    }
}
