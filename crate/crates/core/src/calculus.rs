//! Second-order finite-difference operators, quadrature, norms, and the
//! functional-inequality checkers (Gagliardo-Nirenberg, sup bound, Poincare).
//!
//! Stencils are centered. Where a stencil reaches one node past a wall, the
//! ghost value comes from a closure:
//!
//! * third derivatives in x, at `x = 0`: quartic extrapolation through
//!   `u_0..u_4` (the outflow end carries no derivative condition);
//! * third derivatives in x, at `x = L`: quartic through `u_{N-2}..u_{N+1}`
//!   constrained by `u_x(L) = 0`;
//! * fourth derivatives: odd reflection about the wall value (`u_xx = 0`,
//!   `u_yy = 0`) at `x = 0` and `y = +-B`, even reflection (`u_x = 0`) at `x = L`.
//!
//! Gradients used in norms are staggered one-sided differences integrated
//! with the midpoint rule across cells and the trapezoidal rule along the
//! other axis; all other integrals use the trapezoidal rule on the closed
//! rectangle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Field, Grid};

/// `u_{-1}` from `u_0..u_4`.
pub(crate) const LEFT_GHOST_DXXX: [f64; 5] = [5.0, -10.0, 10.0, -5.0, 1.0];
/// `u_{N+2}` from `u_{N+1}, u_N, u_{N-1}, u_{N-2}`.
pub(crate) const RIGHT_GHOST_DXXX: [f64; 4] = [-10.0 / 3.0, 6.0, -2.0, 1.0 / 3.0];

/// Minimum interior points per axis for the widest closure.
const MIN_STENCIL_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("grid has {nx}x{ny} interior points, stencil needs at least {MIN_STENCIL_POINTS} per axis")]
    TooCoarse { nx: usize, ny: usize },
    #[error("{0} requires a field with zero boundary values")]
    NotClean(&'static str),
    #[error("exponent q = {0} is not supported (use 3 or 4)")]
    UnsupportedExponent(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxxx,
    Dxyy,
    Dx4,
    Dy4,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 8] = [
        OperatorKind::Dx,
        OperatorKind::Dy,
        OperatorKind::Dxx,
        OperatorKind::Dyy,
        OperatorKind::Dxxx,
        OperatorKind::Dxyy,
        OperatorKind::Dx4,
        OperatorKind::Dy4,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Access to field values with ghost nodes one layer past the walls.
struct Stencil<'a> {
    f: &'a Field,
    nx: usize,
    ny: usize,
}

impl<'a> Stencil<'a> {
    fn new(f: &'a Field) -> Self {
        Self { f, nx: f.grid().nx(), ny: f.grid().ny() }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.f.get(i, j)
    }

    /// Value at x-index `i` (may be -1 or nx+2) for the dispersive closures.
    #[inline]
    fn x_dispersive(&self, i: isize, j: usize) -> f64 {
        let last = self.nx as isize + 1;
        if i < 0 {
            LEFT_GHOST_DXXX.iter().enumerate().map(|(k, w)| w * self.at(k, j)).sum()
        } else if i > last {
            let n1 = self.nx + 1;
            RIGHT_GHOST_DXXX.iter().enumerate().map(|(k, w)| w * self.at(n1 - k, j)).sum()
        } else {
            self.at(i as usize, j)
        }
    }

    #[inline]
    fn x_regularizing(&self, i: isize, j: usize) -> f64 {
        let last = self.nx as isize + 1;
        if i < 0 {
            2.0 * self.at(0, j) - self.at(1, j)
        } else if i > last {
            self.at(self.nx, j)
        } else {
            self.at(i as usize, j)
        }
    }

    #[inline]
    fn y_regularizing(&self, i: usize, j: isize) -> f64 {
        let last = self.ny as isize + 1;
        if j < 0 {
            2.0 * self.at(i, 0) - self.at(i, 1)
        } else if j > last {
            2.0 * self.at(i, self.ny + 1) - self.at(i, self.ny)
        } else {
            self.at(i, j as usize)
        }
    }

    fn dyy(&self, i: usize, j: usize, hy: f64) -> f64 {
        (self.at(i, j + 1) - 2.0 * self.at(i, j) + self.at(i, j - 1)) / (hy * hy)
    }
}

/// Applies a discrete derivative at interior nodes. The output boundary layer is zero.
pub fn apply_operator(field: &Field, kind: OperatorKind) -> Result<Field, CalculusError> {
    let grid = *field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx < MIN_STENCIL_POINTS || ny < MIN_STENCIL_POINTS {
        return Err(CalculusError::TooCoarse { nx, ny });
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    let s = Stencil::new(field);
    let mut out = Field::zeros(grid);
    for i in 1..=nx {
        let ii = i as isize;
        for j in 1..=ny {
            let jj = j as isize;
            let v = match kind {
                OperatorKind::Dx => (s.at(i + 1, j) - s.at(i - 1, j)) / (2.0 * hx),
                OperatorKind::Dy => (s.at(i, j + 1) - s.at(i, j - 1)) / (2.0 * hy),
                OperatorKind::Dxx => (s.at(i + 1, j) - 2.0 * s.at(i, j) + s.at(i - 1, j)) / (hx * hx),
                OperatorKind::Dyy => s.dyy(i, j, hy),
                OperatorKind::Dxxx => {
                    let u = |o: isize| s.x_dispersive(ii + o, j);
                    (u(2) - 2.0 * u(1) + 2.0 * u(-1) - u(-2)) / (2.0 * hx * hx * hx)
                }
                OperatorKind::Dxyy => (s.dyy(i + 1, j, hy) - s.dyy(i - 1, j, hy)) / (2.0 * hx),
                OperatorKind::Dx4 => {
                    let u = |o: isize| s.x_regularizing(ii + o, j);
                    (u(-2) - 4.0 * u(-1) + 6.0 * u(0) - 4.0 * u(1) + u(2)) / hx.powi(4)
                }
                OperatorKind::Dy4 => {
                    let u = |o: isize| s.y_regularizing(i, jj + o);
                    (u(-2) - 4.0 * u(-1) + 6.0 * u(0) - 4.0 * u(1) + u(2)) / hy.powi(4)
                }
            };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Trapezoidal weight of node `i` on an axis with `n` interior points.
#[inline]
fn trap_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n + 1 {
        0.5 * h
    } else {
        h
    }
}

/// Trapezoidal integral of `g(x, u)` over the closed rectangle.
pub fn integrate<G>(field: &Field, g: G) -> f64
where
    G: Fn(f64, f64) -> f64,
{
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut total = 0.0;
    for i in 0..nx + 2 {
        let x = grid.x(i);
        let mut col = 0.0;
        for j in 0..ny + 2 {
            col += trap_weight(j, ny, hy) * g(x, field.get(i, j));
        }
        total += trap_weight(i, nx, hx) * col;
    }
    total
}

/// Trapezoidal inner product `(u, v)`.
pub fn inner(u: &Field, v: &Field) -> f64 {
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut total = 0.0;
    for i in 0..nx + 2 {
        let mut col = 0.0;
        for j in 0..ny + 2 {
            col += trap_weight(j, ny, hy) * u.get(i, j) * v.get(i, j);
        }
        total += trap_weight(i, nx, hx) * col;
    }
    total
}

pub fn l2_sq(field: &Field) -> f64 {
    integrate(field, |_, u| u * u)
}

/// `((1 + x), u^2)`.
pub fn weighted_sq(field: &Field) -> f64 {
    integrate(field, |x, u| (1.0 + x) * u * u)
}

/// `(1, u^3)`.
pub fn cubic(field: &Field) -> f64 {
    integrate(field, |_, u| u * u * u)
}

pub fn lq_norm(field: &Field, q: f64) -> f64 {
    integrate(field, |_, u| u.abs().powf(q)).powf(1.0 / q)
}

/// `||u_x||^2` from forward differences on cell edges.
pub fn grad_x_sq(field: &Field) -> f64 {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut total = 0.0;
    for i in 0..=nx {
        for j in 0..ny + 2 {
            let d = (field.get(i + 1, j) - field.get(i, j)) / hx;
            total += trap_weight(j, ny, hy) * d * d;
        }
    }
    total * hx
}

/// `||u_y||^2` from forward differences on cell edges.
pub fn grad_y_sq(field: &Field) -> f64 {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut total = 0.0;
    for i in 0..nx + 2 {
        let mut col = 0.0;
        for j in 0..=ny {
            let d = (field.get(i, j + 1) - field.get(i, j)) / hy;
            col += d * d;
        }
        total += trap_weight(i, nx, hx) * col;
    }
    total * hy
}

/// `||u_xy||^2` from cell-centred mixed differences.
pub fn mixed_sq(field: &Field) -> f64 {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut total = 0.0;
    for i in 0..=nx {
        for j in 0..=ny {
            let d = (field.get(i + 1, j + 1) - field.get(i + 1, j) - field.get(i, j + 1) + field.get(i, j)) / (hx * hy);
            total += d * d;
        }
    }
    total * hx * hy
}

/// `int u_x(0, y)^2 dy` with the one-sided second-order derivative at `x = 0`.
pub fn trace_flux(field: &Field) -> f64 {
    let grid = field.grid();
    let (ny, hx, hy) = (grid.ny(), grid.hx(), grid.hy());
    (0..ny + 2)
        .map(|j| {
            let d = (-3.0 * field.get(0, j) + 4.0 * field.get(1, j) - field.get(2, j)) / (2.0 * hx);
            trap_weight(j, ny, hy) * d * d
        })
        .sum()
}

/// Initial-regularity functional
/// `||u||^2 + ||grad u||^2 + ||u_yy||^2 + ||u u_x + (u_xx + u_yy)_x||^2`.
pub fn initial_regularity(field: &Field) -> Result<f64, CalculusError> {
    let dyy = apply_operator(field, OperatorKind::Dyy)?;
    let dx = apply_operator(field, OperatorKind::Dx)?;
    let dxxx = apply_operator(field, OperatorKind::Dxxx)?;
    let dxyy = apply_operator(field, OperatorKind::Dxyy)?;
    let grid = *field.grid();
    let mut flux = Field::zeros(grid);
    for i in 1..=grid.nx() {
        for j in 1..=grid.ny() {
            flux.set(i, j, field.get(i, j) * dx.get(i, j) + dxxx.get(i, j) + dxyy.get(i, j));
        }
    }
    Ok(l2_sq(field) + grad_x_sq(field) + grad_y_sq(field) + l2_sq(&dyy) + l2_sq(&flux))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    /// `||grad u||`.
    pub h1_semi: f64,
    pub grad_x_sq: f64,
    pub grad_y_sq: f64,
    pub mixed_sq: f64,
    /// `((1 + x), u^2)`.
    pub weighted_l2: f64,
    pub sup_sq: f64,
    pub trace_flux: f64,
    pub i0: Option<f64>,
}

impl NormReport {
    pub fn lq(&self, q: u32) -> Option<f64> {
        match q {
            3 => Some(self.l3),
            4 => Some(self.l4),
            _ => None,
        }
    }
}

pub fn norms(field: &Field, with_i0: bool) -> Result<NormReport, CalculusError> {
    let grad_x_sq = grad_x_sq(field);
    let grad_y_sq = grad_y_sq(field);
    let max_abs = field.max_abs();
    Ok(NormReport {
        l2: l2_sq(field).sqrt(),
        l3: lq_norm(field, 3.0),
        l4: lq_norm(field, 4.0),
        h1_semi: (grad_x_sq + grad_y_sq).sqrt(),
        grad_x_sq,
        grad_y_sq,
        mixed_sq: mixed_sq(field),
        weighted_l2: weighted_sq(field),
        sup_sq: max_abs * max_abs,
        trace_flux: trace_flux(field),
        i0: if with_i0 { Some(initial_regularity(field)?) } else { None },
    })
}

/// 0/0 is reported as 0: every checked inequality holds trivially at `u = 0`.
fn ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

fn gn_exponents(q: u32) -> Result<(f64, f64), CalculusError> {
    if q != 3 && q != 4 {
        return Err(CalculusError::UnsupportedExponent(q));
    }
    let theta = 2.0 * (0.5 - 1.0 / q as f64);
    Ok((theta, 2f64.powf(theta)))
}

/// `||u||_{L^q} / (beta ||grad u||^theta ||u||^(1-theta))` for clean fields,
/// `theta = 2(1/2 - 1/q)`, `beta = 2^theta`. A value `<= 1` certifies the sample.
pub fn check_gn(field: &Field, q: u32) -> Result<f64, CalculusError> {
    let (theta, beta) = gn_exponents(q)?;
    if !field.is_clean() {
        return Err(CalculusError::NotClean("check_gn"));
    }
    let grad = (grad_x_sq(field) + grad_y_sq(field)).sqrt();
    let l2 = l2_sq(field).sqrt();
    Ok(ratio(lq_norm(field, q as f64), beta * grad.powf(theta) * l2.powf(1.0 - theta)))
}

/// Empirical constant of the Gagliardo-Nirenberg bound with full `H^1` norm,
/// for fields that need not vanish on the walls. Reported, never certified.
pub fn gn_boundary_constant(field: &Field, q: u32) -> Result<f64, CalculusError> {
    let (theta, _) = gn_exponents(q)?;
    let l2 = l2_sq(field);
    let h1 = (l2 + grad_x_sq(field) + grad_y_sq(field)).sqrt();
    Ok(ratio(lq_norm(field, q as f64), h1.powf(theta) * l2.sqrt().powf(1.0 - theta)))
}

/// `sup u^2 / (||u||_{H^1}^2 + ||u_xy||^2)`.
pub fn check_sup_bound(field: &Field) -> f64 {
    let m = field.max_abs();
    ratio(m * m, l2_sq(field) + grad_x_sq(field) + grad_y_sq(field) + mixed_sq(field))
}

/// `||w||^2 / (C ||w_axis||^2)` with `C_y = B^2 / 2`, `C_x = L^2 / 8`.
pub fn check_poincare(field: &Field, axis: Axis) -> Result<f64, CalculusError> {
    if !field.is_clean() {
        return Err(CalculusError::NotClean("check_poincare"));
    }
    let grid = field.grid();
    let (constant, grad) = match axis {
        Axis::X => (grid.length().powi(2) / 8.0, grad_x_sq(field)),
        Axis::Y => (grid.half_width().powi(2) / 2.0, grad_y_sq(field)),
    };
    Ok(ratio(l2_sq(field), constant * grad))
}

/// `(Dxxx u, u) - (1/2) int u_x(0, y)^2 dy`; tends to zero with the mesh for clean fields.
pub fn sbp_residual(field: &Field) -> Result<f64, CalculusError> {
    let d3 = apply_operator(field, OperatorKind::Dxxx)?;
    Ok(inner(&d3, field) - 0.5 * trace_flux(field))
}

/// Max-norm of `a - b` over nodes with `margin <= i <= nx + 1 - margin` (same for j).
pub fn max_diff_interior(a: &Field, b: &Field, margin: usize) -> f64 {
    let g: &Grid = a.grid();
    let mut m = 0.0_f64;
    for i in margin..=(g.nx() + 1 - margin) {
        for j in margin..=(g.ny() + 1 - margin) {
            m = m.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    m
}
