//! Time integration of `u_t + (alpha + u) u_x + u_xxx + u_xyy + eps (u_xxxx + u_yyyy) = 0`
//! with `u = 0` on all walls and `u_x = 0` at `x = L`.
//!
//! The linear part is diagonalized in `y` by the orthonormal DST-I (every
//! y-stencil is the Dirichlet second difference or its square), leaving one
//! banded x-operator per transverse mode:
//!
//! `A_m = (alpha - lambda_m) Dx + Dxxx + eps (Dx4 + lambda_m^2)`.
//!
//! Each step is Crank-Nicolson in `A` with the nonlinearity `(1/2) Dx(u^2)`
//! extrapolated to the half step by second-order Adams-Bashforth:
//!
//! `(I + dt/2 A) u^{n+1} = (I - dt/2 A) u^n - dt (3/2 N^n - 1/2 N^{n-1})`.
//!
//! The first two steps are each replaced by two implicit-Euler half steps
//! with the same matrix `I + dt/2 A`. Crank-Nicolson alone does not damp the
//! stiffest closure modes (amplification factor near -1), and a rough first
//! step leaves them ringing at the 1e-7 relative level for the whole run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::{BandError, BandLu, BandMatrix};
use crate::calculus::{self, CalculusError, LEFT_GHOST_DXXX, RIGHT_GHOST_DXXX};
use crate::dst::Dst1;
use crate::geometry::{check_strip_truncation, DomainKind, Field, GeometryError, Grid};
use crate::snapshot::{self, SnapshotError};
use crate::spectral::{self, SpectralError};

/// Magnitude above which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;
/// Steps taken with implicit-Euler half steps before switching to Crank-Nicolson.
pub const STARTUP_STEPS: usize = 2;
/// Half-width factor of the strip truncation-sensitivity rerun.
pub const STRIP_WIDENING: f64 = 1.5;

const KL: usize = 2;
const KU: usize = 3;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("implicit operator could not be factorized: {0}")]
    Factorization(#[from] BandError),
    #[error("linear solve at t = {t} left relative residual {residual:e} above tolerance {tol:e}")]
    LinearSolve { t: f64, residual: f64, tol: f64 },
    #[error("blowup at t = {t}: max |u| = {max_abs:e}")]
    Blowup { t: f64, max_abs: f64, partial: Option<Box<Trajectory>> },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> DynamicsError {
    DynamicsError::InvalidConfig { key, reason: reason.into() }
}

/// Closed-form initial shapes, or a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `Re p(x) q(y)` for the resonant triple `(k, l)` on transverse mode `n`.
    StationaryMode {
        k: u32,
        l: u32,
        n: u32,
    },
    /// `sin^2(pi x / L) cos(pi y / 2B)`.
    SineBump,
    /// `x (L - x)^2 / L^3 cos(pi y / 2B)`; satisfies `u_x(L) = 0` exactly.
    OutflowRamp,
    /// `sin^2(pi x / L) cos^4(pi y / 2r)` for `|y| < r`, zero elsewhere.
    StripPacket {
        radius: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", content = "value", rename_all = "snake_case")]
pub enum Scaling {
    /// Leave the shape as produced.
    Unit,
    /// Scale so that `max |u| = value`.
    Amplitude(f64),
    /// Scale so that `((1 + x), u^2) = value`.
    WeightedEnergy(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub shape: Shape,
    pub scaling: Scaling,
}

impl InitialCondition {
    pub fn new(shape: Shape, scaling: Scaling) -> Self {
        Self { shape, scaling }
    }

    /// Samples the datum on `grid`, zeroes the walls and applies the scaling.
    pub fn build(&self, grid: Grid) -> Result<Field, DynamicsError> {
        use std::f64::consts::PI;
        let (l, b) = (grid.length(), grid.half_width());
        let raw = match &self.shape {
            Shape::StationaryMode { k, l: ll, n } => spectral::stationary_mode(*k, *ll, *n, b)?.sample(grid)?,
            Shape::SineBump => Field::sample(grid, |x, y| (PI * x / l).sin().powi(2) * (PI * y / (2.0 * b)).cos())?,
            Shape::OutflowRamp => Field::sample(grid, |x, y| x * (l - x).powi(2) / l.powi(3) * (PI * y / (2.0 * b)).cos())?,
            Shape::StripPacket { radius } => {
                let r = *radius;
                if !(r.is_finite() && r > 0.0) {
                    return Err(invalid("radius", format!("must be finite and positive, got {r}")));
                }
                Field::sample(grid, |x, y| {
                    if y.abs() < r {
                        (PI * x / l).sin().powi(2) * (PI * y / (2.0 * r)).cos().powi(4)
                    } else {
                        0.0
                    }
                })?
            }
            Shape::Snapshot { path } => {
                let (f, _) = snapshot::read_snapshot(path)?;
                if f.grid() != &grid {
                    return Err(invalid("initial", format!("snapshot {} was written on a different grid", path.display())));
                }
                f
            }
        }
        .enforce_dirichlet();
        let factor = match self.scaling {
            Scaling::Unit => 1.0,
            Scaling::Amplitude(a) => {
                let m = raw.max_abs();
                if m == 0.0 {
                    1.0
                } else {
                    a / m
                }
            }
            Scaling::WeightedEnergy(w) => {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(invalid("scaling", format!("target weighted energy must be non-negative, got {w}")));
                }
                let e = calculus::weighted_sq(&raw);
                if e == 0.0 {
                    1.0
                } else {
                    (w / e).sqrt()
                }
            }
        };
        Ok(raw.scaled(factor))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: u8,
    pub epsilon: f64,
    pub linear: bool,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub initial: InitialCondition,
    pub snapshot_stride: usize,
    pub trace_stride: usize,
    pub linear_solver_tol: f64,
}

impl SimConfig {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_TRACE_STRIDE: usize = 10;
    pub const DEFAULT_SNAPSHOT_STRIDE: usize = 1000;
    pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

    pub fn new(grid: Grid, alpha: u8, t_end: f64, initial: InitialCondition) -> Self {
        Self {
            alpha,
            epsilon: 0.0,
            linear: false,
            grid,
            dt: Self::DEFAULT_DT,
            t_end,
            initial,
            snapshot_stride: Self::DEFAULT_SNAPSHOT_STRIDE,
            trace_stride: Self::DEFAULT_TRACE_STRIDE,
            linear_solver_tol: Self::DEFAULT_SOLVER_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.alpha > 1 {
            return Err(invalid("alpha", format!("must be 0 or 1, got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid("epsilon", format!("must be finite and non-negative, got {}", self.epsilon)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be finite and positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid("t_end", format!("must be finite and positive, got {}", self.t_end)));
        }
        if self.t_end < self.dt {
            return Err(invalid("t_end", "must be at least one step dt"));
        }
        if self.trace_stride == 0 {
            return Err(invalid("trace_stride", "must be at least 1"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1"));
        }
        if !(self.linear_solver_tol.is_finite() && self.linear_solver_tol > 0.0) {
            return Err(invalid("linear_solver_tol", "must be finite and positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Per-mode banded x-operators of the linear part.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    grid: Grid,
    alpha: u8,
    epsilon: f64,
    eigenvalues: Vec<f64>,
    modes: Vec<BandMatrix>,
}

/// Adds `scale * sum_o c_o u_{i+o}` to row `i - 1` of `m` for every interior `i`;
/// `ghost(k)` expresses an out-of-range node `k` in terms of nodes `0..=nx+1`.
fn add_x_stencil(
    m: &mut BandMatrix,
    nx: usize,
    scale: f64,
    stencil: &[(isize, f64)],
    ghost: impl Fn(isize) -> Vec<(usize, f64)>,
) {
    for i in 1..=nx {
        for &(o, c) in stencil {
            let k = i as isize + o;
            let terms = if (0..=nx as isize + 1).contains(&k) { vec![(k as usize, 1.0)] } else { ghost(k) };
            for (node, w) in terms {
                if node >= 1 && node <= nx {
                    m.add(i - 1, node - 1, scale * c * w).expect("stencil fits the band");
                }
            }
        }
    }
}

fn dx_matrix(nx: usize, h: f64) -> BandMatrix {
    let mut m = BandMatrix::zeros(nx, KL, KU);
    add_x_stencil(&mut m, nx, 1.0 / (2.0 * h), &[(-1, -1.0), (1, 1.0)], |_| Vec::new());
    m
}

fn dxxx_matrix(nx: usize, h: f64) -> BandMatrix {
    let mut m = BandMatrix::zeros(nx, KL, KU);
    let ghost = |k: isize| {
        if k < 0 {
            LEFT_GHOST_DXXX.iter().enumerate().map(|(n, &w)| (n, w)).collect()
        } else {
            RIGHT_GHOST_DXXX.iter().enumerate().map(|(n, &w)| (nx + 1 - n, w)).collect()
        }
    };
    add_x_stencil(&mut m, nx, 1.0 / (2.0 * h.powi(3)), &[(-2, -1.0), (-1, 2.0), (1, -2.0), (2, 1.0)], ghost);
    m
}

fn dx4_matrix(nx: usize, h: f64) -> BandMatrix {
    let mut m = BandMatrix::zeros(nx, KL, KU);
    // odd reflection about the zero wall value at x = 0, even reflection at x = L
    let ghost = |k: isize| if k < 0 { vec![(0, 2.0), (1, -1.0)] } else { vec![(nx, 1.0)] };
    add_x_stencil(&mut m, nx, 1.0 / h.powi(4), &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)], ghost);
    m
}

/// Assembles `alpha Dx + Dxxx + Dxyy + eps (Dx4 + Dy4)` in transverse-mode form.
pub fn assemble_linear_part(grid: Grid, alpha: u8, epsilon: f64) -> Result<LinearOperator, DynamicsError> {
    if alpha > 1 {
        return Err(invalid("alpha", format!("must be 0 or 1, got {alpha}")));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx < 4 || ny < 4 {
        return Err(CalculusError::TooCoarse { nx, ny }.into());
    }
    let h = grid.hx();
    let dx = dx_matrix(nx, h);
    let dxxx = dxxx_matrix(nx, h);
    let dx4 = dx4_matrix(nx, h);
    let identity = BandMatrix::identity(nx, KL, KU);
    let eigenvalues = Dst1::dirichlet_eigenvalues(ny, grid.hy());
    let modes = eigenvalues
        .iter()
        .map(|&lam| {
            let mut a = dxxx.combine(1.0, &dx, alpha as f64 - lam);
            if epsilon > 0.0 {
                a = a.combine(1.0, &dx4, epsilon).combine(1.0, &identity, epsilon * lam * lam);
            }
            a
        })
        .collect();
    Ok(LinearOperator { grid, alpha, epsilon, eigenvalues, modes })
}

impl LinearOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> u8 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `lambda_m`, the eigenvalues of `-Dyy`.
    pub fn transverse_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode(&self, m: usize) -> &BandMatrix {
        &self.modes[m]
    }

    /// Applies the operator to a clean field; the boundary layer of the result is zero.
    pub fn apply(&self, field: &Field) -> Result<Field, DynamicsError> {
        if !field.is_clean() {
            return Err(CalculusError::NotClean("LinearOperator::apply").into());
        }
        let mut t = ModalTransform::new(self.grid);
        let hat = t.modal(field.values());
        let nx = self.grid.nx();
        let mut out = vec![0.0; hat.len()];
        for (m, a) in self.modes.iter().enumerate() {
            a.matvec(&hat[m * nx..(m + 1) * nx], &mut out[m * nx..(m + 1) * nx]);
        }
        Ok(Field::from_values(self.grid, t.physical(&out))?)
    }
}

/// Moves interior values between node layout (`i * (ny + 2) + j`) and mode
/// layout (`m * nx + (i - 1)`).
#[derive(Debug, Clone)]
struct ModalTransform {
    nx: usize,
    ny: usize,
    node_count: usize,
    dst: Dst1,
    row: Vec<f64>,
}

impl ModalTransform {
    fn new(grid: Grid) -> Self {
        Self { nx: grid.nx(), ny: grid.ny(), node_count: grid.node_count(), dst: Dst1::new(grid.ny()), row: vec![0.0; grid.ny()] }
    }

    fn modal(&mut self, values: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut hat = vec![0.0; nx * ny];
        for i in 1..=nx {
            let base = i * (ny + 2) + 1;
            self.row.copy_from_slice(&values[base..base + ny]);
            self.dst.transform(&mut self.row);
            for (m, v) in self.row.iter().enumerate() {
                hat[m * nx + i - 1] = *v;
            }
        }
        hat
    }

    fn physical(&mut self, hat: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut values = vec![0.0; self.node_count];
        for i in 1..=nx {
            for (m, r) in self.row.iter_mut().enumerate() {
                *r = hat[m * nx + i - 1];
            }
            self.dst.transform(&mut self.row);
            let base = i * (ny + 2) + 1;
            values[base..base + ny].copy_from_slice(&self.row);
        }
        values
    }
}

/// `(1/2) Dx(u^2)` at interior nodes, node layout, zero walls.
fn nonlinear_term(values: &[f64], nx: usize, ny: usize, hx: f64) -> Vec<f64> {
    let my = ny + 2;
    let mut out = vec![0.0; values.len()];
    let c = 1.0 / (4.0 * hx);
    for i in 1..=nx {
        for j in 1..=ny {
            let r = values[(i + 1) * my + j];
            let l = values[(i - 1) * my + j];
            out[i * my + j] = c * (r * r - l * l);
        }
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// The stepping state of one run. The factorized matrices are fixed at construction.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: Grid,
    dt: f64,
    linear: bool,
    tol: f64,
    lhs: Vec<BandMatrix>,
    lus: Vec<BandLu>,
    rhs: Vec<BandMatrix>,
    transform: ModalTransform,
    hat: Vec<f64>,
    previous_nonlinear: Option<Vec<f64>>,
    steps_taken: usize,
}

impl Integrator {
    pub fn new(config: &SimConfig, initial: &Field) -> Result<Self, DynamicsError> {
        config.validate()?;
        if initial.grid() != &config.grid {
            return Err(invalid("grid", "initial field lives on a different grid"));
        }
        if !initial.is_clean() {
            return Err(CalculusError::NotClean("Integrator::new").into());
        }
        let op = assemble_linear_part(config.grid, config.alpha, config.epsilon)?;
        let nx = config.grid.nx();
        let identity = BandMatrix::identity(nx, KL, KU);
        let half = 0.5 * config.dt;
        let lhs: Vec<BandMatrix> = op.modes.iter().map(|a| identity.combine(1.0, a, half)).collect();
        let rhs = op.modes.iter().map(|a| identity.combine(1.0, a, -half)).collect();
        let lus = lhs.iter().map(BandMatrix::factorize).collect::<Result<_, _>>()?;
        let mut transform = ModalTransform::new(config.grid);
        let hat = transform.modal(initial.values());
        Ok(Self {
            grid: config.grid,
            dt: config.dt,
            linear: config.linear,
            tol: config.linear_solver_tol,
            lhs,
            lus,
            rhs,
            transform,
            hat,
            previous_nonlinear: None,
            steps_taken: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Current state in node layout.
    pub fn state(&mut self) -> Result<Field, DynamicsError> {
        let values = self.transform.physical(&self.hat);
        Ok(Field::from_values(self.grid, values)?)
    }

    fn nonlinear_modal(&mut self) -> Vec<f64> {
        let values = self.transform.physical(&self.hat);
        let n = nonlinear_term(&values, self.grid.nx(), self.grid.ny(), self.grid.hx());
        self.transform.modal(&n)
    }

    /// Solves `lhs_m x = b` in place, checks the residual and refines once if needed.
    fn solve_mode(&self, m: usize, b: &mut [f64], scratch: &mut [f64]) -> Result<(), DynamicsError> {
        let nx = b.len();
        let rhs_norm = max_abs(b);
        let original = b.to_vec();
        self.lus[m].solve_in_place(b);
        if rhs_norm == 0.0 {
            return Ok(());
        }
        let residual = |x: &[f64], r: &mut [f64]| {
            self.lhs[m].matvec(x, r);
            for k in 0..nx {
                r[k] = original[k] - r[k];
            }
            max_abs(r) / rhs_norm
        };
        let mut rel = residual(b, scratch);
        if rel > self.tol {
            self.lus[m].solve_in_place(scratch);
            for k in 0..nx {
                b[k] += scratch[k];
            }
            rel = residual(b, scratch);
        }
        if rel > self.tol || !rel.is_finite() {
            return Err(DynamicsError::LinearSolve { t: self.time() + self.dt, residual: rel, tol: self.tol });
        }
        Ok(())
    }

    /// `u <- (I + dt/2 A)^{-1} (u - dt/2 N)`.
    fn implicit_half_step(&mut self, nonlinear: Option<&[f64]>) -> Result<(), DynamicsError> {
        let nx = self.grid.nx();
        let mut hat = std::mem::take(&mut self.hat);
        if let Some(n) = nonlinear {
            for (u, v) in hat.iter_mut().zip(n) {
                *u -= 0.5 * self.dt * v;
            }
        }
        let mut scratch = vec![0.0; nx];
        for (m, block) in hat.chunks_exact_mut(nx).enumerate() {
            self.solve_mode(m, block, &mut scratch)?;
        }
        self.hat = hat;
        Ok(())
    }

    fn crank_nicolson_step(&mut self, nonlinear: Option<&[f64]>) -> Result<(), DynamicsError> {
        let nx = self.grid.nx();
        let mut next = vec![0.0; self.hat.len()];
        for (m, block) in next.chunks_exact_mut(nx).enumerate() {
            self.rhs[m].matvec(&self.hat[m * nx..(m + 1) * nx], block);
        }
        if let Some(n) = nonlinear {
            for (u, v) in next.iter_mut().zip(n) {
                *u -= self.dt * v;
            }
        }
        let mut scratch = vec![0.0; nx];
        for (m, block) in next.chunks_exact_mut(nx).enumerate() {
            self.solve_mode(m, block, &mut scratch)?;
        }
        self.hat = next;
        Ok(())
    }

    fn check_blowup(&mut self) -> Result<(), DynamicsError> {
        let t = self.time();
        if self.hat.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::Blowup { t, max_abs: f64::NAN, partial: None });
        }
        // the transform is orthonormal, so max |u| <= ||hat||_2
        let energy: f64 = self.hat.iter().map(|v| v * v).sum();
        if energy > BLOWUP_THRESHOLD * BLOWUP_THRESHOLD {
            let m = max_abs(&self.transform.physical(&self.hat));
            if m > BLOWUP_THRESHOLD {
                return Err(DynamicsError::Blowup { t, max_abs: m, partial: None });
            }
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<(), DynamicsError> {
        if self.steps_taken < STARTUP_STEPS {
            for half in 0..2 {
                let n = if self.linear { None } else { Some(self.nonlinear_modal()) };
                if half == 0 {
                    // N at the start of the last start-up step seeds the extrapolation
                    self.previous_nonlinear.clone_from(&n);
                }
                self.implicit_half_step(n.as_deref())?;
            }
        } else if self.linear {
            self.crank_nicolson_step(None)?;
        } else {
            let now = self.nonlinear_modal();
            let prev = self.previous_nonlinear.as_ref().expect("history is filled during start-up");
            let extrapolated: Vec<f64> = now.iter().zip(prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect();
            self.crank_nicolson_step(Some(&extrapolated))?;
            self.previous_nonlinear = Some(now);
        }
        self.steps_taken += 1;
        self.check_blowup()
    }
}

/// One sampled row of the energy diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub l2_sq: f64,
    pub weighted: f64,
    pub flux0: f64,
    pub grad_x_sq: f64,
    pub grad_y_sq: f64,
    pub cubic: f64,
}

impl TraceSample {
    pub fn of(t: f64, u: &Field) -> Self {
        Self {
            t,
            l2_sq: calculus::l2_sq(u),
            weighted: calculus::weighted_sq(u),
            flux0: calculus::trace_flux(u),
            grad_x_sq: calculus::grad_x_sq(u),
            grad_y_sq: calculus::grad_y_sq(u),
            cubic: calculus::cubic(u),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub samples: Vec<TraceSample>,
    /// Initial-regularity functional of the datum.
    pub i0_initial: Option<f64>,
}

impl EnergyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn weighted(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.weighted).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: SimConfig,
    pub snapshots: Vec<(f64, Field)>,
    pub trace: EnergyTrace,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        &self.snapshots.last().expect("the initial snapshot is always recorded").1
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.0)
    }
}

/// Runs `config` from its own initial condition.
pub fn simulate(config: &SimConfig) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    let u0 = config.initial.build(config.grid)?;
    simulate_from(config, u0)
}

/// Runs `config` from an explicit clean datum; `config.initial` is only echoed.
pub fn simulate_from(config: &SimConfig, u0: Field) -> Result<Trajectory, DynamicsError> {
    let mut integrator = Integrator::new(config, &u0)?;
    let mut trace = EnergyTrace { samples: vec![TraceSample::of(0.0, &u0)], i0_initial: calculus::initial_regularity(&u0).ok() };
    let mut snapshots = vec![(0.0, u0)];
    let steps = config.steps();
    for n in 1..=steps {
        if let Err(e) = integrator.step() {
            return Err(match e {
                DynamicsError::Blowup { t, max_abs, .. } => DynamicsError::Blowup {
                    t,
                    max_abs,
                    partial: Some(Box::new(Trajectory { config: config.clone(), snapshots, trace })),
                },
                other => other,
            });
        }
        let sample_trace = n % config.trace_stride == 0 || n == steps;
        let sample_snapshot = n % config.snapshot_stride == 0 || n == steps;
        if sample_trace || sample_snapshot {
            let u = integrator.state()?;
            let t = integrator.time();
            if sample_trace {
                trace.samples.push(TraceSample::of(t, &u));
            }
            if sample_snapshot {
                snapshots.push((t, u));
            }
        }
    }
    Ok(Trajectory { config: config.clone(), snapshots, trace })
}

/// Trapezoidal `||a - b||`.
pub fn l2_distance(a: &Field, b: &Field) -> f64 {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let f = Field::from_values(*a.grid(), diff).expect("difference of finite fields is finite");
    calculus::l2_sq(&f).sqrt()
}

#[derive(Debug, Clone)]
pub struct RegularizedSweep {
    pub epsilons: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `||u_{eps_i}(T) - u_{eps_{i+1}}(T)||`.
    pub distances: Vec<f64>,
}

/// Runs `config` once per regularization strength, concurrently. Strengths
/// must decrease strictly; all but the last must be positive.
pub fn simulate_regularized_sweep(config: &SimConfig, epsilons: &[f64]) -> Result<RegularizedSweep, DynamicsError> {
    if epsilons.len() < 2 {
        return Err(invalid("epsilons", "at least two strengths are needed"));
    }
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("epsilons", "must be strictly decreasing"));
    }
    if epsilons[..epsilons.len() - 1].iter().any(|&e| !(e > 0.0)) || epsilons[epsilons.len() - 1] < 0.0 {
        return Err(invalid("epsilons", "must be positive, except a final zero"));
    }
    let u0 = config.initial.build(config.grid)?;
    let results: Vec<Result<Trajectory, DynamicsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = epsilons
            .iter()
            .map(|&eps| {
                let mut c = config.clone();
                c.epsilon = eps;
                let u0 = u0.clone();
                s.spawn(move || simulate_from(&c, u0))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let trajectories = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let distances = trajectories.windows(2).map(|w| l2_distance(w[0].final_state(), w[1].final_state())).collect();
    Ok(RegularizedSweep { epsilons: epsilons.to_vec(), trajectories, distances })
}

#[derive(Debug, Clone)]
pub struct StripRun {
    pub base: Trajectory,
    pub widened: Trajectory,
    /// `max_t |W_wide(t) - W_base(t)| / W_base(0)` over common samples, `W = ((1 + x), u^2)`.
    pub sensitivity: f64,
}

/// Runs a truncated-strip configuration and its `1.5 x B` rerun on a grid
/// with the same `hy`, and compares the weighted-energy traces.
pub fn simulate_strip(config: &SimConfig) -> Result<StripRun, DynamicsError> {
    if config.grid.kind() != DomainKind::TruncatedStrip {
        return Err(invalid("domain_kind", "strip runs need a truncated_strip grid"));
    }
    let u0 = config.initial.build(config.grid)?;
    check_strip_truncation(&config.grid, u0.y_support_radius())?;
    let mut wide = config.clone();
    wide.grid = config.grid.widened(STRIP_WIDENING)?;
    let (base, widened) = std::thread::scope(|s| {
        let a = s.spawn(|| simulate(config));
        let b = s.spawn(|| simulate(&wide));
        (a.join().expect("simulation thread panicked"), b.join().expect("simulation thread panicked"))
    });
    let (base, widened) = (base?, widened?);
    let scale = base.trace.samples[0].weighted;
    let sensitivity =
        base.trace.samples.iter().zip(&widened.trace.samples).map(|(a, b)| (a.weighted - b.weighted).abs()).fold(0.0, f64::max)
            / if scale > 0.0 { scale } else { 1.0 };
    Ok(StripRun { base, widened, sensitivity })
}
