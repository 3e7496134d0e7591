//! Critical sizes of the linearized problem in closed form.
//!
//! Separating `v(x, y) = p(x) q(y)` gives a transverse Dirichlet eigenvalue
//! `xi = (pi n / 2B)^2` and, with `lambda = i beta` and `mu_j = i s_j`, the
//! resonance cubic `s^3 - (1 - xi) s + beta = 0`. A non-trivial profile `p`
//! exists when the three real roots are spaced by multiples of `2 pi / L`,
//! which pins `L` as a function of `(k, l, xi)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Field, GeometryError, Grid};

/// Residual magnitude below which a rectangle is flagged critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("transverse eigenvalue xi = {xi} is not below 1; no real critical length exists")]
    TransverseTooStiff { xi: f64 },
    #[error("half-width B = {0} does not exceed pi/2; no critical length exists for k = l = n = 1")]
    NoMinimalRectangle(f64),
    #[error("roots {0:?} are not distinct; the profile is identically zero")]
    DegenerateProfile([f64; 3]),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn require_index(name: &str, v: u32) -> Result<(), SpectralError> {
    if v == 0 {
        return Err(SpectralError::InvalidInput(format!("{name} must be a positive integer")));
    }
    Ok(())
}

fn require_positive(name: &str, v: f64) -> Result<(), SpectralError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(SpectralError::InvalidInput(format!("{name} must be finite and positive, got {v}")));
    }
    Ok(())
}

/// Transverse eigenvalue `(pi n / (2 B))^2` of `q'' + xi q = 0`, `q(-B) = q(B) = 0`.
pub fn mode_xi(n: u32, half_width: f64) -> Result<f64, SpectralError> {
    require_index("n", n)?;
    require_positive("B", half_width)?;
    Ok((PI * n as f64 / (2.0 * half_width)).powi(2))
}

/// Roots of `s^3 - (1 - xi) s + beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CubicRoots {
    /// Ascending.
    ThreeReal([f64; 3]),
    /// One real root and a conjugate pair; `pair` has non-negative imaginary part.
    OneReal { real: f64, pair: Complex64 },
}

impl CubicRoots {
    pub fn to_complex(&self) -> [Complex64; 3] {
        match *self {
            CubicRoots::ThreeReal(r) => r.map(|s| Complex64::new(s, 0.0)),
            CubicRoots::OneReal { real, pair } => [Complex64::new(real, 0.0), pair, pair.conj()],
        }
    }
}

fn polish(s: f64, p: f64, q: f64) -> f64 {
    let f = s * s * s + p * s + q;
    let df = 3.0 * s * s + p;
    if df == 0.0 {
        return s;
    }
    let t = s - f / df;
    if (t * t * t + p * t + q).abs() < f.abs() {
        t
    } else {
        s
    }
}

/// Closed-form roots: trigonometric form for three real roots, Cardano otherwise.
pub fn cubic_roots(xi: f64, beta: f64) -> CubicRoots {
    let p = -(1.0 - xi);
    let q = beta;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    if p < 0.0 && disc >= 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut r = [0, 1, 2].map(|k| polish(m * (phi - 2.0 * PI * k as f64 / 3.0).cos(), p, q));
        r.sort_by(|a, b| a.total_cmp(b));
        CubicRoots::ThreeReal(r)
    } else {
        let d = q * q / 4.0 + p * p * p / 27.0;
        let a = -(q.signum()) * (q.abs() / 2.0 + d.max(0.0).sqrt()).cbrt();
        let b = if a == 0.0 { 0.0 } else { -p / (3.0 * a) };
        let real = polish(a + b, p, q);
        // deflate: s^2 + real s + (p + real^2) = 0
        let c = p + real * real;
        let half = -real / 2.0;
        let rad = c - half * half;
        if rad <= 0.0 {
            let w = (-rad).sqrt();
            let mut r = [real, polish(half - w, p, q), polish(half + w, p, q)];
            r.sort_by(|a, b| a.total_cmp(b));
            CubicRoots::ThreeReal(r)
        } else {
            CubicRoots::OneReal { real, pair: Complex64::new(half, rad.sqrt()) }
        }
    }
}

/// `|s^3 - (1 - xi) s + beta|`.
pub fn cubic_residual(s: Complex64, xi: f64, beta: f64) -> f64 {
    (s * s * s - s * (1.0 - xi) + beta).norm()
}

/// Critical length `L = (2 pi / sqrt 3) sqrt((k^2 + k l + l^2) / (1 - xi))`
/// and the smallest root `s1 = -(2 pi / 3L)(2k + l)`.
pub fn critical_length(k: u32, l: u32, xi: f64) -> Result<(f64, f64), SpectralError> {
    require_index("k", k)?;
    require_index("l", l)?;
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(SpectralError::InvalidInput(format!("xi must be finite and non-negative, got {xi}")));
    }
    if xi >= 1.0 {
        return Err(SpectralError::TransverseTooStiff { xi });
    }
    let (k, l) = (k as f64, l as f64);
    let length = 2.0 * PI / 3f64.sqrt() * ((k * k + k * l + l * l) / (1.0 - xi)).sqrt();
    let s1 = -2.0 * PI / (3.0 * length) * (2.0 * k + l);
    Ok((length, s1))
}

/// Real roots spaced by `2 pi k / L` and `2 pi l / L`, with the frequency they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantTriple {
    pub s: [f64; 3],
    pub beta: f64,
    pub xi: f64,
    pub k: u32,
    pub l: u32,
    pub length: f64,
}

impl ResonantTriple {
    pub fn from_spacing(k: u32, l: u32, xi: f64) -> Result<Self, SpectralError> {
        let (length, s1) = critical_length(k, l, xi)?;
        let step = 2.0 * PI / length;
        let s2 = s1 + step * k as f64;
        let s3 = s2 + step * l as f64;
        let beta = -s1 * s2 * s3;
        Ok(Self { s: [s1, s2, s3], beta, xi, k, l, length })
    }

    /// Absolute defects of the five algebraic identities, followed by the
    /// largest cubic residual over the three roots.
    pub fn identity_defects(&self) -> [f64; 6] {
        let [s1, s2, s3] = self.s;
        let step = 2.0 * PI / self.length;
        let cubic = self.s.iter().map(|&s| cubic_residual(Complex64::new(s, 0.0), self.xi, self.beta)).fold(0.0_f64, f64::max);
        [
            (s1 + s2 + s3).abs(),
            (s1 * s2 + s1 * s3 + s2 * s3 + (1.0 - self.xi)).abs(),
            (s1 * s2 * s3 + self.beta).abs(),
            (s2 - s1 - step * self.k as f64).abs(),
            (s3 - s2 - step * self.l as f64).abs(),
            cubic,
        ]
    }
}

/// The resonant triple of spacing indices `(k, l)` on transverse mode `n` of half-width `B`.
pub fn resonant_family(k: u32, l: u32, n: u32, half_width: f64) -> Result<ResonantTriple, SpectralError> {
    let xi = mode_xi(n, half_width)?;
    ResonantTriple::from_spacing(k, l, xi)
}

/// Left-hand side of the critical-size relation minus one.
pub fn critical_residual(length: f64, half_width: f64, k: u32, l: u32, n: u32) -> f64 {
    let (k, l, n) = (k as f64, l as f64, n as f64);
    let longitudinal = (2.0 * PI / (length * 3f64.sqrt())).powi(2) * (k * k + k * l + l * l);
    let transverse = (PI * n / (2.0 * half_width)).powi(2);
    longitudinal + transverse - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRectangle {
    pub length: f64,
    pub half_width: f64,
    pub k: u32,
    pub l: u32,
    pub n: u32,
    pub residual: f64,
}

impl CriticalRectangle {
    pub fn new(length: f64, half_width: f64, k: u32, l: u32, n: u32) -> Self {
        let residual = critical_residual(length, half_width, k, l, n);
        Self { length, half_width, k, l, n, residual }
    }

    pub fn is_critical(&self) -> bool {
        self.residual.abs() <= CRITICAL_TOLERANCE
    }
}

/// Half-widths at which critical lengths are enumerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HalfWidthSampling {
    /// `B_i = B_max * i / count`, `i = 1..=count`.
    Uniform { count: usize },
    /// Explicit values; entries above `B_max` are dropped.
    Explicit(Vec<f64>),
}

impl HalfWidthSampling {
    pub fn values(&self, b_max: f64) -> Vec<f64> {
        match self {
            HalfWidthSampling::Uniform { count } => (1..=*count).map(|i| b_max * i as f64 / *count as f64).collect(),
            HalfWidthSampling::Explicit(v) => v.iter().copied().filter(|&b| b > 0.0 && b <= b_max).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexBounds {
    pub k_max: u32,
    pub l_max: u32,
    pub n_max: u32,
}

/// All critical rectangles with `L <= l_max_len`, `B` drawn from `sampling`
/// and indices within `bounds`. Empty for `alpha = 0`: the cubic reduces to
/// `s^3 + beta = 0`, which never has three distinct real roots.
pub fn enumerate_critical(
    length_max: f64,
    half_width_max: f64,
    bounds: IndexBounds,
    alpha: u8,
    sampling: &HalfWidthSampling,
) -> Vec<CriticalRectangle> {
    if alpha == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for b in sampling.values(half_width_max) {
        for n in 1..=bounds.n_max {
            let Ok(xi) = mode_xi(n, b) else { continue };
            if xi >= 1.0 {
                continue;
            }
            for k in 1..=bounds.k_max {
                for l in 1..=bounds.l_max {
                    if let Ok((len, _)) = critical_length(k, l, xi) {
                        if len <= length_max {
                            out.push(CriticalRectangle::new(len, b, k, l, n));
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.length.total_cmp(&b.length).then(a.half_width.total_cmp(&b.half_width)).then((a.k, a.l, a.n).cmp(&(b.k, b.l, b.n)))
    });
    out
}

/// One row of the residual table for a fixed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub k: u32,
    pub l: u32,
    pub n: u32,
    pub xi: f64,
    /// Critical length at this `B`, when `xi < 1`.
    pub critical_length: Option<f64>,
    pub residual: f64,
    pub critical: bool,
}

/// Residuals of a given rectangle against every index triple within `bounds`.
pub fn critical_table(length: f64, half_width: f64, bounds: IndexBounds, alpha: u8) -> Result<Vec<CriticalRow>, SpectralError> {
    require_positive("L", length)?;
    require_positive("B", half_width)?;
    if alpha == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for k in 1..=bounds.k_max {
        for l in 1..=bounds.l_max {
            for n in 1..=bounds.n_max {
                let xi = mode_xi(n, half_width)?;
                let critical_length = critical_length(k, l, xi).ok().map(|(len, _)| len);
                let residual = critical_residual(length, half_width, k, l, n);
                rows.push(CriticalRow { k, l, n, xi, critical_length, residual, critical: residual.abs() <= CRITICAL_TOLERANCE });
            }
        }
    }
    Ok(rows)
}

/// Critical length of the `k = l = n = 1` family: `L* = 2 pi / sqrt(1 - pi^2 / (4 B^2))`.
pub fn minimal_critical_rectangle(half_width: f64) -> Result<f64, SpectralError> {
    require_positive("B", half_width)?;
    let t = 1.0 - PI * PI / (4.0 * half_width * half_width);
    if t <= 0.0 {
        return Err(SpectralError::NoMinimalRectangle(half_width));
    }
    Ok(2.0 * PI / t.sqrt())
}

/// Distinct critical KdV lengths `(2 pi / sqrt 3) sqrt(k^2 + k l + l^2)`, ascending.
pub fn kdv_critical_set(k_max: u32, l_max: u32) -> Vec<f64> {
    let mut keys: Vec<u64> = (1..=k_max as u64).flat_map(|k| (1..=l_max as u64).map(move |l| k * k + k * l + l * l)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().map(|m| 2.0 * PI / 3f64.sqrt() * (m as f64).sqrt()).collect()
}

/// `p(x) = sum_j C_j exp(i s_j x)` with `C_j` proportional to `mu_{j+1} - mu_{j+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub triple: ResonantTriple,
    pub coefficients: [Complex64; 3],
}

impl Profile {
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coefficients.iter().zip(self.triple.s).map(|(c, s)| c * Complex64::new(0.0, s * x).exp()).sum()
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        self.coefficients
            .iter()
            .zip(self.triple.s)
            .map(|(c, s)| c * Complex64::new(0.0, s) * Complex64::new(0.0, s * x).exp())
            .sum()
    }

    /// Largest `|Im p|` over `samples` points; zero up to rounding when `beta = 0`.
    pub fn max_imaginary(&self, samples: usize) -> f64 {
        (0..=samples).map(|i| self.eval(self.triple.length * i as f64 / samples as f64).im.abs()).fold(0.0, f64::max)
    }
}

fn argmax_modulus(raw: &dyn Fn(f64) -> f64, length: f64) -> f64 {
    const SAMPLES: usize = 4096;
    let mut best = (0.0, raw(0.0));
    for i in 1..=SAMPLES {
        let x = length * i as f64 / SAMPLES as f64;
        let v = raw(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    // golden-section refinement on the bracketing cells
    let h = length / SAMPLES as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(length));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if raw(c) >= raw(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Eigenprofile of a resonant triple, scaled so that `max |p| = 1` on `[0, L]`
/// and `p` is real at its maximum. For `beta = 0` the profile is real everywhere.
pub fn build_profile(triple: &ResonantTriple) -> Result<Profile, SpectralError> {
    let [s1, s2, s3] = triple.s;
    let scale = s1.abs().max(s2.abs()).max(s3.abs()).max(1.0);
    if !(s1 < s2 && s2 < s3) || (s2 - s1) <= 1e-12 * scale || (s3 - s2) <= 1e-12 * scale {
        return Err(SpectralError::DegenerateProfile(triple.s));
    }
    let mu = triple.s.map(|s| Complex64::new(0.0, s));
    let raw = Profile { triple: *triple, coefficients: [mu[1] - mu[2], mu[2] - mu[0], mu[0] - mu[1]] };
    let x_star = argmax_modulus(&|x| raw.eval(x).norm(), triple.length);
    let peak = raw.eval(x_star);
    let factor = peak.conj() / peak.norm_sqr();
    Ok(Profile { triple: *triple, coefficients: raw.coefficients.map(|c| c * factor) })
}

/// Separated mode `v(x, y) = Re p(x) q(y)` on the rectangle `(0, L) x (-B, B)`,
/// `q = cos(pi n y / 2B)` for odd `n`, `sin(pi n y / 2B)` for even `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMode {
    pub profile: Profile,
    pub n: u32,
    pub half_width: f64,
}

impl StationaryMode {
    pub fn length(&self) -> f64 {
        self.profile.triple.length
    }

    pub fn transverse(&self, y: f64) -> f64 {
        let arg = PI * self.n as f64 * y / (2.0 * self.half_width);
        if self.n % 2 == 1 {
            arg.cos()
        } else {
            arg.sin()
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.profile.eval(x).re * self.transverse(y)
    }

    /// Samples the mode on `grid` (which should be `(0, L) x (-B, B)`) and zeroes the walls.
    pub fn sample(&self, grid: Grid) -> Result<Field, SpectralError> {
        Ok(Field::sample(grid, |x, y| self.eval(x, y))?.enforce_dirichlet())
    }
}

pub fn stationary_mode(k: u32, l: u32, n: u32, half_width: f64) -> Result<StationaryMode, SpectralError> {
    let triple = resonant_family(k, l, n, half_width)?;
    let profile = build_profile(&triple)?;
    Ok(StationaryMode { profile, n, half_width })
}
