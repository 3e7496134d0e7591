//! Decay theory for small solutions: admissibility, smallness thresholds,
//! exponential rates, the weighted-energy Lyapunov inequality, and verdicts
//! on simulated traces.
//!
//! All four cases share one construction. With
//! `2A^2 = 24/L^2 + 2/B^2 - alpha` (the `2/B^2` term absent on a strip),
//! `delta = A^2 / 2` and `eps = A^2 / (2 (8/L^2 + 2/B^2))`, the weighted energy
//! `W = ((1 + x), u^2)` satisfies
//!
//! `W' + A^2 ||u||^2 + (eps - 4 W / (9 delta)) ||grad u||^2 <= 0`,
//!
//! so `W(0) < 9 eps delta / 4` gives `W(t) <= W(0) exp(-A^2 t / (1 + L))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus;
use crate::dynamics::EnergyTrace;
use crate::geometry::Field;

/// Energies at or below this are treated as rounding noise.
pub const ENERGY_FLOOR: f64 = 1e-14;
/// Relative slack of the envelope check.
pub const ENVELOPE_TOLERANCE: f64 = 0.05;
const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilizationError {
    #[error("dimension {name} must be finite and positive, got {value}")]
    BadDimension { name: &'static str, value: f64 },
    #[error("alpha must be 0 or 1, got {0}")]
    BadAlpha(u8),
    #[error("no decay theory applies: 24/L^2 + 2/B^2 - alpha = {0} is not positive")]
    Inadmissible(f64),
    #[error("trace has {got} samples, at least {need} are needed")]
    TooShort { got: usize, need: usize },
    #[error("fit window [{t_lo}, {t_hi}] is empty or reversed")]
    BadWindow { t_lo: f64, t_hi: f64 },
    #[error("weighted energy {value:e} at t = {t} is below the floor {ENERGY_FLOOR:e}")]
    Underflow { t: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayGeometry {
    Rectangle { length: f64, half_width: f64 },
    Strip { length: f64 },
}

impl DecayGeometry {
    pub fn length(&self) -> f64 {
        match *self {
            DecayGeometry::Rectangle { length, .. } | DecayGeometry::Strip { length } => length,
        }
    }

    /// `1/B^2`, zero on a strip.
    fn inverse_width_sq(&self) -> f64 {
        match *self {
            DecayGeometry::Rectangle { half_width, .. } => 1.0 / (half_width * half_width),
            DecayGeometry::Strip { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTheory {
    pub alpha: u8,
    pub geometry: DecayGeometry,
    pub admissible: bool,
    /// `A^2`; negative or zero when inadmissible.
    pub a_sq: f64,
    /// Bound on `((1 + x), u_0^2)`; zero when inadmissible.
    pub threshold: f64,
    /// `A^2 / (1 + L)`; zero when inadmissible.
    pub rate: f64,
    pub delta: f64,
    pub eps_small: f64,
}

pub fn decay_theory(alpha: u8, geometry: DecayGeometry) -> Result<DecayTheory, StabilizationError> {
    if alpha > 1 {
        return Err(StabilizationError::BadAlpha(alpha));
    }
    let dims: &[(&'static str, f64)] = match geometry {
        DecayGeometry::Rectangle { length, half_width } => &[("L", length), ("B", half_width)],
        DecayGeometry::Strip { length } => &[("L", length)],
    };
    for &(name, value) in dims {
        if !(value.is_finite() && value > 0.0) {
            return Err(StabilizationError::BadDimension { name, value });
        }
    }
    let l = geometry.length();
    let ib = geometry.inverse_width_sq();
    let a_sq = 0.5 * (24.0 / (l * l) + 2.0 * ib - alpha as f64);
    let admissible = a_sq > 0.0;
    let delta = a_sq / 2.0;
    let eps_small = a_sq / (2.0 * (8.0 / (l * l) + 2.0 * ib));
    let (threshold, rate) = if admissible { (9.0 * eps_small * delta / 4.0, a_sq / (1.0 + l)) } else { (0.0, 0.0) };
    Ok(DecayTheory { alpha, geometry, admissible, a_sq, threshold, rate, delta, eps_small })
}

/// The rectangle threshold written as `(3 A^2 L B)^2 / (32 (4B^2 + L^2))`.
pub fn threshold_product_form(a_sq: f64, length: f64, half_width: f64) -> f64 {
    (3.0 * a_sq * length * half_width).powi(2) / (32.0 * (4.0 * half_width * half_width + length * length))
}

/// The rectangle threshold written as `9 A^4 / (16 (8/L^2 + 2/B^2))`.
pub fn threshold_quotient_form(a_sq: f64, length: f64, half_width: f64) -> f64 {
    9.0 * a_sq * a_sq / (16.0 * (8.0 / (length * length) + 2.0 / (half_width * half_width)))
}

/// Returns `((1 + x), u_0^2)` and whether it lies strictly below the threshold.
pub fn check_smallness(u0: &Field, theory: &DecayTheory) -> Result<(f64, bool), StabilizationError> {
    if !theory.admissible {
        return Err(StabilizationError::Inadmissible(2.0 * theory.a_sq));
    }
    let w = calculus::weighted_sq(u0);
    Ok((w, w < theory.threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// `W' + A^2 ||u||^2 + (eps - 4W/(9 delta)) ||grad u||^2` per sample.
    pub residuals: Vec<f64>,
    /// Largest positive residual, zero if none.
    pub max_excursion: f64,
    /// `max_excursion / W(0)`, zero for a zero trace.
    pub relative_excursion: f64,
    /// `W(t) < 9 eps delta / 4` at every sample.
    pub persistence_ok: bool,
}

/// Evaluates the Lyapunov inequality along a trace, with `W'` from
/// second-order differences on the (possibly non-uniform) sample times.
pub fn lyapunov_monitor(trace: &EnergyTrace, theory: &DecayTheory) -> Result<LyapunovReport, StabilizationError> {
    let s = &trace.samples;
    if s.len() < 3 {
        return Err(StabilizationError::TooShort { got: s.len(), need: 3 });
    }
    let n = s.len();
    let derivative = |k: usize| -> f64 {
        // three-point Lagrange derivative at sample k
        let (a, b, c) = if k == 0 {
            (0, 1, 2)
        } else if k == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        let (t0, t1, t2) = (s[a].t, s[b].t, s[c].t);
        let t = s[k].t;
        let w0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
        let w1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
        let w2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
        w0 * s[a].weighted + w1 * s[b].weighted + w2 * s[c].weighted
    };
    let persistence = 9.0 * theory.eps_small * theory.delta / 4.0;
    let residuals: Vec<f64> = (0..n)
        .map(|k| {
            let bracket = theory.eps_small - 4.0 * s[k].weighted / (9.0 * theory.delta);
            derivative(k) + theory.a_sq * s[k].l2_sq + bracket * (s[k].grad_x_sq + s[k].grad_y_sq)
        })
        .collect();
    let max_excursion = residuals.iter().copied().fold(0.0, f64::max);
    let w0 = s[0].weighted;
    Ok(LyapunovReport {
        max_excursion,
        relative_excursion: if w0 > 0.0 { max_excursion / w0 } else { 0.0 },
        persistence_ok: s.iter().all(|x| x.weighted < persistence),
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares slope of `-log W` over samples with `t_lo <= t <= t_hi`.
pub fn fit_decay_rate(trace: &EnergyTrace, window: (f64, f64)) -> Result<RateFit, StabilizationError> {
    let (t_lo, t_hi) = window;
    if !(t_hi > t_lo) {
        return Err(StabilizationError::BadWindow { t_lo, t_hi });
    }
    let pts: Vec<(f64, f64)> = trace.samples.iter().filter(|s| s.t >= t_lo && s.t <= t_hi).map(|s| (s.t, s.weighted)).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(StabilizationError::TooShort { got: pts.len(), need: MIN_FIT_SAMPLES });
    }
    if let Some(&(t, value)) = pts.iter().find(|p| p.1 <= ENERGY_FLOOR) {
        return Err(StabilizationError::Underflow { t, value });
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, w) in &pts {
        let (dt, dy) = (t - mean_t, w.ln() - mean_y);
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { rate: -slope + 0.0, r_squared, samples: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayVerdict {
    pub theory: DecayTheory,
    pub initial_weighted: f64,
    pub smallness_ok: bool,
    /// `W(t) <= W(0) exp(-rate t) (1 + 5%)` at every sample; false without a theory.
    pub envelope_ok: bool,
    pub fitted_rate: f64,
    pub r_squared: f64,
    pub fit_window: (f64, f64),
    /// `fitted_rate / rate`; absent when no theory applies.
    pub margin: Option<f64>,
}

/// Window end: the trace end, or the last sample still above the energy floor if earlier.
fn fit_window(trace: &EnergyTrace) -> (f64, f64) {
    let t_end = trace.samples.last().map_or(0.0, |s| s.t);
    let t_star = trace.samples.iter().filter(|s| s.weighted > ENERGY_FLOOR).map(|s| s.t).fold(0.0, f64::max).min(t_end);
    (t_star / 2.0, t_star)
}

pub fn verdict(trace: &EnergyTrace, theory: &DecayTheory) -> Result<DecayVerdict, StabilizationError> {
    let first = trace.samples.first().ok_or(StabilizationError::TooShort { got: 0, need: MIN_FIT_SAMPLES })?;
    let w0 = first.weighted;
    let window = fit_window(trace);
    let fit = fit_decay_rate(trace, window)?;
    let envelope_ok = theory.admissible
        && trace.samples.iter().all(|s| s.weighted <= w0 * (-theory.rate * (s.t - first.t)).exp() * (1.0 + ENVELOPE_TOLERANCE));
    Ok(DecayVerdict {
        theory: *theory,
        initial_weighted: w0,
        smallness_ok: theory.admissible && w0 < theory.threshold,
        envelope_ok,
        fitted_rate: fit.rate,
        r_squared: fit.r_squared,
        fit_window: window,
        margin: theory.admissible.then(|| fit.rate / theory.rate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TraceSample;
    use crate::geometry::Grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rect(l: f64, b: f64) -> DecayGeometry {
        DecayGeometry::Rectangle { length: l, half_width: b }
    }

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> EnergyTrace {
        let samples = (0..=n)
            .map(|k| {
                let t = t_end * k as f64 / n as f64;
                TraceSample { t, l2_sq: f(t), weighted: f(t), flux0: 0.0, grad_x_sq: 0.0, grad_y_sq: 0.0, cubic: 0.0 }
            })
            .collect();
        EnergyTrace { samples, i0_initial: None }
    }

    #[test]
    fn theorem_constants() {
        let t = decay_theory(1, rect(2.0, 1.0)).unwrap();
        assert!(t.admissible);
        assert_abs_diff_eq!(t.a_sq, 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.rate, 3.5 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.threshold, 441.0 / 256.0, epsilon = 1e-14);

        let t = decay_theory(1, rect(10.0, 10.0)).unwrap();
        assert!(!t.admissible);
        assert_eq!((t.rate, t.threshold), (0.0, 0.0));

        let t = decay_theory(0, rect(2.0, 1.0)).unwrap();
        assert!(t.admissible);
        assert_abs_diff_eq!(t.rate, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.threshold, 2.25, epsilon = 1e-14);

        let t = decay_theory(1, DecayGeometry::Strip { length: 2.0 }).unwrap();
        assert_abs_diff_eq!(t.a_sq, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.rate, 20.0 / 24.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.threshold, 9.0 * 400.0 / 2048.0, epsilon = 1e-14);

        let t = decay_theory(0, DecayGeometry::Strip { length: 3.0 }).unwrap();
        assert_abs_diff_eq!(t.rate, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.threshold, 1.125, epsilon = 1e-14);

        assert!(matches!(decay_theory(2, rect(1.0, 1.0)), Err(StabilizationError::BadAlpha(2))));
        assert!(matches!(decay_theory(1, rect(-1.0, 1.0)), Err(StabilizationError::BadDimension { name: "L", .. })));
    }

    #[test]
    fn closed_forms_of_each_rate() {
        // the four rates written as separate fractions
        for &(l, b) in &[(1.0, 0.5), (2.0, 1.0), (3.0, 4.0), (0.7, 2.5)] {
            let sigma = (12.0 * b * b + l * l) / (b * b * l * l * (1.0 + l));
            assert_abs_diff_eq!(decay_theory(0, rect(l, b)).unwrap().rate, sigma, epsilon = 1e-12);
            let nu = 12.0 / (l * l * (1.0 + l));
            assert_abs_diff_eq!(decay_theory(0, DecayGeometry::Strip { length: l }).unwrap().rate, nu, epsilon = 1e-12);
            if l * l < 24.0 {
                let rho = (24.0 - l * l) / (2.0 * l * l * (1.0 + l));
                let strip = decay_theory(1, DecayGeometry::Strip { length: l }).unwrap();
                assert_abs_diff_eq!(strip.rate, rho, epsilon = 1e-12);
                assert_abs_diff_eq!(strip.threshold, 9.0 * (24.0 - l * l).powi(2) / (512.0 * l * l), epsilon = 1e-12);
            }
            let theta0 = decay_theory(0, DecayGeometry::Strip { length: l }).unwrap();
            assert_abs_diff_eq!(theta0.threshold, 81.0 / (8.0 * l * l), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn threshold_forms_agree(l in 0.2f64..4.8, b in 0.2f64..50.0) {
            let t = decay_theory(1, rect(l, b)).unwrap();
            prop_assume!(t.admissible);
            let p = threshold_product_form(t.a_sq, l, b);
            let q = threshold_quotient_form(t.a_sq, l, b);
            prop_assert!((p - q).abs() <= 1e-12 * p.max(1.0));
            prop_assert!((t.threshold - 9.0 * t.eps_small * t.delta / 4.0).abs() <= 1e-12 * t.threshold.max(1.0));
            prop_assert!((t.threshold - p).abs() <= 1e-12 * p.max(1.0));
        }

        #[test]
        fn alpha_zero_is_always_admissible(l in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            prop_assert!(decay_theory(0, rect(l, b)).unwrap().admissible);
            let strip = decay_theory(0, DecayGeometry::Strip { length: l }).unwrap();
            prop_assert!(strip.admissible);
        }
    }

    #[test]
    fn rate_decreases_with_size() {
        for i in 1..40 {
            for j in 1..40 {
                let (l, b) = (0.1 * i as f64, 0.1 * j as f64);
                let here = decay_theory(1, rect(l, b)).unwrap();
                if !here.admissible {
                    continue;
                }
                let longer = decay_theory(1, rect(l + 0.01, b)).unwrap();
                let wider = decay_theory(1, rect(l, b + 0.01)).unwrap();
                assert!(longer.rate < here.rate);
                assert!(wider.rate < here.rate);
            }
        }
    }

    #[test]
    fn smallness_check() {
        let theory = decay_theory(1, rect(2.0, 1.0)).unwrap();
        let g = Grid::rectangle(2.0, 1.0, 31, 31).unwrap();
        assert_eq!(check_smallness(&Field::zeros(g), &theory).unwrap(), (0.0, true));
        let shape =
            Field::sample(g, |x, y| (std::f64::consts::PI * x / 2.0).sin().powi(2) * (1.0 - y * y)).unwrap().enforce_dirichlet();
        let w = calculus::weighted_sq(&shape);
        let half = shape.clone().scaled((0.5 * theory.threshold / w).sqrt());
        let (wh, ok) = check_smallness(&half, &theory).unwrap();
        assert!(ok && (wh - 0.5 * theory.threshold).abs() < 1e-12);
        let double = shape.scaled((2.0 * theory.threshold / w).sqrt());
        assert!(!check_smallness(&double, &theory).unwrap().1);
        let bad = decay_theory(1, rect(10.0, 10.0)).unwrap();
        assert!(matches!(check_smallness(&half, &bad), Err(StabilizationError::Inadmissible(_))));
    }

    #[test]
    fn rate_fits() {
        let f = fit_decay_rate(&synthetic(|t| (-2.0 * t).exp(), 4.0, 400), (2.0, 4.0)).unwrap();
        assert_abs_diff_eq!(f.rate, 2.0, epsilon = 1e-6);
        assert!(f.r_squared > 0.999999);
        let f = fit_decay_rate(&synthetic(|_| 0.3, 4.0, 400), (2.0, 4.0)).unwrap();
        assert!(f.rate.abs() < 1e-15);
        let f = fit_decay_rate(&synthetic(|t| (-2.0 * t).exp() * (1.0 + 0.01 * (10.0 * t).sin()), 4.0, 400), (2.0, 4.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 0.02);

        let tr = synthetic(|t| (-2.0 * t).exp(), 4.0, 400);
        assert!(matches!(fit_decay_rate(&tr, (3.0, 3.0)), Err(StabilizationError::BadWindow { .. })));
        assert!(matches!(fit_decay_rate(&tr, (3.0, 3.02)), Err(StabilizationError::TooShort { .. })));
        let tr = synthetic(|t| (-20.0 * t).exp(), 4.0, 400);
        assert!(matches!(fit_decay_rate(&tr, (2.0, 4.0)), Err(StabilizationError::Underflow { .. })));
    }

    #[test]
    fn verdicts_on_synthetic_traces() {
        let strip = decay_theory(0, DecayGeometry::Strip { length: 2.0 }).unwrap();
        assert_abs_diff_eq!(strip.rate, 1.0, epsilon = 1e-15);
        let v = verdict(&synthetic(|t| 0.1 * (-2.0 * t).exp(), 10.0, 1000), &strip).unwrap();
        assert!(v.envelope_ok);
        assert_abs_diff_eq!(v.margin.unwrap(), 2.0, epsilon = 1e-6);
        assert_eq!(v.fit_window, (5.0, 10.0));

        // fast decay: the fit window shrinks to the part above the floor
        let v = verdict(&synthetic(|t| (-20.0 * t).exp(), 10.0, 1000), &strip).unwrap();
        assert!(v.fit_window.1 < 1.7);
        assert_abs_diff_eq!(v.fitted_rate, 20.0, epsilon = 1e-6);

        // no decay on an inadmissible geometry
        let critical = decay_theory(1, rect(7.2552, std::f64::consts::PI)).unwrap();
        let v = verdict(&synthetic(|_| 1.0, 20.0, 200), &critical).unwrap();
        assert!(!v.envelope_ok && v.margin.is_none() && v.fitted_rate.abs() < 1e-12);

        let slow = verdict(&synthetic(|t| (-0.5 * t).exp(), 10.0, 1000), &strip).unwrap();
        assert!(!slow.envelope_ok);
    }

    #[test]
    fn lyapunov_on_zero_and_short_traces() {
        let theory = decay_theory(1, rect(2.0, 1.0)).unwrap();
        let r = lyapunov_monitor(&synthetic(|_| 0.0, 1.0, 10), &theory).unwrap();
        assert!(r.residuals.iter().all(|&x| x <= 0.0));
        assert_eq!(r.relative_excursion, 0.0);
        assert!(r.persistence_ok);
        assert!(matches!(lyapunov_monitor(&synthetic(|_| 0.0, 1.0, 1), &theory), Err(StabilizationError::TooShort { .. })));
    }
}
