//! The L² modulus of continuity `ω₂(f, δ) = (sup_{h<=δ} ∫|f(x+h) - f(x-h)|²)^{1/2}`.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::numeric::{integrate_periodic, QuadratureOptions};

use super::function::PeriodicFunction;

const GRID: usize = 1024;
const REFINE_ROUNDS: usize = 3;
const REFINE_POINTS: usize = 64;

/// `∫₀¹ |f(x+h) - f(x-h)|² dx`.
pub fn shift_energy(f: &PeriodicFunction, h: f64) -> f64 {
    if let Some(c) = f.trig_coefficients() {
        return c
            .iter()
            .enumerate()
            .map(|(j, (a, b))| 2.0 * (2.0 * PI * (j + 1) as f64 * h).sin().powi(2) * (a * a + b * b))
            .sum();
    }
    if h == 0.0 {
        return 0.0;
    }
    let bps: Vec<f64> = f.breakpoints().iter().flat_map(|&b| [b - h, b + h]).collect();
    let opts = QuadratureOptions {
        max_panel: 1.0 / 32.0,
        grading_levels: 24,
    };
    integrate_periodic(&|x| (f.eval_or_zero(x + h) - f.eval_or_zero(x - h)).powi(2), &bps, opts).max(0.0)
}

/// `ω₂(f, δ)`, with `δ` clamped to `1/2`.
pub fn l2_modulus(f: &PeriodicFunction, delta: f64) -> Result<f64> {
    if !f.is_square_integrable() {
        return Err(LabError::NotSquareIntegrable(f.to_string()));
    }
    if !(delta >= 0.0) {
        return Err(LabError::InvalidParameter(format!("delta {delta} must be >= 0")));
    }
    let delta = delta.min(0.5);
    if delta == 0.0 {
        return Ok(0.0);
    }
    if let Some(c) = f.trig_coefficients() {
        let live: Vec<(usize, f64)> = c
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| *a != 0.0 || *b != 0.0)
            .map(|(j, (a, b))| (j + 1, a * a + b * b))
            .collect();
        if live.len() <= 1 {
            let Some(&(j, amp)) = live.first() else {
                return Ok(0.0);
            };
            let h = delta.min(0.25 / j as f64);
            return Ok((2.0 * amp).sqrt() * (2.0 * PI * j as f64 * h).sin());
        }
    }
    Ok(grid_sup(&|h| shift_energy(f, h), delta).sqrt())
}

/// Supremum of `g` on `[0, δ]` by a uniform grid plus local refinement.
fn grid_sup(g: &dyn Fn(f64) -> f64, delta: f64) -> f64 {
    let step = delta / (GRID - 1) as f64;
    let mut best_h = 0.0;
    let mut best = g(0.0);
    for i in 1..GRID {
        let h = step * i as f64;
        let v = g(h);
        if v > best {
            best = v;
            best_h = h;
        }
    }
    let mut radius = step;
    for _ in 0..REFINE_ROUNDS {
        let lo = (best_h - radius).max(0.0);
        let hi = (best_h + radius).min(delta);
        for i in 0..=REFINE_POINTS {
            let h = lo + (hi - lo) * i as f64 / REFINE_POINTS as f64;
            let v = g(h);
            if v > best {
                best = v;
                best_h = h;
            }
        }
        radius = 2.0 * (hi - lo) / REFINE_POINTS as f64;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_examples() {
        let c = PeriodicFunction::cos();
        assert_eq!(l2_modulus(&c, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(l2_modulus(&c, 0.125).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l2_modulus(&c, 0.25).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(l2_modulus(&c, 0.4).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert!(l2_modulus(&PeriodicFunction::HeavyTail { alpha: 1.0 }, 0.1).is_err());
    }

    #[test]
    fn quadrature_matches_fourier_path() {
        // Same function without the fast path: cos written as a truncation above its sup.
        let slow = PeriodicFunction::truncated(PeriodicFunction::ErdosFortet, 5.0).unwrap();
        for h in [0.001, 0.03, 0.2, 0.37] {
            assert_abs_diff_eq!(
                shift_energy(&slow, h),
                shift_energy(&PeriodicFunction::ErdosFortet, h),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn centered_frac_closed_form() {
        // For the sawtooth, ∫|f(x+h)-f(x-h)|² = 2h(1-2h) for h <= 1/2.
        let f = PeriodicFunction::CenteredFrac;
        for h in [1e-6, 0.01, 0.1, 0.25, 0.4] {
            assert_abs_diff_eq!(shift_energy(&f, h), 2.0 * h * (1.0 - 2.0 * h), epsilon = 1e-11);
        }
        assert_abs_diff_eq!(l2_modulus(&f, 0.5).unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn sign_sine_small_shift() {
        // Two jumps of height 2, each contributing 2h·4.
        let f = PeriodicFunction::SignSine;
        assert_abs_diff_eq!(shift_energy(&f, 0.01), 16.0 * 0.01, epsilon = 1e-11);
    }
}
