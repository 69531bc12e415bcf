//! Truncation levels and the finite-window diagnostic for the gap condition
//! `Σ (T_k δ_k^{1/4} + ω₂^{1/2}(f_{T_k}, 8 δ_k^{1/2})) < ∞`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numeric::CompensatedSum;
use crate::seqgen::{delta_sequence, IntegerSequence};

use super::function::PeriodicFunction;
use super::modulus::l2_modulus;

/// Truncation levels `T_1, …, T_K` with their tail masses `μ{|f| >= T_k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationSchedule {
    pub levels: Vec<f64>,
    pub tail_measures: Vec<f64>,
}

impl TruncationSchedule {
    fn build(f: &PeriodicFunction, levels: Vec<f64>) -> Self {
        let tail_measures = levels.iter().map(|&t| f.tail_measure(t)).collect();
        Self { levels, tail_measures }
    }

    /// Indices `k` (1-based) with `μ{|f| >= T_k} > k^{-2}`.
    pub fn violations(&self) -> Vec<usize> {
        self.tail_measures
            .iter()
            .enumerate()
            .filter(|(i, &m)| {
                let bound = ((i + 1) as f64).powi(-2);
                m > bound * (1.0 + 1e-12)
            })
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn is_admissible(&self) -> bool {
        self.violations().is_empty()
    }
}

fn bounded_levels(f: &PeriodicFunction, k: usize) -> Option<Vec<f64>> {
    f.bounded_level().map(|s| vec![s; k])
}

/// `T_k = k^{1/α}` for heavy tails, `sup|f|` (nudged up when `|f| = sup|f|`
/// on a set of positive measure) for bounded functions.
pub fn truncation_schedule(f: &PeriodicFunction, k: usize) -> TruncationSchedule {
    let levels = match f {
        PeriodicFunction::HeavyTail { alpha } => (1..=k).map(|i| (i as f64).powf(1.0 / alpha)).collect(),
        _ => bounded_levels(f, k).expect("bounded catalog function"),
    };
    TruncationSchedule::build(f, levels)
}

/// Smallest levels meeting `μ{|f| >= T_k} <= k^{-2}`: `(2k²)^{1/α}` for heavy tails.
pub fn admissible_schedule(f: &PeriodicFunction, k: usize) -> TruncationSchedule {
    let levels = match f {
        PeriodicFunction::HeavyTail { alpha } => (1..=k)
            .map(|i| {
                let t = (2.0 * (i * i) as f64).powf(1.0 / alpha);
                // Round up until the tail bound holds in floating point.
                let mut t = t;
                while f.tail_measure(t) > (i as f64).powi(-2) {
                    t = f64::from_bits(t.to_bits() + 1);
                }
                t
            })
            .collect(),
        _ => bounded_levels(f, k).expect("bounded catalog function"),
    };
    TruncationSchedule::build(f, levels)
}

/// `μ{x : |f(x)| >= T}`.
pub fn tail_measure(f: &PeriodicFunction, level: f64) -> f64 {
    f.tail_measure(level)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PlausiblyConvergent,
    PlausiblyDivergent,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::PlausiblyConvergent => "plausibly_convergent",
            Verdict::PlausiblyDivergent => "plausibly_divergent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRow {
    pub k: usize,
    pub level: f64,
    pub delta: f64,
    /// `ω₂^{1/2}(f_{T_k}, min(8 δ_k^{1/2}, 1/2))`.
    pub omega2_term: f64,
    /// `T_k δ_k^{1/4} + omega2_term`.
    pub term: f64,
    pub partial_sum: f64,
    /// `T_k δ_k^{1/4} + (4 h_k V ‖f_T‖∞)^{1/4}` with `h_k = 8 δ_k^{1/2}`, when `f_T` has bounded variation.
    pub majorant: Option<f64>,
}

/// Finite-window diagnostic; a verdict about `K` terms, never a proof about the series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub function: String,
    pub rows: Vec<ConditionRow>,
    /// First and last `k` of the window the verdict looks at.
    pub window: (usize, usize),
    /// Least-squares slope of `log t_k` against `log k` over the window.
    pub loglog_slope: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Whether the majorant series passed the convergence tests.
    pub majorant_convergent: bool,
    pub verdict: Verdict,
}

impl ConditionReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,T_k,delta_k,omega2_term,partial_sum\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e},{:e}", r.k, r.level, r.delta, r.omega2_term, r.partial_sum);
        }
        s
    }
}

const CONVERGENT_RATIO: f64 = 0.9;
const CONVERGENT_SLOPE: f64 = -1.1;
const DIVERGENT_SLOPE: f64 = -0.9;
const MIN_WINDOW: usize = 4;

/// Evaluates the first `K` terms of the gap condition.
pub fn condition_maingap(f: &PeriodicFunction, seq: &IntegerSequence, k: usize) -> Result<ConditionReport> {
    f.validate()?;
    if k == 0 {
        return Err(LabError::InvalidParameter("K must be >= 1".into()));
    }
    let deltas = delta_sequence(seq)?;
    if k > deltas.len() {
        return Err(LabError::SequenceTooShort {
            needed: k + 1,
            have: seq.len(),
        });
    }
    let schedule = admissible_schedule(f, k);
    let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
    let mut acc = CompensatedSum::new();
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let level = schedule.levels[i];
        let delta = deltas[i];
        let arg = (8.0 * delta.sqrt()).min(0.5);
        let ft = match f {
            PeriodicFunction::HeavyTail { .. } => PeriodicFunction::truncated(f.clone(), level)?,
            // Bounded levels sit at or above sup|f|, so f_T = f.
            _ => f.clone(),
        };
        let omega = match cache.get(&(level.to_bits(), arg.to_bits())) {
            Some(&w) => w,
            None => {
                let w = l2_modulus(&ft, arg)?;
                cache.insert((level.to_bits(), arg.to_bits()), w);
                w
            }
        };
        // ∫|f(x+h) - f(x-h)|² <= 2‖f‖∞ ∫|f(x+h) - f(x-h)| <= 4h V ‖f‖∞.
        let majorant = match (ft.total_variation(), ft.sup_abs()) {
            (Ok(v), Some(sup)) => Some(level * delta.powf(0.25) + (4.0 * 8.0 * delta.sqrt() * v * sup).powf(0.25)),
            _ => None,
        };
        let omega2_term = omega.sqrt();
        let term = level * delta.powf(0.25) + omega2_term;
        acc.add(term);
        rows.push(ConditionRow {
            k: i + 1,
            level,
            delta,
            omega2_term,
            term,
            partial_sum: acc.value(),
            majorant,
        });
    }
    let terms: Vec<f64> = rows.iter().map(|r| r.term).collect();
    let (window, slope, max_ratio, mut verdict) = diagnose(&terms);
    let majorants: Option<Vec<f64>> = rows.iter().map(|r| r.majorant).collect();
    let majorant_convergent = majorants.is_some_and(|m| diagnose(&m).3 == Verdict::PlausiblyConvergent);
    if majorant_convergent {
        verdict = Verdict::PlausiblyConvergent;
    }
    Ok(ConditionReport {
        function: f.to_string(),
        rows,
        window,
        loglog_slope: slope,
        max_ratio,
        majorant_convergent,
        verdict,
    })
}

/// Ratio and log-log slope tests over the second half of the terms.
fn diagnose(terms: &[f64]) -> ((usize, usize), Option<f64>, Option<f64>, Verdict) {
    let k = terms.len();
    let start = (k / 2).max(1).min(k);
    let window = (start, k);
    let w = &terms[start - 1..];
    if w.len() < MIN_WINDOW {
        return (window, None, None, Verdict::Inconclusive);
    }
    if w.iter().all(|&t| t == 0.0) {
        return (window, None, Some(0.0), Verdict::PlausiblyConvergent);
    }
    let ratios: Vec<f64> = w.windows(2).map(|p| if p[0] > 0.0 { p[1] / p[0] } else { f64::INFINITY }).collect();
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nondecreasing = ratios.iter().all(|&r| r >= 1.0);
    let pts: Vec<(f64, f64)> = w
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, &t)| (((start + i) as f64).ln(), t.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let verdict = if max_ratio <= CONVERGENT_RATIO || slope.is_some_and(|s| s < CONVERGENT_SLOPE) {
        Verdict::PlausiblyConvergent
    } else if nondecreasing || slope.is_some_and(|s| s >= DIVERGENT_SLOPE) {
        Verdict::PlausiblyDivergent
    } else {
        Verdict::Inconclusive
    };
    (window, slope, Some(max_ratio), verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::{generate, GapExponent, SequenceSpec};

    #[test]
    fn printed_schedule() {
        let h = PeriodicFunction::HeavyTail { alpha: 1.0 };
        assert_eq!(truncation_schedule(&h, 3).levels, vec![1.0, 2.0, 3.0]);
        assert_eq!(truncation_schedule(&PeriodicFunction::HeavyTail { alpha: 0.5 }, 1).levels, vec![1.0]);
        assert_eq!(truncation_schedule(&PeriodicFunction::ErdosFortet, 5).levels, vec![2.0; 5]);
        // k^{1/α} leaves tail min(1, 2/k), above k^{-2} from k = 2 on.
        assert_eq!(truncation_schedule(&h, 4).violations(), vec![2, 3, 4]);
    }

    #[test]
    fn admissible_schedules_hold() {
        for f in [
            PeriodicFunction::HeavyTail { alpha: 1.0 },
            PeriodicFunction::HeavyTail { alpha: 1.5 },
            PeriodicFunction::HeavyTail { alpha: 0.3 },
            PeriodicFunction::SignSine,
            PeriodicFunction::CenteredIndicator { t: 0.2 },
            PeriodicFunction::ErdosFortet,
            PeriodicFunction::cos(),
        ] {
            let s = admissible_schedule(&f, 50);
            assert!(s.is_admissible(), "{f}: {:?}", s.violations());
        }
    }

    #[test]
    fn verdicts() {
        let seq = generate(&SequenceSpec::superlacunary_square(2, 9)).unwrap();
        let r = condition_maingap(&PeriodicFunction::cos(), &seq, 8).unwrap();
        assert_eq!(r.verdict, Verdict::PlausiblyConvergent);

        let seq = generate(&SequenceSpec::geometric(2, 13)).unwrap();
        let r = condition_maingap(&PeriodicFunction::HeavyTail { alpha: 1.0 }, &seq, 12).unwrap();
        assert_eq!(r.verdict, Verdict::PlausiblyDivergent);

        let seq = generate(&SequenceSpec::power_gap(GapExponent::integer(24), 1, 13)).unwrap();
        let r = condition_maingap(&PeriodicFunction::HeavyTail { alpha: 1.0 }, &seq, 12).unwrap();
        assert_eq!(r.verdict, Verdict::PlausiblyConvergent, "{:?}", r.rows);
        assert_eq!(r.to_csv().lines().count(), 13);
    }
}
