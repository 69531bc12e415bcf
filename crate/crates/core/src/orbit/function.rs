//! The catalog of mean-zero 1-periodic test functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::numeric::{integrate_periodic, QuadratureOptions};

use super::fixed::FixedPointSample;

/// A 1-periodic function from the closed catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum PeriodicFunction {
    /// `Σ_j a_j cos 2πjx + b_j sin 2πjx`, with `coeffs[j-1] = (a_j, b_j)`.
    Harmonic(Vec<(f64, f64)>),
    /// `{x} - 1/2`.
    CenteredFrac,
    /// `sgn sin 2πx`.
    SignSine,
    /// `cos 2πx + cos 4πx`.
    ErdosFortet,
    /// `∓|x - 1/2|^{-1/α}` on the left/right half, `α ∈ (0, 2)`; `f(0) = 0`.
    HeavyTail { alpha: f64 },
    /// `1_{[0,t]}({x}) - t`.
    CenteredIndicator { t: f64 },
    /// `f · 1{|f| <= level}`.
    Truncated { base: Box<PeriodicFunction>, level: f64 },
}

impl PeriodicFunction {
    pub fn cos() -> Self {
        Self::Harmonic(vec![(1.0, 0.0)])
    }

    pub fn sin() -> Self {
        Self::Harmonic(vec![(0.0, 1.0)])
    }

    pub fn heavy_tail(alpha: f64) -> Result<Self> {
        let f = Self::HeavyTail { alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn truncated(base: PeriodicFunction, level: f64) -> Result<Self> {
        let f = Self::Truncated {
            base: Box::new(base),
            level,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Harmonic(c) => {
                if c.is_empty() || c.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
                    return Err(LabError::InvalidParameter("harmonic needs finite coefficients".into()));
                }
            }
            Self::HeavyTail { alpha } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(LabError::InvalidParameter(format!("heavy_tail alpha {alpha} not in (0, 2)")));
                }
            }
            Self::CenteredIndicator { t } => {
                if !(0.0..=1.0).contains(t) {
                    return Err(LabError::InvalidParameter(format!("indicator t {t} not in [0, 1]")));
                }
            }
            Self::Truncated { base, level } => {
                if !(level.is_finite() && *level > 0.0) {
                    return Err(LabError::InvalidParameter(format!("truncation level {level} must be positive")));
                }
                base.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `f(u)` for real `u`, reduced mod 1.
    pub fn eval(&self, u: f64) -> Result<f64> {
        let u = u.rem_euclid(1.0);
        Ok(match self {
            Self::Harmonic(c) => eval_harmonic(c, u),
            Self::CenteredFrac => u - 0.5,
            Self::SignSine => {
                if u == 0.0 || u == 0.5 {
                    0.0
                } else if u < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::ErdosFortet => (2.0 * PI * u).cos() + (4.0 * PI * u).cos(),
            Self::HeavyTail { alpha } => {
                if u == 0.0 {
                    0.0
                } else if u == 0.5 {
                    return Err(LabError::Singularity { at: 0.5 });
                } else {
                    heavy_value(*alpha, (u - 0.5).abs(), u > 0.5)
                }
            }
            Self::CenteredIndicator { t } => {
                if u <= *t {
                    1.0 - t
                } else {
                    -t
                }
            }
            Self::Truncated { base, level } => match base.eval(u) {
                Ok(v) if v.abs() <= *level => v,
                Ok(_) | Err(LabError::Singularity { .. }) => 0.0,
                Err(e) => return Err(e),
            },
        })
    }

    /// `f(x)` with exact treatment of the discontinuities.
    pub fn eval_fixed(&self, x: &FixedPointSample) -> Result<f64> {
        match self {
            Self::SignSine => Ok(if x.is_zero() || x.is_half() {
                0.0
            } else if x.upper_half() {
                -1.0
            } else {
                1.0
            }),
            Self::HeavyTail { alpha } => {
                if x.is_zero() {
                    Ok(0.0)
                } else if x.is_half() {
                    Err(LabError::Singularity { at: 0.5 })
                } else {
                    Ok(heavy_value(*alpha, x.distance_to_half(), x.upper_half()))
                }
            }
            Self::CenteredIndicator { t } => Ok(if x.cmp_f64(*t).is_le() { 1.0 - t } else { -t }),
            Self::Truncated { base, level } => match base.eval_fixed(x) {
                Ok(v) if v.abs() <= *level => Ok(v),
                Ok(_) | Err(LabError::Singularity { .. }) => Ok(0.0),
                Err(e) => Err(e),
            },
            _ => self.eval(x.to_f64()),
        }
    }

    /// `f(u)` with the singular point mapped to 0; for quadrature.
    pub fn eval_or_zero(&self, u: f64) -> f64 {
        self.eval(u).unwrap_or(0.0)
    }

    /// Points in `[0, 1)` where `f` is discontinuous or singular.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match self {
            Self::Harmonic(_) | Self::ErdosFortet => vec![],
            Self::CenteredFrac => vec![0.0],
            Self::SignSine | Self::HeavyTail { .. } => vec![0.0, 0.5],
            Self::CenteredIndicator { t } => vec![0.0, t.rem_euclid(1.0)],
            Self::Truncated { base, level } => {
                let mut p = base.breakpoints();
                p.extend(base.level_crossings(*level));
                p
            }
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Points where `|f|` crosses `level`.
    fn level_crossings(&self, level: f64) -> Vec<f64> {
        match self {
            Self::HeavyTail { alpha } => {
                let r = level.powf(-alpha);
                if r < 0.5 {
                    vec![0.5 - r, 0.5 + r]
                } else {
                    vec![]
                }
            }
            Self::CenteredFrac => {
                if level < 0.5 {
                    vec![0.5 - level, 0.5 + level]
                } else {
                    vec![]
                }
            }
            Self::SignSine | Self::CenteredIndicator { .. } => vec![],
            _ => numeric_crossings(&|u| self.eval_or_zero(u).abs() - level),
        }
    }

    /// Fourier coefficients `(a_j, b_j)` when `f` is a trigonometric polynomial.
    pub fn trig_coefficients(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Harmonic(c) => Some(c.clone()),
            Self::ErdosFortet => Some(vec![(1.0, 0.0), (1.0, 0.0)]),
            _ => None,
        }
    }

    pub fn is_square_integrable(&self) -> bool {
        !matches!(self, Self::HeavyTail { .. })
    }

    /// `sup |f|`, or `None` when unbounded.
    pub fn sup_abs(&self) -> Option<f64> {
        Some(match self {
            Self::Harmonic(c) if c.iter().filter(|(a, b)| *a != 0.0 || *b != 0.0).count() <= 1 => {
                c.iter().map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
            }
            Self::Harmonic(_) => numeric_sup(&|u| self.eval_or_zero(u).abs()),
            Self::CenteredFrac => 0.5,
            Self::SignSine => 1.0,
            Self::ErdosFortet => 2.0,
            Self::HeavyTail { .. } => return None,
            Self::CenteredIndicator { t } => t.max(1.0 - t),
            Self::Truncated { base, level } => match base.as_ref() {
                Self::HeavyTail { alpha } => {
                    if *level >= 2f64.powf(1.0 / alpha) {
                        *level
                    } else {
                        0.0
                    }
                }
                b => {
                    let s = b.sup_abs()?;
                    if *level >= s {
                        s
                    } else {
                        numeric_sup(&|u| self.eval_or_zero(u).abs())
                    }
                }
            },
        })
    }

    /// Whether `|f| = sup|f|` on a set of positive measure.
    fn sup_has_mass(&self) -> bool {
        match self {
            Self::SignSine => true,
            Self::CenteredIndicator { t } => *t > 0.0,
            Self::Truncated { base, level } => match base.as_ref() {
                Self::HeavyTail { .. } => false,
                b => b.sup_abs().is_some_and(|s| *level >= s) && b.sup_has_mass(),
            },
            _ => false,
        }
    }

    /// `∫₀¹ f`. Zero for every untruncated variant (principal value for heavy tails).
    pub fn mean(&self) -> f64 {
        match self {
            Self::Truncated { base, level } => match base.as_ref() {
                Self::HeavyTail { .. } => 0.0,
                b if b.sup_abs().is_some_and(|s| *level >= s) => 0.0,
                _ => integrate_periodic(&|u| self.eval_or_zero(u), &self.breakpoints(), QuadratureOptions::default()),
            },
            _ => 0.0,
        }
    }

    /// `‖f‖₂²`.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        Ok(match self {
            Self::Harmonic(c) => c.iter().map(|(a, b)| 0.5 * (a * a + b * b)).sum(),
            Self::CenteredFrac => 1.0 / 12.0,
            Self::SignSine | Self::ErdosFortet => 1.0,
            Self::CenteredIndicator { t } => t * (1.0 - t),
            Self::HeavyTail { alpha } => {
                return Err(LabError::NotSquareIntegrable(format!("heavy_tail({alpha})")));
            }
            Self::Truncated { base, level } => match base.as_ref() {
                Self::HeavyTail { alpha } => {
                    let u0 = level.powf(-alpha);
                    if u0 >= 0.5 {
                        0.0
                    } else {
                        let p = 1.0 - 2.0 / alpha;
                        if p.abs() < 1e-12 {
                            2.0 * (0.5f64.ln() - u0.ln())
                        } else {
                            2.0 * (0.5f64.powf(p) - u0.powf(p)) / p
                        }
                    }
                }
                _ => integrate_periodic(
                    &|u| self.eval_or_zero(u).powi(2),
                    &self.breakpoints(),
                    QuadratureOptions::default(),
                ),
            },
        })
    }

    /// Total variation over one period, including the jump across the period boundary.
    pub fn total_variation(&self) -> Result<f64> {
        let unbounded = |what: &str| Err(LabError::UnboundedVariation(what.to_string()));
        match self {
            Self::Harmonic(c) => Ok(c
                .iter()
                .enumerate()
                .map(|(j, (a, b))| 4.0 * (j + 1) as f64 * a.hypot(*b))
                .sum()),
            Self::CenteredFrac => Ok(2.0),
            Self::SignSine => Ok(4.0),
            // cos 2πx + cos 4πx: extrema 2 at 0, -1/8 at x = ±arccos(-1/4)/2π, -0 at 1/2.
            Self::ErdosFortet => Ok(8.5),
            Self::CenteredIndicator { t } => Ok(if *t < 1.0 { 2.0 } else { 0.0 }),
            Self::HeavyTail { .. } => unbounded("heavy_tail"),
            Self::Truncated { base, level } => match base.as_ref() {
                Self::HeavyTail { alpha } => Ok(if *level >= 2f64.powf(1.0 / alpha) { 4.0 * level } else { 0.0 }),
                b => match b.sup_abs() {
                    Some(s) if *level >= s => b.total_variation(),
                    _ => unbounded("truncation below sup|f|"),
                },
            },
        }
    }

    /// `μ{x : |f(x)| >= level}`.
    pub fn tail_measure(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 1.0;
        }
        match self {
            Self::HeavyTail { alpha } => (2.0 * level.powf(-alpha)).min(1.0),
            Self::CenteredFrac => (1.0 - 2.0 * level).clamp(0.0, 1.0),
            Self::SignSine => {
                if level <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::CenteredIndicator { t } => {
                let mut m = 0.0;
                if 1.0 - t >= level {
                    m += t;
                }
                if *t >= level {
                    m += 1.0 - t;
                }
                m
            }
            Self::Truncated { base, level: cap } => match base.as_ref() {
                Self::HeavyTail { .. } => {
                    if level > *cap {
                        0.0
                    } else {
                        (base.tail_measure(level) - base.tail_measure(*cap)).max(0.0)
                    }
                }
                _ => self.numeric_tail(level),
            },
            _ => {
                if self.sup_abs().is_some_and(|s| level > s) {
                    0.0
                } else {
                    self.numeric_tail(level)
                }
            }
        }
    }

    fn numeric_tail(&self, level: f64) -> f64 {
        let mut bps = self.breakpoints();
        bps.extend(self.level_crossings(level));
        if let Self::Truncated { base, .. } = self {
            bps.extend(base.level_crossings(level));
        }
        let opts = QuadratureOptions {
            max_panel: 1.0 / 64.0,
            grading_levels: 0,
        };
        integrate_periodic(
            &|u| if self.eval_or_zero(u).abs() >= level { 1.0 } else { 0.0 },
            &bps,
            opts,
        )
        .clamp(0.0, 1.0)
    }

    /// Smallest level whose tail measure is zero for bounded `f`.
    pub fn bounded_level(&self) -> Option<f64> {
        let s = self.sup_abs()?;
        Some(if self.sup_has_mass() { next_up(s) } else { s })
    }
}

fn next_up(v: f64) -> f64 {
    if v == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(v.to_bits() + 1)
    }
}

#[inline]
fn heavy_value(alpha: f64, dist: f64, upper: bool) -> f64 {
    let m = dist.powf(-1.0 / alpha);
    if upper {
        m
    } else {
        -m
    }
}

fn eval_harmonic(c: &[(f64, f64)], u: f64) -> f64 {
    let (s1, c1) = (2.0 * PI * u).sin_cos();
    // Chebyshev-style recurrence for cos/sin of multiples.
    let (mut ck, mut sk) = (c1, s1);
    let mut acc = 0.0;
    for (j, (a, b)) in c.iter().enumerate() {
        if j > 0 {
            let (cn, sn) = (ck * c1 - sk * s1, sk * c1 + ck * s1);
            ck = cn;
            sk = sn;
        }
        acc += a * ck + b * sk;
    }
    acc
}

const SCAN: usize = 8192;

fn numeric_sup(g: &dyn Fn(f64) -> f64) -> f64 {
    let vals: Vec<f64> = (0..SCAN).map(|i| g(i as f64 / SCAN as f64)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..SCAN).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    for &i in idx.iter().take(8) {
        // golden-section search on the bracket around a grid maximum
        let (mut lo, mut hi) = ((i as f64 - 1.0) / SCAN as f64, (i as f64 + 1.0) / SCAN as f64);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if g(m1) >= g(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.max(g(0.5 * (lo + hi)));
    }
    best
}

fn numeric_crossings(g: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = g(0.0);
    for i in 1..=SCAN {
        let u = i as f64 / SCAN as f64;
        let cur = g(u);
        if (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = ((i - 1) as f64 / SCAN as f64, u);
            let neg_lo = prev < 0.0;
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if (g(m) < 0.0) == neg_lo {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    out
}

impl fmt::Display for PeriodicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Harmonic(c) if c.as_slice() == [(1.0, 0.0)] => write!(f, "cos"),
            Self::Harmonic(c) if c.as_slice() == [(0.0, 1.0)] => write!(f, "sin"),
            Self::Harmonic(c) => {
                let parts: Vec<String> = c.iter().map(|(a, b)| format!("{a},{b}")).collect();
                write!(f, "harmonic:{}", parts.join(";"))
            }
            Self::CenteredFrac => write!(f, "centered_frac"),
            Self::SignSine => write!(f, "sign_sine"),
            Self::ErdosFortet => write!(f, "erdos_fortet"),
            Self::HeavyTail { alpha } => write!(f, "heavy_tail:{alpha}"),
            Self::CenteredIndicator { t } => write!(f, "indicator:{t}"),
            Self::Truncated { base, level } => write!(f, "truncated:{level}:{base}"),
        }
    }
}

impl FromStr for PeriodicFunction {
    type Err = LabError;

    /// Parses `cos`, `sin`, `harmonic:a1,b1;a2,b2`, `centered_frac`, `sign_sine`,
    /// `erdos_fortet`, `heavy_tail:α`, `indicator:t` and `truncated:T:<base>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::InvalidParameter(format!("unrecognized function '{s}'"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let f = match (head, rest) {
            ("cos", None) => Self::cos(),
            ("sin", None) => Self::sin(),
            ("centered_frac", None) => Self::CenteredFrac,
            ("sign_sine", None) => Self::SignSine,
            ("erdos_fortet", None) => Self::ErdosFortet,
            ("heavy_tail", Some(a)) => Self::HeavyTail { alpha: num(a)? },
            ("indicator" | "centered_indicator", Some(t)) => Self::CenteredIndicator { t: num(t)? },
            ("harmonic", Some(list)) => Self::Harmonic(
                list.split(';')
                    .map(|pair| {
                        let (a, b) = pair.split_once(',').ok_or_else(bad)?;
                        Ok((num(a)?, num(b)?))
                    })
                    .collect::<Result<_>>()?,
            ),
            ("truncated", Some(r)) => {
                let (level, base) = r.split_once(':').ok_or_else(bad)?;
                Self::Truncated {
                    base: Box::new(base.parse()?),
                    level: num(level)?,
                }
            }
            _ => return Err(bad()),
        };
        f.validate()?;
        Ok(f)
    }
}
