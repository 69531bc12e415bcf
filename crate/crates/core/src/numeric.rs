//! Numerical utilities: compensated summation, Gauss–Legendre quadrature on
//! piecewise-smooth integrands, and exact conversions between `f64` and
//! big rationals.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

const GL_ORDER: usize = 16;

/// Nodes and weights of the 16-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            rule.push((x, w));
        }
        rule
    })
}

/// Integrates `f` over one smooth panel `[a, b]`.
pub fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = CompensatedSum::new();
    for &(x, w) in gauss_legendre() {
        acc.add(w * f(mid + half * x));
    }
    half * acc.value()
}

/// Quadrature settings for [`integrate_piece`].
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    /// Maximum panel width inside a piece.
    pub max_panel: f64,
    /// Number of geometric refinement levels toward each endpoint of a piece
    /// (0 disables grading).
    pub grading_levels: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            max_panel: 1.0 / 64.0,
            grading_levels: 30,
        }
    }
}

/// Integrates `f` over `[a, b]`, where `f` is smooth in the interior but may
/// be singular or discontinuous at the endpoints.
pub fn integrate_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: QuadratureOptions) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let len = b - a;
    let panels = ((len / opts.max_panel).ceil() as usize).max(1);
    let w = len / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let lo = a + w * p as f64;
        let hi = if p + 1 == panels { b } else { lo + w };
        let grade_left = p == 0 && opts.grading_levels > 0;
        let grade_right = p + 1 == panels && opts.grading_levels > 0;
        if !grade_left && !grade_right {
            acc.add(gl_panel(f, lo, hi));
            continue;
        }
        // Split the panel in half and grade each half toward its outer end.
        let mid = 0.5 * (lo + hi);
        if grade_left {
            acc.add(graded(f, lo, mid, opts.grading_levels, true));
        } else {
            acc.add(gl_panel(f, lo, mid));
        }
        if grade_right {
            acc.add(graded(f, mid, hi, opts.grading_levels, false));
        } else {
            acc.add(gl_panel(f, mid, hi));
        }
    }
    acc.value()
}

fn graded<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, levels: u32, toward_a: bool) -> f64 {
    let len = b - a;
    let mut acc = CompensatedSum::new();
    let mut scale = 1.0;
    for _ in 0..levels {
        let inner = scale * 0.5;
        let (lo, hi) = if toward_a {
            (a + len * inner, a + len * scale)
        } else {
            (b - len * scale, b - len * inner)
        };
        acc.add(gl_panel(f, lo, hi));
        scale = inner;
    }
    let (lo, hi) = if toward_a {
        (a, a + len * scale)
    } else {
        (b - len * scale, b)
    };
    acc.add(gl_panel(f, lo, hi));
    acc.value()
}

/// Integrates a 1-periodic function over `[0, 1)` given the points where it
/// fails to be smooth. Breakpoints are reduced mod 1.
pub fn integrate_periodic<F: Fn(f64) -> f64>(f: &F, breakpoints: &[f64], opts: QuadratureOptions) -> f64 {
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .map(|b| b.rem_euclid(1.0))
        .filter(|b| b.is_finite())
        .collect();
    pts.push(0.0);
    pts.push(1.0);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-300);
    let mut acc = CompensatedSum::new();
    for w in pts.windows(2) {
        acc.add(integrate_piece(f, w[0], w[1], opts));
    }
    acc.value()
}

/// Exact value of a finite `f64` as a big rational.
pub fn f64_to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite float")
}

/// Decomposes a finite `f64` as `mantissa * 2^exponent` exactly.
pub fn f64_to_dyadic(v: f64) -> (BigInt, i32) {
    if v == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { Sign::Minus } else { Sign::Plus };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let tz = mant.trailing_zeros() as i32;
    (BigInt::from_biguint(sign, BigUint::from(mant >> tz)), exp + tz)
}

/// Nearest `f64` to a big rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.numer().sign() == Sign::Minus {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}
