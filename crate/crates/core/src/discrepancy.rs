//! Exact one-dimensional discrepancy, the Koksma inequality and LIL statistics.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::numeric::{f64_to_dyadic, rational_to_f64, CompensatedSum};
use crate::orbit::{FixedPointSample, PeriodicFunction};

/// Largest point set accepted by the quadratic oracle.
pub const BRUTEFORCE_LIMIT: usize = 2000;

/// A finite set of points in `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    values: Vec<f64>,
    fixed: Option<Vec<FixedPointSample>>,
}

impl PointSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(LabError::InvalidParameter(format!("point {v} is not in [0, 1)")));
        }
        Ok(Self { values, fixed: None })
    }

    /// Points held exactly; `values()` renders them truncated to 53 bits.
    pub fn from_fixed(points: Vec<FixedPointSample>) -> Self {
        Self {
            values: points.iter().map(FixedPointSample::to_f64).collect(),
            fixed: Some(points),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One value per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.split(',').next().unwrap_or("").trim();
            let v: f64 = field
                .parse()
                .map_err(|_| LabError::InvalidParameter(format!("line {}: '{field}' is not a number", i + 1)))?;
            values.push(v);
        }
        Self::new(values)
    }

    /// Sorted numerators on the common grid `2^-scale`.
    fn scaled(&self) -> (Vec<BigUint>, u32) {
        match &self.fixed {
            Some(pts) => {
                let scale = pts.iter().map(FixedPointSample::bits).max().unwrap_or(1);
                let mut v: Vec<BigUint> = pts.iter().map(|p| p.numerator() << (scale - p.bits()) as usize).collect();
                v.sort();
                (v, scale)
            }
            None => {
                let parts: Vec<(BigInt, i32)> = self.values.iter().map(|&v| f64_to_dyadic(v)).collect();
                let scale = parts.iter().map(|(m, e)| if m.sign() == num_bigint::Sign::NoSign { 0 } else { -e }).max().unwrap_or(0).max(0) as u32;
                let mut v: Vec<BigUint> = parts
                    .iter()
                    .map(|(m, e)| {
                        let m = m.to_biguint().unwrap_or_default();
                        m << (scale as i64 + *e as i64).max(0) as usize
                    })
                    .collect();
                v.sort();
                (v, scale)
            }
        }
    }
}

trait Exact: Clone + Ord + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn from_i64(v: i64) -> Self;
    fn to_bigint(&self) -> BigInt;
}

impl Exact for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Exact for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
}

/// Sorted points `m_i / 2^scale` as exact integers plus `one = 2^scale`.
struct Grid<T> {
    m: Vec<T>,
    one: T,
}

fn with_grid<R>(ps: &PointSet, fast: impl FnOnce(Grid<i128>) -> R, slow: impl FnOnce(Grid<BigInt>) -> R) -> R {
    let (m, scale) = ps.scaled();
    let n = m.len() as u128;
    // i·2^s and N·m must stay well inside i128.
    if scale <= 64 && n < (1u128 << 40) {
        let m = m.iter().map(|v| u128::try_from(v).expect("fits") as i128).collect();
        fast(Grid { m, one: 1i128 << scale })
    } else {
        let m = m.into_iter().map(BigInt::from).collect();
        slow(Grid { m, one: BigInt::from(1) << scale as usize })
    }
}

fn render<T: Exact>(num: T, n: usize, one: &T) -> f64 {
    let den = one.to_bigint() * BigInt::from(n);
    rational_to_f64(&BigRational::new(num.to_bigint(), den))
}

fn extreme_exact<T: Exact>(g: Grid<T>) -> f64 {
    let n = g.m.len();
    let big_n = T::from_i64(n as i64);
    let mut lo: Option<T> = None;
    let mut hi: Option<T> = None;
    for (i, m) in g.m.iter().enumerate() {
        // (i/N - x_(i)) · N·2^s
        let key = T::from_i64(i as i64 + 1) * g.one.clone() - big_n.clone() * m.clone();
        if hi.as_ref().is_none_or(|h| key > *h) {
            hi = Some(key.clone());
        }
        if lo.as_ref().is_none_or(|l| key < *l) {
            lo = Some(key);
        }
    }
    let num = g.one.clone() + hi.expect("nonempty") - lo.expect("nonempty");
    render(num, n, &g.one)
}

fn star_exact<T: Exact>(g: Grid<T>) -> f64 {
    let n = g.m.len();
    let big_n = T::from_i64(n as i64);
    let mut best: Option<T> = None;
    for (i, m) in g.m.iter().enumerate() {
        let nm = big_n.clone() * m.clone();
        let above = nm.clone() - T::from_i64(i as i64) * g.one.clone();
        let below = T::from_i64(i as i64 + 1) * g.one.clone() - nm;
        let cand = above.max(below);
        if best.as_ref().is_none_or(|b| cand > *b) {
            best = Some(cand);
        }
    }
    render(best.expect("nonempty"), n, &g.one)
}

fn bruteforce_exact<T: Exact>(g: Grid<T>) -> f64 {
    let n = g.m.len();
    let big_n = T::from_i64(n as i64);
    // Distinct candidate endpoints with multiplicities.
    let mut pts: Vec<(T, i64)> = vec![(T::from_i64(0), 0)];
    for m in &g.m {
        match pts.last_mut() {
            Some((v, c)) if v == m => *c += 1,
            _ => pts.push((m.clone(), 1)),
        }
    }
    pts.push((g.one.clone(), 0));
    let mut best = T::from_i64(0);
    for i in 0..pts.len() {
        // closed[j]: points in [a, b]; open: points in (a, b).
        let mut closed = 0i64;
        for j in i..pts.len() {
            closed += pts[j].1;
            let open = closed - pts[i].1 - if j > i { pts[j].1 } else { 0 };
            let len = pts[j].0.clone() - pts[i].0.clone();
            // sup of count/N - (b - a) is approached by [a, b + 0).
            let over = T::from_i64(closed) * g.one.clone() - big_n.clone() * len.clone();
            // sup of (b - a) - count/N is approached by [a + 0, b).
            let under = if j > i {
                big_n.clone() * len - T::from_i64(open.max(0)) * g.one.clone()
            } else {
                T::from_i64(0)
            };
            best = best.max(over).max(under);
        }
    }
    render(best, n, &g.one)
}

fn nonempty(ps: &PointSet) -> Result<()> {
    if ps.is_empty() {
        Err(LabError::Empty("point set"))
    } else {
        Ok(())
    }
}

/// Extreme discrepancy `sup_{a<b} |#{x_k ∈ [a,b)}/N - (b-a)|`.
pub fn discrepancy(ps: &PointSet) -> Result<f64> {
    nonempty(ps)?;
    Ok(with_grid(ps, extreme_exact, extreme_exact))
}

/// Star discrepancy `sup_t |#{x_k < t}/N - t|`.
pub fn star_discrepancy(ps: &PointSet) -> Result<f64> {
    nonempty(ps)?;
    Ok(with_grid(ps, star_exact, star_exact))
}

/// Quadratic-time oracle over all candidate intervals.
pub fn discrepancy_bruteforce(ps: &PointSet) -> Result<f64> {
    nonempty(ps)?;
    if ps.len() > BRUTEFORCE_LIMIT {
        return Err(LabError::SizeGuard {
            what: "brute-force discrepancy",
            value: ps.len().to_string(),
            limit: BRUTEFORCE_LIMIT.to_string(),
        });
    }
    Ok(with_grid(ps, bruteforce_exact, bruteforce_exact))
}

/// Star discrepancy of doubles by sorting, in floating point.
pub fn star_discrepancy_f64(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KoksmaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub variation: f64,
    pub discrepancy: f64,
    pub holds: bool,
}

/// `|N^{-1} Σ f(x_k) - ∫f| <= 2 V_f D_N`.
pub fn koksma_check(f: &PeriodicFunction, ps: &PointSet) -> Result<KoksmaReport> {
    let variation = f.total_variation()?;
    let d = discrepancy(ps)?;
    let mut acc = CompensatedSum::new();
    match &ps.fixed {
        Some(pts) => {
            for p in pts {
                acc.add(f.eval_fixed(p)?);
            }
        }
        None => {
            for &v in &ps.values {
                acc.add(f.eval(v)?);
            }
        }
    }
    let lhs = (acc.value() / ps.len() as f64 - f.mean()).abs();
    let rhs = 2.0 * variation * d;
    Ok(KoksmaReport {
        lhs,
        rhs,
        variation,
        discrepancy: d,
        holds: lhs <= rhs,
    })
}

/// `N D_N / √(2N log log N)`.
pub fn lil_statistic(ps: &PointSet) -> Result<f64> {
    let n = ps.len();
    if n < 16 {
        return Err(LabError::InvalidParameter(format!("LIL statistic needs N >= 16, got {n}")));
    }
    Ok(lil_normalize(discrepancy(ps)?, n))
}

pub fn lil_normalize(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf * d / (2.0 * nf * nf.ln().ln()).sqrt()
}

/// Limsup constant of the discrepancy LIL for `n_k = θ^k`.
pub fn fukuyama_constant(theta: u64) -> Result<f64> {
    if theta < 2 {
        return Err(LabError::InvalidParameter(format!("θ must be >= 2, got {theta}")));
    }
    let t = theta as f64;
    Ok(if theta == 2 {
        42f64.sqrt() / 9.0
    } else if theta % 2 == 0 {
        ((t + 1.0) * t * (t - 2.0)).sqrt() / (2.0 * (t - 1.0).powi(3).sqrt())
    } else {
        (t + 1.0).sqrt() / (2.0 * (t - 1.0).sqrt())
    })
}
