//! Integer sequences `n_1 < n_2 < ...`, their gap predicates and the
//! number-theoretic sums built from them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{f64_to_rational, kahan_sum, rational_to_f64};

/// A non-negative rational exponent `num/den`, used for the polynomial gap
/// rule `n_{k+1}/n_k >= k^γ` so that the rule can be checked exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapExponent {
    pub num: u32,
    pub den: u32,
}

/// Largest denominator accepted when an exponent is given as a decimal.
pub const MAX_EXPONENT_DENOMINATOR: u64 = 1000;

impl GapExponent {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(LabError::InvalidParameter("exponent denominator is zero".into()));
        }
        let g = num.gcd(&den).max(1);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn integer(num: u32) -> Self {
        Self { num, den: 1 }
    }

    /// Converts a finite non-negative decimal. The value must be a rational
    /// with denominator at most [`MAX_EXPONENT_DENOMINATOR`] (to within 1e-12).
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() || v < 0.0 {
            return Err(LabError::InvalidParameter(format!("gap exponent {v} must be finite and >= 0")));
        }
        for den in 1..=MAX_EXPONENT_DENOMINATOR {
            let num = (v * den as f64).round();
            if (num / den as f64 - v).abs() <= 1e-12 * v.max(1.0) && num <= u32::MAX as f64 {
                return Self::new(num as u32, den as u32);
            }
        }
        Err(LabError::InvalidParameter(format!(
            "gap exponent {v} is not a rational with denominator <= {MAX_EXPONENT_DENOMINATOR}"
        )))
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact test `ratio_num / ratio_den >= k^γ`.
    fn ratio_at_least(&self, ratio_num: &BigUint, ratio_den: &BigUint, k: u64) -> bool {
        // (a/b)^den >= k^num  <=>  a^den >= k^num * b^den
        let lhs = Pow::pow(ratio_num, self.den);
        let rhs = Pow::pow(BigUint::from(k), self.num) * Pow::pow(ratio_den, self.den);
        lhs >= rhs
    }
}

impl fmt::Display for GapExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Generator description for an integer sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    /// `n_k = θ^k`
    Geometric { theta: u64 },
    /// `n_k = θ^k - 1`
    GeometricMinusOne { theta: u64 },
    /// Minimal integers with `n_{k+1} >= n_k * max(k^γ, 1 + 1e-9)`.
    PowerGap {
        gamma: GapExponent,
        #[serde(with = "decimal")]
        n1: BigUint,
    },
    /// `n_k = base^(k^2)`
    SuperlacunarySquare { base: u64 },
    Explicit {
        #[serde(with = "decimal_list")]
        terms: Vec<BigUint>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    pub length: usize,
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind, length: usize) -> Self {
        Self { kind, length }
    }

    pub fn geometric(theta: u64, length: usize) -> Self {
        Self::new(SequenceKind::Geometric { theta }, length)
    }

    pub fn geometric_minus_one(theta: u64, length: usize) -> Self {
        Self::new(SequenceKind::GeometricMinusOne { theta }, length)
    }

    pub fn power_gap(gamma: GapExponent, n1: u64, length: usize) -> Self {
        Self::new(SequenceKind::PowerGap { gamma, n1: BigUint::from(n1) }, length)
    }

    pub fn superlacunary_square(base: u64, length: usize) -> Self {
        Self::new(SequenceKind::SuperlacunarySquare { base }, length)
    }

    pub fn explicit(terms: Vec<BigUint>) -> Self {
        let length = terms.len();
        Self::new(SequenceKind::Explicit { terms }, length)
    }

    pub fn explicit_u64(terms: &[u64]) -> Self {
        Self::explicit(terms.iter().map(|&t| BigUint::from(t)).collect())
    }
}

/// A materialized strictly increasing sequence of positive integers.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegerSequence {
    terms: Vec<BigUint>,
    provenance: SequenceSpec,
}

impl IntegerSequence {
    pub fn terms(&self) -> &[BigUint] {
        &self.terms
    }

    pub fn provenance(&self) -> &SequenceSpec {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Term `n_k` with 1-based `k`.
    pub fn term(&self, k: usize) -> &BigUint {
        &self.terms[k - 1]
    }

    /// First `n` terms as a new sequence.
    pub fn prefix(&self, n: usize) -> IntegerSequence {
        let terms = self.terms[..n.min(self.terms.len())].to_vec();
        IntegerSequence {
            provenance: SequenceSpec::explicit(terms.clone()),
            terms,
        }
    }

    /// Bit length of the largest term.
    pub fn max_bits(&self) -> u64 {
        self.terms.last().map(|t| t.bits()).unwrap_or(0)
    }

    /// Validates and wraps explicit terms.
    pub fn from_terms(terms: Vec<BigUint>) -> Result<Self> {
        validate_terms(&terms)?;
        Ok(IntegerSequence {
            provenance: SequenceSpec::explicit(terms.clone()),
            terms,
        })
    }

    pub fn from_u64(terms: &[u64]) -> Result<Self> {
        Self::from_terms(terms.iter().map(|&t| BigUint::from(t)).collect())
    }

    /// Decimal strings, one per line.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            s.push_str(&t.to_str_radix(10));
            s.push('\n');
        }
        s
    }

    pub fn parse_lines(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let t = BigUint::from_str(line)
                .map_err(|_| LabError::InvalidParameter(format!("line {}: not a decimal integer: {line:?}", i + 1)))?;
            terms.push(t);
        }
        Self::from_terms(terms)
    }

    /// `ε_k = n_k / n_{k+1}` as an exact rational, 1-based `k < len`.
    pub fn epsilon(&self, k: usize) -> BigRational {
        BigRational::new(self.term(k).clone().into(), self.term(k + 1).clone().into())
    }
}

fn validate_terms(terms: &[BigUint]) -> Result<()> {
    if terms.is_empty() {
        return Err(LabError::Empty("sequence"));
    }
    if terms[0].is_zero() {
        return Err(LabError::InvalidParameter("terms must be positive".into()));
    }
    for (i, w) in terms.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(LabError::NotIncreasing { index: i + 2 });
        }
    }
    Ok(())
}

/// Materializes a sequence from its description.
pub fn generate(spec: &SequenceSpec) -> Result<IntegerSequence> {
    let n = spec.length;
    if n == 0 {
        return Err(LabError::InvalidParameter("sequence length must be >= 1".into()));
    }
    let terms: Vec<BigUint> = match &spec.kind {
        SequenceKind::Geometric { theta } => {
            check_theta(*theta)?;
            let t = BigUint::from(*theta);
            let mut cur = BigUint::one();
            (0..n)
                .map(|_| {
                    cur = &cur * &t;
                    cur.clone()
                })
                .collect()
        }
        SequenceKind::GeometricMinusOne { theta } => {
            check_theta(*theta)?;
            let t = BigUint::from(*theta);
            let mut cur = BigUint::one();
            (0..n)
                .map(|_| {
                    cur = &cur * &t;
                    &cur - 1u32
                })
                .collect()
        }
        SequenceKind::SuperlacunarySquare { base } => {
            check_theta(*base)?;
            let b = BigUint::from(*base);
            (1..=n as u64)
                .map(|k| {
                    let e = k.checked_mul(k).filter(|e| *e <= u32::MAX as u64).ok_or_else(|| {
                        LabError::InvalidParameter("superlacunary exponent overflow".into())
                    })?;
                    Ok(Pow::pow(&b, e as u32))
                })
                .collect::<Result<_>>()?
        }
        SequenceKind::PowerGap { gamma, n1 } => {
            if n1.is_zero() {
                return Err(LabError::InvalidParameter("power_gap requires n1 >= 1".into()));
            }
            let mut terms = Vec::with_capacity(n);
            terms.push(n1.clone());
            for k in 1..n as u64 {
                let prev = terms.last().unwrap();
                terms.push(next_power_gap(prev, k, gamma));
            }
            terms
        }
        SequenceKind::Explicit { terms } => {
            if terms.len() < n {
                return Err(LabError::SequenceTooShort { needed: n, have: terms.len() });
            }
            terms[..n].to_vec()
        }
    };
    validate_terms(&terms)?;
    Ok(IntegerSequence {
        terms,
        provenance: spec.clone(),
    })
}

fn check_theta(theta: u64) -> Result<()> {
    if theta < 2 {
        return Err(LabError::InvalidParameter(format!("growth factor must be >= 2, got {theta}")));
    }
    Ok(())
}

/// Smallest integer `m` with `m >= prev * k^γ` and `m >= prev * (1 + 1e-9)`.
fn next_power_gap(prev: &BigUint, k: u64, gamma: &GapExponent) -> BigUint {
    let poly = if gamma.den == 1 {
        prev * Pow::pow(BigUint::from(k), gamma.num)
    } else {
        // ceil((k^num * prev^den)^(1/den))
        let target = Pow::pow(BigUint::from(k), gamma.num) * Pow::pow(prev, gamma.den);
        let r = target.nth_root(gamma.den);
        if Pow::pow(&r, gamma.den) < target {
            r + 1u32
        } else {
            r
        }
    };
    let billion = BigUint::from(1_000_000_000u64);
    let (q, rem) = prev.div_rem(&billion);
    let min_growth = prev + q + if rem.is_zero() { BigUint::zero() } else { BigUint::one() };
    poly.max(min_growth)
}

/// Exact test `n_{k+1}/n_k >= q` for every consecutive pair.
pub fn check_hadamard(seq: &IntegerSequence, q: f64) -> Result<bool> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(LabError::InvalidParameter(format!("Hadamard factor must be > 1, got {q}")));
    }
    let q = f64_to_rational(q);
    let (qn, qd) = (q.numer().to_biguint().unwrap(), q.denom().to_biguint().unwrap());
    Ok(seq.terms.windows(2).all(|w| &w[1] * &qd >= &qn * &w[0]))
}

/// Exact test `n_{k+1}/n_k >= k^γ` for every `1 <= k < N`.
pub fn check_polynomial_gap(seq: &IntegerSequence, gamma: GapExponent) -> Result<bool> {
    if seq.len() < 2 {
        return Err(LabError::SequenceTooShort { needed: 2, have: seq.len() });
    }
    Ok(seq
        .terms
        .windows(2)
        .enumerate()
        .all(|(i, w)| gamma.ratio_at_least(&w[1], &w[0], i as u64 + 1)))
}

/// Exact `δ_1 = 1`, `δ_k = 5(n_{k-1}/n_k + n_k/n_{k+1})` for `2 <= k <= N-1`.
pub fn delta_sequence_exact(seq: &IntegerSequence) -> Result<Vec<BigRational>> {
    if seq.len() < 2 {
        return Err(LabError::SequenceTooShort { needed: 2, have: seq.len() });
    }
    let mut out = vec![BigRational::one()];
    let five = BigRational::from_integer(5.into());
    for k in 2..seq.len() {
        out.push(&five * (seq.epsilon(k - 1) + seq.epsilon(k)));
    }
    Ok(out)
}

/// `δ_k` rendered to doubles; index 0 holds `δ_1`.
pub fn delta_sequence(seq: &IntegerSequence) -> Result<Vec<f64>> {
    Ok(delta_sequence_exact(seq)?.iter().map(rational_to_f64).collect())
}

/// `G = Σ_{i<=j} gcd(n_i,n_j)/lcm(n_i,n_j)` as an exact rational.
pub fn gcd_sum(seq: &IntegerSequence) -> BigRational {
    let t = &seq.terms;
    let mut acc = BigRational::from_integer(t.len().into());
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            acc += gcd_over_lcm(&t[i], &t[j]);
        }
    }
    acc
}

/// `gcd(a,b)/lcm(a,b) = 1/(a' b')` with `a' = a/g`, `b' = b/g`.
fn gcd_over_lcm(a: &BigUint, b: &BigUint) -> BigRational {
    let g = a.gcd(b);
    let lcm = (a / &g) * b;
    BigRational::new(g.into(), lcm.into())
}

/// Floating-point GCD sum for windows where the exact denominator explodes.
pub fn gcd_sum_f64(seq: &IntegerSequence) -> f64 {
    let t = &seq.terms;
    let mut terms = Vec::with_capacity(t.len() * (t.len() + 1) / 2);
    for i in 0..t.len() {
        terms.push(1.0);
        for j in i + 1..t.len() {
            let g = t[i].gcd(&t[j]);
            let prod = (&t[i] / &g) * (&t[j] / &g);
            terms.push(recip_f64(&prod));
        }
    }
    kahan_sum(terms)
}

fn recip_f64(n: &BigUint) -> f64 {
    match n.to_f64() {
        Some(v) if v.is_finite() => 1.0 / v,
        _ => (-biguint_ln(n)).exp(),
    }
}

fn biguint_ln(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `Σ_{k<=l} gcd(n_k,n_l)/sqrt(n_k n_l)`; each term is evaluated from the
/// reduced pair so the sum is exactly invariant under common scaling.
pub fn dyer_harman_sum(seq: &IntegerSequence) -> f64 {
    let t = &seq.terms;
    let mut terms = Vec::with_capacity(t.len() * (t.len() + 1) / 2);
    for i in 0..t.len() {
        terms.push(1.0);
        for j in i + 1..t.len() {
            let g = t[i].gcd(&t[j]);
            let prod = (&t[i] / &g) * (&t[j] / &g);
            let v = match prod.to_f64() {
                Some(p) if p.is_finite() => 1.0 / p.sqrt(),
                _ => (-0.5 * biguint_ln(&prod)).exp(),
            };
            terms.push(v);
        }
    }
    kahan_sum(terms)
}

/// Number of divisors of `k`.
pub fn divisor_count(k: u64) -> Result<u64> {
    if k == 0 {
        return Err(LabError::InvalidParameter("divisor_count requires k >= 1".into()));
    }
    Ok(factorize(k).iter().map(|&(_, e)| e as u64 + 1).product())
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

/// `ρ_γ(n) = Σ_{d|n} d^{-(2γ-1)}` for `γ ∈ (1/2, 1)`.
pub fn rho_gamma(n: u64, gamma: f64) -> Result<f64> {
    if n == 0 {
        return Err(LabError::InvalidParameter("rho_gamma requires n >= 1".into()));
    }
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(LabError::InvalidParameter(format!("rho_gamma requires γ in (1/2, 1), got {gamma}")));
    }
    let s = 2.0 * gamma - 1.0;
    Ok(kahan_sum(divisors(n).into_iter().map(|d| (d as f64).powf(-s))))
}

/// Weighted coefficient series whose finiteness gives a.e. convergence of
/// `Σ c_k f(n_k x)`-type series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientCondition {
    /// `Σ c_k² (log k)^{3+ε}`
    RademacherMenshov { eps: f64 },
    /// `Σ c_k² d(k) (log k)²`
    WeberDivisor,
    /// `Σ c_k² ρ_γ(k) (log k)²`
    WeberRho { gamma: f64 },
}

/// Partial sum over `k = 1..=c.len()` with natural logs; the `k = 1` term is 0.
pub fn coefficient_condition_partial_sum(c: &[f64], kind: CoefficientCondition) -> Result<f64> {
    if let CoefficientCondition::WeberRho { gamma } = kind {
        rho_gamma(1, gamma)?;
    }
    if let CoefficientCondition::RademacherMenshov { eps } = kind {
        if !(eps > 0.0) {
            return Err(LabError::InvalidParameter(format!("ε must be > 0, got {eps}")));
        }
    }
    let mut terms = Vec::with_capacity(c.len());
    for (i, &ck) in c.iter().enumerate().skip(1) {
        let k = i as u64 + 1;
        if ck == 0.0 {
            continue;
        }
        let lk = (k as f64).ln();
        let w = match kind {
            CoefficientCondition::RademacherMenshov { eps } => lk.powf(3.0 + eps),
            CoefficientCondition::WeberDivisor => divisor_count(k)? as f64 * lk * lk,
            CoefficientCondition::WeberRho { gamma } => rho_gamma(k, gamma)? * lk * lk,
        };
        terms.push(ck * ck * w);
    }
    Ok(kahan_sum(terms))
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::from_str(&s).map_err(serde::de::Error::custom)
    }
}

mod decimal_list {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|t| t.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| BigUint::from_str(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: &[u64]) -> IntegerSequence {
        IntegerSequence::from_u64(t).unwrap()
    }

    fn as_u64(s: &IntegerSequence) -> Vec<u64> {
        s.terms().iter().map(|t| t.to_u64().unwrap()).collect()
    }

    #[test]
    fn generators() {
        assert_eq!(as_u64(&generate(&SequenceSpec::geometric(2, 4)).unwrap()), [2, 4, 8, 16]);
        assert_eq!(as_u64(&generate(&SequenceSpec::geometric_minus_one(2, 3)).unwrap()), [1, 3, 7]);
        assert_eq!(
            as_u64(&generate(&SequenceSpec::power_gap(GapExponent::integer(1), 1, 5)).unwrap()),
            [1, 2, 4, 12, 48]
        );
        assert_eq!(as_u64(&generate(&SequenceSpec::superlacunary_square(2, 3)).unwrap()), [2, 16, 512]);
    }

    #[test]
    fn generator_errors() {
        assert!(generate(&SequenceSpec::geometric(1, 4)).is_err());
        assert!(generate(&SequenceSpec::explicit_u64(&[1, 3, 3])).is_err());
        assert!(generate(&SequenceSpec::explicit_u64(&[5, 2])).is_err());
        assert!(generate(&SequenceSpec::geometric(2, 0)).is_err());
    }

    #[test]
    fn fractional_power_gap_is_minimal() {
        let g = GapExponent::new(3, 2).unwrap();
        let s = generate(&SequenceSpec::power_gap(g, 3, 8)).unwrap();
        assert!(check_polynomial_gap(&s, g).unwrap());
        // Minimality: decreasing any later term breaks the rule.
        for k in 2..s.len() {
            let mut t = s.terms().to_vec();
            t[k] -= 1u32;
            let smaller = IntegerSequence::from_terms(t[..=k].to_vec());
            if let Ok(smaller) = smaller {
                let ok_poly = check_polynomial_gap(&smaller, g).unwrap();
                let grow_ok = &t[k] * 1_000_000_000u64 >= &t[k - 1] * 1_000_000_001u64;
                assert!(!(ok_poly && grow_ok), "term {k} not minimal");
            }
        }
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(GapExponent::from_f64(1.5).unwrap(), GapExponent { num: 3, den: 2 });
        assert_eq!(GapExponent::from_f64(11.0).unwrap(), GapExponent::integer(11));
        assert!(GapExponent::from_f64(std::f64::consts::PI).is_err());
        assert!(GapExponent::from_f64(-1.0).is_err());
    }

    #[test]
    fn hadamard() {
        assert!(check_hadamard(&seq(&[2, 4, 8]), 2.0).unwrap());
        assert!(!check_hadamard(&seq(&[2, 4, 8]), 2.5).unwrap());
        assert!(check_hadamard(&seq(&[1, 3, 7]), 2.0).unwrap());
        assert!(check_hadamard(&seq(&[2, 4, 8]), 1.0).is_err());
    }

    #[test]
    fn polynomial_gap() {
        assert!(check_polynomial_gap(&seq(&[1, 2, 4, 12, 48]), GapExponent::integer(1)).unwrap());
        assert!(!check_polynomial_gap(&seq(&[1, 2, 4, 11, 48]), GapExponent::integer(1)).unwrap());
        let g = generate(&SequenceSpec::geometric(2, 10)).unwrap();
        assert!(!check_polynomial_gap(&g, GapExponent::integer(1)).unwrap());
        assert!(check_polynomial_gap(&seq(&[3]), GapExponent::integer(1)).is_err());
    }

    #[test]
    fn deltas() {
        assert_eq!(delta_sequence(&seq(&[2, 4, 8])).unwrap(), vec![1.0, 5.0]);
        let d = delta_sequence(&seq(&[10, 100, 1000])).unwrap();
        assert!((d[1] - 1.0).abs() < 1e-15);
        let d = delta_sequence(&seq(&[1, 1_000_000, 1_000_000_000_000])).unwrap();
        assert!((d[1] - 1e-5).abs() < 1e-20);
        assert_eq!(delta_sequence(&seq(&[1, 2])).unwrap(), vec![1.0]);
        assert!(delta_sequence(&seq(&[1])).is_err());
    }

    #[test]
    fn gcd_sums() {
        assert_eq!(gcd_sum(&seq(&[5])), BigRational::from_integer(1.into()));
        assert_eq!(gcd_sum(&seq(&[1, 2])), BigRational::new(5.into(), 2.into()));
        assert_eq!(gcd_sum(&seq(&[2, 3, 4])), BigRational::new(15.into(), 4.into()));
        // pairwise coprime: G = N + Σ_{i<j} 1/(n_i n_j)
        let p = [2u64, 3, 5, 7];
        let mut expect = BigRational::from_integer(4.into());
        for i in 0..4 {
            for j in i + 1..4 {
                expect += BigRational::new(1.into(), (p[i] * p[j]).into());
            }
        }
        assert_eq!(gcd_sum(&seq(&p)), expect);
        assert!((gcd_sum_f64(&seq(&[2, 3, 4])) - 3.75).abs() < 1e-15);
    }

    #[test]
    fn dyer_harman() {
        assert_eq!(dyer_harman_sum(&seq(&[7])), 1.0);
        let v = 2.0 + 1.0 / 2f64.sqrt();
        assert!((dyer_harman_sum(&seq(&[1, 2])) - v).abs() < 1e-12);
        assert!((dyer_harman_sum(&seq(&[2, 4])) - v).abs() < 1e-12);
        let a = seq(&[3, 10, 12, 45, 100]);
        let b = seq(&[21, 70, 84, 315, 700]);
        assert_eq!(dyer_harman_sum(&a), dyer_harman_sum(&b));
    }

    #[test]
    fn divisor_functions() {
        assert_eq!(divisor_count(1).unwrap(), 1);
        assert_eq!(divisor_count(12).unwrap(), 6);
        assert_eq!(divisor_count(7).unwrap(), 2);
        assert!(divisor_count(0).is_err());
        assert_eq!(rho_gamma(1, 0.7).unwrap(), 1.0);
        assert!((rho_gamma(12, 0.75).unwrap() - 3.4813804754348494).abs() < 1e-12);
        let p = 101u64;
        assert!((rho_gamma(p, 0.6).unwrap() - (1.0 + (p as f64).powf(-0.2))).abs() < 1e-14);
        assert!(rho_gamma(5, 0.5).is_err());
        assert!(rho_gamma(5, 1.0).is_err());
    }

    #[test]
    fn coefficient_sums() {
        for kind in [
            CoefficientCondition::RademacherMenshov { eps: 0.5 },
            CoefficientCondition::WeberDivisor,
            CoefficientCondition::WeberRho { gamma: 0.75 },
        ] {
            assert_eq!(coefficient_condition_partial_sum(&[1.0, 0.0, 0.0], kind).unwrap(), 0.0);
            assert_eq!(coefficient_condition_partial_sum(&[0.0; 10], kind).unwrap(), 0.0);
        }
        let c = [1.0, 0.5, 1.0 / 3.0];
        let v = coefficient_condition_partial_sum(&c, CoefficientCondition::WeberDivisor).unwrap();
        let expect = 0.25 * 2.0 * 2f64.ln().powi(2) + (1.0 / 9.0) * 2.0 * 3f64.ln().powi(2);
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.50843).abs() < 1e-5);
        assert!(coefficient_condition_partial_sum(&c, CoefficientCondition::WeberRho { gamma: 2.0 }).is_err());
    }

    #[test]
    fn line_format_roundtrip() {
        let s = generate(&SequenceSpec::superlacunary_square(3, 6)).unwrap();
        let back = IntegerSequence::parse_lines(&s.to_lines()).unwrap();
        assert_eq!(back.terms(), s.terms());
        assert!(IntegerSequence::parse_lines("3\n2\n").is_err());
        assert!(IntegerSequence::parse_lines("3\nx\n").is_err());
    }
}
