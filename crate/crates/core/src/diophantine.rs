//! Solution counts `L(N, d, ν) = #{a n_k - b n_l = ν}` and finite-window
//! profiles of the Diophantine conditions behind the CLT and LIL.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::seqgen::IntegerSequence;

/// Cap on the number of matched quadruples a profile may tally.
pub const TALLY_LIMIT: u64 = 4_000_000;

#[derive(Clone, Debug)]
pub struct DiophantineQuery<'a> {
    pub seq: &'a IntegerSequence,
    pub n: usize,
    pub d: u64,
    pub nu: BigInt,
}

fn check_window(seq: &IntegerSequence, n: usize, d: u64) -> Result<()> {
    if n == 0 || n > seq.len() {
        return Err(LabError::InvalidParameter(format!("window N={n} must be in 1..={}", seq.len())));
    }
    if d == 0 {
        return Err(LabError::InvalidParameter("d must be >= 1".into()));
    }
    Ok(())
}

/// Sorted multiset `{a n_k : 1 <= a <= d, k <= N}`.
fn multiples(seq: &IntegerSequence, n: usize, d: u64) -> Vec<BigInt> {
    let mut v: Vec<BigInt> = seq.terms()[..n]
        .iter()
        .flat_map(|t| (1..=d).map(move |a| BigInt::from(t * BigUint::from(a))))
        .collect();
    v.sort();
    v
}

/// Exact `L(N, d, ν)` over ordered quadruples, without the trivial
/// `a = b, k = l` solutions when `ν = 0`.
pub fn count_solutions(q: &DiophantineQuery) -> Result<u64> {
    check_window(q.seq, q.n, q.d)?;
    let xs = multiples(q.seq, q.n, q.d);
    // Merge {a n_k} against {b n_l + ν}; both sorted.
    let mut count = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < xs.len() && j < xs.len() {
        let y = &xs[j] + &q.nu;
        match xs[i].cmp(&y) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let ei = xs[i..].iter().take_while(|v| **v == xs[i]).count();
                let ej = xs[j..].iter().take_while(|v| **v == xs[j]).count();
                count += (ei * ej) as u64;
                i += ei;
                j += ej;
            }
        }
    }
    if q.nu.is_zero() {
        count -= q.d * q.n as u64;
    }
    Ok(count)
}

/// Quadruple-loop reference count.
pub fn count_solutions_bruteforce(q: &DiophantineQuery) -> Result<u64> {
    check_window(q.seq, q.n, q.d)?;
    let t: Vec<BigInt> = q.seq.terms()[..q.n].iter().map(|v| BigInt::from(v.clone())).collect();
    let mut count = 0;
    for a in 1..=q.d {
        for b in 1..=q.d {
            for (k, nk) in t.iter().enumerate() {
                for (l, nl) in t.iter().enumerate() {
                    if q.nu.is_zero() && a == b && k == l {
                        continue;
                    }
                    if nk * BigInt::from(a) - nl * BigInt::from(b) == q.nu {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(count)
}

/// The offsets `ν` a profile maximizes over.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NuRange {
    Explicit { values: Vec<i64> },
    /// `±[lo..=hi]`, plus 0 when requested.
    Symmetric {
        #[serde(with = "decimal")]
        lo: BigInt,
        #[serde(with = "decimal")]
        hi: BigInt,
        include_zero: bool,
    },
}

impl NuRange {
    /// `±[1..4 d · max gap]` over the window.
    pub fn default_for(seq: &IntegerSequence, n: usize, d: u64, include_zero: bool) -> Self {
        let gap = seq.terms()[..n]
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .max()
            .unwrap_or_else(|| seq.terms()[0].clone());
        NuRange::Symmetric {
            lo: BigInt::from(1),
            hi: BigInt::from(gap * BigUint::from(4 * d)),
            include_zero,
        }
    }

    fn bounds(&self) -> (BigInt, BigInt) {
        match self {
            NuRange::Explicit { values } => (
                BigInt::from(*values.iter().min().unwrap_or(&0)),
                BigInt::from(*values.iter().max().unwrap_or(&0)),
            ),
            NuRange::Symmetric { hi, include_zero, .. } => {
                let _ = include_zero;
                (-hi.clone(), hi.clone())
            }
        }
    }

    pub fn contains(&self, nu: &BigInt) -> bool {
        match self {
            NuRange::Explicit { values } => nu.to_i64().is_some_and(|v| values.contains(&v)),
            NuRange::Symmetric { lo, hi, include_zero } => {
                if nu.is_zero() {
                    *include_zero
                } else {
                    let a = nu.abs();
                    a >= *lo && a <= *hi
                }
            }
        }
    }

    pub fn includes_zero(&self) -> bool {
        self.contains(&BigInt::zero())
    }

    pub fn describe(&self) -> String {
        match self {
            NuRange::Explicit { values } => format!("{values:?}"),
            NuRange::Symmetric { lo, hi, include_zero } => {
                format!("±[{lo}..{hi}]{}", if *include_zero { " ∪ {0}" } else { "" })
            }
        }
    }
}

/// Counts `L(N, d, ν)` for every `ν` in `range` with a nonzero count.
pub fn tally(seq: &IntegerSequence, n: usize, d: u64, range: &NuRange) -> Result<HashMap<BigInt, u64>> {
    check_window(seq, n, d)?;
    let xs = multiples(seq, n, d);
    let (lo, hi) = range.bounds();
    let mut out: HashMap<BigInt, u64> = HashMap::new();
    let mut matched = 0u64;
    for y in &xs {
        // x - y ∈ [lo, hi]
        let start = xs.partition_point(|x| x - y < lo);
        for x in &xs[start..] {
            let nu = x - y;
            if nu > hi {
                break;
            }
            matched += 1;
            if matched > TALLY_LIMIT {
                return Err(LabError::SizeGuard {
                    what: "Diophantine tally",
                    value: format!("more than {TALLY_LIMIT} matches"),
                    limit: "use a narrower ν range".into(),
                });
            }
            if range.contains(&nu) {
                *out.entry(nu).or_insert(0) += 1;
            }
        }
    }
    if let Some(c) = out.get_mut(&BigInt::zero()) {
        *c -= d * n as u64;
        if *c == 0 {
            out.remove(&BigInt::zero());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub n_prime: usize,
    /// Maximizing offset; `None` when every count is zero.
    #[serde(serialize_with = "opt_decimal")]
    pub nu_star: Option<BigInt>,
    pub count: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionProfile {
    pub d: u64,
    pub nu_range: String,
    pub rows: Vec<ProfileRow>,
    pub diagnostic: String,
}

impl ConditionProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N',nu_star,L,ratio\n");
        for r in &self.rows {
            let nu = r.nu_star.as_ref().map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{:e}", r.n_prime, nu, r.count, r.ratio);
        }
        s
    }
}

/// `2, 4, 8, …` up to `n`, always ending at `n`.
pub fn dyadic_ladder(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(2usize), |x| x.checked_mul(2)).take_while(|&x| x < n).collect();
    v.push(n);
    v
}

fn sup_row(seq: &IntegerSequence, n: usize, d: u64, range: &NuRange) -> Result<(Option<BigInt>, u64)> {
    let t = tally(seq, n, d, range)?;
    let best = t
        .into_iter()
        .max_by(|(na, ca), (nb, cb)| ca.cmp(cb).then_with(|| (nb.abs(), nb).cmp(&(na.abs(), na))));
    Ok(match best {
        Some((nu, c)) => (Some(nu), c),
        None => (None, 0),
    })
}

fn profile_with(
    seq: &IntegerSequence,
    n: usize,
    d: u64,
    range: Option<NuRange>,
    weight: impl Fn(usize) -> f64,
) -> Result<(NuRange, Vec<ProfileRow>)> {
    check_window(seq, n, d)?;
    let range = range.unwrap_or_else(|| NuRange::default_for(seq, n, d, false));
    let mut rows = Vec::new();
    for np in dyadic_ladder(n) {
        let (nu_star, count) = sup_row(seq, np, d, &range)?;
        rows.push(ProfileRow {
            n_prime: np,
            nu_star,
            count,
            ratio: count as f64 * weight(np),
        });
    }
    Ok((range, rows))
}

/// `sup_ν L(N', d, ν) / N'` along a dyadic ladder, with a trend label:
/// `vanishing`, `decreasing` or `non-vanishing`.
pub fn clt_condition_profile(seq: &IntegerSequence, n: usize, d: u64, range: Option<NuRange>) -> Result<ConditionProfile> {
    let (range, rows) = profile_with(seq, n, d, range, |np| 1.0 / np as f64)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let last = *ratios.last().expect("nonempty ladder");
    let half = &ratios[ratios.len() / 2..];
    let diagnostic = if last == 0.0 {
        "vanishing"
    } else if half.windows(2).all(|w| w[1] <= w[0]) && last <= 0.5 * half[0] {
        "decreasing"
    } else {
        "non-vanishing"
    };
    Ok(ConditionProfile {
        d,
        nu_range: range.describe(),
        rows,
        diagnostic: diagnostic.into(),
    })
}

/// `sup_ν L(N', d, ν) (log N')^{1+ε} / N'` along a dyadic ladder, labelled
/// `bounded`, `unbounded-trend` or `inconclusive`.
pub fn lil_condition_profile(
    seq: &IntegerSequence,
    n: usize,
    d: u64,
    range: Option<NuRange>,
    eps: f64,
) -> Result<ConditionProfile> {
    if !(eps > 0.0) {
        return Err(LabError::InvalidParameter(format!("ε must be > 0, got {eps}")));
    }
    let (range, rows) = profile_with(seq, n, d, range, |np| (np as f64).ln().powf(1.0 + eps) / np as f64)?;
    let vals: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let diagnostic = if vals.iter().all(|&v| v == 0.0) {
        "bounded"
    } else if vals.len() < 3 {
        "inconclusive"
    } else {
        let half = &vals[vals.len() / 2..];
        let head_max = vals[..vals.len() / 2].iter().copied().fold(0.0, f64::max);
        let last = *vals.last().expect("nonempty");
        if half.windows(2).all(|w| w[1] >= w[0]) && last > 1.5 * half[0] {
            "unbounded-trend"
        } else if last <= head_max.max(half[0]) {
            "bounded"
        } else {
            "inconclusive"
        }
    };
    Ok(ConditionProfile {
        d,
        nu_range: range.describe(),
        rows,
        diagnostic: diagnostic.into(),
    })
}

mod decimal {
    use num_bigint::BigInt;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }
}

fn opt_decimal<S: serde::Serializer>(v: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(b) => s.serialize_some(&b.to_string()),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::{generate, SequenceSpec};

    fn q(seq: &IntegerSequence, n: usize, d: u64, nu: i64) -> u64 {
        count_solutions(&DiophantineQuery { seq, n, d, nu: BigInt::from(nu) }).unwrap()
    }

    #[test]
    fn worked_examples() {
        let s = IntegerSequence::from_u64(&[1, 2, 4, 8]).unwrap();
        assert_eq!(q(&s, 4, 1, 0), 0);
        assert_eq!(q(&s, 4, 2, 0), 6);
        assert_eq!(q(&s, 4, 1, 1), 1);
    }

    #[test]
    fn tally_matches_counts() {
        let s = IntegerSequence::from_u64(&[1, 3, 4, 9, 10, 27, 30]).unwrap();
        let range = NuRange::Symmetric { lo: BigInt::from(1), hi: BigInt::from(40), include_zero: true };
        let t = tally(&s, 7, 3, &range).unwrap();
        for nu in -40i64..=40 {
            assert_eq!(t.get(&BigInt::from(nu)).copied().unwrap_or(0), q(&s, 7, 3, nu), "ν={nu}");
        }
    }

    #[test]
    fn profiles() {
        let g = generate(&SequenceSpec::geometric(2, 64)).unwrap();
        let zero = NuRange::Explicit { values: vec![0] };
        let p = clt_condition_profile(&g, 64, 2, Some(zero.clone())).unwrap();
        assert_eq!(p.diagnostic, "non-vanishing");
        assert!(p.rows.iter().all(|r| r.ratio > 0.5));

        let sq = generate(&SequenceSpec::superlacunary_square(2, 20)).unwrap();
        let small = NuRange::Symmetric { lo: BigInt::from(1), hi: BigInt::from(16), include_zero: false };
        let p = clt_condition_profile(&sq, 20, 4, Some(small.clone())).unwrap();
        // Only the (a - b) n_k = ν solutions from n_1, n_2 survive; the count freezes.
        let frozen = p.rows[1].count;
        assert!(frozen > 0 && p.rows.iter().skip(1).all(|r| r.count == frozen));
        assert_eq!(p.diagnostic, "decreasing");
        let p = lil_condition_profile(&sq, 20, 4, Some(small), 0.5).unwrap();
        assert_eq!(p.diagnostic, "bounded");

        let m1 = generate(&SequenceSpec::geometric_minus_one(2, 64)).unwrap();
        let minus = NuRange::Explicit { values: vec![-1] };
        let p = clt_condition_profile(&m1, 64, 2, Some(minus.clone())).unwrap();
        assert_eq!(p.diagnostic, "non-vanishing");
        let p = lil_condition_profile(&m1, 64, 2, Some(minus), 0.5).unwrap();
        assert_eq!(p.diagnostic, "unbounded-trend");

        let p = lil_condition_profile(&m1, 2, 2, Some(NuRange::Explicit { values: vec![-1] }), 0.5).unwrap();
        assert_eq!(p.rows.len(), 1);
        assert_eq!(p.diagnostic, "inconclusive");
        assert_eq!(p.to_csv().lines().next(), Some("N',nu_star,L,ratio"));
    }

    #[test]
    fn default_range_and_guard() {
        let g = generate(&SequenceSpec::geometric(3, 12)).unwrap();
        let p = clt_condition_profile(&g, 12, 2, None).unwrap();
        assert!(p.nu_range.starts_with("±[1.."));
        let big = generate(&SequenceSpec::geometric(2, 2000)).unwrap();
        assert!(matches!(clt_condition_profile(&big, 2000, 2, None), Err(LabError::SizeGuard { .. })));
    }
}
