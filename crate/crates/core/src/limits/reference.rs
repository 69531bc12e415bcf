//! Closed-form and quadrature reference laws.

use std::f64::consts::{PI, SQRT_2};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use libm::erfc;

use crate::error::{LabError, Result};
use crate::numeric::{f64_to_rational, integrate_periodic, integrate_piece, rational_to_f64, QuadratureOptions};
use crate::orbit::{shift_energy, PeriodicFunction};
use crate::seqgen::IntegerSequence;

/// Default midpoint nodes for mixture integrals.
pub const DEFAULT_NODES: usize = 1 << 14;
/// Largest `k` for which `∫ f(x) f(2^k x)` is integrated numerically.
pub const KAC_QUADRATURE_LIMIT: usize = 12;
/// Dyadic levels summed in the Kac tail estimate.
const KAC_TAIL_LEVELS: usize = 64;

/// Kolmogorov distribution `K(t) = 1 - 2 Σ (-1)^{k-1} e^{-2k²t²}`.
///
/// For `t < 1` the equivalent theta series
/// `(√(2π)/t) Σ e^{-(2k-1)²π²/(8t²)}` is used; it converges fast there and
/// avoids cancellation near 0.
pub fn kolmogorov_k(t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    if t.is_infinite() {
        return 1.0;
    }
    if t < 1.0 {
        let c = PI * PI / (8.0 * t * t);
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-16 * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
                break;
            }
        }
        return ((2.0 * PI).sqrt() / t * sum).min(1.0);
    }
    let mut sum = 0.0;
    for k in 1.. {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

/// Alternating series form of [`kolmogorov_k`], for cross-checks.
pub fn kolmogorov_k_alternating(t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..100_000 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    1.0 - 2.0 * sum
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-t / SQRT_2)
}

fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < 64 || nodes % 2 != 0 {
        return Err(LabError::InvalidParameter(format!("quadrature needs an even node count >= 64, got {nodes}")));
    }
    Ok(())
}

/// Midpoint nodes `t < 1/2` with their `cos πt`; the rule is symmetric about 1/2.
fn half_nodes(nodes: usize) -> impl Iterator<Item = f64> {
    (0..nodes / 2).map(move |i| (PI * (i as f64 + 0.5) / nodes as f64).cos())
}

/// Limit law `∫₀¹ Φ(x / (√2 |cos πt|)) dt` of the Erdős–Fortet example.
pub fn erdos_fortet_cdf(x: f64, nodes: usize) -> Result<f64> {
    check_nodes(nodes)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    let s: f64 = half_nodes(nodes).map(|c| normal_cdf(x / (SQRT_2 * c))).sum();
    Ok(2.0 * s / nodes as f64)
}

/// `1 - F(x)` of the same mixture, without cancellation for large `x`.
pub fn erdos_fortet_sf(x: f64, nodes: usize) -> Result<f64> {
    Ok(erdos_fortet_cdf(-x, nodes)?)
}

/// Second moment `∫ x² dF` of the mixture, from its tail: `4 ∫₀^∞ x (1 - F(x)) dx`.
pub fn erdos_fortet_variance(nodes: usize) -> Result<f64> {
    check_nodes(nodes)?;
    let opts = QuadratureOptions {
        max_panel: 0.25,
        grading_levels: 0,
    };
    let tail = |x: f64| 4.0 * x * erdos_fortet_sf(x, nodes).unwrap_or(f64::NAN);
    Ok(integrate_piece(&tail, 0.0, 14.0, opts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KacVariance {
    pub value: f64,
    /// `∫f²` followed by `2∫ f(x) f(2^k x)` for `k = 1..=kmax`.
    pub terms: Vec<f64>,
    /// Bound on the omitted `k > kmax` terms; infinite when `∫f ≠ 0`.
    pub tail_bound: f64,
}

/// `σ² = ∫f² + 2 Σ_{k<=kmax} ∫ f(x) f(2^k x) dx`.
pub fn kac_variance(f: &PeriodicFunction, kmax: usize) -> Result<KacVariance> {
    if !f.is_square_integrable() {
        return Err(LabError::NotSquareIntegrable(f.to_string()));
    }
    let mut terms = vec![f.l2_norm_sq()?];
    match f.trig_coefficients() {
        Some(c) => {
            for k in 1..=kmax {
                // cos/sin at frequency j pair with frequency 2^k j.
                let step = 1usize.checked_shl(k as u32).unwrap_or(usize::MAX);
                let cross: f64 = (1..=c.len())
                    .filter_map(|j| j.checked_mul(step).filter(|&jj| jj <= c.len()).map(|jj| (j, jj)))
                    .map(|(j, jj)| (c[j - 1].0 * c[jj - 1].0 + c[j - 1].1 * c[jj - 1].1) / 2.0)
                    .sum();
                terms.push(2.0 * cross);
            }
        }
        None => {
            if kmax > KAC_QUADRATURE_LIMIT {
                return Err(LabError::SizeGuard {
                    what: "kac quadrature kmax",
                    value: kmax.to_string(),
                    limit: KAC_QUADRATURE_LIMIT.to_string(),
                });
            }
            let base = f.breakpoints();
            for k in 1..=kmax {
                let scale = (1u64 << k) as f64;
                let mut bps = base.clone();
                for m in 0..(1u64 << k) {
                    bps.extend(base.iter().map(|b| (b + m as f64) / scale));
                    bps.push(m as f64 / scale);
                }
                let opts = QuadratureOptions {
                    max_panel: 1.0 / 64.0,
                    grading_levels: 8,
                };
                let v = integrate_periodic(&|x| f.eval_or_zero(x) * f.eval_or_zero(scale * x), &bps, opts);
                terms.push(2.0 * v);
            }
        }
    }
    let tail_bound = if f.mean().abs() > 1e-12 {
        f64::INFINITY
    } else {
        kac_tail_bound(f, kmax, terms[0])
    };
    Ok(KacVariance {
        value: terms.iter().sum(),
        terms,
        tail_bound,
    })
}

/// Fourier mass at frequencies in `[m, 2m)` is at most `E(1/(8m))/2`, where
/// `E` is the shift energy, and `|∫ f(x) f(2^k x)| <= ‖f‖₂ (Σ_{|j|>=2^k} |c_j|²)^{1/2}`.
fn kac_tail_bound(f: &PeriodicFunction, kmax: usize, norm_sq: f64) -> f64 {
    let energies: Vec<f64> = (kmax + 1..kmax + 1 + KAC_TAIL_LEVELS)
        .map(|p| shift_energy(f, 0.125 * 0.5f64.powi(p as i32)) / 2.0)
        .collect();
    let mut suffix = 0.0;
    let mut bound = 0.0;
    for e in energies.iter().rev() {
        suffix += e;
        bound += 2.0 * norm_sq.sqrt() * suffix.sqrt();
    }
    bound
}

/// `μ{x < s, {A x} < t}` for `s, t ∈ [0, 1]`.
fn joint_mass(s: &BigRational, t: &BigRational, a: &BigInt) -> BigRational {
    let sa = s * BigRational::from_integer(a.clone());
    let full = sa.floor();
    let part = &sa - &full;
    let partial = if part < *t { part } else { t.clone() };
    (full * t + partial) / BigRational::from_integer(a.clone())
}

/// Covariance `Γ(s, t)` of the limiting Gaussian process of the discrepancy
/// for `n_k = a^k`, truncated after `kmax` cross terms; exact rational sum.
pub fn gaussian_covariance(a: u64, s: f64, t: f64, kmax: usize) -> Result<f64> {
    if a < 2 {
        return Err(LabError::InvalidParameter(format!("a must be >= 2, got {a}")));
    }
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(LabError::InvalidParameter(format!("s, t must lie in [0, 1], got {s}, {t}")));
    }
    let (s, t) = (f64_to_rational(s), f64_to_rational(t));
    let st = &s * &t;
    let mut total = if s < t { s.clone() } else { t.clone() } - &st;
    let mut power = BigInt::one();
    for _ in 0..kmax {
        power *= a;
        total += joint_mass(&s, &t, &power) - &st;
        total += joint_mass(&t, &s, &power) - &st;
    }
    Ok(rational_to_f64(&total))
}

/// `Var(Σ_{k<=n} f(n_k x))` for a trigonometric polynomial, by exact
/// frequency matching: `E[cos(2πi n_k x) cos(2πj n_l x)] = 1/2` iff `i n_k = j n_l`.
pub fn orbit_sum_variance(f: &PeriodicFunction, seq: &IntegerSequence, n: usize) -> Result<f64> {
    let c = f
        .trig_coefficients()
        .ok_or_else(|| LabError::InvalidParameter(format!("{f} is not a trigonometric polynomial")))?;
    if n > seq.len() {
        return Err(LabError::SequenceTooShort { needed: n, have: seq.len() });
    }
    let terms = &seq.terms()[..n];
    let mut total = 0.0;
    for nk in terms {
        for nl in terms {
            let g = nk.gcd(nl);
            // i n_k = j n_l  <=>  (i, j) = r (n_l/g, n_k/g)
            let (pi, pj) = (nl / &g, nk / &g);
            let mut r = BigUint::one();
            loop {
                let (i, j) = (&pi * &r, &pj * &r);
                let (Some(i), Some(j)) = (to_index(&i, c.len()), to_index(&j, c.len())) else {
                    break;
                };
                total += (c[i - 1].0 * c[j - 1].0 + c[i - 1].1 * c[j - 1].1) / 2.0;
                r += 1u32;
            }
        }
    }
    Ok(total)
}

fn to_index(v: &BigUint, len: usize) -> Option<usize> {
    if v.is_zero() {
        return None;
    }
    usize::try_from(v).ok().filter(|&i| i <= len)
}

/// `Q(p)` of the heavy-tailed `f_α`, whose law has `P(f >= y) = y^{-α}` for
/// `y >= 2^{1/α}` and is symmetric.
pub fn heavy_tail_quantile(alpha: f64, p: f64) -> f64 {
    if p >= 0.5 {
        (1.0 - p).powf(-1.0 / alpha)
    } else {
        -p.powf(-1.0 / alpha)
    }
}

/// Fréchet CDF `exp(-x^{-α})` on `(0, ∞)`.
pub fn frechet_cdf(x: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-x.powf(-alpha)).exp()
    }
}
