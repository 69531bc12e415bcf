//! End-to-end Monte Carlo realization of the coupling `T_k → X_k → Y_k → Z_k`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::RngCore;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::distribution::{prohorov_distance, strassen_coupling, DiscreteDistribution};
use super::filtration::{build_filtration, cell_hit, conditional_expectation_step, frac_antiderivative, Q, FILTRATION_LIMIT};
use crate::error::{LabError, Result};
use crate::numeric::rational_to_f64;
use crate::par::{map_replicas, Execution};
use crate::rng::{replica_rng, uniform53, Lane};
use crate::seqgen::{delta_sequence, IntegerSequence};

/// Largest term usable by the 128-bit sampler (keeps 64 guard bits).
pub const SIMULATION_TERM_LIMIT: u64 = 1 << 62;
/// Largest uniform grid `H_L` used as the coupling target.
pub const GRID_LIMIT: u64 = 4096;
/// Normal quantile for the Wilson interval in the pass rule.
pub const WILSON_Z: f64 = 3.0;
/// Significance level of the replica chi-square test.
pub const CHI_SQUARE_LEVEL: f64 = 0.01;

/// Wilson score interval for `successes` out of `n` at quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingRow {
    pub k: usize,
    pub n_k: String,
    pub eps_k: f64,
    pub delta_k: f64,
    /// Fraction of replicas with `|{n_k x} - Z_k| >= δ_k`.
    pub exceedance: f64,
    pub m: usize,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    /// `δ_k >= 1`: the inequality holds trivially.
    pub vacuous: bool,
    /// Fraction of replicas whose cell carried no coarser grid point.
    pub good_fraction: f64,
    /// Kernels built at the Prohorov distance because `ε_k` was infeasible.
    pub fallback_kernels: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaCheck {
    /// Level `k` whose joint law `(X_1, …, X_k)` was tested.
    pub level: usize,
    pub bins: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceCheck {
    pub max_abs_correlation: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingReport {
    pub rows: Vec<CouplingRow>,
    pub replica: Option<ReplicaCheck>,
    pub independence: Option<IndependenceCheck>,
    pub pass: bool,
}

impl CouplingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,n_k,eps_k,delta_k,exceedance,M,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{},{}\n",
                r.k, r.n_k, r.eps_k, r.delta_k, r.exceedance, r.m, r.pass
            ));
        }
        out
    }
}

/// `n · (p / 2^128)` split into integer part and the 128-bit fraction.
#[inline]
fn mul_frac(n: u64, p: u128) -> (u64, u128) {
    let lo = (n as u128) * (p as u64 as u128);
    let hi = (n as u128) * (p >> 64);
    let mid = hi + (lo >> 64);
    ((mid >> 64) as u64, (mid << 64) | (lo as u64 as u128))
}

#[inline]
fn frac_to_f64(f: u128) -> f64 {
    (f >> 75) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sampling table for `Y_k` given the atom of `X_k` inside one cell.
struct Kernel {
    /// Per atom: cumulative probabilities and the matching grid index.
    rows: Vec<Vec<(f64, u64)>>,
    fallback: bool,
}

/// Atoms of `{n_k x}` inside a cell with offset `s = i n_{k+1} mod n_k`:
/// cut points `(j n_k - s) / n_{k+1}` in `t = {n_k x}`.
fn cell_distribution(nk: u64, nk1: u64, s: u64) -> Result<DiscreteDistribution> {
    let (nk, nk1, s) = (nk as u128, nk1 as u128, s as u128);
    let count = (s + nk1).div_ceil(nk);
    let den = BigUint::from(nk1);
    let cut = |j: u128| -> BigRational {
        let num = (j * nk).saturating_sub(s).min(nk1);
        BigRational::new(BigUint::from(num).into(), den.clone().into())
    };
    let two = BigRational::from_integer(2.into());
    DiscreteDistribution::from_pairs((0..count).map(|a| {
        let (lo, hi) = (cut(a), cut(a + 1));
        ((&lo + &hi) / &two, hi - lo)
    }))
}

fn build_kernel(nk: u64, nk1: u64, s: u64, grid: &DiscreteDistribution, eps: f64) -> Result<Kernel> {
    let p = cell_distribution(nk, nk1, s)?;
    let (coupling, fallback) = match strassen_coupling(&p, grid, eps) {
        Ok(c) => (c, false),
        Err(LabError::Infeasible { .. }) => {
            let pi = prohorov_distance(&p, grid)?;
            (strassen_coupling(&p, grid, pi + 1e-9)?, true)
        }
        Err(e) => return Err(e),
    };
    let rows = coupling
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let total = &p.masses()[i];
            let mut acc = BigRational::from_integer(0.into());
            row.into_iter()
                .map(|(j, m)| {
                    acc += m / total;
                    (rational_to_f64(&acc), j as u64)
                })
                .collect()
        })
        .collect();
    Ok(Kernel { rows, fallback })
}

struct Level {
    k: usize,
    nk: u64,
    nk1: u64,
    coarse: Vec<u64>,
    l: u64,
    eps: f64,
    delta: f64,
    grid: DiscreteDistribution,
    kernels: RwLock<HashMap<u64, Arc<Kernel>>>,
}

impl Level {
    fn kernel(&self, s: u64) -> Result<Arc<Kernel>> {
        if let Some(k) = self.kernels.read().expect("kernel cache").get(&s) {
            return Ok(k.clone());
        }
        let built = Arc::new(build_kernel(self.nk, self.nk1, s, &self.grid, self.eps)?);
        Ok(self.kernels.write().expect("kernel cache").entry(s).or_insert(built).clone())
    }
}

struct ReplicaOutcome {
    exceed: Vec<bool>,
    good: Vec<bool>,
    z: Vec<f64>,
    /// Exact `(X_1, …, X_level)` for the replica test.
    tuple: Vec<Q>,
}

/// Exact `X_j(x)` for `j <= level` when every term up to `n_{level+1}` is small.
fn exact_tuple(terms: &[u64], level: usize, p: u128) -> Vec<Q> {
    (1..=level)
        .map(|j| {
            let mut lo = Q::from_integer(0);
            let mut hi = Q::from_integer(1);
            for &m in &terms[..=j] {
                let f = mul_frac(m, p).0 as i128;
                lo = lo.max(Q::new(f, m as i128));
                hi = hi.min(Q::new(f + 1, m as i128));
            }
            let n = terms[j - 1] as i128;
            (frac_antiderivative(n, hi) - frac_antiderivative(n, lo)) / (hi - lo)
        })
        .collect()
}

/// Exact law of `(X_1, …, X_level)` over the atoms of `F_level`.
fn exact_tuple_law(seq: &IntegerSequence, level: usize) -> Result<HashMap<Vec<Q>, Q>> {
    let top = build_filtration(seq, level)?;
    let steps: Vec<_> = (1..=level)
        .map(|j| {
            let f = build_filtration(seq, j)?;
            let e = conditional_expectation_step(&f)?;
            Ok((f, e))
        })
        .collect::<Result<_>>()?;
    let mut law: HashMap<Vec<Q>, Q> = HashMap::new();
    for (a, b) in top.atoms() {
        let key: Vec<Q> = steps.iter().map(|(f, e)| e.values[f.locate(a)]).collect();
        *law.entry(key).or_insert(Q::from_integer(0)) += b - a;
    }
    Ok(law)
}

/// Deepest level whose joint law has at most `m / 5` atoms.
fn replica_level(terms: &[u64], k_max: usize, m: usize) -> usize {
    let mut level = 0;
    for j in 1..=k_max {
        let n = terms[j];
        let atoms: u64 = terms[..=j].iter().sum();
        if n > FILTRATION_LIMIT || atoms as usize > m / 5 {
            break;
        }
        level = j;
    }
    level
}

fn chi_square(law: &HashMap<Vec<Q>, Q>, observed: &HashMap<Vec<Q>, u64>, m: usize, level: usize) -> ReplicaCheck {
    let mut cells: Vec<(&Vec<Q>, &Q)> = law.iter().collect();
    cells.sort();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp, mut obs) = (0.0, 0.0);
    for (key, prob) in cells {
        exp += super::filtration::q_to_f64(prob) * m as f64;
        obs += observed.get(key).copied().unwrap_or(0) as f64;
        if exp >= 5.0 {
            bins.push((exp, obs));
            exp = 0.0;
            obs = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += exp;
                last.1 += obs;
            }
            None => bins.push((exp, obs)),
        }
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ReplicaCheck {
        level,
        bins: bins.len(),
        statistic,
        p_value,
        pass: p_value >= CHI_SQUARE_LEVEL,
    }
}

fn max_correlation(outcomes: &[ReplicaOutcome], k: usize) -> f64 {
    let m = outcomes.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| outcomes.iter().map(|o| o.z[j]).sum::<f64>() / m).collect();
    let sd: Vec<f64> = (0..k)
        .map(|j| (outcomes.iter().map(|o| (o.z[j] - mean[j]).powi(2)).sum::<f64>() / m).sqrt())
        .collect();
    let mut worst = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            let cov = outcomes.iter().map(|o| (o.z[a] - mean[a]) * (o.z[b] - mean[b])).sum::<f64>() / m;
            worst = worst.max((cov / (sd[a] * sd[b])).abs());
        }
    }
    worst
}

/// Runs `m` replicas of the coupling for `k = 1..=k_max`.
///
/// Each replica draws `x` on the `2^-128` grid. In a good cell of the
/// `1/n_k` grid, `Y_k` is drawn from the Strassen coupling of the cell law
/// of `X_k` with the uniform midpoint grid `H_L`, `L >= 4/ε_k`; in a bad
/// cell it is a fresh draw from `H_L`. `Z_k = Y_k + (u - 1/2)/L` is exactly
/// uniform.
pub fn simulate_coupling(seq: &IntegerSequence, k_max: usize, m: usize, seed: u64, exec: Execution) -> Result<CouplingReport> {
    if k_max == 0 || m == 0 {
        return Err(LabError::InvalidParameter("need K >= 1 and M >= 1".into()));
    }
    if seq.len() < k_max + 1 {
        return Err(LabError::SequenceTooShort { needed: k_max + 1, have: seq.len() });
    }
    let terms: Vec<u64> = seq.terms()[..=k_max]
        .iter()
        .map(|t| {
            t.to_u64().filter(|&v| v <= SIMULATION_TERM_LIMIT).ok_or_else(|| LabError::SizeGuard {
                what: "coupling term",
                value: t.to_string(),
                limit: SIMULATION_TERM_LIMIT.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let deltas = delta_sequence(seq)?;
    let levels: Vec<Level> = (1..=k_max)
        .map(|k| {
            let (nk, nk1) = (terms[k - 1], terms[k]);
            let eps_exact = seq.epsilon(k);
            let l = (BigRational::from_integer(4.into()) / &eps_exact).ceil().to_integer();
            let l = l.to_u64().map(|v| v.next_power_of_two()).filter(|&v| v <= GRID_LIMIT).ok_or_else(|| LabError::SizeGuard {
                what: "coupling grid 4/ε_k",
                value: l.to_string(),
                limit: GRID_LIMIT.to_string(),
            })?;
            Ok(Level {
                k,
                nk,
                nk1,
                coarse: terms[..k - 1].to_vec(),
                l,
                eps: rational_to_f64(&eps_exact),
                delta: deltas[k - 1],
                grid: DiscreteDistribution::uniform_grid(l),
                kernels: RwLock::new(HashMap::new()),
            })
        })
        .collect::<Result<_>>()?;
    let chi_level = replica_level(&terms, k_max, m);

    let outcomes: Vec<Result<ReplicaOutcome>> = map_replicas(exec, m, |r| {
        let mut point = replica_rng(seed, r as u64, Lane::Point);
        let mut aux = replica_rng(seed, r as u64, Lane::Aux);
        let p = ((point.next_u64() as u128) << 64) | point.next_u64() as u128;
        let mut out = ReplicaOutcome {
            exceed: Vec::with_capacity(k_max),
            good: Vec::with_capacity(k_max),
            z: Vec::with_capacity(k_max),
            tuple: exact_tuple(&terms, chi_level, p),
        };
        for lv in &levels {
            let (i, frac) = mul_frac(lv.nk, p);
            let t = frac_to_f64(frac);
            let (pick, jitter) = (uniform53(&mut aux), uniform53(&mut aux));
            let good = !lv.coarse.iter().any(|&c| cell_hit(i as u128, lv.nk as u128, c as u128));
            let y_index = if good {
                let prod = i as u128 * lv.nk1 as u128;
                let q = prod / lv.nk as u128;
                let s = (prod % lv.nk as u128) as u64;
                let atom = (mul_frac(lv.nk1, p).0 as u128 - q) as usize;
                let kernel = lv.kernel(s)?;
                let row = &kernel.rows[atom];
                row.iter().find(|(c, _)| pick < *c).unwrap_or(row.last().expect("nonempty row")).1
            } else {
                ((pick * lv.l as f64) as u64).min(lv.l - 1)
            };
            let y = (2 * y_index + 1) as f64 / (2 * lv.l) as f64;
            let z = y + (jitter - 0.5) / lv.l as f64;
            out.exceed.push((t - z).abs() >= lv.delta);
            out.good.push(good);
            out.z.push(z);
        }
        Ok(out)
    });
    let outcomes: Vec<ReplicaOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let rows: Vec<CouplingRow> = levels
        .iter()
        .map(|lv| {
            let j = lv.k - 1;
            let hits = outcomes.iter().filter(|o| o.exceed[j]).count() as u64;
            let good = outcomes.iter().filter(|o| o.good[j]).count();
            let (lo, hi) = wilson_interval(hits, m as u64, WILSON_Z);
            let vacuous = lv.delta >= 1.0;
            let fallback_kernels = lv.kernels.read().expect("kernel cache").values().filter(|k| k.fallback).count();
            CouplingRow {
                k: lv.k,
                n_k: lv.nk.to_string(),
                eps_k: lv.eps,
                delta_k: lv.delta,
                exceedance: hits as f64 / m as f64,
                m,
                wilson_lower: lo,
                wilson_upper: hi,
                vacuous,
                good_fraction: good as f64 / m as f64,
                fallback_kernels,
                pass: vacuous || lo <= lv.delta,
            }
        })
        .collect();

    let replica = if chi_level >= 1 {
        let law = exact_tuple_law(seq, chi_level)?;
        let mut observed: HashMap<Vec<Q>, u64> = HashMap::new();
        for o in &outcomes {
            *observed.entry(o.tuple.clone()).or_insert(0) += 1;
        }
        Some(chi_square(&law, &observed, m, chi_level))
    } else {
        None
    };
    let independence = (k_max >= 2 && m >= 2).then(|| {
        let c = max_correlation(&outcomes, k_max);
        let threshold = 4.0 / (m as f64).sqrt();
        IndependenceCheck {
            max_abs_correlation: c,
            threshold,
            pass: c <= threshold,
        }
    });
    let pass = rows.iter().all(|r| r.pass)
        && replica.as_ref().is_none_or(|c| c.pass)
        && independence.as_ref().is_none_or(|c| c.pass);
    Ok(CouplingReport {
        rows,
        replica,
        independence,
        pass,
    })
}
