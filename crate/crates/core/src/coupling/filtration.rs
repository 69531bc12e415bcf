//! The grid filtration `F_k` generated by `B_k = ∪_{j<=k} {i / n_{j+1}}`,
//! the step `X_k = E({n_k x} | F_k)` and the good atoms `G_k`.

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::seqgen::IntegerSequence;

/// Exact rational with machine-word parts; all denominators here are `<= 2^20`.
pub type Q = Ratio<i128>;

/// Largest `n_{k+1}` for which atoms are materialized.
pub const FILTRATION_LIMIT: u64 = 1 << 20;

/// Atoms of `F_k`: the left-closed intervals between consecutive cut points.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFiltration {
    pub k: usize,
    /// `n_1, …, n_{k+1}`.
    pub terms: Vec<u64>,
    /// Sorted cut points in `[0, 1]`, including both ends.
    pub cuts: Vec<Q>,
}

fn small_terms(seq: &IntegerSequence, upto: usize) -> Result<Vec<u64>> {
    if upto > seq.len() {
        return Err(LabError::SequenceTooShort { needed: upto, have: seq.len() });
    }
    seq.terms()[..upto]
        .iter()
        .map(|t| {
            t.to_u64().filter(|&v| v <= FILTRATION_LIMIT).ok_or_else(|| LabError::SizeGuard {
                what: "filtration term",
                value: t.to_string(),
                limit: FILTRATION_LIMIT.to_string(),
            })
        })
        .collect()
}

impl GridFiltration {
    pub fn atoms(&self) -> impl Iterator<Item = (Q, Q)> + '_ {
        self.cuts.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn atom_count(&self) -> usize {
        self.cuts.len() - 1
    }

    /// Index of the atom containing `x`.
    pub fn locate(&self, x: Q) -> usize {
        self.cuts.partition_point(|c| *c <= x) - 1
    }
}

/// `F_k` for `0 <= k`; needs `n_{k+1} <= 2^20`.
pub fn build_filtration(seq: &IntegerSequence, k: usize) -> Result<GridFiltration> {
    let terms = small_terms(seq, k + 1)?;
    let mut cuts: Vec<Q> = Vec::with_capacity(terms.iter().map(|&n| n as usize).sum::<usize>() + 1);
    cuts.push(Q::zero());
    for &n in &terms {
        for i in 1..=n {
            cuts.push(Q::new(i as i128, n as i128));
        }
    }
    cuts.sort();
    cuts.dedup();
    Ok(GridFiltration { k, terms, cuts })
}

/// `∫₀^u {n s} ds = (⌊nu⌋ + {nu}²) / (2n)`.
pub(crate) fn frac_antiderivative(n: i128, u: Q) -> Q {
    let nu = u * n;
    let fl = nu.floor();
    let fr = nu - fl;
    (fl + fr * fr) / (2 * n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationStep {
    pub k: usize,
    /// `ε_k = n_k / n_{k+1}`.
    #[serde(serialize_with = "ser_q")]
    pub eps: Q,
    /// Value of `X_k` on each atom.
    #[serde(skip)]
    pub values: Vec<Q>,
    /// Largest `|{n_k x} - X_k(x)|` over atom endpoints (limits from inside).
    #[serde(serialize_with = "ser_q")]
    pub max_gap: Q,
    /// Whether `max_gap <= ε_k`.
    pub bound_holds: bool,
}

impl ExpectationStep {
    /// The law of `X_k`: distinct values with their total atom lengths.
    pub fn distribution(&self, filt: &GridFiltration) -> super::DiscreteDistribution {
        let pairs = self
            .values
            .iter()
            .zip(filt.atoms())
            .map(|(v, (a, b))| (q_to_big(*v), q_to_big(b - a)));
        super::DiscreteDistribution::from_pairs(pairs).expect("atoms partition [0, 1)")
    }
}

pub(crate) fn q_to_big(q: Q) -> num_rational::BigRational {
    num_rational::BigRational::new((*q.numer()).into(), (*q.denom()).into())
}

/// `X_k` on every atom of `F_k` and the exact check `|T_k - X_k| <= ε_k`.
pub fn conditional_expectation_step(filt: &GridFiltration) -> Result<ExpectationStep> {
    let k = filt.k;
    if k == 0 {
        return Err(LabError::InvalidParameter("X_k is defined for k >= 1".into()));
    }
    let n = filt.terms[k - 1] as i128;
    let eps = Q::new(n, filt.terms[k] as i128);
    let mut values = Vec::with_capacity(filt.atom_count());
    let mut max_gap = Q::zero();
    for (a, b) in filt.atoms() {
        let mean = (frac_antiderivative(n, b) - frac_antiderivative(n, a)) / (b - a);
        // {n x} is affine on the atom: n x - ⌊n a⌋.
        let base = (a * n).floor();
        let left = a * n - base;
        let right = b * n - base;
        max_gap = max_gap.max((left - mean).abs()).max((right - mean).abs());
        values.push(mean);
    }
    Ok(ExpectationStep {
        k,
        eps,
        values,
        bound_holds: max_gap <= eps,
        max_gap,
    })
}

/// Whether the cell `[i/n, (i+1)/n)` has a multiple of `1/m` in its interior.
pub(crate) fn cell_hit(i: u128, n: u128, m: u128) -> bool {
    let first = i * m / n + 1;
    first * n < (i + 1) * m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoodAtoms {
    pub k: usize,
    /// Indices `i` of the good cells `[i/n_{k+1}, (i+1)/n_{k+1})`.
    #[serde(skip)]
    pub cells: Vec<u64>,
    #[serde(serialize_with = "ser_q")]
    pub measure: Q,
    /// `1 - 2 ε_k`.
    #[serde(serialize_with = "ser_q")]
    pub bound: Q,
    /// Whether `n_1 + … + n_k <= 2 n_k`.
    pub side_condition: bool,
    /// `measure >= bound`; only asserted where the side condition holds.
    pub bound_holds: bool,
}

/// Cells of the `1/n_{k+1}` grid with no interior point of `B_{k-1}`.
pub fn good_atoms(seq: &IntegerSequence, k: usize) -> Result<GoodAtoms> {
    let terms = small_terms(seq, k + 1)?;
    let n = terms[k] as u128;
    let coarse = &terms[..k];
    let cells: Vec<u64> = (0..n)
        .filter(|&i| !coarse.iter().any(|&m| cell_hit(i, n, m as u128)))
        .map(|i| i as u64)
        .collect();
    let measure = Q::new(cells.len() as i128, n as i128);
    let (bound, side_condition) = if k == 0 {
        (Q::from_integer(1), true)
    } else {
        let nk = terms[k - 1] as u128;
        let sum: u128 = coarse.iter().map(|&t| t as u128).sum();
        (Q::from_integer(1) - Q::new(2 * nk as i128, n as i128), sum <= 2 * nk)
    };
    Ok(GoodAtoms {
        k,
        cells,
        bound_holds: measure >= bound,
        measure,
        bound,
        side_condition,
    })
}

/// First `k` such that `n_1 + … + n_j <= 2 n_j` for every `j` in `k..=upto`.
pub fn side_condition_start(seq: &IntegerSequence, upto: usize) -> Option<usize> {
    let t = seq.terms();
    let holds = |j: usize| {
        let s: num_bigint::BigUint = t[..j].iter().sum();
        s <= &t[j - 1] * 2u32
    };
    let mut k0 = None;
    for j in (1..=upto.min(t.len())).rev() {
        if holds(j) {
            k0 = Some(j);
        } else {
            break;
        }
    }
    k0
}

pub(crate) fn q_to_f64(q: &Q) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

fn ser_q<S: serde::Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::{generate, SequenceSpec};

    fn s(v: &[u64]) -> IntegerSequence {
        IntegerSequence::from_u64(v).unwrap()
    }

    #[test]
    fn small_atoms() {
        let f1 = build_filtration(&s(&[2, 4]), 1).unwrap();
        let quarters: Vec<(Q, Q)> = (0..4).map(|i| (Q::new(i, 4), Q::new(i + 1, 4))).collect();
        assert_eq!(f1.atoms().collect::<Vec<_>>(), quarters);
        let f0 = build_filtration(&s(&[2, 4]), 0).unwrap();
        assert_eq!(f0.atom_count(), 2);
        // Nesting: every cut of F_{k-1} is a cut of F_k.
        let seq = s(&[3, 7, 20, 61]);
        for k in 1..3 {
            let coarse = build_filtration(&seq, k - 1).unwrap();
            let fine = build_filtration(&seq, k).unwrap();
            assert!(coarse.cuts.iter().all(|c| fine.cuts.binary_search(c).is_ok()));
            assert!(fine.atoms().all(|(a, b)| b - a <= Q::new(1, fine.terms[k] as i128)));
        }
    }

    #[test]
    fn expectation_examples() {
        let f = build_filtration(&s(&[2, 4]), 1).unwrap();
        let step = conditional_expectation_step(&f).unwrap();
        assert_eq!(step.values[0], Q::new(1, 4));
        assert!(step.bound_holds);
        // Over a full period cell of {n_k x}, X_k averages to 1/2.
        let f = build_filtration(&s(&[3, 7, 20]), 2).unwrap();
        let step = conditional_expectation_step(&f).unwrap();
        for cell in 0..7i128 {
            let (lo, hi) = (Q::new(cell, 7), Q::new(cell + 1, 7));
            let mass: Q = f
                .atoms()
                .zip(&step.values)
                .filter(|((a, b), _)| *a >= lo && *b <= hi)
                .map(|((a, b), v)| (b - a) * v)
                .fold(Q::zero(), |x, y| x + y);
            assert_eq!(mass * 7, Q::new(1, 2));
        }
    }

    #[test]
    fn expectation_bound_on_dense_grid() {
        let seq = s(&[3, 7, 20, 61, 250]);
        for k in 1..4 {
            let f = build_filtration(&seq, k).unwrap();
            let step = conditional_expectation_step(&f).unwrap();
            assert!(step.bound_holds);
            let n = f.terms[k - 1] as i128;
            let grid = 4096;
            for g in 0..grid {
                let x = Q::new(g, grid);
                let t = x * n - (x * n).floor();
                assert!((t - step.values[f.locate(x)]).abs() <= step.eps);
            }
            // The law of X_k has total mass 1.
            let d = step.distribution(&f);
            assert_eq!(d.total_mass(), num_rational::BigRational::from_integer(1.into()));
        }
    }

    #[test]
    fn good_atom_examples() {
        let g = good_atoms(&s(&[2, 4]), 1).unwrap();
        assert_eq!(g.measure, Q::from_integer(1));
        let g = good_atoms(&s(&[2, 4]), 0).unwrap();
        assert_eq!(g.measure, Q::from_integer(1));
        let seq = generate(&SequenceSpec::geometric(4, 5)).unwrap();
        let g = good_atoms(&seq, 3).unwrap();
        assert!(g.side_condition && g.bound_holds);
        assert!(g.measure >= Q::new(1, 2));
        assert_eq!(side_condition_start(&seq, 4), Some(1));
    }

    #[test]
    fn good_cells_brute_force() {
        let seq = s(&[3, 7, 20, 61]);
        for k in 1..4 {
            let g = good_atoms(&seq, k).unwrap();
            let n = seq.terms()[k].to_u64().unwrap() as i128;
            let pts = build_filtration(&seq, k - 1).unwrap().cuts;
            let brute: Vec<u64> = (0..n)
                .filter(|&i| !pts.iter().any(|p| *p > Q::new(i, n) && *p < Q::new(i + 1, n)))
                .map(|i| i as u64)
                .collect();
            assert_eq!(g.cells, brute);
        }
    }
}
