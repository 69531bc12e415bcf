//! Precomputed recurrences that walk `{n_1 x}, {n_2 x}, …` with the cheapest
//! exact update per step.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{LabError, Result};
use crate::numeric::CompensatedSum;
use crate::seqgen::IntegerSequence;

use super::fixed::{biguint_limbs, check_guard, limb_count, mul_add_truncated, shl_truncated, FixedPointSample};
use super::function::PeriodicFunction;

#[derive(Clone, Debug)]
enum Step {
    /// `y' = y · 2^s`.
    Shift(u64),
    /// `y' = q·y + r·x` where `n' = q·n + r`.
    Affine { q: Vec<u64>, r: Vec<u64> },
    /// `y' = n'·x`.
    Full(Vec<u64>),
}

/// Exact orbit evaluator for a fixed sequence prefix and grid size.
#[derive(Clone, Debug)]
pub struct OrbitPlan {
    bits: u32,
    first: Vec<u64>,
    steps: Vec<Step>,
}

/// Limb products needed by a truncated product with an `m`-limb multiplier.
fn product_cost(m: usize, l: usize) -> usize {
    (0..m.min(l)).map(|j| l - j).sum()
}

impl OrbitPlan {
    /// Plan for the first `n` terms of `seq` on a `bits`-bit grid.
    pub fn new(seq: &IntegerSequence, n: usize, bits: u32) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParameter("orbit length must be >= 1".into()));
        }
        if n > seq.len() {
            return Err(LabError::SequenceTooShort { needed: n, have: seq.len() });
        }
        let terms = &seq.terms()[..n];
        let largest = terms.iter().max().expect("nonempty");
        check_guard(bits, largest)?;
        let l = limb_count(bits);
        let mut steps = Vec::with_capacity(n - 1);
        for w in terms.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let (q, r) = next.div_rem(prev);
            if r.is_zero() && q.count_ones() == 1 {
                steps.push(Step::Shift(q.trailing_zeros().unwrap_or(0)));
                continue;
            }
            let ql = biguint_limbs(&q, l);
            let rl = biguint_limbs(&r, l);
            let affine = product_cost(ql.len(), l) + product_cost(rl.len(), l);
            let nl = biguint_limbs(next, l);
            if affine <= product_cost(nl.len(), l) {
                steps.push(Step::Affine { q: ql, r: rl });
            } else {
                steps.push(Step::Full(nl));
            }
        }
        Ok(Self {
            bits,
            first: biguint_limbs(&terms[0], l),
            steps,
        })
    }

    /// Plan over the whole sequence with the minimal guarded grid.
    pub fn for_sequence(seq: &IntegerSequence) -> Result<Self> {
        Self::new(seq, seq.len(), super::fixed::required_bits(seq.max_bits()))
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Calls `visit(k, {n_k x})` for `k = 1..=len`, stopping at the first error.
    pub fn walk<E, F>(&self, x: &FixedPointSample, mut visit: F) -> std::result::Result<(), E>
    where
        F: FnMut(usize, &FixedPointSample) -> std::result::Result<(), E>,
    {
        assert_eq!(x.bits(), self.bits, "sample grid does not match plan");
        let mut cur = FixedPointSample::zero(self.bits);
        let mut next = FixedPointSample::zero(self.bits);
        mul_add_truncated(cur.limbs_mut(), x.limbs(), &self.first, false);
        cur.normalize();
        visit(1, &cur)?;
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Shift(s) => shl_truncated(next.limbs_mut(), cur.limbs(), *s),
                Step::Affine { q, r } => {
                    mul_add_truncated(next.limbs_mut(), cur.limbs(), q, false);
                    if !r.is_empty() {
                        mul_add_truncated(next.limbs_mut(), x.limbs(), r, true);
                    }
                }
                Step::Full(n) => mul_add_truncated(next.limbs_mut(), x.limbs(), n, false),
            }
            next.normalize();
            std::mem::swap(&mut cur, &mut next);
            visit(i + 2, &cur)?;
        }
        Ok(())
    }

    /// All orbit points as owned samples.
    pub fn orbit(&self, x: &FixedPointSample) -> Vec<FixedPointSample> {
        let mut out = Vec::with_capacity(self.len());
        let _ = self.walk::<(), _>(x, |_, y| {
            out.push(y.clone());
            Ok(())
        });
        out
    }

    /// Orbit points rendered as `f64` in `[0, 1)`.
    pub fn orbit_f64(&self, x: &FixedPointSample) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let _ = self.walk::<(), _>(x, |_, y| {
            out.push(y.to_f64());
            Ok(())
        });
        out
    }

    /// Running sums `S_1, …, S_len` of `f(n_k x)`.
    pub fn prefix_sums(&self, f: &PeriodicFunction, x: &FixedPointSample) -> Result<Vec<f64>> {
        let mut acc = CompensatedSum::new();
        let mut out = Vec::with_capacity(self.len());
        self.walk(x, |k, y| {
            acc.add(f.eval_fixed(y).map_err(|e| singular(e, k))?);
            out.push(acc.value());
            Ok(())
        })?;
        Ok(out)
    }

    /// `Σ_{k<=len} f(n_k x)` with compensated accumulation.
    pub fn sum(&self, f: &PeriodicFunction, x: &FixedPointSample) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        self.walk(x, |k, y| {
            acc.add(f.eval_fixed(y).map_err(|e| singular(e, k))?);
            Ok(())
        })?;
        Ok(acc.value())
    }
}

fn singular(e: LabError, k: usize) -> LabError {
    match e {
        LabError::Singularity { .. } => LabError::SingularTerm { k },
        other => other,
    }
}

/// `Σ_{k<=N} f({n_k x})`.
pub fn partial_sum(f: &PeriodicFunction, seq: &IntegerSequence, x: &FixedPointSample, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    OrbitPlan::new(seq, n, x.bits())?.sum(f, x)
}

/// Exact multiplier chain check used by tests: `{n_k x}` from scratch.
pub fn orbit_reference(seq: &IntegerSequence, x: &FixedPointSample, n: usize) -> Vec<BigUint> {
    let modulus = BigUint::from(1u32) << x.bits() as usize;
    seq.terms()[..n].iter().map(|t| (t * x.numerator()) % &modulus).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::sample_point;
    use crate::seqgen::{generate, GapExponent, SequenceSpec};

    fn check(spec: SequenceSpec) {
        let seq = generate(&spec).unwrap();
        let bits = crate::orbit::required_bits(seq.max_bits()) + 37;
        let plan = OrbitPlan::new(&seq, seq.len(), bits).unwrap();
        for r in 0..5 {
            let x = sample_point(1, r, bits);
            let got: Vec<BigUint> = plan.orbit(&x).iter().map(|y| y.numerator()).collect();
            assert_eq!(got, orbit_reference(&seq, &x, seq.len()));
        }
    }

    #[test]
    fn plans_match_reference() {
        check(SequenceSpec::geometric(2, 200));
        check(SequenceSpec::geometric(3, 100));
        check(SequenceSpec::geometric_minus_one(2, 150));
        check(SequenceSpec::superlacunary_square(2, 12));
        check(SequenceSpec::superlacunary_square(3, 10));
        check(SequenceSpec::power_gap(GapExponent::integer(3), 5, 40));
        check(SequenceSpec::power_gap(GapExponent::new(3, 2).unwrap(), 1, 40));
        check(SequenceSpec::explicit_u64(&[3, 5, 1000, 1001, 77777, 1 << 40]));
    }

    #[test]
    fn small_partial_sums() {
        let cos = PeriodicFunction::cos();
        let seq = generate(&SequenceSpec::geometric(2, 3)).unwrap();
        let zero = FixedPointSample::zero(80);
        assert_eq!(partial_sum(&cos, &seq, &zero, 3).unwrap(), 3.0);
        let one = IntegerSequence::from_u64(&[1]).unwrap();
        let q = FixedPointSample::from_f64(0.25, 70).unwrap();
        assert_eq!(partial_sum(&PeriodicFunction::CenteredFrac, &one, &q, 1).unwrap(), -0.25);
        let two = IntegerSequence::from_u64(&[1, 2]).unwrap();
        assert_eq!(partial_sum(&PeriodicFunction::CenteredFrac, &two, &q, 2).unwrap(), -0.25);
    }

    #[test]
    fn singular_term_reports_index() {
        let seq = IntegerSequence::from_u64(&[1, 2, 4]).unwrap();
        let x = FixedPointSample::from_f64(0.125, 80).unwrap();
        let f = PeriodicFunction::HeavyTail { alpha: 1.0 };
        assert_eq!(partial_sum(&f, &seq, &x, 3), Err(LabError::SingularTerm { k: 3 }));
    }

    #[test]
    fn guard_enforced() {
        let seq = generate(&SequenceSpec::geometric(2, 100)).unwrap();
        assert!(matches!(OrbitPlan::new(&seq, 100, 164), Err(LabError::GuardBits { .. })));
        assert!(OrbitPlan::new(&seq, 100, 165).is_ok());
    }
}
