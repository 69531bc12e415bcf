//! Exact dyadic fixed-point numbers `x = y / 2^B` on a fixed limb buffer,
//! with the modular products needed to walk the orbit `{n_k x}`.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{LabError, Result};
use crate::rng::{fill_bits, replica_rng, Lane};

/// Guard bits required above the largest multiplier.
pub const GUARD_BITS: u32 = 64;

/// An element of `[0, 1)` held exactly as `numerator / 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointSample {
    limbs: Vec<u64>,
    bits: u32,
}

pub(crate) fn limb_count(bits: u32) -> usize {
    (bits as usize).div_ceil(64)
}

impl FixedPointSample {
    pub fn zero(bits: u32) -> Self {
        assert!(bits >= 1, "fixed-point samples need at least one bit");
        Self {
            limbs: vec![0; limb_count(bits)],
            bits,
        }
    }

    pub fn new(numerator: &BigUint, bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(LabError::InvalidParameter("bits must be >= 1".into()));
        }
        if numerator.bits() > bits as u64 {
            return Err(LabError::InvalidParameter(format!(
                "numerator needs {} bits but the grid has {bits}",
                numerator.bits()
            )));
        }
        let mut s = Self::zero(bits);
        for (dst, src) in s.limbs.iter_mut().zip(numerator.iter_u64_digits()) {
            *dst = src;
        }
        Ok(s)
    }

    /// Nearest grid point at or below `u ∈ [0, 1)`.
    pub fn from_f64(u: f64, bits: u32) -> Result<Self> {
        if !(0.0..1.0).contains(&u) {
            return Err(LabError::InvalidParameter(format!("{u} is not in [0, 1)")));
        }
        let r = crate::numeric::f64_to_rational(u) * num_rational::BigRational::from_integer(num_bigint::BigInt::from(1) << bits as usize);
        let n = r.floor().to_integer().to_biguint().unwrap();
        Self::new(&n, bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub fn numerator(&self) -> BigUint {
        BigUint::from_slice(
            &self
                .limbs
                .iter()
                .flat_map(|&w| [w as u32, (w >> 32) as u32])
                .collect::<Vec<_>>(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&w| w == 0)
    }

    /// Bits `[lo, lo + 64)` of the numerator (zeros outside `[0, bits)`).
    fn window(&self, lo: i64) -> u64 {
        let get = |pos: i64| -> u64 {
            if pos < 0 {
                return 0;
            }
            let idx = (pos / 64) as usize;
            let off = (pos % 64) as u32;
            let w0 = self.limbs.get(idx).copied().unwrap_or(0);
            let w1 = self.limbs.get(idx + 1).copied().unwrap_or(0);
            if off == 0 {
                w0
            } else {
                (w0 >> off) | (w1 << (64 - off))
            }
        };
        if lo >= 0 {
            get(lo)
        } else if lo > -64 {
            get(0) << (-lo) as u32
        } else {
            0
        }
    }

    /// The value truncated to 53 bits; always in `[0, 1)`.
    pub fn to_f64(&self) -> f64 {
        let top = self.window(self.bits as i64 - 64);
        (top >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Whether the value is `>= 1/2`.
    pub fn upper_half(&self) -> bool {
        let b = self.bits - 1;
        (self.limbs[(b / 64) as usize] >> (b % 64)) & 1 == 1
    }

    /// Whether the value is exactly `1/2`.
    pub fn is_half(&self) -> bool {
        let b = self.bits - 1;
        let (idx, off) = ((b / 64) as usize, b % 64);
        self.limbs.iter().enumerate().all(|(i, &w)| if i == idx { w == 1u64 << off } else { w == 0 })
    }

    /// `|x - 1/2|` rendered with full relative precision.
    pub fn distance_to_half(&self) -> f64 {
        let half_bit = self.bits - 1;
        let n = self.limbs.len();
        if n >= 4 && !self.upper_half() {
            // Leading limbs of 2^{B-1} - y; ignoring the borrow from below
            // perturbs only the last limb of the window.
            let top = &self.limbs[n - 3..];
            let mut half = [0u64; 3];
            half[((half_bit / 64) as usize) - (n - 3)] = 1u64 << (half_bit % 64);
            let mut d = half;
            sub_in_place(&mut d, top);
            if d[2] != 0 || d[1] != 0 {
                let scale = (64.0 * (n - 3) as f64) - self.bits as f64;
                return leading_to_f64(&d, scale);
            }
        }
        let mut d = self.limbs.clone();
        let (idx, off) = ((half_bit / 64) as usize, half_bit % 64);
        if self.upper_half() {
            d[idx] &= !(1u64 << off);
        } else {
            // 2^{B-1} - y
            let mut half = vec![0u64; d.len()];
            half[idx] = 1u64 << off;
            sub_in_place(&mut half, &d);
            d = half;
        }
        leading_to_f64(&d, -(self.bits as f64))
    }

    /// Exact comparison with a finite double.
    pub fn cmp_f64(&self, t: f64) -> Ordering {
        if t < 0.0 {
            return Ordering::Greater;
        }
        if t >= 1.0 {
            return Ordering::Less;
        }
        let (m, e) = crate::numeric::f64_to_dyadic(t);
        let m = m.to_biguint().unwrap_or_default();
        let y = self.numerator();
        // y / 2^B  vs  m * 2^e
        let shift = e as i64 + self.bits as i64;
        if shift >= 0 {
            y.cmp(&(m << shift as usize))
        } else {
            (y << (-shift) as usize).cmp(&m)
        }
    }

    /// `floor(n * x)`, the integer part of the product.
    pub fn floor_mul(&self, n: &BigUint) -> BigUint {
        (n * self.numerator()) >> self.bits as usize
    }

    fn mask_top(&mut self) {
        let rem = self.bits % 64;
        if rem != 0 {
            if let Some(top) = self.limbs.last_mut() {
                *top &= (1u64 << rem) - 1;
            }
        }
    }
}

/// `limbs · 2^scale`, with the scale folded into one exponent so that long
/// grids neither overflow nor underflow.
fn leading_to_f64(limbs: &[u64], scale: f64) -> f64 {
    let Some(top) = limbs.iter().rposition(|&w| w != 0) else {
        return 0.0;
    };
    let hi = limbs[top];
    let lz = hi.leading_zeros();
    let lo = if top > 0 { limbs[top - 1] } else { 0 };
    let lower = if top > 1 { limbs[top - 2] } else { 0 };
    let word = if lz == 0 { hi } else { (hi << lz) | (lo >> (64 - lz)) };
    let next = if lz == 0 { lo } else { (lo << lz) | (lower >> (64 - lz)) };
    let exp = top as i32 * 64 - lz as i32;
    // Keep 64 leading bits plus one extra word for correct rounding.
    (word as f64 + next as f64 * (-64f64).exp2()) * (exp as f64 + scale).exp2()
}

fn sub_in_place(a: &mut [u64], b: &[u64]) {
    let mut borrow = 0u64;
    for (x, &y) in a.iter_mut().zip(b) {
        let (d1, b1) = x.overflowing_sub(y);
        let (d2, b2) = d1.overflowing_sub(borrow);
        *x = d2;
        borrow = (b1 | b2) as u64;
    }
}

/// `dst = (dst if accumulate else 0) + src * m  (mod 2^{64 L})`.
pub(crate) fn mul_add_truncated(dst: &mut [u64], src: &[u64], m: &[u64], accumulate: bool) {
    let len = dst.len();
    if !accumulate {
        dst.fill(0);
    }
    for (j, &mj) in m.iter().enumerate() {
        if mj == 0 || j >= len {
            continue;
        }
        let mut carry: u128 = 0;
        for i in 0..len - j {
            let t = dst[i + j] as u128 + (src[i] as u128) * (mj as u128) + carry;
            dst[i + j] = t as u64;
            carry = t >> 64;
        }
    }
}

/// `dst = src << s (mod 2^{64 L})`.
pub(crate) fn shl_truncated(dst: &mut [u64], src: &[u64], s: u64) {
    let len = dst.len();
    let limb_shift = (s / 64) as usize;
    let bit_shift = (s % 64) as u32;
    for i in (0..len).rev() {
        if i < limb_shift {
            dst[i] = 0;
            continue;
        }
        let k = i - limb_shift;
        let hi = src[k] << bit_shift;
        let lo = if bit_shift > 0 && k > 0 { src[k - 1] >> (64 - bit_shift) } else { 0 };
        dst[i] = hi | lo;
    }
}

pub(crate) fn biguint_limbs(n: &BigUint, max: usize) -> Vec<u64> {
    n.iter_u64_digits().take(max).collect()
}

impl FixedPointSample {
    pub(crate) fn limbs_mut(&mut self) -> &mut [u64] {
        &mut self.limbs
    }

    pub(crate) fn normalize(&mut self) {
        self.mask_top();
    }

    /// `{n x}` computed exactly without the guard-bit check.
    pub fn frac_multiple_unguarded(&self, n: &BigUint) -> FixedPointSample {
        let mut out = FixedPointSample::zero(self.bits);
        let m = biguint_limbs(n, self.limbs.len());
        mul_add_truncated(&mut out.limbs, &self.limbs, &m, false);
        out.mask_top();
        out
    }
}

/// Checks `bits >= bitlen(n) + GUARD_BITS`.
pub fn check_guard(bits: u32, multiplier: &BigUint) -> Result<()> {
    let need = multiplier.bits() + GUARD_BITS as u64;
    if (bits as u64) < need {
        return Err(LabError::GuardBits {
            bits,
            multiplier_bits: multiplier.bits(),
            guard: GUARD_BITS,
        });
    }
    Ok(())
}

/// Bits needed for a sequence whose largest term has `max_bits` bits.
pub fn required_bits(max_bits: u64) -> u32 {
    (max_bits + GUARD_BITS as u64).max(1) as u32
}

/// `{n x}` exactly, refusing multipliers that violate the guard-bit rule.
pub fn frac_multiple(x: &FixedPointSample, n: &BigUint) -> Result<FixedPointSample> {
    check_guard(x.bits, n)?;
    Ok(x.frac_multiple_unguarded(n))
}

/// Uniform grid point for replica `replica` of an experiment seeded `seed`.
pub fn sample_point(seed: u64, replica: u64, bits: u32) -> FixedPointSample {
    let mut s = FixedPointSample::zero(bits.max(1));
    let mut rng = replica_rng(seed, replica, Lane::Point);
    fill_bits(&mut rng, &mut s.limbs, s.bits);
    s
}

impl PartialOrd for FixedPointSample {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Samples compare by value; on equal values the finer grid sorts last.
impl Ord for FixedPointSample {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.bits == other.bits {
            for (a, b) in self.limbs.iter().rev().zip(other.limbs.iter().rev()) {
                match a.cmp(b) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            return Ordering::Equal;
        }
        let (a, b) = (self.numerator(), other.numerator());
        let ord = if self.bits > other.bits {
            a.cmp(&(b << (self.bits - other.bits) as usize))
        } else {
            (a << (other.bits - self.bits) as usize).cmp(&b)
        };
        ord.then(self.bits.cmp(&other.bits))
    }
}

impl Zero for FixedPointSample {
    fn zero() -> Self {
        FixedPointSample::zero(1)
    }
    fn is_zero(&self) -> bool {
        FixedPointSample::is_zero(self)
    }
}

impl std::ops::Add for FixedPointSample {
    type Output = FixedPointSample;
    /// Addition mod 1 on a common grid.
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.bits, rhs.bits, "grid mismatch");
        let mut carry = 0u64;
        for (x, &y) in self.limbs.iter_mut().zip(&rhs.limbs) {
            let (s1, c1) = x.overflowing_add(y);
            let (s2, c2) = s1.overflowing_add(carry);
            *x = s2;
            carry = (c1 | c2) as u64;
        }
        self.mask_top();
        self
    }
}
