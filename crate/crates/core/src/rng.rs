//! Counter-based replica streams.
//!
//! Every Monte Carlo replica `r` of an experiment seeded with `seed` reads
//! from ChaCha8 stream `r` under key `seed`. A stream is split into disjoint
//! lanes by word position, so the sample point, the auxiliary uniforms of a
//! coupling and any i.i.d. control draws never overlap and never depend on
//! which thread ran the replica.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Disjoint segments of one replica stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    /// Bits of the sample point `x`.
    Point,
    /// Auxiliary uniforms (coupling kernels, jitter).
    Aux,
    /// Draws for i.i.d. control samples.
    Control,
}

impl Lane {
    fn word_offset(self) -> u128 {
        match self {
            Lane::Point => 0,
            Lane::Aux => 1u128 << 64,
            Lane::Control => 2u128 << 64,
        }
    }
}

/// Deterministic generator for one (seed, replica, lane) triple.
pub fn replica_rng(seed: u64, replica: u64, lane: Lane) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng.set_word_pos(lane.word_offset());
    rng
}

/// Uniform double in `[0, 1)` on the 2^-53 grid.
#[inline]
pub fn uniform53<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in `(0, 1)`; never returns 0.
#[inline]
pub fn uniform_open<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Fills `limbs` with uniform bits and masks the top limb to `bits` total.
pub fn fill_bits<R: Rng>(rng: &mut R, limbs: &mut [u64], bits: u32) {
    for w in limbs.iter_mut() {
        *w = rng.next_u64();
    }
    let rem = bits % 64;
    if rem != 0 {
        if let Some(top) = limbs.last_mut() {
            *top &= (1u64 << rem) - 1;
        }
    }
}
