//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of
//! `(seed, stream_id, counter)`: a ChaCha8 keystream is selected by the seed
//! and stream id and read at a word position derived from the counter. Work can
//! therefore be split across threads in any order without changing results.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fiber::TorusPoint;

/// Counters must satisfy `|index| < INDEX_LIMIT`.
pub const INDEX_LIMIT: i64 = 1 << 40;

/// Sequential generator for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

fn word_pos(index: i64) -> u128 {
    assert!(
        index.abs() < INDEX_LIMIT,
        "stream index {index} out of range"
    );
    ((index + INDEX_LIMIT) as u128) * 2
}

#[inline]
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[0, 1)` attached to an integer index of a stream.
pub fn uniform_at(seed: u64, stream_id: u64, index: i64) -> f64 {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos(word_pos(index));
    unit(rng.next_u64())
}

/// Reads `uniform_at(seed, stream_id, i)` for consecutive ascending `i`
/// without re-keying the cipher each time.
pub struct IndexedUniforms {
    rng: ChaCha8Rng,
    next: i64,
}

impl IndexedUniforms {
    pub fn starting_at(seed: u64, stream_id: u64, index: i64) -> Self {
        let mut rng = stream(seed, stream_id);
        rng.set_word_pos(word_pos(index));
        Self { rng, next: index }
    }

    /// Returns the index the value belongs to together with the value.
    pub fn next_indexed(&mut self) -> (i64, f64) {
        let i = self.next;
        self.next += 1;
        (i, unit(self.rng.next_u64()))
    }
}

/// Child seed for task `index` of a run keyed by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    stream(master, index).next_u64()
}

pub fn torus_point<R: Rng>(rng: &mut R) -> TorusPoint {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    TorusPoint::new(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexed_matches_random_access() {
        let mut it = IndexedUniforms::starting_at(7, 3, -5);
        for _ in 0..20 {
            let (i, u) = it.next_indexed();
            assert_eq!(u, uniform_at(7, 3, i));
        }
    }

    #[test]
    fn streams_differ() {
        assert_ne!(uniform_at(1, 0, 0), uniform_at(1, 1, 0));
        assert_ne!(uniform_at(1, 0, 0), uniform_at(2, 0, 0));
        assert_ne!(derive_seed(9, 0), derive_seed(9, 1));
    }
}
