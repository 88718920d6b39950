//! Fair bits and exact Bernoulli(2^-k) draws.
//!
//! Every coin the sketch flips goes through [`BitSource`]. The seeded
//! generator is ChaCha8 (the `rand_chacha` word stream) keyed by expanding a
//! 64-bit seed with SplitMix64; substreams select the ChaCha stream id, so
//! trial `i` depends only on `(master_seed, i)`. Bits are taken from each
//! 64-bit output word least-significant bit first.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

/// Name recorded in snapshots for [`RandomSource`].
pub const GENERATOR_NAME: &str = "chacha8-splitmix64";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RandomError {
    #[error("scripted bit source exhausted after {consumed} bits")]
    ScriptUnderrun { consumed: u64 },
}

/// A source of independent fair bits.
pub trait BitSource {
    /// One fair bit; `true` is a 1 bit.
    fn fair_coin(&mut self) -> Result<bool, RandomError>;

    fn bits_consumed(&self) -> u64;

    /// Returns `true` with probability exactly `2^-k`.
    ///
    /// Succeeds iff the next `k` bits are all 0, stopping at the first 1 bit,
    /// so the cost is `1 + (index of the first 1)` bits, capped at `k`.
    /// `k == 0` reads nothing.
    fn bernoulli_pow2(&mut self, k: u32) -> Result<bool, RandomError> {
        for _ in 0..k {
            if self.fair_coin()? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl<B: BitSource + ?Sized> BitSource for &mut B {
    fn fair_coin(&mut self) -> Result<bool, RandomError> {
        (**self).fair_coin()
    }

    fn bits_consumed(&self) -> u64 {
        (**self).bits_consumed()
    }

    fn bernoulli_pow2(&mut self, k: u32) -> Result<bool, RandomError> {
        (**self).bernoulli_pow2(k)
    }
}

/// SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn expand_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Seeded, reproducible bit source.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
    buffer: u64,
    buffered: u8,
    consumed: u64,
}

impl PartialEq for RandomSource {
    fn eq(&self, other: &Self) -> bool {
        self.state() == other.state()
    }
}

impl Eq for RandomSource {}

impl RandomSource {
    /// Equivalent to `derive_substream(seed, 0)`.
    pub fn new(seed: u64) -> Self {
        derive_substream(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.rng.get_stream()
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            key: self.rng.get_seed(),
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
            buffer: self.buffer,
            buffered_bits: self.buffered,
            bits_consumed: self.consumed,
        }
    }

    /// Rebuilds a source from a captured [`RngState`].
    ///
    /// Fails if the key does not belong to `state.seed` or the buffer holds
    /// bits beyond `buffered_bits`.
    pub fn from_state(state: &RngState) -> Option<Self> {
        if state.key != expand_key(state.seed) || state.buffered_bits > 64 {
            return None;
        }
        if state.buffered_bits < 64 && state.buffer >> state.buffered_bits != 0 {
            return None;
        }
        let mut rng = ChaCha8Rng::from_seed(state.key);
        rng.set_stream(state.stream);
        rng.set_word_pos(state.word_pos);
        Some(Self {
            seed: state.seed,
            rng,
            buffer: state.buffer,
            buffered: state.buffered_bits,
            consumed: state.bits_consumed,
        })
    }
}

impl BitSource for RandomSource {
    #[inline]
    fn fair_coin(&mut self) -> Result<bool, RandomError> {
        if self.buffered == 0 {
            self.buffer = self.rng.next_u64();
            self.buffered = 64;
        }
        let bit = self.buffer & 1 == 1;
        self.buffer >>= 1;
        self.buffered -= 1;
        self.consumed += 1;
        Ok(bit)
    }

    fn bits_consumed(&self) -> u64 {
        self.consumed
    }
}

/// Generator for workload construction (shuffles, Zipf draws): ChaCha8 keyed
/// by the SplitMix64 expansion of `seed`, on stream id `u64::MAX` so it never
/// coincides with a sketch substream of the same seed.
pub fn workload_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(expand_key(seed));
    rng.set_stream(u64::MAX);
    rng
}

/// Deterministic substream `index` of `master_seed`.
///
/// The ChaCha key is the SplitMix64 expansion of `master_seed`; `index` is the
/// ChaCha stream id.
pub fn derive_substream(master_seed: u64, index: u64) -> RandomSource {
    let mut rng = ChaCha8Rng::from_seed(expand_key(master_seed));
    rng.set_stream(index);
    RandomSource {
        seed: master_seed,
        rng,
        buffer: 0,
        buffered: 0,
        consumed: 0,
    }
}

/// Complete serialisable state of a [`RandomSource`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub key: [u8; 32],
    pub stream: u64,
    /// Position in the ChaCha word stream (32-bit words).
    pub word_pos: u128,
    /// Unread bits of the current output word, next bit in the LSB.
    pub buffer: u64,
    pub buffered_bits: u8,
    pub bits_consumed: u64,
}

/// Replays a fixed bit script; running off the end is an error.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptedSource {
    bits: Vec<bool>,
    cursor: usize,
}

impl ScriptedSource {
    pub fn new(bits: impl Into<Vec<bool>>) -> Self {
        Self {
            bits: bits.into(),
            cursor: 0,
        }
    }

    /// Script from 0/1 digits, e.g. `ScriptedSource::from_digits("0110")`.
    ///
    /// # Panics
    /// On any character other than `0` or `1`.
    pub fn from_digits(digits: &str) -> Self {
        Self::new(
            digits
                .chars()
                .map(|c| match c {
                    '0' => false,
                    '1' => true,
                    other => panic!("invalid script digit {other:?}"),
                })
                .collect::<Vec<_>>(),
        )
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }
}

impl BitSource for ScriptedSource {
    fn fair_coin(&mut self) -> Result<bool, RandomError> {
        match self.bits.get(self.cursor) {
            Some(&bit) => {
                self.cursor += 1;
                Ok(bit)
            }
            None => Err(RandomError::ScriptUnderrun {
                consumed: self.cursor as u64,
            }),
        }
    }

    fn bits_consumed(&self) -> u64 {
        self.cursor as u64
    }
}
