//! Workload generators with exact, known distinct counts.
//!
//! Every generator emits ids from `1..=f0`, each at least once. Shuffles use
//! `rand`'s Fisher-Yates over [`workload_rng`]. Zipf draws use inversion: a
//! cumulative weight table `w_i = i^-s` is built once and a uniform `f64` in
//! `[0, 1)` is located by binary search, so every draw costs one uniform.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::randomness::{splitmix64, workload_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamKind {
    /// `1, 2, ..., f0`, cycled until `length`.
    DistinctRun,
    /// Every id exactly `repeat` times, shuffled; `length = f0 * repeat`.
    RepeatedShuffle { repeat: u64 },
    /// One id, `length` times.
    SingleElement,
    /// Every id once plus `length - f0` Zipf(`exponent`) draws, shuffled.
    Zipf { exponent: f64 },
    /// Ids split into `blocks` contiguous ranges visited one after another;
    /// each block cycles its ids, shuffled within the block.
    Blocks { blocks: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    #[serde(flatten)]
    pub kind: StreamKind,
    pub f0: u64,
    pub length: u64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn distinct_run(f0: u64) -> Self {
        Self { kind: StreamKind::DistinctRun, f0, length: f0, seed: 0 }
    }

    pub fn repeated_shuffle(f0: u64, repeat: u64, seed: u64) -> Self {
        Self {
            kind: StreamKind::RepeatedShuffle { repeat },
            f0,
            length: f0.saturating_mul(repeat),
            seed,
        }
    }

    pub fn single_element(length: u64) -> Self {
        Self { kind: StreamKind::SingleElement, f0: 1, length, seed: 0 }
    }

    pub fn zipf(f0: u64, length: u64, exponent: f64, seed: u64) -> Self {
        Self { kind: StreamKind::Zipf { exponent }, f0, length, seed }
    }

    pub fn blocks(f0: u64, length: u64, blocks: u64, seed: u64) -> Self {
        Self { kind: StreamKind::Blocks { blocks }, f0, length, seed }
    }

    pub fn with_length(mut self, length: u64) -> Self {
        self.length = length;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same shape with the seed re-derived for trial `trial`.
    pub fn for_trial(&self, trial: u64) -> Self {
        let mut state = self.seed ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03);
        self.with_seed(splitmix64(&mut state))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            StreamKind::DistinctRun => "distinct_run",
            StreamKind::RepeatedShuffle { .. } => "repeated_shuffle",
            StreamKind::SingleElement => "single_element",
            StreamKind::Zipf { .. } => "zipf",
            StreamKind::Blocks { .. } => "blocks",
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.f0 == 0 {
            return Err(ParamError::new("f0", "must be positive"));
        }
        if self.length < self.f0 {
            return Err(ParamError::new("length", "must be at least f0"));
        }
        if usize::try_from(self.length).is_err() {
            return Err(ParamError::new("length", "too long for this platform"));
        }
        match self.kind {
            StreamKind::DistinctRun => {}
            StreamKind::RepeatedShuffle { repeat } => {
                if repeat == 0 {
                    return Err(ParamError::new("repeat", "must be positive"));
                }
                if self.f0.checked_mul(repeat) != Some(self.length) {
                    return Err(ParamError::new("length", "must equal f0 * repeat"));
                }
            }
            StreamKind::SingleElement => {
                if self.f0 != 1 {
                    return Err(ParamError::new("f0", "single_element streams have f0 = 1"));
                }
            }
            StreamKind::Zipf { exponent } => {
                if !(exponent.is_finite() && exponent >= 0.0) {
                    return Err(ParamError::new("zipf_exponent", "must be finite and non-negative"));
                }
            }
            StreamKind::Blocks { blocks } => {
                if blocks == 0 || blocks > self.f0 {
                    return Err(ParamError::new("blocks", "must be in 1..=f0"));
                }
            }
        }
        Ok(())
    }
}

/// `total` split into `parts` near-equal pieces, larger pieces first.
fn split_even(total: u64, parts: u64) -> impl Iterator<Item = u64> {
    (0..parts).map(move |j| total / parts + u64::from(j < total % parts))
}

pub fn generate_stream(spec: &StreamSpec) -> Result<Vec<u64>, ParamError> {
    spec.validate()?;
    let f0 = spec.f0;
    let length = spec.length as usize;
    let mut rng = workload_rng(spec.seed);
    let stream = match spec.kind {
        StreamKind::DistinctRun => (0..spec.length).map(|i| i % f0 + 1).collect(),
        StreamKind::SingleElement => vec![1; length],
        StreamKind::RepeatedShuffle { repeat } => {
            let mut v: Vec<u64> = (1..=f0)
                .flat_map(|id| std::iter::repeat_n(id, repeat as usize))
                .collect();
            v.shuffle(&mut rng);
            v
        }
        StreamKind::Zipf { exponent } => {
            let mut cumulative = Vec::with_capacity(f0 as usize);
            let mut total = 0.0;
            for i in 1..=f0 {
                total += (i as f64).powf(-exponent);
                cumulative.push(total);
            }
            let mut v: Vec<u64> = (1..=f0).collect();
            v.reserve(length - f0 as usize);
            for _ in f0..spec.length {
                let u: f64 = rng.gen::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= u).min(f0 as usize - 1);
                v.push(idx as u64 + 1);
            }
            v.shuffle(&mut rng);
            v
        }
        StreamKind::Blocks { blocks } => {
            let mut v = Vec::with_capacity(length);
            let mut first_id = 1;
            for (ids, len) in split_even(f0, blocks).zip(split_even(spec.length, blocks)) {
                let start = v.len();
                v.extend((0..len).map(|i| first_id + i % ids));
                v[start..].shuffle(&mut rng);
                first_id += ids;
            }
            v
        }
    };
    Ok(stream)
}
