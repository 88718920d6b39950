//! The sampling sketch.
//!
//! The sketch keeps a set of sampled elements and a halving count `k`; the
//! current sampling probability is `2^-k`, stored only as that exponent. Each
//! arriving element is first removed from the set and then re-inserted with
//! probability `2^-k`. When the set reaches `thresh` elements every member is
//! kept independently with probability 1/2 and `k` increases by one. If that
//! halving removes nothing the sketch outputs fail and stops.
//!
//! The estimate is `|samples| * 2^k`, computed exactly.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigUint;
use rustc_hash::FxHashSet;
use serde::{Serialize, Serializer};

use crate::error::{ParamError, SketchError, StreamError};
use crate::randomness::BitSource;
use crate::thresh::compute_thresh;

/// A stream item. Only equality matters for estimation; the ordering fixes
/// which coin each sample receives during a halving so that runs and
/// snapshot resumes are reproducible.
pub trait Element: Clone + Eq + Hash + Ord {}

impl<T: Clone + Eq + Hash + Ord> Element for T {}

/// Immutable parameters of one estimation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    epsilon: f64,
    delta: f64,
    stream_bound: u64,
    thresh: u64,
    thresh_overridden: bool,
}

impl SketchConfig {
    pub fn new(epsilon: f64, delta: f64, stream_bound: u64) -> Result<Self, ParamError> {
        let thresh = compute_thresh(epsilon, delta, stream_bound)?;
        Ok(Self {
            epsilon,
            delta,
            stream_bound,
            thresh,
            thresh_overridden: false,
        })
    }

    /// Replaces `thresh` with a smaller test value. The accuracy and fail
    /// guarantees no longer hold for the resulting config.
    pub fn with_thresh_override(mut self, thresh: u64) -> Result<Self, ParamError> {
        if thresh < 2 {
            return Err(ParamError::new("thresh_override", "must be at least 2"));
        }
        let formula = compute_thresh(self.epsilon, self.delta, self.stream_bound)?;
        if thresh > formula {
            return Err(ParamError::new(
                "thresh_override",
                format!("may only lower thresh (formula gives {formula}, got {thresh})"),
            ));
        }
        self.thresh = thresh;
        self.thresh_overridden = true;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn stream_bound(&self) -> u64 {
        self.stream_bound
    }

    pub fn thresh(&self) -> u64 {
        self.thresh
    }

    pub fn thresh_overridden(&self) -> bool {
        self.thresh_overridden
    }

    /// `false` when `thresh` was overridden.
    pub fn guarantees_hold(&self) -> bool {
        !self.thresh_overridden
    }

    /// `log2(m * 2^-thresh)`, the exponent of the union bound on the fail
    /// probability of one run.
    pub fn fail_bound_log2(&self) -> f64 {
        (self.stream_bound as f64).log2() - self.thresh as f64
    }
}

/// `sample_count * 2^halvings`, held exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaledCount {
    pub sample_count: u64,
    pub halvings: u32,
}

impl ScaledCount {
    /// The value when it fits in a `u128`.
    pub fn to_u128(&self) -> Option<u128> {
        if self.sample_count == 0 {
            return Some(0);
        }
        // bit length of the count plus the shift must not exceed 128
        let headroom = self.sample_count.leading_zeros() + 64;
        (self.halvings <= headroom).then(|| u128::from(self.sample_count) << self.halvings)
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from(self.sample_count) << self.halvings
    }

    pub fn to_f64(&self) -> f64 {
        self.sample_count as f64 * 2f64.powi(self.halvings as i32)
    }
}

impl fmt::Display for ScaledCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_u128() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}", self.to_biguint()),
        }
    }
}

/// Serialises as a JSON number when the value fits in `u64`, otherwise as a
/// decimal string.
impl Serialize for ScaledCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.to_u128().and_then(|v| u64::try_from(v).ok()) {
            Some(v) => serializer.serialize_u64(v),
            None => serializer.collect_str(self),
        }
    }
}

/// Output of [`SketchState::estimate`]: a value, or the fail marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimate {
    Value(ScaledCount),
    Fail,
}

impl Estimate {
    pub fn value(&self) -> Option<ScaledCount> {
        match self {
            Estimate::Value(v) => Some(*v),
            Estimate::Fail => None,
        }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Estimate::Fail)
    }
}

/// Fail serialises as `null`.
impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Estimate::Value(v) => v.serialize(serializer),
            Estimate::Fail => serializer.serialize_none(),
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimate::Value(v) => v.fmt(f),
            Estimate::Fail => f.write_str("⊥"),
        }
    }
}

/// How a call to [`SketchState::process_stream`] ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOutcome {
    Completed,
    /// The sketch failed while processing the item at this 1-based position.
    Failed { index: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchState<E: Element> {
    config: SketchConfig,
    samples: FxHashSet<E>,
    halvings: u32,
    items_processed: u64,
    peak_samples: u64,
    failed: bool,
}

impl<E: Element> SketchState<E> {
    /// Fresh sketch: no samples and sampling probability 1.
    pub fn new(config: SketchConfig) -> Self {
        Self {
            config,
            samples: FxHashSet::default(),
            halvings: 0,
            items_processed: 0,
            peak_samples: 0,
            failed: false,
        }
    }

    /// Rebuilds a non-failed state, checking every state invariant.
    pub fn from_parts(
        config: SketchConfig,
        samples: impl IntoIterator<Item = E>,
        halvings: u32,
        items_processed: u64,
        peak_samples: u64,
    ) -> Result<Self, ParamError> {
        let samples: FxHashSet<E> = samples.into_iter().collect();
        let len = samples.len() as u64;
        if len >= config.thresh {
            return Err(ParamError::new("samples", "sample set must be below thresh"));
        }
        if items_processed > config.stream_bound {
            return Err(ParamError::new("items_processed", "exceeds stream bound"));
        }
        if u64::from(halvings) > items_processed {
            return Err(ParamError::new("halvings", "exceeds items processed"));
        }
        if len > items_processed {
            return Err(ParamError::new("samples", "more samples than items processed"));
        }
        if peak_samples < len || peak_samples > config.thresh {
            return Err(ParamError::new("peak_samples", "outside [|samples|, thresh]"));
        }
        Ok(Self {
            config,
            samples,
            halvings,
            items_processed,
            peak_samples,
            failed: false,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn halvings(&self) -> u32 {
        self.halvings
    }

    pub fn items_processed(&self) -> u64 {
        self.items_processed
    }

    /// Largest sample-set size reached at any instant, including the moment
    /// a halving is triggered.
    pub fn peak_samples(&self) -> u64 {
        self.peak_samples
    }

    pub fn is_failed(&self) -> bool {
        self.failed
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn contains(&self, element: &E) -> bool {
        self.samples.contains(element)
    }

    pub fn samples(&self) -> impl Iterator<Item = &E> {
        self.samples.iter()
    }

    /// Samples in ascending order.
    pub fn sorted_samples(&self) -> Vec<&E> {
        let mut v: Vec<&E> = self.samples.iter().collect();
        v.sort_unstable();
        v
    }

    /// Processes one stream item.
    ///
    /// All coins are drawn before the state is touched, so a randomness
    /// error leaves the sketch unchanged. Halving coins go to the samples in
    /// ascending order.
    pub fn process<R: BitSource>(&mut self, element: E, rng: &mut R) -> Result<(), SketchError> {
        if self.failed {
            return Err(SketchError::AlreadyFailed);
        }
        if self.items_processed >= self.config.stream_bound {
            return Err(SketchError::BoundExceeded {
                bound: self.config.stream_bound,
            });
        }
        debug_assert!((self.samples.len() as u64) < self.config.thresh);

        let insert = rng.bernoulli_pow2(self.halvings)?;
        let present = self.samples.contains(&element);
        let len_after = self.samples.len() - usize::from(present) + usize::from(insert);

        let halving = if len_after as u64 == self.config.thresh {
            let mut members: Vec<E> = self
                .samples
                .iter()
                .filter(|s| **s != element)
                .cloned()
                .collect();
            if insert {
                members.push(element.clone());
            }
            members.sort_unstable();
            let mut dropped = Vec::new();
            for member in members {
                if !rng.bernoulli_pow2(1)? {
                    dropped.push(member);
                }
            }
            Some(dropped)
        } else {
            None
        };

        self.samples.remove(&element);
        if insert {
            self.samples.insert(element);
        }
        self.items_processed += 1;
        self.peak_samples = self.peak_samples.max(self.samples.len() as u64);
        assert!(self.samples.len() as u64 <= self.config.thresh);

        if let Some(dropped) = halving {
            for d in &dropped {
                self.samples.remove(d);
            }
            self.halvings += 1;
            if self.samples.len() as u64 == self.config.thresh {
                self.failed = true;
            }
        }
        Ok(())
    }

    /// Folds [`process`](Self::process) over `elements`, stopping at the first
    /// failure. Errors carry the 1-based position in the overall stream.
    pub fn process_stream<I, R>(&mut self, elements: I, rng: &mut R) -> Result<StreamOutcome, StreamError>
    where
        I: IntoIterator<Item = E>,
        R: BitSource,
    {
        for element in elements {
            let index = self.items_processed + 1;
            self.process(element, rng)
                .map_err(|source| StreamError { index, source })?;
            if self.failed {
                return Ok(StreamOutcome::Failed { index });
            }
        }
        Ok(StreamOutcome::Completed)
    }

    /// `|samples| * 2^halvings`, or [`Estimate::Fail`].
    pub fn estimate(&self) -> Estimate {
        if self.failed {
            Estimate::Fail
        } else {
            Estimate::Value(ScaledCount {
                sample_count: self.samples.len() as u64,
                halvings: self.halvings,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{RandomSource, ScriptedSource};

    fn config() -> SketchConfig {
        SketchConfig::new(0.5, 0.5, 1000).unwrap()
    }

    fn tiny(thresh: u64) -> SketchConfig {
        SketchConfig::new(0.5, 0.5, 1000)
            .unwrap()
            .with_thresh_override(thresh)
            .unwrap()
    }

    fn sorted(state: &SketchState<u64>) -> Vec<u64> {
        state.sorted_samples().into_iter().copied().collect()
    }

    #[test]
    fn fresh_state() {
        let a = SketchState::<u64>::new(config());
        assert_eq!(a.sample_count(), 0);
        assert_eq!(a.halvings(), 0);
        assert_eq!(a.estimate().value().unwrap().to_u128(), Some(0));
        assert_eq!(a, SketchState::new(config()));
    }

    #[test]
    fn probability_one_regime_inserts_everything() {
        let mut s = SketchState::new(SketchConfig::new(0.5, 0.5, 1).unwrap());
        assert_eq!(s.config().thresh(), 192);
        let mut s2 = SketchState::new(config());
        let mut rng = ScriptedSource::default();
        s2.process_stream([1u64, 2, 3, 4, 5], &mut rng).unwrap();
        assert_eq!(sorted(&s2), vec![1, 2, 3, 4, 5]);
        assert_eq!(s2.halvings(), 0);
        assert_eq!(rng.bits_consumed(), 0);
        s.process(9, &mut rng).unwrap();
        assert_eq!(
            s.process(9, &mut rng),
            Err(SketchError::BoundExceeded { bound: 1 })
        );
    }

    #[test]
    fn duplicates_are_idempotent_at_p_one() {
        let mut rng = ScriptedSource::default();
        let mut once = SketchState::new(config());
        once.process(7u64, &mut rng).unwrap();
        let mut thrice = SketchState::new(config());
        thrice.process_stream([7u64, 7, 7], &mut rng).unwrap();
        assert_eq!(sorted(&thrice), vec![7]);
        assert_eq!(once.sorted_samples(), thrice.sorted_samples());
        assert_eq!(once.halvings(), thrice.halvings());
    }

    #[test]
    fn scripted_halving_keeps_one() {
        // insertions at p = 1 read nothing; then coins for samples 1, 2 in order
        let mut rng = ScriptedSource::from_digits("01");
        let mut s = SketchState::new(tiny(2));
        assert_eq!(s.process_stream([1u64, 2], &mut rng).unwrap(), StreamOutcome::Completed);
        assert_eq!(sorted(&s), vec![1]);
        assert_eq!(s.halvings(), 1);
        assert!(!s.is_failed());
        assert_eq!(s.peak_samples(), 2);
        assert_eq!(s.estimate(), Estimate::Value(ScaledCount { sample_count: 1, halvings: 1 }));
    }

    #[test]
    fn full_retention_fails() {
        let mut rng = ScriptedSource::from_digits("00");
        let mut s = SketchState::new(tiny(2));
        assert_eq!(
            s.process_stream([1u64, 2, 3], &mut rng).unwrap(),
            StreamOutcome::Failed { index: 2 }
        );
        assert!(s.is_failed());
        assert_eq!(s.halvings(), 1);
        assert_eq!(s.estimate(), Estimate::Fail);
        assert_eq!(s.estimate().to_string(), "⊥");
        assert_eq!(s.process(3, &mut rng), Err(SketchError::AlreadyFailed));
    }

    #[test]
    fn remove_happens_before_resample() {
        // thresh 2: {1,2} halves to {1} (coins 0,1), k = 1.
        // Re-arrival of 1 with a failed insert coin (1) must remove it.
        let mut rng = ScriptedSource::from_digits("011");
        let mut s = SketchState::new(tiny(2));
        s.process_stream([1u64, 2, 1], &mut rng).unwrap();
        assert!(sorted(&s).is_empty());
        assert_eq!(rng.remaining(), 0);
    }

    #[test]
    fn underrun_leaves_state_untouched() {
        let mut rng = ScriptedSource::from_digits("0");
        let mut s = SketchState::new(tiny(2));
        s.process(1u64, &mut rng).unwrap();
        let before = s.clone();
        let err = s.process_stream([2u64], &mut rng).unwrap_err();
        assert_eq!(err.index, 2);
        assert!(matches!(err.source, SketchError::Random(_)));
        assert_eq!(s, before);
    }

    #[test]
    fn scaled_count_display_and_overflow() {
        let v = ScaledCount { sample_count: 5, halvings: 2 };
        assert_eq!(v.to_u128(), Some(20));
        assert_eq!(v.to_string(), "20");
        let huge = ScaledCount { sample_count: 3, halvings: 200 };
        assert_eq!(huge.to_u128(), None);
        assert_eq!(huge.to_biguint(), BigUint::from(3u8) << 200u32);
        let edge = ScaledCount { sample_count: 1, halvings: 127 };
        assert_eq!(edge.to_u128(), Some(1u128 << 127));
    }

    #[test]
    fn override_only_lowers() {
        assert!(config().with_thresh_override(1).is_err());
        assert!(config().with_thresh_override(10_000).is_err());
        let c = config().with_thresh_override(5).unwrap();
        assert!(!c.guarantees_hold());
        assert!(config().guarantees_hold());
    }

    #[test]
    fn from_parts_validates() {
        let c = tiny(4);
        assert!(SketchState::from_parts(c, [1u64, 2, 3], 1, 10, 4).is_ok());
        assert!(SketchState::from_parts(c, [1u64, 2, 3, 4], 1, 10, 4).is_err());
        assert!(SketchState::from_parts(c, [1u64], 11, 10, 4).is_err());
        assert!(SketchState::from_parts(c, [1u64], 1, 10, 5).is_err());
    }

    #[test]
    fn seeded_runs_are_deterministic() {
        let c = SketchConfig::new(0.5, 0.5, 5000).unwrap();
        let run = || {
            let mut s = SketchState::new(c);
            let mut rng = RandomSource::new(42);
            s.process_stream(0..5000u64, &mut rng).unwrap();
            (s, rng)
        };
        let (a, ra) = run();
        let (b, rb) = run();
        assert!(a.halvings() > 0);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
