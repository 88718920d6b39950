use std::collections::BTreeSet;

use crate::error::ParamError;
use crate::randomness::{BitSource, RandomError};
use crate::sketch::Element;

/// Deviation, in standard errors, tolerated for each frequency in a family
/// of Monte Carlo checks.
pub const FAMILY_SIGMA: f64 = 4.0;

/// Highest level examined by [`level_independence_check`].
const MAX_CHECKED_LEVEL: usize = 4;

/// Minimum expected hit count for the rarest checked joint event.
const MIN_EXPECTED_JOINT_HITS: f64 = 10.0;

/// Index of the first 0 bit (`false`), or `bits.len() + 1` when there is none.
pub fn first_zero_index(bits: &[bool]) -> usize {
    bits.iter().position(|&b| !b).unwrap_or(bits.len() + 1)
}

/// Levels `Y_0..=Y_m` kept in lockstep: an element lands in `Y_k` iff its
/// latest draw starts with at least `k` one bits, so level `k` holds each
/// seen element with probability `2^-k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledLevels<E: Element> {
    levels: Vec<BTreeSet<E>>,
}

impl<E: Element> CoupledLevels<E> {
    /// Levels `0..=m`, all empty.
    pub fn new(m: usize) -> Self {
        Self {
            levels: vec![BTreeSet::new(); m + 1],
        }
    }

    pub fn m(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &BTreeSet<E> {
        &self.levels[k]
    }

    /// Draws `m + 1` fresh bits and re-places `element` on every level.
    pub fn step<R: BitSource>(&mut self, element: E, rng: &mut R) -> Result<(), RandomError> {
        let r = (0..self.levels.len())
            .map(|_| rng.fair_coin())
            .collect::<Result<Vec<_>, _>>()?;
        self.step_with_bits(element, &r);
        Ok(())
    }

    /// [`step`](Self::step) with an explicit bit array of length `m + 1`.
    pub fn step_with_bits(&mut self, element: E, r: &[bool]) {
        assert_eq!(r.len(), self.levels.len(), "need m + 1 bits");
        let fzi = first_zero_index(r);
        for (k, level) in self.levels.iter_mut().enumerate() {
            level.remove(&element);
            if k <= fzi {
                level.insert(element.clone());
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceParams {
    /// Distinct elements in the test stream, at most 8.
    pub n_distinct: usize,
    /// Stream bound; levels run `0..=m`, at most 12.
    pub m: usize,
    pub trials: u64,
    /// Times each element appears; the stream is `occurrences` passes over
    /// `0..n_distinct`.
    pub occurrences: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFrequency {
    pub first: usize,
    pub second: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub expected_marginal: f64,
    pub sigma_marginal: f64,
    pub marginals: Vec<f64>,
    pub expected_joint: f64,
    pub sigma_joint: f64,
    pub joints: Vec<PairFrequency>,
    /// Largest deviation in units of sigma (infinite for any deviation when
    /// sigma is 0).
    pub max_z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub params: IndependenceParams,
    pub levels: Vec<LevelStats>,
}

impl IndependenceReport {
    pub fn any_flagged(&self) -> bool {
        self.levels.iter().any(|l| l.flagged)
    }

    pub fn level(&self, k: usize) -> Option<&LevelStats> {
        self.levels.iter().find(|l| l.level == k)
    }
}

fn z_score(observed: f64, expected: f64, sigma: f64) -> f64 {
    let dev = (observed - expected).abs();
    if sigma > 0.0 {
        dev / sigma
    } else if dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Monte Carlo check that every element of the stream sits on level `k`
/// with frequency `2^-k` and every pair with frequency `2^-2k`, for levels
/// `0..=min(4, m)`.
pub fn level_independence_check<R: BitSource>(
    params: IndependenceParams,
    rng: &mut R,
) -> Result<IndependenceReport, ParamError> {
    let IndependenceParams {
        n_distinct,
        m,
        trials,
        occurrences,
    } = params;
    if !(1..=8).contains(&n_distinct) {
        return Err(ParamError::new("n_distinct", "must be in 1..=8"));
    }
    if !(1..=12).contains(&m) {
        return Err(ParamError::new("m", "must be in 1..=12"));
    }
    if occurrences == 0 || n_distinct * occurrences > m {
        return Err(ParamError::new(
            "occurrences",
            format!("stream of {n_distinct} x {occurrences} items must fit within m = {m}"),
        ));
    }
    let max_level = m.min(MAX_CHECKED_LEVEL);
    let rarest = 2f64.powi(-2 * max_level as i32);
    if (trials as f64) * rarest < MIN_EXPECTED_JOINT_HITS {
        let needed = (MIN_EXPECTED_JOINT_HITS / rarest).ceil();
        return Err(ParamError::new(
            "trials",
            format!("need at least {needed} trials for level {max_level}, got {trials}"),
        ));
    }

    let pairs: Vec<(usize, usize)> = (0..n_distinct)
        .flat_map(|a| (a + 1..n_distinct).map(move |b| (a, b)))
        .collect();
    let mut marginal_hits = vec![vec![0u64; n_distinct]; max_level + 1];
    let mut joint_hits = vec![vec![0u64; pairs.len()]; max_level + 1];

    for _ in 0..trials {
        let mut levels = CoupledLevels::new(m);
        for _ in 0..occurrences {
            for e in 0..n_distinct {
                levels
                    .step(e, rng)
                    .map_err(|err| ParamError::new("randomness", err.to_string()))?;
            }
        }
        for k in 0..=max_level {
            let level = levels.level(k);
            for (e, hits) in marginal_hits[k].iter_mut().enumerate() {
                *hits += u64::from(level.contains(&e));
            }
            for (hits, &(a, b)) in joint_hits[k].iter_mut().zip(&pairs) {
                *hits += u64::from(level.contains(&a) && level.contains(&b));
            }
        }
    }

    let n = trials as f64;
    let levels = (0..=max_level)
        .map(|k| {
            let expected_marginal = 2f64.powi(-(k as i32));
            let expected_joint = expected_marginal * expected_marginal;
            let sigma_marginal = (expected_marginal * (1.0 - expected_marginal) / n).sqrt();
            let sigma_joint = (expected_joint * (1.0 - expected_joint) / n).sqrt();
            let marginals: Vec<f64> = marginal_hits[k].iter().map(|&h| h as f64 / n).collect();
            let joints: Vec<PairFrequency> = pairs
                .iter()
                .zip(&joint_hits[k])
                .map(|(&(first, second), &h)| PairFrequency {
                    first,
                    second,
                    frequency: h as f64 / n,
                })
                .collect();
            let max_z = marginals
                .iter()
                .map(|&f| z_score(f, expected_marginal, sigma_marginal))
                .chain(
                    joints
                        .iter()
                        .map(|j| z_score(j.frequency, expected_joint, sigma_joint)),
                )
                .fold(0.0, f64::max);
            LevelStats {
                level: k,
                expected_marginal,
                sigma_marginal,
                marginals,
                expected_joint,
                sigma_joint,
                joints,
                max_z,
                flagged: max_z > FAMILY_SIGMA,
            }
        })
        .collect();

    Ok(IndependenceReport { params, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{derive_substream, RandomSource, ScriptedSource};

    #[test]
    fn first_zero_index_cases() {
        assert_eq!(first_zero_index(&[false, true, true]), 0);
        assert_eq!(first_zero_index(&[true, false, true]), 1);
        assert_eq!(first_zero_index(&[true, true, true]), 4);
    }

    #[test]
    fn all_ones_joins_every_level() {
        let mut c = CoupledLevels::new(3);
        c.step(9u64, &mut ScriptedSource::from_digits("1111")).unwrap();
        assert!((0..=3).all(|k| c.level(k).contains(&9)));
    }

    #[test]
    fn leading_zero_joins_only_level_zero() {
        let mut c = CoupledLevels::new(3);
        c.step(9u64, &mut ScriptedSource::from_digits("0111")).unwrap();
        assert!(c.level(0).contains(&9));
        assert!((1..=3).all(|k| !c.level(k).contains(&9)));
    }

    #[test]
    fn rearrival_is_replaced_not_accumulated() {
        let mut c = CoupledLevels::new(2);
        c.step_with_bits(1u64, &[true, true, true]);
        c.step_with_bits(1u64, &[true, false, false]);
        assert!(c.level(1).contains(&1));
        assert!(!c.level(2).contains(&1));
    }

    #[test]
    fn nesting_and_level_zero_is_exact() {
        let mut rng = RandomSource::new(5);
        let mut c = CoupledLevels::new(12);
        let mut seen = BTreeSet::new();
        for i in 0..12u64 {
            let e = (i * 5) % 7;
            c.step(e, &mut rng).unwrap();
            seen.insert(e);
            assert_eq!(c.level(0), &seen);
            for k in 0..12 {
                assert!(c.level(k + 1).is_subset(c.level(k)));
            }
        }
    }

    #[test]
    fn single_element_level_rates() {
        let trials = 100_000;
        let mut rng = RandomSource::new(17);
        let mut hits = [0u64; 4];
        for _ in 0..trials {
            let mut c = CoupledLevels::new(6);
            c.step(0u8, &mut rng).unwrap();
            for (k, h) in hits.iter_mut().enumerate() {
                *h += u64::from(c.level(k).contains(&0));
            }
        }
        for (k, &h) in hits.iter().enumerate() {
            let p = 2f64.powi(-(k as i32));
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let rate = h as f64 / trials as f64;
            assert!((rate - p).abs() <= 3.0 * sigma, "level {k}: {rate}");
        }
    }

    #[test]
    fn level_zero_is_exact_in_report() {
        let params = IndependenceParams { n_distinct: 3, m: 4, trials: 3000, occurrences: 1 };
        let report = level_independence_check(params, &mut RandomSource::new(1)).unwrap();
        let l0 = report.level(0).unwrap();
        assert!(l0.marginals.iter().all(|&f| f == 1.0));
        assert!(l0.joints.iter().all(|j| j.frequency == 1.0));
        assert_eq!(l0.max_z, 0.0);
    }

    #[test]
    fn duplicates_do_not_change_marginals() {
        let base = IndependenceParams { n_distinct: 4, m: 8, trials: 100_000, occurrences: 1 };
        let once = level_independence_check(base, &mut derive_substream(21, 0)).unwrap();
        let twice = level_independence_check(
            IndependenceParams { occurrences: 2, ..base },
            &mut derive_substream(21, 1),
        )
        .unwrap();
        assert!(!once.any_flagged());
        assert!(!twice.any_flagged());
        for k in 1..=3 {
            let (a, b) = (once.level(k).unwrap(), twice.level(k).unwrap());
            // difference of two independent estimates: sigma * sqrt(2)
            let tol = FAMILY_SIGMA * a.sigma_marginal * 2f64.sqrt();
            for (x, y) in a.marginals.iter().zip(&b.marginals) {
                assert!((x - y).abs() <= tol, "level {k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let ok = IndependenceParams { n_distinct: 4, m: 6, trials: 10_000, occurrences: 1 };
        let mut rng = RandomSource::new(0);
        let err = |p| level_independence_check(p, &mut RandomSource::new(0)).unwrap_err().field;
        assert_eq!(err(IndependenceParams { n_distinct: 9, ..ok }), "n_distinct");
        assert_eq!(err(IndependenceParams { m: 13, ..ok }), "m");
        assert_eq!(err(IndependenceParams { trials: 100, ..ok }), "trials");
        assert_eq!(err(IndependenceParams { occurrences: 2, ..ok }), "occurrences");
        assert!(level_independence_check(ok, &mut rng).is_ok());
    }
}
