use std::collections::BTreeSet;

use f0est_core::io::{snapshot_read, snapshot_write};
use f0est_core::oracles::{exact_f0, NoFailSketch};
use f0est_core::randomness::{derive_substream, BitSource, RandomSource, ScriptedSource};
use f0est_core::{SketchConfig, SketchState, StreamOutcome};
use proptest::prelude::*;

fn small_config(thresh: u64) -> SketchConfig {
    SketchConfig::new(0.5, 0.5, 10_000)
        .unwrap()
        .with_thresh_override(thresh)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn stepwise_state_invariants(
        stream in proptest::collection::vec(0u64..40, 0..400),
        thresh in 2u64..12,
        seed in any::<u64>(),
    ) {
        let config = small_config(thresh);
        let mut state = SketchState::new(config);
        let mut rng = RandomSource::new(seed);
        let mut seen = BTreeSet::new();
        for &e in &stream {
            prop_assert!((state.sample_count() as u64) < thresh);
            let before = state.halvings();
            state.process(e, &mut rng).unwrap();
            seen.insert(e);
            let len = state.sample_count() as u64;
            prop_assert!(len <= thresh);
            prop_assert!(state.peak_samples() <= thresh);
            prop_assert!(state.halvings() == before || state.halvings() == before + 1);
            prop_assert!(u64::from(state.halvings()) <= state.items_processed());
            prop_assert!(state.samples().all(|s| seen.contains(s)));
            if state.is_failed() {
                prop_assert_eq!(len, thresh);
                break;
            }
            prop_assert!(len < thresh);
        }
    }

    #[test]
    fn exact_regime_is_deterministic_and_free(
        stream in proptest::collection::vec(any::<u64>(), 0..150),
        seed in any::<u64>(),
    ) {
        // thresh for these parameters is 719 > any F0 here
        let config = SketchConfig::new(0.5, 0.5, 2000).unwrap();
        let mut state = SketchState::new(config);
        let mut rng = RandomSource::new(seed);
        prop_assert_eq!(state.process_stream(stream.iter().copied(), &mut rng).unwrap(), StreamOutcome::Completed);
        let distinct: BTreeSet<u64> = stream.iter().copied().collect();
        let samples: BTreeSet<u64> = state.samples().copied().collect();
        prop_assert_eq!(&samples, &distinct);
        prop_assert_eq!(state.halvings(), 0);
        prop_assert_eq!(rng.bits_consumed(), 0);
        prop_assert_eq!(
            state.estimate().value().unwrap().to_u128(),
            Some(u128::from(exact_f0(stream.iter())))
        );
    }

    #[test]
    fn same_seed_same_state(
        stream in proptest::collection::vec(0u64..200, 0..600),
        seed in any::<u64>(),
    ) {
        let config = small_config(16);
        let run = || {
            let mut s = SketchState::new(config);
            let mut r = RandomSource::new(seed);
            let out = s.process_stream(stream.iter().copied(), &mut r).unwrap();
            (s, r, out)
        };
        let (a, ra, oa) = run();
        let (b, rb, ob) = run();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ra, rb);
        prop_assert_eq!(oa, ob);
    }

    #[test]
    fn duplicate_suffix_is_stable(x in any::<u64>(), copies in 1usize..50) {
        let config = SketchConfig::new(0.5, 0.5, 100).unwrap();
        let mut rng = ScriptedSource::default();
        let mut once = SketchState::new(config);
        once.process(x, &mut rng).unwrap();
        let mut many = SketchState::new(config);
        many.process_stream(std::iter::repeat_n(x, copies), &mut rng).unwrap();
        prop_assert_eq!(once.sorted_samples(), many.sorted_samples());
        prop_assert_eq!(once.halvings(), many.halvings());
        prop_assert_eq!(once.estimate(), many.estimate());
    }

    #[test]
    fn snapshot_bytes_are_canonical(
        stream in proptest::collection::vec(0u64..5000, 0..3000),
        seed in any::<u64>(),
    ) {
        let config = SketchConfig::new(0.5, 0.5, 5000).unwrap();
        let mut state = SketchState::new(config);
        let mut rng = RandomSource::new(seed);
        state.process_stream(stream, &mut rng).unwrap();
        let bytes = snapshot_write(&state, &rng).unwrap();
        let (s2, r2) = snapshot_read::<u64>(&bytes).unwrap();
        prop_assert_eq!(snapshot_write(&s2, &r2).unwrap(), bytes);
        prop_assert_eq!(s2, state);
    }
}

#[test]
fn remove_then_resample_order_matters() {
    // After {1,2} halves to {1} (k = 1), a re-arrival of 1 whose insertion
    // coin fails leaves it out. Resampling without the removal would keep it.
    let mut s = SketchState::new(small_config(2));
    let mut rng = ScriptedSource::from_digits("011");
    s.process_stream([1u64, 2, 1], &mut rng).unwrap();
    assert_eq!(s.sample_count(), 0);
}

#[test]
fn midpoint_resume_matches_uninterrupted_run() {
    let config = SketchConfig::new(0.2, 0.1, 200_000).unwrap();
    let stream: Vec<u64> = (0..150_000u64).map(|i| (i * 2_654_435_761) % 60_000).collect();
    let (left, right) = stream.split_at(stream.len() / 2);

    let mut whole = SketchState::new(config);
    let mut whole_rng = RandomSource::new(2024);
    whole.process_stream(stream.iter().copied(), &mut whole_rng).unwrap();
    assert!(whole.halvings() > 0);

    let mut first = SketchState::new(config);
    let mut first_rng = RandomSource::new(2024);
    first.process_stream(left.iter().copied(), &mut first_rng).unwrap();
    let bytes = snapshot_write(&first, &first_rng).unwrap();
    drop((first, first_rng));

    let (mut resumed, mut resumed_rng) = snapshot_read::<u64>(&bytes).unwrap();
    resumed.process_stream(right.iter().copied(), &mut resumed_rng).unwrap();
    assert_eq!(resumed, whole);
    assert_eq!(resumed_rng, whole_rng);
    assert_eq!(
        snapshot_write(&resumed, &resumed_rng).unwrap(),
        snapshot_write(&whole, &whole_rng).unwrap()
    );
}

/// All four keep/drop coin pairs for the halving of {1, 2} at thresh 2.
#[test]
fn forced_halving_outcomes_enumerated() {
    let mut outcomes = Vec::new();
    for script in ["00", "01", "10", "11"] {
        let mut s = SketchState::new(small_config(2));
        s.process_stream([1u64, 2], &mut ScriptedSource::from_digits(script)).unwrap();
        outcomes.push((script, s.sorted_samples().into_iter().copied().collect::<Vec<_>>(), s.halvings(), s.is_failed()));
    }
    assert_eq!(
        outcomes,
        vec![
            ("00", vec![1, 2], 1, true),
            ("01", vec![1], 1, false),
            ("10", vec![2], 1, false),
            ("11", vec![], 1, false),
        ]
    );
}

#[test]
fn nofail_agrees_with_sketch_on_coupled_seeds() {
    let config = SketchConfig::new(0.3, 0.3, 50_000).unwrap();
    let stream: Vec<u64> = (0..50_000u64).map(|i| (i * 48_271) % 20_000).collect();
    for seed in 0..5 {
        let mut core = SketchState::new(config);
        core.process_stream(stream.iter().copied(), &mut derive_substream(seed, 9)).unwrap();
        assert!(!core.is_failed());
        let mut nf = NoFailSketch::new(config);
        let mut rng = derive_substream(seed, 9);
        for &e in &stream {
            nf.process(e, &mut rng).unwrap();
        }
        assert!(nf.same_as(&core));
        assert!(core.halvings() > 0);
    }
}
