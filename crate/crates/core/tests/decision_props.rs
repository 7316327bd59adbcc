mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use asim::decision::{ChoicePath, WeightTable};
use asim::Exact;

fn pair<S: asim::Scalar>(tol: S) -> WeightTable<S> {
    WeightTable::init(&ChoicePath::feeding_pair(), tol).unwrap()
}

fn replay<S: asim::Scalar>(table: &mut WeightTable<S>, path: &str, outcomes: &[bool]) {
    for &ok in outcomes {
        if ok {
            table.record_success(path).unwrap();
        } else {
            table.record_failure(path).unwrap();
        }
    }
}

#[test]
fn weights_stay_in_unit_interval_over_many_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100_000 {
        let mut t = pair(0.1f64);
        let len = rng.random_range(1..40);
        for _ in 0..len {
            let path = if rng.random_bool(0.5) {
                "signal"
            } else {
                "track"
            };
            if rng.random_bool(0.5) {
                t.record_success(path).unwrap();
            } else {
                t.record_failure(path).unwrap();
            }
        }
        for (_, e) in t.entries() {
            assert!((0.0..=1.0).contains(&e.positive) && (0.0..=1.0).contains(&e.negative));
        }
    }
}

#[test]
fn exact_history_is_representable() {
    let outcomes: Vec<bool> = (0..60).map(|i| i % 3 != 0).collect();
    let mut t = pair(Exact::new(1, 10));
    replay(&mut t, "signal", &outcomes);
    // Integer fold over the common denominator 2^60.
    let d: i128 = 1 << outcomes.len();
    let (p, n) = outcomes.iter().fold((0i128, 0i128), |(p, n), &ok| {
        if ok {
            ((p + d) / 2, n)
        } else {
            (p / 2, (n + d) / 2)
        }
    });
    let e = t.entry("signal").unwrap();
    let as_exact = |x: i128| Exact::new(x as i64, d as i64);
    assert_eq!((e.positive, e.negative), (as_exact(p), as_exact(n)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn updates_match_reference_fold(outcomes in prop::collection::vec(any::<bool>(), 0..50)) {
        let mut t = pair(0.1f64);
        replay(&mut t, "signal", &outcomes);
        let e = t.entry("signal").unwrap();
        let (p, n) = common::fold_outcomes(&outcomes);
        prop_assert_eq!((e.positive, e.negative), (p, n));
        prop_assert_eq!(e.successes as usize, outcomes.iter().filter(|o| **o).count());
        prop_assert_eq!(e.failures as usize, outcomes.iter().filter(|o| !**o).count());
    }

    #[test]
    fn singleton_tie_set_is_seed_independent(a in 0u32..=20, b in 0u32..=20, c in 0u32..=20, d in 0u32..=20, seed: u64) {
        let mut t = pair(0.1f64);
        t.set_weights("signal", a as f64 / 20.0, b as f64 / 20.0).unwrap();
        t.set_weights("track", c as f64 / 20.0, d as f64 / 20.0).unwrap();
        let ties = t.tie_set().unwrap();
        let all_zero = a + b + c + d == 0;
        if ties.len() == 1 && !all_zero {
            let first = t.choose(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let second = t.choose(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1))).unwrap();
            prop_assert_eq!(&first.chosen, &ties[0]);
            prop_assert_eq!(&first.chosen, &second.chosen);
            prop_assert_eq!(first.rng_draws, 0);
        } else {
            let trace = t.choose(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(ties.contains(&trace.chosen));
            prop_assert!(trace.tie_broken);
        }
    }

    #[test]
    fn shifting_both_channels_keeps_tie_set(
        w in prop::collection::vec((0i64..=10, 0i64..=10), 1..=3),
        shift in 0i64..=10,
    ) {
        let paths: Vec<_> = (0..w.len()).map(|i| ChoicePath::new(format!("p{i}"), ["h"], "g")).collect();
        let mut base = WeightTable::init(&paths, Exact::new(1, 10)).unwrap();
        let mut shifted = base.clone();
        for (i, &(p, n)) in w.iter().enumerate() {
            base.set_weights(&format!("p{i}"), Exact::new(p, 20), Exact::new(n, 20)).unwrap();
            shifted.set_weights(&format!("p{i}"), Exact::new(p + shift, 20), Exact::new(n + shift, 20)).unwrap();
        }
        prop_assert_eq!(base.tie_set().unwrap(), shifted.tie_set().unwrap());
        prop_assert_eq!(base.ranked(), shifted.ranked());
    }

    #[test]
    fn dominating_history_scores_at_least_as_high(
        history in prop::collection::vec(any::<bool>(), 0..30),
        flip in any::<prop::sample::Index>(),
    ) {
        // A matches B except for one extra success where B failed or did nothing.
        let mut a_hist = history.clone();
        let mut b_hist = history.clone();
        if let Some(i) = (!history.is_empty()).then(|| flip.index(history.len())) {
            if history[i] {
                b_hist.remove(i);
            } else {
                a_hist[i] = true;
                b_hist[i] = false;
            }
        } else {
            a_hist.push(true);
        }
        let mut t = pair(0.1f64);
        replay(&mut t, "signal", &a_hist);
        replay(&mut t, "track", &b_hist);
        prop_assert!(t.entry("signal").unwrap().score() >= t.entry("track").unwrap().score());
    }
}
