use std::sync::Arc;

use proptest::prelude::*;

use asim::vitality::{vital_events, EnergyParams, EnergyStore, GainCurve, VitalEventKind};
use asim::Exact;

#[derive(Debug, Clone)]
enum Op {
    Drain(bool),
    Recharge(f64, u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => any::<bool>().prop_map(Op::Drain),
        1 => (0.0..2.0f64, 0u64..4).prop_map(|(r, dt)| Op::Recharge(r, dt)),
    ]
}

fn params() -> Arc<EnergyParams<f64>> {
    Arc::new(
        EnergyParams::new(10.0, 0.1)
            .with_cost("move", 0.4)
            .with_thresholds(0.3, 0.1),
    )
}

/// Independent crossing oracle: which thresholds the charge passed downwards.
fn expected_events(before: f64, after: f64, capacity: f64) -> Vec<VitalEventKind> {
    let mut out = Vec::new();
    if before >= 0.3 * capacity && after < 0.3 * capacity {
        out.push(VitalEventKind::PowerLow);
    }
    if before >= 0.1 * capacity && after < 0.1 * capacity {
        out.push(VitalEventKind::PowerCritical);
    }
    if before > 0.0 && after == 0.0 {
        out.push(VitalEventKind::Died);
    }
    if before < capacity && after == capacity {
        out.push(VitalEventKind::Recharged);
    }
    out
}

proptest! {
    #[test]
    fn drain_matches_formula(charge in 0.0..10.0f64, base in 0.0..1.0f64, cost in 0.0..1.0f64) {
        let p = Arc::new(EnergyParams::new(10.0, base).with_cost("move", cost));
        let mut s = EnergyStore::new(p, charge).unwrap();
        if charge > 0.0 {
            s.drain("move").unwrap();
            let expected = (charge - base - cost).max(0.0);
            prop_assert!((s.charge() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn recharge_matches_formula(charge in 0.001..10.0f64, rate in 0.0..5.0f64, dt in 0u64..5) {
        let mut s = EnergyStore::new(params(), charge).unwrap();
        let full = s.recharge(rate, dt).unwrap();
        let expected = (charge + rate * dt as f64).min(10.0);
        prop_assert!((s.charge() - expected).abs() < 1e-12);
        prop_assert_eq!(full, s.charge() == 10.0);
    }

    #[test]
    fn charge_stays_clamped_and_ledger_balances(start in 0.01..10.0f64, ops in prop::collection::vec(op(), 1..400)) {
        let mut s = EnergyStore::new(params(), start).unwrap();
        let mut died = 0;
        for op in ops {
            let before = s.clone();
            let result = match op {
                Op::Drain(moving) => s.drain(if moving { "move" } else { "idle" }),
                Op::Recharge(r, dt) => s.recharge(r, dt).map(|_| ()),
            };
            if before.is_dead() {
                prop_assert!(result.is_err());
                prop_assert_eq!(&s, &before);
                continue;
            }
            result.unwrap();
            prop_assert!(s.charge() >= 0.0 && s.charge() <= s.capacity());
            let kinds: Vec<_> = vital_events(&before, &s, 0).into_iter().map(|e| e.kind).collect();
            prop_assert_eq!(&kinds, &expected_events(before.charge(), s.charge(), 10.0));
            died += kinds.iter().filter(|k| **k == VitalEventKind::Died).count();
            let l = s.ledger();
            prop_assert!((start - s.charge() - (l.total_drained - l.total_recharged)).abs() < 1e-9);
        }
        prop_assert!(died <= 1);
        prop_assert_eq!(died == 1, s.is_dead());
    }

    #[test]
    fn exact_ledger_balances_exactly(start in 1i64..1000, ops in prop::collection::vec((any::<bool>(), 0i64..60, 0u64..3), 1..300)) {
        let p = Arc::new(EnergyParams::new(Exact::from(10), Exact::new(1, 100)).with_cost("move", Exact::new(3, 100)));
        let start = Exact::new(start, 100);
        let mut s = EnergyStore::new(p, start).unwrap();
        for (drain, rate, dt) in ops {
            if s.is_dead() {
                break;
            }
            if drain {
                s.drain("move").unwrap();
            } else {
                s.recharge(Exact::new(rate, 100), dt).unwrap();
            }
            let l = s.ledger();
            prop_assert_eq!(start - s.charge(), l.total_drained - l.total_recharged);
            prop_assert!(l.drain_clamped >= Exact::from(0) && l.recharge_clamped >= Exact::from(0));
        }
    }

    #[test]
    fn gain_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64, kc in 0.01..0.99f64, kg in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for curve in [GainCurve::linear(), GainCurve::with_knee(kc, kg).unwrap()] {
            prop_assert!(curve.eval(lo) <= curve.eval(hi));
            prop_assert_eq!(curve.eval(0.0), 0.0);
            prop_assert_eq!(curve.eval(1.0), 1.0);
        }
    }

    #[test]
    fn gain_is_monotone_across_the_knee(kc in 0.01..0.99f64, kg in 0.0..=1.0f64, steps in 1u32..64) {
        let curve = GainCurve::with_knee(kc, kg).unwrap();
        let mut lo = kc;
        for _ in 0..steps {
            lo = f64::from_bits(lo.to_bits() - 1);
        }
        let mut prev = curve.eval(lo);
        let mut x = lo;
        for _ in 0..2 * steps {
            x = f64::from_bits(x.to_bits() + 1);
            let g = curve.eval(x);
            prop_assert!(prev <= g, "gain fell at {x}: {prev} > {g}");
            prev = g;
        }
    }

    #[test]
    fn event_stream_is_reproducible(charges in prop::collection::vec(0.0..10.0f64, 2..50)) {
        let run = || {
            charges
                .windows(2)
                .flat_map(|w| {
                    let a = EnergyStore::new(params(), w[0]).unwrap();
                    let b = EnergyStore::new(params(), w[1]).unwrap();
                    vital_events(&a, &b, 0)
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn single_precision_store_clamps() {
    let p = Arc::new(EnergyParams::new(1.0f32, 0.3).with_cost("move", 0.0));
    let mut s = EnergyStore::new(p, 1.0).unwrap();
    for _ in 0..4 {
        s.drain("move").unwrap();
        assert!(s.charge() >= 0.0);
    }
    assert!(s.is_dead());
}
