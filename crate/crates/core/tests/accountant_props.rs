use dpgan::accountant::{LogMomentLedger, NoiseEvent};
use proptest::prelude::*;

fn event() -> impl Strategy<Value = NoiseEvent> {
    (
        prop_oneof![Just(0.7), Just(1.1), Just(2.0)],
        prop_oneof![Just(0.004), Just(0.01), Just(0.03)],
        1u64..40,
    )
        .prop_map(|(s, q, c)| NoiseEvent::new(s, q, c))
}

fn ledger(events: &[NoiseEvent]) -> LogMomentLedger {
    let mut l = LogMomentLedger::new();
    for e in events {
        l.accumulate(*e).unwrap();
    }
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composition_is_order_free(events in prop::collection::vec(event(), 1..5), rot in 0usize..5) {
        let mut rotated = events.clone();
        rotated.rotate_left(rot % events.len());
        let (a, b) = (ledger(&events), ledger(&rotated));
        prop_assert_eq!(a.alpha(), b.alpha());
        prop_assert_eq!(a.step_count(), b.step_count());
    }

    #[test]
    fn accumulate_strictly_raises_every_moment(events in prop::collection::vec(event(), 1..4), next in event()) {
        let before = ledger(&events);
        let mut after = before.clone();
        after.accumulate(next).unwrap();
        for (x, y) in before.alpha().iter().zip(after.alpha()) {
            prop_assert!(y > x);
        }
    }

    #[test]
    fn delta_epsilon_queries_are_consistent(events in prop::collection::vec(event(), 1..4), exp in 3.0f64..9.0) {
        let l = ledger(&events);
        let delta = 10f64.powf(-exp);
        let eps = l.epsilon_for_delta(delta);
        prop_assert!(l.delta_for_epsilon(eps) <= delta * (1.0 + 1e-12));
    }

    #[test]
    fn export_round_trips(events in prop::collection::vec(event(), 0..4)) {
        let l = ledger(&events);
        let text = l.export();
        let back = LogMomentLedger::import(&text).unwrap();
        prop_assert_eq!(back.alpha(), l.alpha());
        prop_assert_eq!(back.export(), text);
    }
}
