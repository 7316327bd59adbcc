use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use asim::decision::{ChoicePath, PathId, WeightTable};
use asim::fsm::feeding::{self, FeedingContext, FeedingState, EVENTS};
use asim::fsm::text::parse_machine;
use asim::fsm::{
    expiry_event, FsmError, MachineBuilder, MachineContext, MachineInstance, StateSpec,
    TransitionSpec,
};

/// Transition log for an event sequence from zeroed weights.
fn log(events: &[usize], seed: u64) -> Vec<(String, String, String)> {
    let mut inst = MachineInstance::new(Arc::new(feeding::build_feeding_machine()));
    let mut weights = WeightTable::init(&ChoicePath::feeding_pair(), 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FeedingState::default();
    let mut out = Vec::new();
    for &e in events {
        let mut ctx = FeedingContext::new(&mut weights, &mut rng, &mut state);
        for f in inst.dispatch(EVENTS[e], &mut ctx).unwrap() {
            out.push((f.source, f.target, f.trigger));
        }
        assert!(inst.configuration_is_valid());
    }
    out
}

proptest! {
    #[test]
    fn identical_inputs_give_identical_logs(events in prop::collection::vec(0..EVENTS.len(), 0..60), seed: u64) {
        prop_assert_eq!(log(&events, seed), log(&events, seed));
    }

    #[test]
    fn lost_exit_is_followed_by_one_power_lower(events in prop::collection::vec(0..EVENTS.len(), 0..60), seed: u64) {
        let mut inst = MachineInstance::new(Arc::new(feeding::build_feeding_machine()));
        let mut weights = WeightTable::init(&ChoicePath::feeding_pair(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = FeedingState::default();
        for e in events {
            let mut ctx = FeedingContext::new(&mut weights, &mut rng, &mut state);
            let fired = inst.dispatch(EVENTS[e], &mut ctx).unwrap();
            let exits = fired.iter().filter(|f| f.target == format!("exit:{}", feeding::LOST_SIGNAL_TRACK)).count();
            let lowered = inst.take_emitted().iter().filter(|x| *x == feeding::POWER_LOWER).count();
            prop_assert_eq!(exits, lowered);
        }
    }

    #[test]
    fn text_definition_behaves_like_builder(events in prop::collection::vec(0..EVENTS.len(), 0..30)) {
        let built = Arc::new(feeding::build_feeding_machine());
        let parsed = Arc::new(parse_machine(feeding::FEEDING_MACHINE_TEXT).unwrap());
        let mut a = MachineInstance::new(built);
        let mut b = MachineInstance::new(parsed);
        let mut state = (FeedingState::default(), FeedingState::default());
        let mut weights = (
            WeightTable::init(&ChoicePath::feeding_pair(), 0.1).unwrap(),
            WeightTable::init(&ChoicePath::feeding_pair(), 0.1).unwrap(),
        );
        let mut rngs = (ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(1));
        for e in events {
            a.dispatch(EVENTS[e], &mut FeedingContext::new(&mut weights.0, &mut rngs.0, &mut state.0)).unwrap();
            b.dispatch(EVENTS[e], &mut FeedingContext::new(&mut weights.1, &mut rngs.1, &mut state.1)).unwrap();
            prop_assert_eq!(a.active_path(), b.active_path());
        }
    }
}

struct Inert;

impl MachineContext for Inert {
    type Trace = ();
    fn is_dead(&self) -> bool {
        false
    }
    fn guard(&mut self, name: &str) -> Result<bool, FsmError> {
        Err(FsmError::UnknownGuard(name.into()))
    }
    fn action(&mut self, _: &str, _: &mut Vec<String>) -> Result<(), FsmError> {
        Ok(())
    }
    fn decide(&mut self, point: &str, _: &[PathId]) -> Result<(PathId, ()), FsmError> {
        Err(FsmError::UnknownGuard(point.into()))
    }
}

proptest! {
    #[test]
    fn due_timers_fire_by_deadline_then_name(ticks in prop::collection::vec(1u64..6, 1..6), now in 0u64..8) {
        let mut spec = StateSpec::new("armed");
        let mut builder = MachineBuilder::new("timers").initial("idle").state(StateSpec::new("idle"));
        for i in 0..ticks.len() {
            spec = spec.arm(format!("t{i}"));
        }
        builder = builder.state(spec).transition(TransitionSpec::on("idle", "go").to("armed"));
        for (i, &t) in ticks.iter().enumerate() {
            builder = builder.timer(format!("t{i}"), t);
        }
        let mut inst = MachineInstance::new(Arc::new(builder.build().unwrap()));
        inst.dispatch("go", &mut Inert).unwrap();
        let fired = inst.tick_timers(now).unwrap();
        let mut expected: Vec<(u64, String)> = ticks
            .iter()
            .enumerate()
            .filter(|(_, &t)| t <= now)
            .map(|(i, &t)| (t, format!("t{i}")))
            .collect();
        expected.sort();
        let expected: Vec<String> = expected.into_iter().map(|(_, n)| expiry_event(&n)).collect();
        prop_assert_eq!(fired, expected);
        prop_assert_eq!(inst.pending(), ticks.iter().filter(|&&t| t <= now).count());
    }
}
