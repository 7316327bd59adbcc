//! The feeding chart: sense low power, locate a charging source, pick a path
//! by weighted choice, pursue it with fallback, and recharge.

use std::sync::Arc;

use rand::Rng;

use super::{FsmError, MachineBuilder, MachineContext, StateMachine, StateSpec, TransitionSpec};
use crate::decision::{DecisionTrace, PathId, WeightTable};
use crate::scalar::Scalar;

pub const INITIAL: &str = "Initial";
pub const LOCATE_FOOD: &str = "locate_food";
pub const FIND_CHARGING_STATION: &str = "find_charging_station";
pub const FCS_INITIAL: &str = "find_charging_station.Initial";
pub const FOLLOW_IR: &str = "follow_IR_signal";
pub const FOLLOW_TRACK: &str = "follow_track_path";
pub const RECHARGE: &str = "recharge";
pub const FINAL: &str = "Final";

pub const POWER_LOW: &str = "power_low";
pub const SIGNAL_FOUND: &str = "signal_found";
pub const SIGNAL_LOST: &str = "signal_lost";
pub const TRACK_FOUND: &str = "track_found";
pub const TRACK_LOST: &str = "track_lost";
pub const ENGAGE: &str = "engage";
pub const WAIT_TIMER: &str = "waitTimer";
pub const WAIT_TIMER_EXPIRED: &str = "waitTimer_expired";

/// Output event raised when a feeding cycle fails.
pub const POWER_LOWER: &str = "power_lower";

pub const LOCATED: &str = "located";
pub const LOST_SIGNAL_TRACK: &str = "lost_signal_track";
pub const DECISION_POINT: &str = "feeding";

pub const SIGNAL: &str = "signal";
pub const TRACK: &str = "track";

pub const DEFAULT_WAIT_TICKS: u64 = 50;

/// Every event the chart reacts to.
pub const EVENTS: [&str; 7] = [
    POWER_LOW,
    SIGNAL_FOUND,
    SIGNAL_LOST,
    TRACK_FOUND,
    TRACK_LOST,
    ENGAGE,
    WAIT_TIMER_EXPIRED,
];

/// The chart in the declarative text format, with the default wait.
pub const FEEDING_MACHINE_TEXT: &str = include_str!("feeding.machine");

pub fn build_feeding_machine() -> StateMachine {
    build_feeding_machine_with(DEFAULT_WAIT_TICKS)
}

pub fn build_feeding_machine_with(wait_ticks: u64) -> StateMachine {
    MachineBuilder::new("feeding")
        .initial(INITIAL)
        .state(StateSpec::new(INITIAL))
        .state(StateSpec::new(LOCATE_FOOD))
        .state(StateSpec::new(FIND_CHARGING_STATION).initial(FCS_INITIAL))
        .state(StateSpec::new(FCS_INITIAL).within(FIND_CHARGING_STATION))
        .state(
            StateSpec::new(FOLLOW_IR)
                .within(FIND_CHARGING_STATION)
                .on_entry("pursue_signal"),
        )
        .state(
            StateSpec::new(FOLLOW_TRACK)
                .within(FIND_CHARGING_STATION)
                .on_entry("pursue_track"),
        )
        .state(StateSpec::new(RECHARGE).arm(WAIT_TIMER))
        .state(StateSpec::new(FINAL))
        .exit_point(LOCATED, FIND_CHARGING_STATION)
        .exit_point(LOST_SIGNAL_TRACK, FIND_CHARGING_STATION)
        .timer(WAIT_TIMER, wait_ticks)
        .transition(TransitionSpec::on(INITIAL, POWER_LOW).to(LOCATE_FOOD))
        .transition(TransitionSpec::on(LOCATE_FOOD, SIGNAL_FOUND).to(FIND_CHARGING_STATION))
        .transition(TransitionSpec::on(LOCATE_FOOD, TRACK_FOUND).to(FIND_CHARGING_STATION))
        .transition(
            TransitionSpec::completion(FCS_INITIAL)
                .decide(DECISION_POINT, [(SIGNAL, FOLLOW_IR), (TRACK, FOLLOW_TRACK)]),
        )
        .transition(
            TransitionSpec::on(FOLLOW_IR, SIGNAL_LOST)
                .guard("alternative_untried")
                .effect("pursuit_failed")
                .to(FOLLOW_TRACK),
        )
        .transition(
            TransitionSpec::on(FOLLOW_IR, SIGNAL_LOST)
                .effect("pursuit_failed")
                .to_exit(LOST_SIGNAL_TRACK),
        )
        .transition(
            TransitionSpec::on(FOLLOW_TRACK, TRACK_LOST)
                .guard("alternative_untried")
                .effect("pursuit_failed")
                .to(FOLLOW_IR),
        )
        .transition(
            TransitionSpec::on(FOLLOW_TRACK, TRACK_LOST)
                .effect("pursuit_failed")
                .to_exit(LOST_SIGNAL_TRACK),
        )
        .transition(
            TransitionSpec::on(FOLLOW_IR, ENGAGE)
                .effect("pursuit_succeeded")
                .to_exit(LOCATED),
        )
        .transition(
            TransitionSpec::on(FOLLOW_TRACK, ENGAGE)
                .effect("pursuit_succeeded")
                .to_exit(LOCATED),
        )
        .transition(
            TransitionSpec::on_exit(FIND_CHARGING_STATION, LOCATED)
                .effect("engage")
                .to(RECHARGE),
        )
        .transition(
            TransitionSpec::on_exit(FIND_CHARGING_STATION, LOST_SIGNAL_TRACK)
                .effect("emit_power_lower")
                .to(LOCATE_FOOD),
        )
        .transition(TransitionSpec::on(RECHARGE, WAIT_TIMER_EXPIRED).to(FINAL))
        .build()
        .expect("feeding chart is well formed")
}

pub fn shared_feeding_machine(wait_ticks: u64) -> Arc<StateMachine> {
    Arc::new(build_feeding_machine_with(wait_ticks))
}

/// Per-agent memory of the current feeding cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeedingState {
    pub pursuing: Option<PathId>,
    pub tried: Vec<PathId>,
    pub first_choice: Option<PathId>,
    /// Tie preference carried into the next decision after a lost cycle.
    pub prefer_next: Option<PathId>,
    pub decisions: u64,
    pub located: u64,
    pub lost: u64,
}

/// Binds the chart's guards and actions to one agent's weights and randomness.
pub struct FeedingContext<'a, S, R: ?Sized> {
    pub weights: &'a mut WeightTable<S>,
    pub rng: &'a mut R,
    pub state: &'a mut FeedingState,
    pub dead: bool,
}

impl<'a, S: Scalar, R: Rng + ?Sized> FeedingContext<'a, S, R> {
    pub fn new(
        weights: &'a mut WeightTable<S>,
        rng: &'a mut R,
        state: &'a mut FeedingState,
    ) -> Self {
        Self {
            weights,
            rng,
            state,
            dead: false,
        }
    }

    fn pursue(&mut self, path: &str) {
        let id = PathId::new(path);
        if !self.state.tried.contains(&id) {
            self.state.tried.push(id.clone());
        }
        self.state.pursuing = Some(id);
    }
}

impl<S: Scalar, R: Rng + ?Sized> MachineContext for FeedingContext<'_, S, R> {
    type Trace = DecisionTrace<S>;

    fn is_dead(&self) -> bool {
        self.dead
    }

    fn guard(&mut self, name: &str) -> Result<bool, FsmError> {
        match name {
            "alternative_untried" => Ok(self
                .weights
                .path_ids()
                .any(|p| !self.state.tried.contains(p))),
            other => Err(FsmError::UnknownGuard(other.to_owned())),
        }
    }

    fn action(&mut self, name: &str, emit: &mut Vec<String>) -> Result<(), FsmError> {
        match name {
            "pursue_signal" => self.pursue(SIGNAL),
            "pursue_track" => self.pursue(TRACK),
            "pursuit_failed" => {
                if let Some(p) = &self.state.pursuing {
                    self.weights.record_failure(p.as_str())?;
                }
            }
            "pursuit_succeeded" => {
                if let Some(p) = &self.state.pursuing {
                    self.weights.record_success(p.as_str())?;
                }
                self.state.located += 1;
            }
            "engage" => self.state.pursuing = None,
            "emit_power_lower" => {
                emit.push(POWER_LOWER.to_owned());
                self.state.lost += 1;
                self.state.pursuing = None;
                let first = self.state.first_choice.clone();
                self.state.prefer_next = self
                    .weights
                    .path_ids()
                    .find(|p| Some(*p) != first.as_ref())
                    .cloned();
            }
            other => return Err(FsmError::UnknownAction(other.to_owned())),
        }
        Ok(())
    }

    fn decide(
        &mut self,
        point: &str,
        candidates: &[PathId],
    ) -> Result<(PathId, Self::Trace), FsmError> {
        if point != DECISION_POINT {
            return Err(FsmError::UnknownDecisionPoint(point.to_owned()));
        }
        let prefer = self.state.prefer_next.take();
        let trace = self
            .weights
            .choose_preferring(&mut *self.rng, prefer.as_ref())?;
        if !candidates.contains(&trace.chosen) {
            return Err(FsmError::Decision(
                crate::decision::DecisionError::UnknownPath(trace.chosen.clone()),
            ));
        }
        self.state.tried.clear();
        self.state.first_choice = Some(trace.chosen.clone());
        self.state.decisions += 1;
        Ok((trace.chosen.clone(), trace))
    }
}
