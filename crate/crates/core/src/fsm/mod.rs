//! Hierarchical run-to-completion state machines.
//!
//! A [`StateMachine`] is an immutable chart of simple and composite states.
//! Composite states own children and name one of them as their initial child.
//! Transitions fire on a named event, on completion (immediately after their
//! source state is entered), or on leaving a composite through one of its
//! named exit points. A transition may carry a decision point, in which case
//! its target is picked among several candidate states by the
//! [`MachineContext`].
//!
//! A [`MachineInstance`] holds one runtime configuration. Events are queued
//! and each is processed to quiescence, including chained completion
//! transitions, before the next one is dequeued. Events that no active state
//! handles are ignored.

pub mod feeding;
pub mod text;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::decision::{DecisionError, PathId};

pub type StateIdx = usize;

const COMPLETION_LIMIT: usize = 1024;
pub const DEFAULT_HISTORY: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("event rejected: agent is dead")]
    Dead,
    #[error("invalid machine definition: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("clock moved backwards from {previous} to {now}")]
    ClockRegression { previous: u64, now: u64 },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown guard `{0}`")]
    UnknownGuard(String),
    #[error("unknown decision point `{0}`")]
    UnknownDecisionPoint(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("completion transitions did not settle after {0} steps")]
    CompletionLoop(usize),
}

/// Name of the event a timer enqueues when it expires.
pub fn expiry_event(timer: &str) -> String {
    format!("{timer}_expired")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDef {
    pub name: String,
    pub parent: Option<StateIdx>,
    /// Set for composite states.
    pub initial_child: Option<StateIdx>,
    pub entry: Vec<String>,
    pub exit: Vec<String>,
    /// Timers armed on entry and disarmed on exit.
    pub timers: Vec<String>,
}

impl StateDef {
    pub fn is_composite(&self) -> bool {
        self.initial_child.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger {
    Event(String),
    Completion,
    /// Leaving the source composite through the named exit point.
    Exit(String),
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::Event(e) => f.write_str(e),
            Trigger::Completion => f.write_str("completion"),
            Trigger::Exit(x) => write!(f, "exit:{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    State(StateIdx),
    Exit(usize),
    Decision {
        point: String,
        branches: Vec<(PathId, StateIdx)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: StateIdx,
    pub trigger: Trigger,
    pub target: Target,
    pub guard: Option<String>,
    pub effect: Option<String>,
}

impl Transition {
    pub fn decision_point(&self) -> Option<&str> {
        match &self.target {
            Target::Decision { point, .. } => Some(point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitPoint {
    pub name: String,
    pub owner: StateIdx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMachine {
    name: String,
    states: Vec<StateDef>,
    initial: StateIdx,
    transitions: Vec<Transition>,
    exits: Vec<ExitPoint>,
    timers: BTreeMap<String, u64>,
}

impl StateMachine {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[StateDef] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn exits(&self) -> &[ExitPoint] {
        &self.exits
    }

    pub fn timers(&self) -> &BTreeMap<String, u64> {
        &self.timers
    }

    pub fn initial(&self) -> StateIdx {
        self.initial
    }

    pub fn state_index(&self, name: &str) -> Option<StateIdx> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn state_name(&self, idx: StateIdx) -> &str {
        &self.states[idx].name
    }

    /// `idx` followed by its ancestors, innermost first.
    fn lineage(&self, idx: StateIdx) -> Vec<StateIdx> {
        let mut out = vec![idx];
        let mut cur = self.states[idx].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.states[p].parent;
        }
        out
    }

    fn is_proper_ancestor(&self, ancestor: StateIdx, of: StateIdx) -> bool {
        self.lineage(of)[1..].contains(&ancestor)
    }

    /// Innermost state that strictly contains both `a` and `b`; `None` is the root.
    fn domain(&self, a: StateIdx, b: StateIdx) -> Option<StateIdx> {
        let la = self.lineage(a);
        let lb = self.lineage(b);
        la[1..].iter().find(|s| lb[1..].contains(s)).copied()
    }

    fn target_label(&self, target: &Target) -> String {
        match target {
            Target::State(s) => self.states[*s].name.clone(),
            Target::Exit(x) => format!("exit:{}", self.exits[*x].name),
            Target::Decision { point, .. } => format!("decide:{point}"),
        }
    }
}

/// Name-based description of a state, resolved by [`MachineBuilder::build`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateSpec {
    pub name: String,
    pub parent: Option<String>,
    pub initial_child: Option<String>,
    pub entry: Vec<String>,
    pub exit: Vec<String>,
    pub timers: Vec<String>,
}

impl StateSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn within(mut self, parent: impl Into<String>) -> Self {
        self.parent = Some(parent.into());
        self
    }

    pub fn initial(mut self, child: impl Into<String>) -> Self {
        self.initial_child = Some(child.into());
        self
    }

    pub fn on_entry(mut self, action: impl Into<String>) -> Self {
        self.entry.push(action.into());
        self
    }

    pub fn on_exit(mut self, action: impl Into<String>) -> Self {
        self.exit.push(action.into());
        self
    }

    pub fn arm(mut self, timer: impl Into<String>) -> Self {
        self.timers.push(timer.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSpec {
    State(String),
    Exit(String),
    Decision {
        point: String,
        branches: Vec<(String, String)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSpec {
    pub source: String,
    pub trigger: Trigger,
    pub target: TargetSpec,
    pub guard: Option<String>,
    pub effect: Option<String>,
}

impl TransitionSpec {
    fn with_trigger(source: impl Into<String>, trigger: Trigger) -> Self {
        Self {
            source: source.into(),
            trigger,
            target: TargetSpec::State(String::new()),
            guard: None,
            effect: None,
        }
    }

    pub fn on(source: impl Into<String>, event: impl Into<String>) -> Self {
        Self::with_trigger(source, Trigger::Event(event.into()))
    }

    pub fn completion(source: impl Into<String>) -> Self {
        Self::with_trigger(source, Trigger::Completion)
    }

    pub fn on_exit(composite: impl Into<String>, exit: impl Into<String>) -> Self {
        Self::with_trigger(composite, Trigger::Exit(exit.into()))
    }

    pub fn to(mut self, state: impl Into<String>) -> Self {
        self.target = TargetSpec::State(state.into());
        self
    }

    pub fn to_exit(mut self, exit: impl Into<String>) -> Self {
        self.target = TargetSpec::Exit(exit.into());
        self
    }

    pub fn decide<I, A, B>(mut self, point: impl Into<String>, branches: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        self.target = TargetSpec::Decision {
            point: point.into(),
            branches: branches
                .into_iter()
                .map(|(p, s)| (p.into(), s.into()))
                .collect(),
        };
        self
    }

    pub fn guard(mut self, guard: impl Into<String>) -> Self {
        self.guard = Some(guard.into());
        self
    }

    pub fn effect(mut self, effect: impl Into<String>) -> Self {
        self.effect = Some(effect.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MachineBuilder {
    name: String,
    initial: Option<String>,
    states: Vec<StateSpec>,
    exits: Vec<(String, String)>,
    timers: Vec<(String, u64)>,
    transitions: Vec<TransitionSpec>,
}

impl MachineBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn initial(mut self, state: impl Into<String>) -> Self {
        self.initial = Some(state.into());
        self
    }

    pub fn state(mut self, spec: StateSpec) -> Self {
        self.states.push(spec);
        self
    }

    pub fn exit_point(mut self, name: impl Into<String>, owner: impl Into<String>) -> Self {
        self.exits.push((name.into(), owner.into()));
        self
    }

    pub fn timer(mut self, name: impl Into<String>, ticks: u64) -> Self {
        self.timers.push((name.into(), ticks));
        self
    }

    pub fn transition(mut self, spec: TransitionSpec) -> Self {
        self.transitions.push(spec);
        self
    }

    /// Resolves names and checks the structure, reporting every violation.
    pub fn build(self) -> Result<StateMachine, FsmError> {
        let mut errors = Vec::new();
        let index_of = |name: &str| self.states.iter().position(|s| s.name == name);

        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].iter().any(|o| o.name == s.name) {
                errors.push(format!("duplicate state `{}`", s.name));
            }
        }

        let mut timers = BTreeMap::new();
        for (name, ticks) in &self.timers {
            if timers.insert(name.clone(), *ticks).is_some() {
                errors.push(format!("duplicate timer `{name}`"));
            }
        }

        let mut states: Vec<StateDef> = Vec::with_capacity(self.states.len());
        for s in &self.states {
            let parent = match &s.parent {
                Some(p) => match index_of(p) {
                    Some(i) => Some(i),
                    None => {
                        errors.push(format!("state `{}` has unknown parent `{p}`", s.name));
                        None
                    }
                },
                None => None,
            };
            let initial_child = match &s.initial_child {
                Some(c) => match index_of(c) {
                    Some(i) => Some(i),
                    None => {
                        errors.push(format!(
                            "state `{}` has unknown initial child `{c}`",
                            s.name
                        ));
                        None
                    }
                },
                None => None,
            };
            for t in &s.timers {
                if !timers.contains_key(t) {
                    errors.push(format!("state `{}` arms unknown timer `{t}`", s.name));
                }
            }
            states.push(StateDef {
                name: s.name.clone(),
                parent,
                initial_child,
                entry: s.entry.clone(),
                exit: s.exit.clone(),
                timers: s.timers.clone(),
            });
        }

        // Parent chains must terminate.
        for start in 0..states.len() {
            let mut cur = states[start].parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > states.len() {
                    errors.push(format!(
                        "state `{}` is part of a parent cycle",
                        states[start].name
                    ));
                    break;
                }
                cur = states[p].parent;
            }
        }

        for (i, s) in states.iter().enumerate() {
            let has_children = states.iter().any(|c| c.parent == Some(i));
            match s.initial_child {
                Some(c) if states[c].parent != Some(i) => errors.push(format!(
                    "initial child `{}` of `{}` is not its child",
                    states[c].name, s.name
                )),
                None if has_children => errors.push(format!(
                    "composite state `{}` declares no initial child",
                    s.name
                )),
                _ => {}
            }
        }

        let initial = match &self.initial {
            Some(name) => match index_of(name) {
                Some(i) if states[i].parent.is_none() => Some(i),
                Some(_) => {
                    errors.push(format!("machine initial state `{name}` is not top-level"));
                    None
                }
                None => {
                    errors.push(format!("machine initial state `{name}` does not exist"));
                    None
                }
            },
            None => {
                errors.push("machine declares no initial state".into());
                None
            }
        };

        let mut exits: Vec<ExitPoint> = Vec::new();
        for (name, owner) in &self.exits {
            if exits.iter().any(|e| e.name == *name) {
                errors.push(format!("duplicate exit point `{name}`"));
                continue;
            }
            match index_of(owner) {
                Some(o) if states[o].is_composite() => exits.push(ExitPoint {
                    name: name.clone(),
                    owner: o,
                }),
                Some(_) => errors.push(format!(
                    "exit point `{name}` owner `{owner}` is not composite"
                )),
                None => errors.push(format!("exit point `{name}` has unknown owner `{owner}`")),
            }
        }

        let mut transitions = Vec::with_capacity(self.transitions.len());
        for (n, t) in self.transitions.iter().enumerate() {
            let Some(source) = index_of(&t.source) else {
                errors.push(format!("transition {n} has unknown source `{}`", t.source));
                continue;
            };
            if let Trigger::Exit(x) = &t.trigger {
                match exits.iter().find(|e| e.name == *x) {
                    Some(e) if e.owner == source => {}
                    Some(_) => errors.push(format!(
                        "transition {n} continues exit `{x}` from `{}`, which does not own it",
                        t.source
                    )),
                    None => errors.push(format!("transition {n} continues unknown exit `{x}`")),
                }
            }
            let target = match &t.target {
                TargetSpec::State(name) => match index_of(name) {
                    Some(i) => Target::State(i),
                    None => {
                        errors.push(format!("transition {n} has unknown target `{name}`"));
                        continue;
                    }
                },
                TargetSpec::Exit(x) => match exits.iter().position(|e| e.name == *x) {
                    Some(i) if states_contains(&states, exits[i].owner, source) => Target::Exit(i),
                    Some(_) => {
                        errors.push(format!(
                            "transition {n} leaves through exit `{x}` from outside its owner"
                        ));
                        continue;
                    }
                    None => {
                        errors.push(format!("transition {n} targets unknown exit `{x}`"));
                        continue;
                    }
                },
                TargetSpec::Decision { point, branches } => {
                    if branches.len() < 2 {
                        errors.push(format!(
                            "decision point `{point}` on transition {n} needs at least two candidates"
                        ));
                    }
                    let mut resolved = Vec::new();
                    for (path, state) in branches {
                        match index_of(state) {
                            Some(i) => resolved.push((PathId::new(path.clone()), i)),
                            None => errors.push(format!(
                                "decision point `{point}` branch `{path}` targets unknown state `{state}`"
                            )),
                        }
                    }
                    Target::Decision {
                        point: point.clone(),
                        branches: resolved,
                    }
                }
            };
            transitions.push(Transition {
                source,
                trigger: t.trigger.clone(),
                target,
                guard: t.guard.clone(),
                effect: t.effect.clone(),
            });
        }

        for e in &exits {
            let continued = transitions
                .iter()
                .any(|t| t.source == e.owner && t.trigger == Trigger::Exit(e.name.clone()));
            if !continued {
                errors.push(format!(
                    "exit point `{}` has no continuation transition",
                    e.name
                ));
            }
        }

        if !errors.is_empty() {
            return Err(FsmError::Invalid(errors));
        }
        Ok(StateMachine {
            name: self.name,
            states,
            initial: initial.expect("checked above"),
            transitions,
            exits,
            timers,
        })
    }
}

/// Whether `ancestor` strictly contains `state`.
fn states_contains(states: &[StateDef], ancestor: StateIdx, state: StateIdx) -> bool {
    let mut cur = states[state].parent;
    while let Some(p) = cur {
        if p == ancestor {
            return true;
        }
        cur = states[p].parent;
    }
    false
}

/// Behaviour the instance delegates to its owner: guards, actions and choices.
pub trait MachineContext {
    type Trace: Clone + fmt::Debug;

    fn is_dead(&self) -> bool;

    fn guard(&mut self, name: &str) -> Result<bool, FsmError>;

    /// Runs an entry, exit or transition action. Output events go to `emit`.
    fn action(&mut self, name: &str, emit: &mut Vec<String>) -> Result<(), FsmError>;

    fn decide(
        &mut self,
        point: &str,
        candidates: &[PathId],
    ) -> Result<(PathId, Self::Trace), FsmError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fired<T> {
    pub transition: usize,
    pub source: String,
    pub target: String,
    pub trigger: String,
    pub decision: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryRecord {
    pub tick: u64,
    pub transition: usize,
}

#[derive(Debug, Clone)]
pub struct MachineInstance {
    machine: Arc<StateMachine>,
    configuration: Vec<StateIdx>,
    queue: VecDeque<String>,
    deadlines: BTreeMap<String, u64>,
    now: u64,
    history: VecDeque<HistoryRecord>,
    history_capacity: usize,
    emitted: Vec<String>,
}

impl MachineInstance {
    /// Fresh instance resting in the machine's initial state. Entry actions of
    /// the initial configuration are not run; its timers are armed.
    pub fn new(machine: Arc<StateMachine>) -> Self {
        Self::with_history(machine, DEFAULT_HISTORY)
    }

    pub fn with_history(machine: Arc<StateMachine>, history_capacity: usize) -> Self {
        let mut inst = Self {
            machine,
            configuration: Vec::new(),
            queue: VecDeque::new(),
            deadlines: BTreeMap::new(),
            now: 0,
            history: VecDeque::with_capacity(history_capacity.min(1024)),
            history_capacity,
            emitted: Vec::new(),
        };
        inst.reset_configuration();
        inst
    }

    fn reset_configuration(&mut self) {
        self.configuration.clear();
        self.deadlines.clear();
        let mut cur = Some(self.machine.initial);
        while let Some(s) = cur {
            self.configuration.push(s);
            for t in &self.machine.states[s].timers {
                self.deadlines
                    .insert(t.clone(), self.now + self.machine.timers[t]);
            }
            cur = self.machine.states[s].initial_child;
        }
    }

    /// Returns to the initial configuration, dropping pending events, timers
    /// and unread outputs. The clock and history are kept.
    pub fn restart(&mut self) {
        self.queue.clear();
        self.emitted.clear();
        self.reset_configuration();
    }

    pub fn machine(&self) -> &Arc<StateMachine> {
        &self.machine
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Active states from the root down to the leaf.
    pub fn active_path(&self) -> Vec<&str> {
        std::iter::once("root")
            .chain(
                self.configuration
                    .iter()
                    .map(|&s| self.machine.state_name(s)),
            )
            .collect()
    }

    pub fn leaf(&self) -> &str {
        self.machine.state_name(
            *self
                .configuration
                .last()
                .expect("configuration is never empty"),
        )
    }

    pub fn is_active(&self, state: &str) -> bool {
        self.configuration
            .iter()
            .any(|&s| self.machine.state_name(s) == state)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn history(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.history.iter()
    }

    pub fn timer_deadline(&self, timer: &str) -> Option<u64> {
        self.deadlines.get(timer).copied()
    }

    /// Drains the output events raised by actions since the last call.
    pub fn take_emitted(&mut self) -> Vec<String> {
        std::mem::take(&mut self.emitted)
    }

    pub fn enqueue(&mut self, event: impl Into<String>) {
        self.queue.push_back(event.into());
    }

    /// Advances the clock, enqueueing one expiry event per due timer in
    /// deadline order (ties by timer name). Returns the enqueued events.
    pub fn tick_timers(&mut self, now: u64) -> Result<Vec<String>, FsmError> {
        if now < self.now {
            return Err(FsmError::ClockRegression {
                previous: self.now,
                now,
            });
        }
        self.now = now;
        let mut due: Vec<(u64, String)> = self
            .deadlines
            .iter()
            .filter(|(_, &d)| d <= now)
            .map(|(n, &d)| (d, n.clone()))
            .collect();
        due.sort();
        let mut events = Vec::with_capacity(due.len());
        for (_, name) in due {
            self.deadlines.remove(&name);
            let ev = expiry_event(&name);
            self.queue.push_back(ev.clone());
            events.push(ev);
        }
        Ok(events)
    }

    /// Enqueues `event` and processes the queue to quiescence.
    pub fn dispatch<C: MachineContext>(
        &mut self,
        event: impl Into<String>,
        ctx: &mut C,
    ) -> Result<Vec<Fired<C::Trace>>, FsmError> {
        if ctx.is_dead() {
            return Err(FsmError::Dead);
        }
        self.enqueue(event);
        self.run_to_completion(ctx)
    }

    /// Processes every queued event, one at a time, each to quiescence.
    pub fn run_to_completion<C: MachineContext>(
        &mut self,
        ctx: &mut C,
    ) -> Result<Vec<Fired<C::Trace>>, FsmError> {
        if ctx.is_dead() {
            return Err(FsmError::Dead);
        }
        let mut fired = Vec::new();
        while let Some(event) = self.queue.pop_front() {
            self.process(&event, ctx, &mut fired)?;
            debug_assert!(self.configuration_is_valid());
        }
        Ok(fired)
    }

    /// Whether the configuration is a root-to-leaf chain of the machine.
    pub fn configuration_is_valid(&self) -> bool {
        let m = &self.machine;
        let Some(&first) = self.configuration.first() else {
            return false;
        };
        if m.states[first].parent.is_some() {
            return false;
        }
        let chained = self
            .configuration
            .windows(2)
            .all(|w| m.states[w[1]].parent == Some(w[0]));
        let leaf = *self.configuration.last().expect("non-empty");
        chained && !m.states[leaf].is_composite()
    }

    fn process<C: MachineContext>(
        &mut self,
        event: &str,
        ctx: &mut C,
        fired: &mut Vec<Fired<C::Trace>>,
    ) -> Result<(), FsmError> {
        let trigger = Trigger::Event(event.to_owned());
        let mut chosen = None;
        'search: for &state in self.configuration.iter().rev() {
            for (i, t) in self.machine.transitions.iter().enumerate() {
                if t.source == state && t.trigger == trigger && self.guard_ok(t, ctx)? {
                    chosen = Some(i);
                    break 'search;
                }
            }
        }
        let Some(idx) = chosen else {
            log::debug!(
                "{}: event `{event}` ignored in {}",
                self.machine.name,
                self.leaf()
            );
            return Ok(());
        };
        self.fire(idx, event, ctx, fired)?;
        self.settle(ctx, fired)
    }

    /// Fires completion transitions of the current leaf until none is enabled.
    fn settle<C: MachineContext>(
        &mut self,
        ctx: &mut C,
        fired: &mut Vec<Fired<C::Trace>>,
    ) -> Result<(), FsmError> {
        for _ in 0..COMPLETION_LIMIT {
            let leaf = *self.configuration.last().expect("non-empty");
            let mut next = None;
            for (i, t) in self.machine.transitions.iter().enumerate() {
                if t.source == leaf && t.trigger == Trigger::Completion && self.guard_ok(t, ctx)? {
                    next = Some(i);
                    break;
                }
            }
            match next {
                Some(i) => self.fire(i, "completion", ctx, fired)?,
                None => return Ok(()),
            }
        }
        Err(FsmError::CompletionLoop(COMPLETION_LIMIT))
    }

    fn guard_ok<C: MachineContext>(&self, t: &Transition, ctx: &mut C) -> Result<bool, FsmError> {
        match &t.guard {
            Some(g) => ctx.guard(g),
            None => Ok(true),
        }
    }

    fn fire<C: MachineContext>(
        &mut self,
        idx: usize,
        trigger: &str,
        ctx: &mut C,
        fired: &mut Vec<Fired<C::Trace>>,
    ) -> Result<(), FsmError> {
        let machine = Arc::clone(&self.machine);
        let t = &machine.transitions[idx];
        self.record(idx);
        match &t.target {
            Target::State(target) => {
                fired.push(Fired {
                    transition: idx,
                    source: machine.state_name(t.source).to_owned(),
                    target: machine.state_name(*target).to_owned(),
                    trigger: trigger.to_owned(),
                    decision: None,
                });
                self.transit(t.source, *target, t.effect.as_deref(), ctx)
            }
            Target::Decision { point, branches } => {
                let candidates: Vec<PathId> = branches.iter().map(|(p, _)| p.clone()).collect();
                let (chosen, trace) = ctx.decide(point, &candidates)?;
                let target = branches
                    .iter()
                    .find(|(p, _)| *p == chosen)
                    .map(|(_, s)| *s)
                    .ok_or_else(|| {
                        FsmError::Decision(DecisionError::UnknownPath(chosen.clone()))
                    })?;
                fired.push(Fired {
                    transition: idx,
                    source: machine.state_name(t.source).to_owned(),
                    target: machine.state_name(target).to_owned(),
                    trigger: trigger.to_owned(),
                    decision: Some(trace),
                });
                self.transit(t.source, target, t.effect.as_deref(), ctx)
            }
            Target::Exit(x) => {
                let exit = &machine.exits[*x];
                fired.push(Fired {
                    transition: idx,
                    source: machine.state_name(t.source).to_owned(),
                    target: machine.target_label(&t.target),
                    trigger: trigger.to_owned(),
                    decision: None,
                });
                // Leave everything up to and including the owning composite.
                while let Some(&top) = self.configuration.last() {
                    self.exit_state(top, ctx)?;
                    self.configuration.pop();
                    if top == exit.owner {
                        break;
                    }
                }
                self.run_action(t.effect.as_deref(), ctx)?;
                let cont_trigger = Trigger::Exit(exit.name.clone());
                let mut cont = None;
                for (i, c) in machine.transitions.iter().enumerate() {
                    if c.source == exit.owner
                        && c.trigger == cont_trigger
                        && self.guard_ok(c, ctx)?
                    {
                        cont = Some(i);
                        break;
                    }
                }
                let Some(ci) = cont else {
                    // Every continuation guard failed: re-enter the owner.
                    return self.enter_from(exit.owner, ctx);
                };
                let c = &machine.transitions[ci];
                let Target::State(target) = c.target else {
                    return self.fire_from_outside(ci, exit, ctx, fired);
                };
                self.record(ci);
                fired.push(Fired {
                    transition: ci,
                    source: machine.state_name(exit.owner).to_owned(),
                    target: machine.state_name(target).to_owned(),
                    trigger: cont_trigger.to_string(),
                    decision: None,
                });
                let domain = machine.domain(exit.owner, target);
                self.exit_until(domain, ctx)?;
                self.run_action(c.effect.as_deref(), ctx)?;
                self.enter_path(domain, target, ctx)
            }
        }
    }

    /// Continuation whose target is itself a decision or another exit.
    fn fire_from_outside<C: MachineContext>(
        &mut self,
        ci: usize,
        exit: &ExitPoint,
        ctx: &mut C,
        fired: &mut Vec<Fired<C::Trace>>,
    ) -> Result<(), FsmError> {
        // The owner has already been exited; stand in its parent so the
        // generic machinery computes the remaining exits and entries.
        let machine = Arc::clone(&self.machine);
        if self.configuration.is_empty() {
            // Owner was top-level: temporarily re-enter it so `fire` has a source.
            self.configuration.push(exit.owner);
        } else if *self.configuration.last().expect("non-empty") != exit.owner {
            self.configuration.push(exit.owner);
        }
        let trigger = machine.transitions[ci].trigger.to_string();
        self.fire(ci, &trigger, ctx, fired)
    }

    fn record(&mut self, transition: usize) {
        if self.history_capacity == 0 {
            return;
        }
        if self.history.len() == self.history_capacity {
            self.history.pop_front();
        }
        self.history.push_back(HistoryRecord {
            tick: self.now,
            transition,
        });
    }

    fn run_action<C: MachineContext>(
        &mut self,
        action: Option<&str>,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        if let Some(a) = action {
            ctx.action(a, &mut self.emitted)?;
        }
        Ok(())
    }

    fn exit_state<C: MachineContext>(
        &mut self,
        state: StateIdx,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        let machine = Arc::clone(&self.machine);
        let def = &machine.states[state];
        for a in &def.exit {
            ctx.action(a, &mut self.emitted)?;
        }
        for t in &def.timers {
            self.deadlines.remove(t);
        }
        Ok(())
    }

    fn enter_state<C: MachineContext>(
        &mut self,
        state: StateIdx,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        let machine = Arc::clone(&self.machine);
        let def = &machine.states[state];
        self.configuration.push(state);
        for t in &def.timers {
            self.deadlines
                .insert(t.clone(), self.now + machine.timers[t]);
        }
        for a in &def.entry {
            ctx.action(a, &mut self.emitted)?;
        }
        Ok(())
    }

    /// Pops active states deeper than `domain`, running their exit behaviour.
    fn exit_until<C: MachineContext>(
        &mut self,
        domain: Option<StateIdx>,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        while let Some(&top) = self.configuration.last() {
            if Some(top) == domain {
                break;
            }
            self.exit_state(top, ctx)?;
            self.configuration.pop();
        }
        Ok(())
    }

    /// Enters every state between `domain` (exclusive) and `target`, then
    /// descends through initial children.
    fn enter_path<C: MachineContext>(
        &mut self,
        domain: Option<StateIdx>,
        target: StateIdx,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        let lineage = self.machine.lineage(target);
        let cut = match domain {
            Some(d) => lineage
                .iter()
                .position(|&s| s == d)
                .unwrap_or(lineage.len()),
            None => lineage.len(),
        };
        for &s in lineage[..cut].iter().rev() {
            self.enter_state(s, ctx)?;
        }
        let mut cur = self.machine.states[target].initial_child;
        while let Some(c) = cur {
            self.enter_state(c, ctx)?;
            cur = self.machine.states[c].initial_child;
        }
        Ok(())
    }

    fn enter_from<C: MachineContext>(
        &mut self,
        state: StateIdx,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        let parent = self.machine.states[state].parent;
        self.enter_path(parent, state, ctx)
    }

    fn transit<C: MachineContext>(
        &mut self,
        source: StateIdx,
        target: StateIdx,
        effect: Option<&str>,
        ctx: &mut C,
    ) -> Result<(), FsmError> {
        let domain = self.machine.domain(source, target);
        debug_assert!(
            domain.is_none_or(|d| self.machine.is_proper_ancestor(d, source)),
            "transition domain must contain its source"
        );
        self.exit_until(domain, ctx)?;
        self.run_action(effect, ctx)?;
        self.enter_path(domain, target, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Context that records every action and picks the first candidate.
    #[derive(Default)]
    struct Recorder {
        log: Vec<String>,
        dead: bool,
        allow: bool,
    }

    impl MachineContext for Recorder {
        type Trace = String;
        fn is_dead(&self) -> bool {
            self.dead
        }
        fn guard(&mut self, name: &str) -> Result<bool, FsmError> {
            match name {
                "allow" => Ok(self.allow),
                other => Err(FsmError::UnknownGuard(other.into())),
            }
        }
        fn action(&mut self, name: &str, emit: &mut Vec<String>) -> Result<(), FsmError> {
            self.log.push(name.to_owned());
            if name == "shout" {
                emit.push("shouted".into());
            }
            Ok(())
        }
        fn decide(&mut self, point: &str, c: &[PathId]) -> Result<(PathId, String), FsmError> {
            Ok((c[0].clone(), format!("{point}->{}", c[0])))
        }
    }

    fn nested() -> Arc<StateMachine> {
        Arc::new(
            MachineBuilder::new("nested")
                .initial("idle")
                .state(StateSpec::new("idle"))
                .state(
                    StateSpec::new("busy")
                        .initial("busy.start")
                        .on_entry("enter_busy")
                        .on_exit("leave_busy"),
                )
                .state(StateSpec::new("busy.start").within("busy"))
                .state(StateSpec::new("left").within("busy").on_entry("enter_left"))
                .state(StateSpec::new("right").within("busy"))
                .state(StateSpec::new("done").arm("t1").arm("t0"))
                .exit_point("finished", "busy")
                .timer("t1", 5)
                .timer("t0", 5)
                .transition(TransitionSpec::on("idle", "go").to("busy"))
                .transition(
                    TransitionSpec::completion("busy.start")
                        .decide("pick", [("l", "left"), ("r", "right")]),
                )
                .transition(
                    TransitionSpec::on("left", "ok")
                        .to_exit("finished")
                        .effect("shout"),
                )
                .transition(TransitionSpec::on_exit("busy", "finished").to("done"))
                .transition(TransitionSpec::on("busy", "abort").to("idle"))
                .transition(
                    TransitionSpec::on("done", "again")
                        .guard("allow")
                        .to("idle"),
                )
                .build()
                .unwrap(),
        )
    }

    #[test]
    fn fresh_instance_rests_in_initial() {
        let inst = MachineInstance::new(nested());
        assert_eq!(inst.active_path(), vec!["root", "idle"]);
    }

    #[test]
    fn completion_and_decision_chain_within_one_dispatch() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        let fired = inst.dispatch("go", &mut ctx).unwrap();
        assert_eq!(fired.len(), 2);
        assert_eq!(fired[1].decision.as_deref(), Some("pick->l"));
        assert_eq!(inst.active_path(), vec!["root", "busy", "left"]);
        assert_eq!(ctx.log, vec!["enter_busy", "enter_left"]);
    }

    #[test]
    fn composite_handles_event_for_its_leaf() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        inst.dispatch("go", &mut ctx).unwrap();
        inst.dispatch("abort", &mut ctx).unwrap();
        assert_eq!(inst.active_path(), vec!["root", "idle"]);
        assert!(ctx.log.contains(&"leave_busy".to_owned()));
    }

    #[test]
    fn exit_point_runs_continuation_and_emits() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        inst.dispatch("go", &mut ctx).unwrap();
        let fired = inst.dispatch("ok", &mut ctx).unwrap();
        assert_eq!(fired.len(), 2);
        assert_eq!(fired[0].target, "exit:finished");
        assert_eq!(fired[1].trigger, "exit:finished");
        assert_eq!(inst.active_path(), vec!["root", "done"]);
        assert_eq!(inst.take_emitted(), vec!["shouted".to_owned()]);
        assert!(inst.take_emitted().is_empty());
        // Exits run before the effect.
        let pos_leave = ctx.log.iter().position(|a| a == "leave_busy").unwrap();
        let pos_shout = ctx.log.iter().position(|a| a == "shout").unwrap();
        assert!(pos_leave < pos_shout);
    }

    #[test]
    fn unhandled_event_is_ignored() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        assert!(inst.dispatch("nonsense", &mut ctx).unwrap().is_empty());
        assert_eq!(inst.active_path(), vec!["root", "idle"]);
    }

    #[test]
    fn guard_blocks_transition() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        inst.dispatch("go", &mut ctx).unwrap();
        inst.dispatch("ok", &mut ctx).unwrap();
        assert!(inst.dispatch("again", &mut ctx).unwrap().is_empty());
        ctx.allow = true;
        assert_eq!(inst.dispatch("again", &mut ctx).unwrap().len(), 1);
    }

    #[test]
    fn dead_context_rejected() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder {
            dead: true,
            ..Recorder::default()
        };
        assert_eq!(inst.dispatch("go", &mut ctx).unwrap_err(), FsmError::Dead);
    }

    #[test]
    fn timers_fire_at_deadline_ordered_by_name() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder::default();
        inst.tick_timers(10).unwrap();
        inst.dispatch("go", &mut ctx).unwrap();
        inst.dispatch("ok", &mut ctx).unwrap();
        assert_eq!(inst.timer_deadline("t0"), Some(15));
        assert!(inst.tick_timers(14).unwrap().is_empty());
        assert_eq!(
            inst.tick_timers(15).unwrap(),
            vec!["t0_expired".to_owned(), "t1_expired".to_owned()]
        );
        assert!(inst.tick_timers(20).unwrap().is_empty());
        assert_eq!(inst.pending(), 2);
    }

    #[test]
    fn clock_regression_is_an_error() {
        let mut inst = MachineInstance::new(nested());
        inst.tick_timers(5).unwrap();
        assert_eq!(
            inst.tick_timers(4).unwrap_err(),
            FsmError::ClockRegression {
                previous: 5,
                now: 4
            }
        );
    }

    #[test]
    fn leaving_a_state_disarms_its_timers() {
        let mut inst = MachineInstance::new(nested());
        let mut ctx = Recorder {
            allow: true,
            ..Recorder::default()
        };
        inst.dispatch("go", &mut ctx).unwrap();
        inst.dispatch("ok", &mut ctx).unwrap();
        inst.dispatch("again", &mut ctx).unwrap();
        assert_eq!(inst.timer_deadline("t0"), None);
        assert!(inst.tick_timers(100).unwrap().is_empty());
    }

    #[test]
    fn history_is_bounded() {
        let mut inst = MachineInstance::with_history(nested(), 3);
        let mut ctx = Recorder::default();
        for _ in 0..5 {
            inst.dispatch("go", &mut ctx).unwrap();
            inst.dispatch("abort", &mut ctx).unwrap();
        }
        assert_eq!(inst.history().count(), 3);
    }

    #[test]
    fn structural_errors_are_all_reported() {
        let err = MachineBuilder::new("bad")
            .initial("nowhere")
            .state(StateSpec::new("a"))
            .state(StateSpec::new("b").within("ghost"))
            .state(StateSpec::new("c").initial("a"))
            .transition(TransitionSpec::on("a", "x").to("zzz"))
            .transition(TransitionSpec::completion("a").decide("p", [("only", "a")]))
            .build()
            .unwrap_err();
        let FsmError::Invalid(list) = err else {
            panic!("expected structural errors")
        };
        assert!(list.iter().any(|m| m.contains("nowhere")));
        assert!(list.iter().any(|m| m.contains("ghost")));
        assert!(list.iter().any(|m| m.contains("not its child")));
        assert!(list.iter().any(|m| m.contains("zzz")));
        assert!(list.iter().any(|m| m.contains("at least two")));
    }

    #[test]
    fn completion_loops_are_detected() {
        let m = MachineBuilder::new("loop")
            .initial("a")
            .state(StateSpec::new("a"))
            .state(StateSpec::new("b"))
            .state(StateSpec::new("c"))
            .transition(TransitionSpec::on("a", "go").to("b"))
            .transition(TransitionSpec::completion("b").to("c"))
            .transition(TransitionSpec::completion("c").to("b"))
            .build()
            .unwrap();
        let mut inst = MachineInstance::new(Arc::new(m));
        let err = inst.dispatch("go", &mut Recorder::default()).unwrap_err();
        assert!(matches!(err, FsmError::CompletionLoop(_)));
    }
}
