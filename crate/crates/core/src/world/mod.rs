//! Continuous 2D arena with charging stations, lights and agents.
//!
//! Each agent carries an energy store, a feeding state machine and a weight
//! table. A tick updates living agents one at a time in id order:
//!
//! 1. gather percepts and absorb them into the metabolic ledger;
//! 2. derive stimulus events from the percepts and the active state;
//! 3. advance the machine's timers and run queued events to completion;
//! 4. move (pursuit, docking, or free steering);
//! 5. drain energy and report threshold events.
//!
//! Lamp changes are applied after every agent has moved, so all agents see
//! the same lamp pattern within a tick.
//!
//! Free steering sums a light term (away from lights while pattern N is
//! enabled, towards them otherwise), an attraction towards the strongest lit
//! lamp in view, a repulsion from agents closer than the repulsion radius, and
//! a uniform heading jitter. A death-aware agent below its critical level
//! drops everything but the light term and always approaches light.

pub mod geom;
pub mod metrics;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

pub use geom::{wrap_angle, Bounds, Vec2};
pub use metrics::{aggregation, most_pursued, AggregationMetrics};

use crate::decision::{DecisionTrace, WeightTable};
use crate::fsm::feeding::{self, FeedingContext, FeedingState};
use crate::fsm::{FsmError, MachineInstance, StateMachine};
use crate::rng::{stream, StreamRng};
use crate::scalar::{Real, Scalar};
use crate::vitality::{
    feeding_failure_event, vital_events, EnergyParams, EnergyStore, VitalEvent, VitalEventKind,
    VitalityError, IDLE,
};

pub const MOVE: &str = "move";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("aggregation metrics need at least two agents, found {0}")]
    TooFewAgents(usize),
    #[error("agent {0} is dead")]
    Dead(u32),
    #[error("no agent with id {0}")]
    UnknownAgent(u32),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error(transparent)]
    Vitality(#[from] VitalityError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classification {
    Android,
    Robot,
    Automaton,
    Anima,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Android => "android",
            Classification::Robot => "robot",
            Classification::Automaton => "automaton",
            Classification::Anima => "anima",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "android" => Ok(Classification::Android),
            "robot" => Ok(Classification::Robot),
            "automaton" => Ok(Classification::Automaton),
            "anima" => Ok(Classification::Anima),
            other => Err(format!(
                "unknown classification `{other}` (expected android, robot, automaton or anima)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station<T> {
    pub id: String,
    pub position: Vec2<T>,
    pub ir_range: T,
    pub ir_reliability: T,
    /// Ends at `position`.
    pub track: Vec<Vec2<T>>,
    pub track_reliability: T,
    pub recharge_rate: T,
    /// Intensity of the station's light, if it has one.
    pub light: Option<T>,
}

impl<T: Real> Station<T> {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Invalid(format!("station `{}`: {m}", self.id)));
        let unit = |p: T| p >= T::zero() && p <= T::one();
        if !(self.ir_range > T::zero()) {
            return bad(format!("ir_range must be > 0, got {}", self.ir_range));
        }
        if !unit(self.ir_reliability) {
            return bad(format!(
                "ir_reliability must lie in [0, 1], got {}",
                self.ir_reliability
            ));
        }
        if !unit(self.track_reliability) {
            return bad(format!(
                "track_reliability must lie in [0, 1], got {}",
                self.track_reliability
            ));
        }
        if self.track.len() < 2 {
            return bad("track needs at least two vertices".into());
        }
        if self.track.last() != Some(&self.position) {
            return bad("track must end at the station".into());
        }
        if !(self.recharge_rate >= T::zero()) {
            return bad(format!(
                "recharge_rate must be >= 0, got {}",
                self.recharge_rate
            ));
        }
        if self.light.is_some_and(|l| !(l >= T::zero())) {
            return bad("light intensity must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Light<T> {
    pub id: String,
    pub position: Vec2<T>,
    pub intensity: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldParams<T> {
    /// Pattern N is enabled while gain exceeds this.
    pub pattern_n_gate: T,
    pub phototaxis: T,
    /// Steering weight towards the strongest lit lamp in view.
    pub attraction: T,
    pub repulsion_radius: T,
    pub repulsion: T,
    /// Link distance for cluster counting.
    pub cluster_threshold: T,
    /// Distance at which an agent reaches a station or track vertex.
    pub dock_radius: T,
    /// Maximum heading jitter per tick, radians.
    pub wander: T,
}

impl<T: Real> Default for WorldParams<T> {
    fn default() -> Self {
        Self {
            pattern_n_gate: T::lit(0.3),
            phototaxis: T::one(),
            attraction: T::zero(),
            repulsion_radius: T::zero(),
            repulsion: T::zero(),
            cluster_threshold: T::lit(2.0),
            dock_radius: T::lit(0.5),
            wander: T::lit(0.3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerceptKind {
    IrSignal,
    TrackMark,
    Light,
    AgentLamp,
}

impl PerceptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerceptKind::IrSignal => "ir_signal",
            PerceptKind::TrackMark => "track_mark",
            PerceptKind::Light => "light",
            PerceptKind::AgentLamp => "agent_lamp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Station(usize),
    TrackVertex { station: usize, vertex: usize },
    Light(usize),
    Agent(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percept<T> {
    pub kind: PerceptKind,
    pub source: Source,
    pub strength: T,
    /// Relative to the agent's heading.
    pub bearing: T,
    pub distance: T,
}

#[derive(Debug, Clone)]
pub struct AgentSpec<T> {
    pub position: Vec2<T>,
    pub heading: T,
    pub base_speed: T,
    pub sensor_range: T,
    pub sensitivity: T,
    pub energy: Arc<EnergyParams<T>>,
    pub initial_charge: T,
    pub weights: WeightTable<T>,
    pub classification: Classification,
    pub death_awareness: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PursuitKind {
    Beacon,
    Track,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pursuit {
    kind: PursuitKind,
    station: usize,
    next_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct AgentBody<T> {
    pub id: u32,
    pub position: Vec2<T>,
    pub heading: T,
    pub base_speed: T,
    pub sensor_range: T,
    pub sensitivity: T,
    pub store: EnergyStore<T>,
    pub machine: MachineInstance,
    pub weights: WeightTable<T>,
    pub feeding: FeedingState,
    pub classification: Classification,
    pub death_awareness: bool,
    pub lamp_on: bool,
    pub died_at: Option<u64>,
    pursuit: Option<Pursuit>,
    docked: Option<usize>,
    acquire_rng: StreamRng,
    decide_rng: StreamRng,
    wander_rng: StreamRng,
}

impl<T: Real> AgentBody<T> {
    pub fn is_dead(&self) -> bool {
        self.store.is_dead()
    }

    pub fn effective_range(&self) -> T {
        self.sensor_range * self.sensitivity
    }

    pub fn effective_speed(&self) -> T {
        self.base_speed * self.store.gain()
    }

    pub fn docked_at(&self) -> Option<usize> {
        self.docked
    }
}

/// Light avoidance is on while gain strictly exceeds the gate.
pub fn pattern_n_enabled<T: Scalar>(store: &EnergyStore<T>, gate: T) -> bool {
    store.gain() > gate
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepEventKind<T> {
    Vital(VitalEvent),
    Decision(DecisionTrace<T>),
    Transition {
        source: String,
        target: String,
        trigger: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent<T> {
    pub tick: u64,
    pub agent: u32,
    pub kind: StepEventKind<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PursuitRecord {
    pub tick: u64,
    pub follower: u32,
    pub target: u32,
}

#[derive(Debug, Clone)]
pub struct World<T> {
    pub bounds: Bounds<T>,
    pub params: WorldParams<T>,
    stations: Vec<Station<T>>,
    lights: Vec<Light<T>>,
    agents: Vec<AgentBody<T>>,
    tick: u64,
    seed: u64,
    machine: Arc<StateMachine>,
    pursuits: Vec<PursuitRecord>,
}

impl<T: Real> World<T> {
    pub fn new(
        bounds: Bounds<T>,
        params: WorldParams<T>,
        seed: u64,
        machine: Arc<StateMachine>,
    ) -> Self {
        Self {
            bounds,
            params,
            stations: Vec::new(),
            lights: Vec::new(),
            agents: Vec::new(),
            tick: 0,
            seed,
            machine,
            pursuits: Vec::new(),
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stations(&self) -> &[Station<T>] {
        &self.stations
    }

    pub fn lights(&self) -> &[Light<T>] {
        &self.lights
    }

    pub fn agents(&self) -> &[AgentBody<T>] {
        &self.agents
    }

    pub fn agent(&self, id: u32) -> Result<&AgentBody<T>, WorldError> {
        self.agents
            .get(id as usize)
            .ok_or(WorldError::UnknownAgent(id))
    }

    pub fn pursuits(&self) -> &[PursuitRecord] {
        &self.pursuits
    }

    pub fn add_station(&mut self, station: Station<T>) -> Result<usize, WorldError> {
        station.validate()?;
        self.check_inside(station.position, &station.id)?;
        self.stations.push(station);
        Ok(self.stations.len() - 1)
    }

    pub fn add_light(&mut self, light: Light<T>) -> Result<usize, WorldError> {
        if !(light.intensity >= T::zero()) {
            return Err(WorldError::Invalid(format!(
                "light `{}` intensity must be >= 0",
                light.id
            )));
        }
        self.check_inside(light.position, &light.id)?;
        self.lights.push(light);
        Ok(self.lights.len() - 1)
    }

    fn check_inside(&self, p: Vec2<T>, what: &str) -> Result<(), WorldError> {
        if self.bounds.contains(p) {
            Ok(())
        } else {
            Err(WorldError::Invalid(format!(
                "`{what}` at ({}, {}) lies outside the arena",
                p.x, p.y
            )))
        }
    }

    pub fn add_agent(&mut self, spec: AgentSpec<T>) -> Result<u32, WorldError> {
        let id = self.agents.len() as u32;
        let name = format!("agent {id}");
        self.check_inside(spec.position, &name)?;
        if !(spec.sensitivity >= T::zero() && spec.sensitivity <= T::one()) {
            return Err(WorldError::Invalid(format!(
                "{name}: sensitivity must lie in [0, 1], got {}",
                spec.sensitivity
            )));
        }
        if !(spec.base_speed >= T::zero()) || !(spec.sensor_range >= T::zero()) {
            return Err(WorldError::Invalid(format!(
                "{name}: speed and sensor range must be >= 0"
            )));
        }
        let store = EnergyStore::new(spec.energy, spec.initial_charge)?;
        let mut machine = MachineInstance::new(Arc::clone(&self.machine));
        machine.tick_timers(self.tick)?;
        self.agents.push(AgentBody {
            id,
            position: spec.position,
            heading: spec.heading,
            base_speed: spec.base_speed,
            sensor_range: spec.sensor_range,
            sensitivity: spec.sensitivity,
            store,
            machine,
            weights: spec.weights,
            feeding: FeedingState::default(),
            classification: spec.classification,
            death_awareness: spec.death_awareness,
            lamp_on: true,
            died_at: None,
            pursuit: None,
            docked: None,
            acquire_rng: stream(self.seed, "acquire", id as u64),
            decide_rng: stream(self.seed, "decide", id as u64),
            wander_rng: stream(self.seed, "wander", id as u64),
        });
        Ok(id)
    }

    /// Replaces the bounds with a circular corral, pulling agents inside.
    pub fn set_corral_radius(&mut self, radius: T) -> Result<(), WorldError> {
        if !(radius > T::zero()) {
            return Err(WorldError::Invalid(format!(
                "corral radius must be > 0, got {radius}"
            )));
        }
        self.bounds = Bounds::Circle { radius };
        for a in &mut self.agents {
            let (p, h) = self.bounds.clamp_and_turn(a.position, a.heading);
            a.position = p;
            a.heading = h;
        }
        Ok(())
    }

    pub fn pattern_n_enabled(&self, id: u32) -> Result<bool, WorldError> {
        let a = self.agent(id)?;
        if a.is_dead() {
            return Err(WorldError::Dead(id));
        }
        Ok(pattern_n_enabled(&a.store, self.params.pattern_n_gate))
    }

    pub fn sense(&self, id: u32) -> Result<Vec<Percept<T>>, WorldError> {
        let a = self.agent(id)?;
        if a.is_dead() {
            return Err(WorldError::Dead(id));
        }
        let range = a.effective_range();
        let mut out = Vec::new();
        let mut push = |kind, source, target: Vec2<T>, intensity: T| {
            let d = a.position.dist(target);
            if d <= range {
                out.push(Percept {
                    kind,
                    source,
                    strength: intensity / (T::one() + d),
                    bearing: wrap_angle((target - a.position).angle() - a.heading),
                    distance: d,
                });
            }
        };
        for (s, st) in self.stations.iter().enumerate() {
            if a.position.dist(st.position) <= st.ir_range {
                push(
                    PerceptKind::IrSignal,
                    Source::Station(s),
                    st.position,
                    T::one(),
                );
            }
            for (v, &p) in st.track.iter().enumerate() {
                push(
                    PerceptKind::TrackMark,
                    Source::TrackVertex {
                        station: s,
                        vertex: v,
                    },
                    p,
                    T::one(),
                );
            }
            if let Some(intensity) = st.light {
                push(
                    PerceptKind::Light,
                    Source::Station(s),
                    st.position,
                    intensity,
                );
            }
        }
        for (l, light) in self.lights.iter().enumerate() {
            push(
                PerceptKind::Light,
                Source::Light(l),
                light.position,
                light.intensity,
            );
        }
        for other in &self.agents {
            if other.id != id && other.lamp_on && !other.is_dead() {
                push(
                    PerceptKind::AgentLamp,
                    Source::Agent(other.id),
                    other.position,
                    T::one(),
                );
            }
        }
        Ok(out)
    }

    pub fn aggregation_metrics(&self) -> Result<AggregationMetrics<T>, WorldError> {
        let positions: Vec<_> = self.agents.iter().map(|a| a.position).collect();
        aggregation(&positions, self.params.cluster_threshold)
    }

    /// The agent whose lamp was pursued most over the last `window` ticks.
    pub fn leader_observation(&self, window: u64) -> Option<u32> {
        let from = self.tick.saturating_sub(window);
        most_pursued(
            self.pursuits
                .iter()
                .filter(|r| r.tick >= from)
                .map(|r| (r.follower, r.target)),
        )
    }

    /// Advances the world by one tick.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self) -> Result<Vec<StepEvent<T>>, WorldError> {
        let tick = self.tick;
        let mut events = Vec::new();
        let mut lamps: Vec<bool> = self.agents.iter().map(|a| a.lamp_on).collect();
        for i in 0..self.agents.len() {
            if self.agents[i].is_dead() {
                continue;
            }
            let percepts = self.sense(i as u32)?;
            lamps[i] = !percepts
                .iter()
                .any(|p| matches!(p.kind, PerceptKind::Light | PerceptKind::AgentLamp));
            self.update_agent(i, tick, &percepts, &mut events)?;
            if self.agents[i].is_dead() {
                lamps[i] = false;
            }
        }
        for (a, lamp) in self.agents.iter_mut().zip(lamps) {
            a.lamp_on = lamp;
        }
        self.tick += 1;
        Ok(events)
    }

    fn update_agent(
        &mut self,
        i: usize,
        tick: u64,
        percepts: &[Percept<T>],
        events: &mut Vec<StepEvent<T>>,
    ) -> Result<(), WorldError> {
        let params = self.params;
        let dock = params.dock_radius;
        let stations = &self.stations;
        let agent = &mut self.agents[i];
        let id = agent.id;
        let before = agent.store.clone();
        agent.store.absorb_percepts(percepts.len() as u64);

        if agent.machine.leaf() == feeding::FINAL {
            agent.machine.restart();
        }
        let leaf = agent.machine.leaf().to_owned();
        match leaf.as_str() {
            feeding::INITIAL if agent.store.is_low() => agent.machine.enqueue(feeding::POWER_LOW),
            feeding::LOCATE_FOOD => {
                if percepts.iter().any(|p| p.kind == PerceptKind::IrSignal) {
                    agent.machine.enqueue(feeding::SIGNAL_FOUND);
                } else if percepts.iter().any(|p| p.kind == PerceptKind::TrackMark) {
                    agent.machine.enqueue(feeding::TRACK_FOUND);
                }
            }
            feeding::FOLLOW_IR | feeding::FOLLOW_TRACK => {
                let (kind, lost) = if leaf == feeding::FOLLOW_IR {
                    (PursuitKind::Beacon, feeding::SIGNAL_LOST)
                } else {
                    (PursuitKind::Track, feeding::TRACK_LOST)
                };
                match agent.pursuit.filter(|p| p.kind == kind) {
                    Some(p) => {
                        if agent.position.dist(stations[p.station].position) <= dock {
                            agent.machine.enqueue(feeding::ENGAGE);
                        }
                    }
                    None => {
                        agent.pursuit = None;
                        match acquire(kind, percepts, stations, &mut agent.acquire_rng) {
                            Some(p) => agent.pursuit = Some(p),
                            None => agent.machine.enqueue(lost),
                        }
                    }
                }
            }
            feeding::RECHARGE => {
                if let Some(s) = agent.docked {
                    let was_full = agent.store.charge() == agent.store.capacity();
                    if agent.store.recharge(stations[s].recharge_rate, 1)? && !was_full {
                        events.push(StepEvent {
                            tick,
                            agent: id,
                            kind: StepEventKind::Vital(VitalEvent {
                                kind: VitalEventKind::Recharged,
                                tick,
                            }),
                        });
                    }
                }
            }
            _ => {}
        }

        agent.machine.tick_timers(tick)?;
        let fired = {
            let mut ctx = FeedingContext::new(
                &mut agent.weights,
                &mut agent.decide_rng,
                &mut agent.feeding,
            );
            agent.machine.run_to_completion(&mut ctx)?
        };
        for f in fired {
            if let Some(trace) = f.decision {
                events.push(StepEvent {
                    tick,
                    agent: id,
                    kind: StepEventKind::Decision(trace),
                });
            }
            events.push(StepEvent {
                tick,
                agent: id,
                kind: StepEventKind::Transition {
                    source: f.source,
                    target: f.target,
                    trigger: f.trigger,
                },
            });
        }
        for out in agent.machine.take_emitted() {
            if out == feeding::POWER_LOWER {
                if let Some(ev) = feeding_failure_event(&agent.store, tick) {
                    events.push(StepEvent {
                        tick,
                        agent: id,
                        kind: StepEventKind::Vital(ev),
                    });
                }
            }
        }

        let leaf = agent.machine.leaf();
        if leaf == feeding::RECHARGE {
            if agent.docked.is_none() {
                agent.docked = agent.pursuit.map(|p| p.station);
            }
        } else {
            agent.docked = None;
        }
        if leaf != feeding::FOLLOW_IR && leaf != feeding::FOLLOW_TRACK {
            agent.pursuit = None;
        }

        // Drawn every tick so both arms of an ablation stay aligned.
        let jitter = T::lit(agent.wander_rng.random_range(-1.0..=1.0)) * params.wander;
        let action = if agent.docked.is_some() {
            IDLE
        } else {
            let speed = agent.effective_speed();
            if let Some(p) = agent.pursuit.as_mut() {
                let st = &stations[p.station];
                let mut target = match p.kind {
                    PursuitKind::Beacon => st.position,
                    PursuitKind::Track => st.track[p.next_vertex],
                };
                while p.kind == PursuitKind::Track
                    && p.next_vertex + 1 < st.track.len()
                    && agent.position.dist(target) <= dock
                {
                    p.next_vertex += 1;
                    target = st.track[p.next_vertex];
                }
                let offset = target - agent.position;
                let dist = offset.norm();
                if dist > T::zero() {
                    agent.heading = offset.angle();
                    agent.position = agent.position + offset * (speed.min_of(dist) / dist);
                }
            } else {
                let aware = agent.death_awareness && agent.store.is_critical();
                let avoid = !aware && pattern_n_enabled(&agent.store, params.pattern_n_gate);
                let mut steer = Vec2::from_angle(agent.heading);
                for p in percepts.iter().filter(|p| p.kind == PerceptKind::Light) {
                    let toward = Vec2::from_angle(agent.heading + p.bearing);
                    let w = p.strength * params.phototaxis;
                    steer = steer + toward * if avoid { -w } else { w };
                }
                if !aware {
                    let strongest = percepts
                        .iter()
                        .filter(|p| p.kind == PerceptKind::AgentLamp)
                        .fold(None::<&Percept<T>>, |best, p| match best {
                            Some(b) if b.strength >= p.strength => Some(b),
                            _ => Some(p),
                        });
                    if let (Some(p), true) = (strongest, params.attraction > T::zero()) {
                        let toward = Vec2::from_angle(agent.heading + p.bearing);
                        steer = steer + toward * (p.strength * params.attraction);
                        if let Source::Agent(target) = p.source {
                            self.pursuits.push(PursuitRecord {
                                tick,
                                follower: id,
                                target,
                            });
                        }
                    }
                    if params.repulsion_radius > T::zero() {
                        let me = agent.position;
                        let push_away = self.agents.iter().filter(|o| o.id != id).fold(
                            Vec2::zero(),
                            |acc, o| {
                                let d = me.dist(o.position);
                                if d < params.repulsion_radius {
                                    let away = if d > T::zero() {
                                        (me - o.position) * (T::one() / d)
                                    } else {
                                        Vec2::from_angle(T::lit(o.id as f64))
                                    };
                                    acc + away
                                        * (params.repulsion
                                            * (T::one() - d / params.repulsion_radius))
                                } else {
                                    acc
                                }
                            },
                        );
                        steer = steer + push_away;
                    }
                }
                let agent = &mut self.agents[i];
                let heading = if steer.norm() > T::zero() {
                    steer.angle()
                } else {
                    agent.heading
                };
                agent.heading = wrap_angle(if aware { heading } else { heading + jitter });
                agent.position = agent.position + Vec2::from_angle(agent.heading) * speed;
            }
            MOVE
        };
        let agent = &mut self.agents[i];
        let (p, h) = self.bounds.clamp_and_turn(agent.position, agent.heading);
        agent.position = p;
        agent.heading = h;
        debug_assert!(self.bounds.contains(agent.position));

        agent.store.drain(action)?;
        // Recharged was reported when the store filled up, before this drain.
        for ev in vital_events(&before, &agent.store, tick)
            .into_iter()
            .filter(|e| e.kind != VitalEventKind::Recharged)
        {
            events.push(StepEvent {
                tick,
                agent: id,
                kind: StepEventKind::Vital(ev),
            });
        }
        if agent.store.is_dead() {
            agent.died_at = Some(tick);
            agent.pursuit = None;
            agent.docked = None;
        }
        Ok(())
    }
}

/// One acquisition attempt on the nearest perceived beacon or track.
fn acquire<T: Real, R: Rng + ?Sized>(
    kind: PursuitKind,
    percepts: &[Percept<T>],
    stations: &[Station<T>],
    rng: &mut R,
) -> Option<Pursuit> {
    let nearest = percepts
        .iter()
        .filter_map(|p| match (kind, p.kind, p.source) {
            (PursuitKind::Beacon, PerceptKind::IrSignal, Source::Station(s)) => {
                Some((p.distance, s, 0))
            }
            (
                PursuitKind::Track,
                PerceptKind::TrackMark,
                Source::TrackVertex { station, vertex },
            ) => Some((p.distance, station, vertex)),
            _ => None,
        })
        .fold(None::<(T, usize, usize)>, |best, c| match best {
            Some(b) if b.0 <= c.0 => Some(b),
            _ => Some(c),
        })?;
    let (_, station, vertex) = nearest;
    let reliability = match kind {
        PursuitKind::Beacon => stations[station].ir_reliability,
        PursuitKind::Track => stations[station].track_reliability,
    };
    rng.random_bool(reliability.to_f64()).then_some(Pursuit {
        kind,
        station,
        next_vertex: vertex,
    })
}
