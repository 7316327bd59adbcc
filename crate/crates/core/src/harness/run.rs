use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode};
use crate::decision::{ChoicePath, DecisionError, DecisionTrace, WeightEntry, WeightTable};
use crate::fsm::feeding::{shared_feeding_machine, SIGNAL, TRACK};
use crate::rng::{mix, stream};
use crate::vitality::VitalEventKind;
use crate::world::{AgentSpec, AggregationMetrics, Bounds, StepEventKind, Vec2, World, WorldError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("replication {replication}: {source}")]
    World {
        replication: u32,
        source: WorldError,
    },
    #[error("replication {replication}: {source}")]
    Decision {
        replication: u32,
        source: DecisionError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub tick: u64,
    pub agent: u32,
    pub chosen: String,
    pub score_signal: f64,
    pub score_track: f64,
    pub tie_broken: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VitalRow {
    pub tick: u64,
    pub agent: u32,
    pub event: VitalEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub tick: u64,
    pub agent: u32,
    pub source: String,
    pub target: String,
    pub trigger: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub agent: u32,
    pub path: String,
    pub entry: WeightEntry<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationRow {
    pub tick: u64,
    /// Corral radius in force, if the arena is a corral.
    pub radius: Option<f64>,
    pub metrics: AggregationMetrics<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub agent: u32,
    pub died_at: Option<u64>,
    pub ticks_alive: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub replication: u32,
    /// Seed the replication's world was built from.
    pub seed: u64,
    pub ticks_run: u64,
    pub decisions: Vec<DecisionRow>,
    pub vitals: Vec<VitalRow>,
    pub transitions: Vec<TransitionRow>,
    pub weights: Vec<WeightRow>,
    pub aggregation: Vec<AggregationRow>,
    pub survival: Vec<SurvivalRow>,
    pub leader: Option<u32>,
}

impl ReplicationReport {
    fn new(replication: u32, seed: u64) -> Self {
        Self {
            replication,
            seed,
            ticks_run: 0,
            decisions: Vec::new(),
            vitals: Vec::new(),
            transitions: Vec::new(),
            weights: Vec::new(),
            aggregation: Vec::new(),
            survival: Vec::new(),
            leader: None,
        }
    }

    /// Final score of `path` for `agent`.
    pub fn score(&self, agent: u32, path: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|w| w.agent == agent && w.path == path)
            .map(|w| w.entry.score())
    }

    pub fn mean_survival(&self) -> f64 {
        if self.survival.is_empty() {
            return 0.0;
        }
        self.survival
            .iter()
            .map(|s| s.ticks_alive as f64)
            .sum::<f64>()
            / self.survival.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub replications: Vec<ReplicationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub replications: usize,
    pub agents: usize,
    /// Share of agents whose final signal score beats their track score.
    pub preference_rate: f64,
    /// Mean number of decisions before an agent's choices settle on its
    /// final preferred path.
    pub episodes_to_preference: Option<f64>,
    pub death_rate: f64,
    pub mean_survival: f64,
    /// Leader observations by agent; `None` counts replications without one.
    pub leaders: BTreeMap<Option<u32>, usize>,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        let mut agents = 0usize;
        let mut preferring = 0usize;
        let mut deaths = 0usize;
        let mut alive_ticks = 0u64;
        let mut settle = Vec::new();
        let mut leaders = BTreeMap::new();
        for rep in &self.replications {
            *leaders.entry(rep.leader).or_insert(0) += 1;
            for s in &rep.survival {
                agents += 1;
                deaths += usize::from(s.died_at.is_some());
                alive_ticks += s.ticks_alive;
                let (Some(sig), Some(trk)) =
                    (rep.score(s.agent, SIGNAL), rep.score(s.agent, TRACK))
                else {
                    continue;
                };
                preferring += usize::from(sig > trk);
                let preferred = if sig >= trk { SIGNAL } else { TRACK };
                let chosen: Vec<&str> = rep
                    .decisions
                    .iter()
                    .filter(|d| d.agent == s.agent)
                    .map(|d| d.chosen.as_str())
                    .collect();
                if !chosen.is_empty() {
                    let settled = chosen
                        .iter()
                        .rposition(|c| *c != preferred)
                        .map_or(0, |i| i + 1);
                    settle.push(settled as f64);
                }
            }
        }
        let ratio = |n: usize| {
            if agents == 0 {
                0.0
            } else {
                n as f64 / agents as f64
            }
        };
        Summary {
            replications: self.replications.len(),
            agents,
            preference_rate: ratio(preferring),
            episodes_to_preference: (!settle.is_empty())
                .then(|| settle.iter().sum::<f64>() / settle.len() as f64),
            death_rate: ratio(deaths),
            mean_survival: if agents == 0 {
                0.0
            } else {
                alive_ticks as f64 / agents as f64
            },
            leaders,
        }
    }
}

/// Runs every replication, in parallel, merged in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let replications = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunReport {
        seed: config.seed,
        replications,
    })
}

fn initial_table(config: &ExperimentConfig) -> Result<WeightTable<f64>, DecisionError> {
    let mut table = WeightTable::init(&ChoicePath::feeding_pair(), config.tolerance)?;
    for (path, &(pos, neg)) in &config.initial_weights {
        table.set_weights(path, pos, neg)?;
    }
    Ok(table)
}

fn decision_row(tick: u64, agent: u32, trace: &DecisionTrace<f64>) -> DecisionRow {
    DecisionRow {
        tick,
        agent,
        chosen: trace.chosen.to_string(),
        score_signal: trace.score_of(SIGNAL).unwrap_or(0.0),
        score_track: trace.score_of(TRACK).unwrap_or(0.0),
        tie_broken: trace.tie_broken,
    }
}

fn weight_rows(agent: u32, table: &WeightTable<f64>) -> impl Iterator<Item = WeightRow> + '_ {
    table.entries().map(move |(id, e)| WeightRow {
        agent,
        path: id.to_string(),
        entry: *e,
    })
}

fn random_point<R: Rng>(bounds: &Bounds<f64>, rng: &mut R) -> Vec2<f64> {
    match *bounds {
        Bounds::Rect {
            half_width,
            half_height,
        } => Vec2::new(
            rng.random_range(-half_width..=half_width),
            rng.random_range(-half_height..=half_height),
        ),
        Bounds::Circle { radius } => {
            let r = radius * rng.random::<f64>().sqrt();
            Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)) * r
        }
    }
}

/// Builds replication `replication`'s world before its first tick.
pub fn build_world(config: &ExperimentConfig, replication: u32) -> Result<World<f64>, RunError> {
    let seed = mix(config.seed, u64::from(replication));
    let wrap = |source| RunError::World {
        replication,
        source,
    };
    let mut world = World::new(
        config.bounds,
        config.params,
        seed,
        shared_feeding_machine(config.wait_timer),
    );
    for s in &config.stations {
        world.add_station(s.clone()).map_err(wrap)?;
    }
    for l in &config.lights {
        world.add_light(l.clone()).map_err(wrap)?;
    }
    let placement_bounds = match config.corral_schedule.first() {
        Some(&radius) => Bounds::Circle { radius },
        None => config.bounds,
    };
    let energy = Arc::new(config.energy.clone());
    let weights = initial_table(config).map_err(|source| RunError::Decision {
        replication,
        source,
    })?;
    for (n, a) in config.agents.iter().enumerate() {
        let mut layout = stream(seed, "layout", n as u64);
        let position = a
            .position
            .unwrap_or_else(|| random_point(&placement_bounds, &mut layout));
        let heading = a
            .heading
            .unwrap_or_else(|| layout.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        world
            .add_agent(AgentSpec {
                position,
                heading,
                base_speed: config.base_speed,
                sensor_range: config.sensor_range,
                sensitivity: a.sensitivity,
                energy: Arc::clone(&energy),
                initial_charge: config.energy.capacity * config.initial_charge,
                weights: weights.clone(),
                classification: a.classification,
                death_awareness: a.death_awareness,
            })
            .map_err(wrap)?;
    }
    if let Some(&radius) = config.corral_schedule.first() {
        world.set_corral_radius(radius).map_err(wrap)?;
    }
    Ok(world)
}

pub fn run_replication(
    config: &ExperimentConfig,
    replication: u32,
) -> Result<ReplicationReport, RunError> {
    match config.mode {
        Mode::Simulate => simulate(config, replication),
        Mode::SingleDecision => single_decision(config, replication),
    }
}

fn single_decision(
    config: &ExperimentConfig,
    replication: u32,
) -> Result<ReplicationReport, RunError> {
    let seed = mix(config.seed, u64::from(replication));
    let wrap = |source| RunError::Decision {
        replication,
        source,
    };
    let table = initial_table(config).map_err(wrap)?;
    let mut report = ReplicationReport::new(replication, seed);
    for n in 0..config.agents.len() as u32 {
        let mut rng = stream(seed, "decide", u64::from(n));
        let trace = table.choose(&mut rng).map_err(wrap)?;
        report.decisions.push(decision_row(0, n, &trace));
        report.weights.extend(weight_rows(n, &table));
        report.survival.push(SurvivalRow {
            agent: n,
            died_at: None,
            ticks_alive: 0,
        });
    }
    Ok(report)
}

fn simulate(config: &ExperimentConfig, replication: u32) -> Result<ReplicationReport, RunError> {
    let wrap = |source| RunError::World {
        replication,
        source,
    };
    let mut world = build_world(config, replication)?;
    let mut report = ReplicationReport::new(replication, world.seed());
    let schedule = &config.corral_schedule;
    let mut stage = 0usize;
    let sample = |world: &World<f64>, radius: Option<f64>, rows: &mut Vec<AggregationRow>| {
        if let Ok(metrics) = world.aggregation_metrics() {
            rows.push(AggregationRow {
                tick: world.tick(),
                radius,
                metrics,
            });
        }
    };

    while world.tick() < config.ticks {
        for e in world.step().map_err(wrap)? {
            match e.kind {
                StepEventKind::Vital(v) => report.vitals.push(VitalRow {
                    tick: e.tick,
                    agent: e.agent,
                    event: v.kind,
                }),
                StepEventKind::Decision(trace) => {
                    report.decisions.push(decision_row(e.tick, e.agent, &trace))
                }
                StepEventKind::Transition {
                    source,
                    target,
                    trigger,
                } => report.transitions.push(TransitionRow {
                    tick: e.tick,
                    agent: e.agent,
                    source,
                    target,
                    trigger,
                }),
            }
        }
        let now = world.tick();
        let stage_end = stage < schedule.len() && now % config.corral_interval == 0;
        let periodic = config.metrics_interval > 0 && now % config.metrics_interval == 0;
        if stage_end || periodic {
            sample(
                &world,
                schedule.get(stage).copied(),
                &mut report.aggregation,
            );
        }
        if stage_end {
            stage += 1;
            if let Some(&radius) = schedule.get(stage) {
                world.set_corral_radius(radius).map_err(wrap)?;
            }
        }
        let living: Vec<_> = world.agents().iter().filter(|a| !a.is_dead()).collect();
        if living.is_empty() && !world.agents().is_empty() {
            break;
        }
        if config.episodes > 0
            && living
                .iter()
                .all(|a| a.feeding.decisions >= config.episodes)
        {
            break;
        }
    }
    report.ticks_run = world.tick();
    if report
        .aggregation
        .last()
        .is_none_or(|r| r.tick != world.tick())
        && schedule.is_empty()
    {
        sample(&world, None, &mut report.aggregation);
    }
    for a in world.agents() {
        report.weights.extend(weight_rows(a.id, &a.weights));
        report.survival.push(SurvivalRow {
            agent: a.id,
            died_at: a.died_at,
            ticks_alive: a.store.ledger().ticks_alive,
        });
    }
    report.leader = world.leader_observation(config.leader_window);
    Ok(report)
}

/// Paired survival comparison between death-aware and ablated agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    /// Mean survival ticks per replication with the override enabled.
    pub aware: Vec<f64>,
    /// Same replications with the override disabled.
    pub ablated: Vec<f64>,
}

impl Ablation {
    pub fn mean_difference(&self) -> f64 {
        let n = self.aware.len().max(1) as f64;
        self.aware
            .iter()
            .zip(&self.ablated)
            .map(|(a, b)| a - b)
            .sum::<f64>()
            / n
    }
}

/// Runs `config` twice on the same seeds, with every agent death-aware and
/// with none.
pub fn death_awareness_ablation(config: &ExperimentConfig) -> Result<Ablation, RunError> {
    let arm = |aware: bool| -> Result<Vec<f64>, RunError> {
        let mut c = config.clone();
        c.mode = Mode::Simulate;
        for a in &mut c.agents {
            a.death_awareness = aware;
        }
        Ok(run_experiment(&c)?
            .replications
            .iter()
            .map(ReplicationReport::mean_survival)
            .collect())
    };
    Ok(Ablation {
        aware: arm(true)?,
        ablated: arm(false)?,
    })
}
