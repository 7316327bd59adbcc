use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::decision::WeightTable;
use crate::fsm::feeding::DEFAULT_WAIT_TICKS;
use crate::kv::{self, KvEntry};
use crate::vitality::{EnergyParams, GainCurve, IDLE};
use crate::world::{Bounds, Classification, Light, Station, Vec2, WorldParams, MOVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Step worlds for `ticks` ticks.
    Simulate,
    /// Ask each agent's weight table for one choice without simulating.
    SingleDecision,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "single_decision" => Ok(Mode::SingleDecision),
            other => Err(format!(
                "unknown mode `{other}` (expected simulate or single_decision)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Random placement inside the arena when absent.
    pub position: Option<Vec2<f64>>,
    pub heading: Option<f64>,
    pub sensitivity: f64,
    pub classification: Classification,
    pub death_awareness: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub ticks: u64,
    pub replications: u32,
    pub mode: Mode,
    pub bounds: Bounds<f64>,
    pub params: WorldParams<f64>,
    pub stations: Vec<Station<f64>>,
    pub lights: Vec<Light<f64>>,
    /// Corral radii applied in order, one stage each.
    pub corral_schedule: Vec<f64>,
    /// Ticks per corral stage.
    pub corral_interval: u64,
    /// Aggregation sampling period in ticks; 0 samples only at stage ends.
    pub metrics_interval: u64,
    pub energy: EnergyParams<f64>,
    /// Starting charge as a fraction of capacity.
    pub initial_charge: f64,
    pub base_speed: f64,
    pub sensor_range: f64,
    pub agents: Vec<AgentConfig>,
    pub tolerance: f64,
    /// Starting (positive, negative) weights per path.
    pub initial_weights: BTreeMap<String, (f64, f64)>,
    /// Stop once every living agent has made this many feeding decisions; 0 never stops early.
    pub episodes: u64,
    pub wait_timer: u64,
    pub leader_window: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", render_errors(.0))]
    Invalid(Vec<ConfigError>),
}

fn render_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl LoadError {
    pub fn errors(&self) -> &[ConfigError] {
        match self {
            LoadError::Invalid(e) => e,
            LoadError::Io { .. } => &[],
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

/// Tracks which keys were read so leftovers can be reported as unknown.
struct Reader<'a> {
    entries: BTreeMap<&'a str, &'a KvEntry>,
    used: BTreeSet<&'a str>,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a KvEntry> {
        let (k, e) = self.entries.get_key_value(key)?;
        self.used.insert(k);
        Some(e)
    }

    fn fail(&mut self, e: &KvEntry, message: String) {
        self.errors.push(ConfigError {
            line: e.line,
            column: e.value_column,
            message: format!("`{}`: {message}", e.key),
        });
    }

    fn parsed<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.raw(key) else {
            return default;
        };
        match e.value.parse() {
            Ok(v) => v,
            Err(err) => {
                self.fail(e, format!("invalid value `{}`: {err}", e.value));
                default
            }
        }
    }

    fn num(&mut self, key: &str, default: f64, lo: f64, hi: f64) -> f64 {
        let v = self.parsed(key, default);
        if !(v >= lo && v <= hi) {
            let e = self
                .raw(key)
                .expect("out-of-range values come from the file");
            self.fail(e, format!("{v} is outside [{lo}, {hi}]"));
            return default;
        }
        v
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.parsed(key, default);
        if !(v > 0.0 && v.is_finite()) {
            let e = self
                .raw(key)
                .expect("out-of-range values come from the file");
            self.fail(e, format!("must be > 0, got {v}"));
            return default;
        }
        v
    }

    fn count(&mut self, key: &str, default: u64, min: u64) -> u64 {
        let v = self.parsed(key, default);
        if v < min {
            let e = self
                .raw(key)
                .expect("out-of-range values come from the file");
            self.fail(e, format!("must be >= {min}, got {v}"));
            return default;
        }
        v
    }

    fn list(&mut self, key: &str, sep: char) -> Option<(Vec<f64>, &'a KvEntry)> {
        let e = self.raw(key)?;
        if e.value.is_empty() {
            return Some((Vec::new(), e));
        }
        let items: Vec<&str> = if sep == ' ' {
            e.value.split_whitespace().collect()
        } else {
            e.value.split(sep).map(str::trim).collect()
        };
        let mut out = Vec::new();
        for item in items {
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.fail(e, format!("`{item}` is not a number"));
                    return None;
                }
            }
        }
        Some((out, e))
    }

    fn pair(&mut self, key: &str) -> Option<(f64, f64)> {
        let (v, e) = self.list(key, ' ')?;
        match v.as_slice() {
            [a, b] => Some((*a, *b)),
            _ => {
                self.fail(e, "expected two numbers separated by a space".into());
                None
            }
        }
    }

    fn points(&mut self, key: &str) -> Option<Vec<Vec2<f64>>> {
        let e = self.raw(key)?;
        let mut out = Vec::new();
        for item in e.value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let nums: Vec<Option<f64>> = item.split_whitespace().map(|s| s.parse().ok()).collect();
            match nums.as_slice() {
                [Some(x), Some(y)] if x.is_finite() && y.is_finite() => out.push(Vec2::new(*x, *y)),
                _ => {
                    self.fail(e, format!("`{item}` is not an `x y` point"));
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Distinct `<id>` values among keys shaped `<prefix>.<id>.<field>`.
    fn ids(&self, prefix: &str) -> Vec<&'a str> {
        let mut ids: Vec<&str> = self
            .entries
            .keys()
            .filter_map(|k| {
                k.strip_prefix(prefix)?
                    .strip_prefix('.')?
                    .split_once('.')
                    .map(|(id, _)| id)
            })
            .collect();
        ids.dedup();
        ids
    }
}

/// Parses and validates config text, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, LoadError> {
    let entries = kv::parse(text).map_err(|errs| {
        LoadError::Invalid(
            errs.into_iter()
                .map(|e| ConfigError {
                    line: e.line,
                    column: e.column,
                    message: e.message,
                })
                .collect(),
        )
    })?;
    let mut r = Reader {
        entries: entries.iter().map(|e| (e.key.as_str(), e)).collect(),
        used: BTreeSet::new(),
        errors: Vec::new(),
    };

    let seed = r.parsed("seed", 0u64);
    let ticks = r.count("ticks", 1000, 1);
    let replications = r.count("replications", 1, 1).min(u64::from(u32::MAX)) as u32;
    let mode = r.parsed("mode", Mode::Simulate);

    let shape = r.raw("world.shape").map_or("rect", |e| e.value.as_str());
    let bounds = match shape {
        "rect" => Bounds::Rect {
            half_width: r.positive("world.width", 40.0) / 2.0,
            half_height: r.positive("world.height", 40.0) / 2.0,
        },
        "circle" => Bounds::Circle {
            radius: r.positive("world.radius", 20.0),
        },
        other => {
            let e = r.raw("world.shape").expect("read above");
            r.fail(
                e,
                format!("unknown shape `{other}` (expected rect or circle)"),
            );
            Bounds::Rect {
                half_width: 20.0,
                half_height: 20.0,
            }
        }
    };
    let d = WorldParams::<f64>::default();
    let params = WorldParams {
        pattern_n_gate: r.num("world.pattern_n_gate", d.pattern_n_gate, 0.0, 1.0),
        phototaxis: r.num("world.phototaxis", d.phototaxis, 0.0, f64::MAX),
        attraction: r.num("world.attraction", d.attraction, 0.0, f64::MAX),
        repulsion_radius: r.num("world.repulsion_radius", d.repulsion_radius, 0.0, f64::MAX),
        repulsion: r.num("world.repulsion", d.repulsion, 0.0, f64::MAX),
        cluster_threshold: r.num(
            "world.cluster_threshold",
            d.cluster_threshold,
            0.0,
            f64::MAX,
        ),
        dock_radius: r.num("world.dock_radius", d.dock_radius, 0.0, f64::MAX),
        wander: r.num("world.wander", d.wander, 0.0, std::f64::consts::PI),
    };

    let mut stations = Vec::new();
    for id in r.ids("station") {
        let key = |f: &str| format!("station.{id}.{f}");
        let position = Vec2::new(r.parsed(&key("x"), 0.0), r.parsed(&key("y"), 0.0));
        let mut track = r.points(&key("track")).unwrap_or_default();
        track.push(position);
        let light = r
            .raw(&key("light"))
            .is_some()
            .then(|| r.num(&key("light"), 1.0, 0.0, f64::MAX));
        let station = Station {
            id: id.to_owned(),
            position,
            ir_range: r.positive(&key("ir_range"), 5.0),
            ir_reliability: r.num(&key("ir_reliability"), 1.0, 0.0, 1.0),
            track,
            track_reliability: r.num(&key("track_reliability"), 1.0, 0.0, 1.0),
            recharge_rate: r.num(&key("recharge_rate"), 1.0, 0.0, f64::MAX),
            light,
        };
        if let Err(e) = station.validate() {
            let line = r
                .raw(&key("x"))
                .or_else(|| r.raw(&key("ir_range")))
                .map_or(1, |e| e.line);
            r.errors.push(ConfigError {
                line,
                column: 1,
                message: e.to_string(),
            });
        }
        stations.push(station);
    }

    let mut lights = Vec::new();
    for id in r.ids("light") {
        let key = |f: &str| format!("light.{id}.{f}");
        lights.push(Light {
            id: id.to_owned(),
            position: Vec2::new(r.parsed(&key("x"), 0.0), r.parsed(&key("y"), 0.0)),
            intensity: r.num(&key("intensity"), 1.0, 0.0, f64::MAX),
        });
    }

    let corral_schedule = match r.list("corral.schedule", ',') {
        Some((radii, e)) => {
            if radii.iter().any(|&x| x <= 0.0) {
                r.fail(e, "every corral radius must be > 0".into());
            }
            radii
        }
        None => Vec::new(),
    };
    let stages = corral_schedule.len().max(1) as u64;
    let corral_interval = r.count("corral.interval", (ticks / stages).max(1), 1);
    let metrics_interval = r.parsed("metrics.interval", 0u64);

    let capacity = r.positive("energy.capacity", 1.0);
    let mut energy = EnergyParams::new(capacity, r.num("energy.base_drain", 0.001, 0.0, capacity))
        .with_cost(MOVE, r.num("energy.cost.move", 0.0, 0.0, capacity))
        .with_cost(IDLE, r.num("energy.cost.idle", 0.0, 0.0, capacity))
        .with_thresholds(
            r.num("energy.low", 0.3, 0.0, 1.0),
            r.num("energy.critical", 0.1, 0.0, 1.0),
        );
    if let Some((knee_charge, knee_gain)) = r.pair("energy.gain_knee") {
        match GainCurve::with_knee(knee_charge, knee_gain) {
            Ok(c) => energy = energy.with_gain_curve(c),
            Err(err) => {
                let e = r.raw("energy.gain_knee").expect("read above");
                r.fail(e, err.to_string());
            }
        }
    }
    if let Err(err) = energy.validate() {
        let e = r.raw("energy.low").or_else(|| r.raw("energy.critical"));
        r.errors.push(ConfigError {
            line: e.map_or(1, |e| e.line),
            column: e.map_or(1, |e| e.value_column),
            message: err.to_string(),
        });
    }
    let initial_charge = r.num("energy.initial", 1.0, 0.0, 1.0);

    let count = r.count("agents.count", 1, 0) as usize;
    let base_speed = r.num("agents.speed", 0.5, 0.0, f64::MAX);
    let sensor_range = r.num("agents.sensor_range", 10.0, 0.0, f64::MAX);
    let default_sensitivity = r.num("agents.sensitivity", 1.0, 0.0, 1.0);
    let default_class = r.parsed("agents.classification", Classification::Anima);
    let default_aware = r.parsed("agents.death_awareness", false);
    let sensitivities = r.list("agents.sensitivities", ',');
    if let Some((s, e)) = &sensitivities {
        if s.len() > count {
            r.fail(e, format!("{} sensitivities for {count} agents", s.len()));
        }
        if s.iter().any(|x| !(0.0..=1.0).contains(x)) {
            r.fail(e, "sensitivities must lie in [0, 1]".into());
        }
    }
    let mut agents = Vec::with_capacity(count);
    for n in 0..count {
        let key = |f: &str| format!("agent.{n}.{f}");
        let listed = sensitivities.as_ref().and_then(|(s, _)| s.get(n).copied());
        let sensitivity = r.num(
            &key("sensitivity"),
            listed.unwrap_or(default_sensitivity),
            0.0,
            1.0,
        );
        let position = match (r.raw(&key("x")).is_some(), r.raw(&key("y")).is_some()) {
            (false, false) => None,
            _ => Some(Vec2::new(
                r.parsed(&key("x"), 0.0),
                r.parsed(&key("y"), 0.0),
            )),
        };
        if let Some(p) = position.filter(|p| !bounds.contains(*p)) {
            let e = r
                .raw(&key("x"))
                .or_else(|| r.raw(&key("y")))
                .expect("position came from the file");
            r.fail(e, format!("({}, {}) lies outside the arena", p.x, p.y));
        }
        agents.push(AgentConfig {
            position,
            heading: r
                .raw(&key("heading"))
                .is_some()
                .then(|| r.parsed(&key("heading"), 0.0)),
            sensitivity,
            classification: r.parsed(&key("classification"), default_class),
            death_awareness: r.parsed(&key("death_awareness"), default_aware),
        });
    }
    for id in r.ids("agent") {
        if id.parse::<usize>().map_or(true, |n| n >= count) {
            let prefix = format!("agent.{id}.");
            let keys: Vec<&str> = r
                .entries
                .keys()
                .copied()
                .filter(|k| k.starts_with(&prefix))
                .collect();
            let first = keys.iter().filter_map(|k| r.raw(k)).min_by_key(|e| e.line);
            if let Some(e) = first {
                r.fail(
                    e,
                    format!("agent index `{id}` is not below agents.count = {count}"),
                );
            }
        }
    }

    let tolerance = r.positive(
        "decision.tolerance",
        WeightTable::<f64>::default_tolerance(),
    );
    let mut initial_weights = BTreeMap::new();
    for path in ["signal", "track"] {
        let key = format!("decision.{path}");
        if let Some((pos, neg)) = r.pair(&key) {
            if !(0.0..=1.0).contains(&pos) || !(0.0..=1.0).contains(&neg) {
                let e = r.raw(&key).expect("read above");
                r.fail(e, "weights must lie in [0, 1]".into());
            }
            initial_weights.insert(path.to_owned(), (pos, neg));
        }
    }
    let episodes = r.parsed("decision.episodes", 0u64);
    let wait_timer = r.count("fsm.wait_timer", DEFAULT_WAIT_TICKS, 1);
    let leader_window = r.count("leader.window", ticks, 1);
    let output_dir = PathBuf::from(r.raw("output.dir").map_or("out", |e| e.value.as_str()));

    let unknown: Vec<&KvEntry> = entries
        .iter()
        .filter(|e| !r.used.contains(e.key.as_str()))
        .collect();
    for e in unknown {
        r.errors.push(ConfigError {
            line: e.line,
            column: 1,
            message: format!("unknown key `{}`", e.key),
        });
    }
    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| (e.line, e.column));
        return Err(LoadError::Invalid(r.errors));
    }
    Ok(ExperimentConfig {
        seed,
        ticks,
        replications,
        mode,
        bounds,
        params,
        stations,
        lights,
        corral_schedule,
        corral_interval,
        metrics_interval,
        energy,
        initial_charge,
        base_speed,
        sensor_range,
        agents,
        tolerance,
        initial_weights,
        episodes,
        wait_timer,
        leader_window,
        output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<ConfigError> {
        parse_config(text).unwrap_err().errors().to_vec()
    }

    #[test]
    fn seed_only_uses_defaults() {
        let c = parse_config("seed = 42\n").unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.ticks, 1000);
        assert_eq!(c.replications, 1);
        assert_eq!(c.mode, Mode::Simulate);
        assert_eq!(c.tolerance, 0.1);
        assert_eq!(c.wait_timer, DEFAULT_WAIT_TICKS);
        assert_eq!(c.agents.len(), 1);
        assert_eq!(c.params, WorldParams::default());
    }

    #[test]
    fn reliability_out_of_range_names_key() {
        let e = errors("station.a.track = 1 1\nstation.a.ir_reliability = 1.5\n");
        assert_eq!(e.len(), 1);
        assert!(
            e[0].message.contains("station.a.ir_reliability"),
            "{}",
            e[0]
        );
        assert_eq!(e[0].line, 2);
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let e = errors("seed = 1\nseed = 2\n");
        assert!(e[0].message.contains("line 1") && e[0].message.contains("line 2"));
    }

    #[test]
    fn every_violation_is_reported() {
        let e = errors("ticks = 0\nreplications = 0\ndecision.signal = 2 0\nbogus = 1\n");
        assert_eq!(e.iter().map(|e| e.line).collect::<Vec<_>>(), [1, 2, 3, 4]);
    }

    #[test]
    fn stations_and_roster() {
        let c = parse_config(
            "station.s.x = 5\nstation.s.track = 0 0; 2 0\nagents.count = 3\nagents.sensitivities = 0, 1\nagent.2.x = 1\nagent.2.y = 2\n",
        )
        .unwrap();
        assert_eq!(
            c.stations[0].track,
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(5.0, 0.0)
            ]
        );
        let s: Vec<f64> = c.agents.iter().map(|a| a.sensitivity).collect();
        assert_eq!(s, [0.0, 1.0, 1.0]);
        assert_eq!(c.agents[2].position, Some(Vec2::new(1.0, 2.0)));
        assert!(errors("agent.5.x = 1\n")[0]
            .message
            .contains("agents.count"));
    }
}
