//! Experiment configuration, seeded execution, report files and replay.
//!
//! A run is described by a flat `section.key = value` file (see the README
//! for every key). Replication `r` of a run seeded with `s` builds its world
//! from `mix(s, r)`; replications execute in parallel and are merged in index
//! order, so the output bytes depend only on the config.

mod config;
mod output;
mod run;

pub use config::{
    load_config, parse_config, AgentConfig, ConfigError, ExperimentConfig, LoadError, Mode,
};
pub use output::{
    compare_with_reference, emit_report, first_difference, num, render_report, Divergence,
    OutputError, ReplayError, FILES,
};
pub use run::{
    build_world, death_awareness_ablation, run_experiment, run_replication, Ablation,
    AggregationRow, DecisionRow, ReplicationReport, RunError, RunReport, Summary, SurvivalRow,
    TransitionRow, VitalRow, WeightRow,
};

/// Bundled experiment configs, by name.
pub const PRESETS: [(&str, &str); 5] = [
    ("preference", include_str!("../../presets/preference.conf")),
    ("learning", include_str!("../../presets/learning.conf")),
    ("survival", include_str!("../../presets/survival.conf")),
    ("leader", include_str!("../../presets/leader.conf")),
    ("corral", include_str!("../../presets/corral.conf")),
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let text = PRESETS.iter().find(|(n, _)| *n == name)?.1;
    Some(parse_config(text).expect("bundled presets are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            assert!(preset(name).is_some(), "{name}");
        }
        assert!(preset("missing").is_none());
    }
}
