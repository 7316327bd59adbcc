//! Declarative text form of a [`StateMachine`], in the flat `key = value`
//! format used by experiment configs.
//!
//! ```text
//! machine.name = feeding
//! machine.initial = Initial
//! state.<name> = [parent:<state>] [initial:<child>] [entry:<action>]* [exit:<action>]* [timer:<timer>]*
//! exit.<name> = <owning composite>
//! timer.<name> = <ticks>
//! transition.<label> = <source> -> <target> [on <trigger>] [if <guard>] [do <effect>]
//! ```
//!
//! A target is a state name, `exit:<name>`, or
//! `decide <point> <path>:<state> <path>:<state> ...`. A trigger is an event
//! name or `exit:<name>`; omitting `on` makes a completion transition.
//! States and transitions keep file order, which is also the priority order
//! among transitions that share a source and trigger.

use thiserror::Error;

use super::{
    FsmError, MachineBuilder, StateMachine, StateSpec, TargetSpec, TransitionSpec, Trigger,
};
use crate::kv::{self, KvEntry, KvError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineTextError {
    #[error("{}", join_errors(.0))]
    Syntax(Vec<KvError>),
    #[error(transparent)]
    Structure(#[from] FsmError),
}

fn join_errors(errors: &[KvError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn err(entry: &KvEntry, message: impl Into<String>) -> KvError {
    KvError {
        line: entry.line,
        column: entry.value_column,
        message: message.into(),
    }
}

pub fn parse_machine(text: &str) -> Result<StateMachine, MachineTextError> {
    let entries = kv::parse(text).map_err(MachineTextError::Syntax)?;
    let mut errors = Vec::new();
    let mut builder = MachineBuilder::default();
    let mut name = None;

    for e in &entries {
        let (section, rest) = e.key.split_once('.').unwrap_or((e.key.as_str(), ""));
        match (section, rest) {
            ("machine", "name") => name = Some(e.value.clone()),
            ("machine", "initial") => builder = builder.initial(e.value.clone()),
            ("state", state) if !state.is_empty() => match parse_state(state, &e.value) {
                Ok(spec) => builder = builder.state(spec),
                Err(m) => errors.push(err(e, m)),
            },
            ("exit", exit) if !exit.is_empty() => {
                builder = builder.exit_point(exit, e.value.clone())
            }
            ("timer", timer) if !timer.is_empty() => match e.value.parse::<u64>() {
                Ok(ticks) => builder = builder.timer(timer, ticks),
                Err(_) => errors.push(err(
                    e,
                    format!("timer `{timer}` needs a tick count, got `{}`", e.value),
                )),
            },
            ("transition", label) if !label.is_empty() => match parse_transition(&e.value) {
                Ok(spec) => builder = builder.transition(spec),
                Err(m) => errors.push(err(e, format!("transition `{label}`: {m}"))),
            },
            _ => errors.push(KvError {
                line: e.line,
                column: 1,
                message: format!("unknown key `{}`", e.key),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(MachineTextError::Syntax(errors));
    }
    let mut machine = builder.build()?;
    if let Some(n) = name {
        machine.name = n;
    }
    Ok(machine)
}

fn parse_state(name: &str, value: &str) -> Result<StateSpec, String> {
    let mut spec = StateSpec::new(name);
    for attr in value.split_whitespace() {
        let Some((k, v)) = attr.split_once(':') else {
            return Err(format!("state attribute `{attr}` is not `key:value`"));
        };
        if v.is_empty() {
            return Err(format!("state attribute `{k}` has no value"));
        }
        spec = match k {
            "parent" => spec.within(v),
            "initial" => spec.initial(v),
            "entry" => spec.on_entry(v),
            "exit" => spec.on_exit(v),
            "timer" => spec.arm(v),
            other => return Err(format!("unknown state attribute `{other}`")),
        };
    }
    Ok(spec)
}

fn is_clause(word: &str) -> bool {
    matches!(word, "on" | "if" | "do")
}

fn parse_transition(value: &str) -> Result<TransitionSpec, String> {
    let words: Vec<&str> = value.split_whitespace().collect();
    let (source, arrow) = match words.as_slice() {
        [s, a, ..] => (*s, *a),
        _ => return Err("expected `<source> -> <target>`".into()),
    };
    if arrow != "->" {
        return Err(format!("expected `->` after `{source}`, found `{arrow}`"));
    }
    let mut i = 2;
    let target = match words.get(i) {
        None => return Err("missing target".into()),
        Some(&"decide") => {
            let point = words
                .get(i + 1)
                .ok_or("`decide` needs a decision point name")?;
            i += 2;
            let mut branches = Vec::new();
            while let Some(w) = words.get(i).filter(|w| !is_clause(w)) {
                let (p, s) = w
                    .split_once(':')
                    .filter(|(p, s)| !p.is_empty() && !s.is_empty())
                    .ok_or_else(|| format!("decision branch `{w}` is not `path:state`"))?;
                branches.push((p.to_owned(), s.to_owned()));
                i += 1;
            }
            TargetSpec::Decision {
                point: (*point).to_owned(),
                branches,
            }
        }
        Some(t) => {
            i += 1;
            match t.strip_prefix("exit:") {
                Some(x) => TargetSpec::Exit(x.to_owned()),
                None => TargetSpec::State((*t).to_owned()),
            }
        }
    };
    let mut spec = TransitionSpec {
        source: source.to_owned(),
        trigger: Trigger::Completion,
        target,
        guard: None,
        effect: None,
    };
    let mut seen = Vec::new();
    while i < words.len() {
        let clause = words[i];
        if !is_clause(clause) {
            return Err(format!("unexpected `{clause}`"));
        }
        if seen.contains(&clause) {
            return Err(format!("clause `{clause}` given twice"));
        }
        seen.push(clause);
        let arg = *words
            .get(i + 1)
            .ok_or_else(|| format!("`{clause}` needs an argument"))?;
        match clause {
            "on" => {
                spec.trigger = match arg.strip_prefix("exit:") {
                    Some(x) => Trigger::Exit(x.to_owned()),
                    None => Trigger::Event(arg.to_owned()),
                }
            }
            "if" => spec.guard = Some(arg.to_owned()),
            _ => spec.effect = Some(arg.to_owned()),
        }
        i += 2;
    }
    Ok(spec)
}
