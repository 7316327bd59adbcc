use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use asim::harness::{
    compare_with_reference, emit_report, parse_config, preset, render_report, run_experiment,
    RunReport, FILES,
};

const TIE_RICH: &str = "mode = single_decision
seed = 3
replications = 40
decision.signal = 0.5 0.1
decision.track = 0.35 0.1
";

fn asim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asim"))
        .args(args)
        .env_remove("ASIM_LOG")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn summary_ignores_replication_order() {
    let mut cfg = preset("survival").unwrap();
    cfg.replications = 6;
    cfg.ticks = 400;
    let report = run_experiment(&cfg).unwrap();
    let mut shuffled = report.clone();
    shuffled.replications.reverse();
    shuffled.replications.swap(0, 2);
    assert_eq!(report.summary(), shuffled.summary());
}

#[test]
fn emitting_twice_gives_identical_bytes() {
    let cfg = parse_config(TIE_RICH).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&report, a.path()).unwrap();
    emit_report(&report, b.path()).unwrap();
    for f in FILES {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

fn replay_against(reference: &RunReport, config: &str) -> Option<asim::harness::Divergence> {
    let dir = tempfile::tempdir().unwrap();
    emit_report(reference, dir.path()).unwrap();
    let rerun = run_experiment(&parse_config(config).unwrap()).unwrap();
    compare_with_reference(&rerun, dir.path()).unwrap()
}

#[test]
fn replay_of_same_config_matches() {
    let reference = run_experiment(&parse_config(TIE_RICH).unwrap()).unwrap();
    assert_eq!(replay_against(&reference, TIE_RICH), None);
}

#[test]
fn different_seed_diverges_at_first_data_row() {
    let reference = run_experiment(&parse_config(TIE_RICH).unwrap()).unwrap();
    let d = replay_against(&reference, &TIE_RICH.replace("seed = 3", "seed = 4")).unwrap();
    assert_eq!((d.file.as_str(), d.line, d.column), ("decisions.csv", 2, 1));
}

#[test]
fn wider_tolerance_diverges_in_decisions() {
    let reference = run_experiment(&parse_config(TIE_RICH).unwrap()).unwrap();
    let wider = format!("{TIE_RICH}decision.tolerance = 0.2\n");
    let d = replay_against(&reference, &wider).unwrap();
    assert_eq!(d.file, "decisions.csv");
    let files = render_report(&run_experiment(&parse_config(&wider).unwrap()).unwrap()).unwrap();
    let decisions = String::from_utf8(files["decisions.csv"].clone()).unwrap();
    assert!(decisions.lines().skip(1).any(|l| l.ends_with(",true")));
    assert!(decisions.lines().skip(1).any(|l| l.contains(",track,")));
}

#[test]
fn cli_validate_reports_positioned_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.conf", TIE_RICH);
    let out = asim(&["validate", "--config", &good]);
    assert_eq!(out.status.code(), Some(0));

    let bad = write(dir.path(), "bad.conf", "ticks = 0\nbogus = 1\n");
    let out = asim(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.lines().any(|l| l.starts_with(&format!("{bad}:1:"))),
        "{err}"
    );
    assert!(
        err.lines().any(|l| l.starts_with(&format!("{bad}:2:"))),
        "{err}"
    );

    let out = asim(&["validate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_run_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tie.conf", TIE_RICH);
    let out_dir = dir.path().join("out");
    let out = asim(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for f in FILES {
        assert!(out_dir.join(f).is_file(), "{f}");
    }

    let out = asim(&[
        "replay",
        "--config",
        &cfg,
        "--reference",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let other = write(
        dir.path(),
        "other.conf",
        &TIE_RICH.replace("seed = 3", "seed = 9"),
    );
    let out = asim(&[
        "replay",
        "--config",
        &other,
        "--reference",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("decisions.csv"));

    let missing = dir.path().join("nowhere");
    let out = asim(&[
        "replay",
        "--config",
        &cfg,
        "--reference",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_scenario_compile() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/choose.scn");
    let out = asim(&["scenario", "compile", fixture]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("graph nodes="));
    assert!(stdout.lines().any(|l| l.starts_with("node 3 output")));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.scn", "Scenario:\nME I 'see two\n");
    let out = asim(&["scenario", "compile", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let first = err.lines().next().unwrap();
    let mut parts = first.splitn(4, ':');
    assert_eq!(parts.next(), Some(bad.as_str()));
    assert_eq!(parts.next(), Some("2"), "{first}");
    assert_eq!(parts.next(), Some("6"), "{first}");
    assert!(
        parts.next().unwrap().trim_start().starts_with("error"),
        "{first}"
    );
}
