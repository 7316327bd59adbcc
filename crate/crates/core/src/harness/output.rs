use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{RunReport, Summary};

pub const FILES: [&str; 8] = [
    "decisions.csv",
    "vitals.csv",
    "weights.csv",
    "aggregation.csv",
    "transitions.csv",
    "survival.csv",
    "leaders.csv",
    "summary.txt",
];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv encoding: {0}")]
    Csv(#[from] csv::Error),
}

/// Fixed six-decimal rendering with negative zero folded into zero.
pub fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.trim_start_matches('-')
        .bytes()
        .all(|b| b == b'0' || b == b'.')
    {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn table<const N: usize>(
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| OutputError::Csv(e.into_error().into()))
}

fn summary_text(seed: u64, s: &Summary) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k}: {v}").expect("string write");
    line("seed", seed.to_string());
    line("replications", s.replications.to_string());
    line("agents", s.agents.to_string());
    line("preference_rate", num(s.preference_rate));
    line(
        "episodes_to_preference",
        opt(s.episodes_to_preference.map(num)),
    );
    line("death_rate", num(s.death_rate));
    line("mean_survival_ticks", num(s.mean_survival));
    let leaders = s
        .leaders
        .iter()
        .map(|(k, v)| format!("{}={v}", k.map_or("none".to_owned(), |a| a.to_string())))
        .collect::<Vec<_>>()
        .join(" ");
    line("leaders", leaders);
    out
}

/// Every output file as bytes, keyed by file name.
pub fn render_report(report: &RunReport) -> Result<BTreeMap<&'static str, Vec<u8>>, OutputError> {
    let seed = report.seed.to_string();
    let reps = &report.replications;
    let mut files = BTreeMap::new();
    files.insert(
        "decisions.csv",
        table(
            [
                "seed",
                "replication",
                "tick",
                "agent",
                "chosen",
                "score_signal",
                "score_track",
                "tie_broken",
            ],
            reps.iter().flat_map(|r| {
                r.decisions.iter().map(|d| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        d.tick.to_string(),
                        d.agent.to_string(),
                        d.chosen.clone(),
                        num(d.score_signal),
                        num(d.score_track),
                        d.tie_broken.to_string(),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "vitals.csv",
        table(
            ["seed", "replication", "tick", "agent", "event"],
            reps.iter().flat_map(|r| {
                r.vitals.iter().map(|v| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        v.tick.to_string(),
                        v.agent.to_string(),
                        v.event.as_str().to_owned(),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "weights.csv",
        table(
            [
                "seed",
                "replication",
                "agent",
                "path",
                "positive",
                "negative",
                "successes",
                "failures",
                "score",
            ],
            reps.iter().flat_map(|r| {
                r.weights.iter().map(|w| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        w.agent.to_string(),
                        w.path.clone(),
                        num(w.entry.positive),
                        num(w.entry.negative),
                        w.entry.successes.to_string(),
                        w.entry.failures.to_string(),
                        num(w.entry.score()),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "aggregation.csv",
        table(
            [
                "seed",
                "replication",
                "tick",
                "radius",
                "mean_nearest_neighbor",
                "clusters",
                "flock",
            ],
            reps.iter().flat_map(|r| {
                r.aggregation.iter().map(|a| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        a.tick.to_string(),
                        opt(a.radius.map(num)),
                        num(a.metrics.mean_nearest_neighbor),
                        a.metrics.clusters.to_string(),
                        a.metrics.flock.to_string(),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "transitions.csv",
        table(
            [
                "seed",
                "replication",
                "tick",
                "agent",
                "source",
                "target",
                "trigger",
            ],
            reps.iter().flat_map(|r| {
                r.transitions.iter().map(|t| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        t.tick.to_string(),
                        t.agent.to_string(),
                        t.source.clone(),
                        t.target.clone(),
                        t.trigger.clone(),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "survival.csv",
        table(
            ["seed", "replication", "agent", "died_at", "ticks_alive"],
            reps.iter().flat_map(|r| {
                r.survival.iter().map(|s| {
                    [
                        seed.clone(),
                        r.replication.to_string(),
                        s.agent.to_string(),
                        opt(s.died_at),
                        s.ticks_alive.to_string(),
                    ]
                })
            }),
        )?,
    );
    files.insert(
        "leaders.csv",
        table(
            ["seed", "replication", "ticks_run", "leader"],
            reps.iter().map(|r| {
                [
                    seed.clone(),
                    r.replication.to_string(),
                    r.ticks_run.to_string(),
                    opt(r.leader),
                ]
            }),
        )?,
    );
    files.insert(
        "summary.txt",
        summary_text(report.seed, &report.summary()).into_bytes(),
    );
    Ok(files)
}

/// Writes every output file into `dir`, creating it if needed.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| OutputError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, bytes) in render_report(report)? {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// First byte position where a re-run disagrees with the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in bytes.
    pub column: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}:{}: outputs diverge",
            self.file, self.line, self.column
        )?;
        if let Some(e) = &self.expected {
            write!(f, "\n  reference: {e}")?;
        }
        if let Some(a) = &self.actual {
            write!(f, "\n  re-run:    {a}")?;
        }
        Ok(())
    }
}

/// Locates the first differing byte, or `None` when equal.
pub fn first_difference(file: &str, expected: &[u8], actual: &[u8]) -> Option<Divergence> {
    let at = expected
        .iter()
        .zip(actual)
        .position(|(a, b)| a != b)
        .or_else(|| (expected.len() != actual.len()).then(|| expected.len().min(actual.len())))?;
    let before = &actual[..at];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = before
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |p| p + 1);
    let line_of = |bytes: &[u8]| {
        let rest = bytes.get(line_start..)?;
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        Some(String::from_utf8_lossy(&rest[..end]).into_owned())
    };
    Some(Divergence {
        file: file.to_owned(),
        line,
        column: at - line_start + 1,
        expected: line_of(expected),
        actual: line_of(actual),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("reference {0} does not exist")]
    MissingReference(PathBuf),
    #[error(transparent)]
    Output(#[from] OutputError),
}

/// Compares freshly rendered outputs with the files in `reference`.
pub fn compare_with_reference(
    report: &RunReport,
    reference: &Path,
) -> Result<Option<Divergence>, ReplayError> {
    if !reference.is_dir() {
        return Err(ReplayError::MissingReference(reference.to_owned()));
    }
    for name in FILES {
        let fresh = render_report(report)?;
        let actual = &fresh[name];
        let path = reference.join(name);
        let expected = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ReplayError::MissingReference(path));
            }
            Err(source) => return Err(OutputError::Io { path, source }.into()),
        };
        if let Some(d) = first_difference(name, &expected, actual) {
            return Ok(Some(d));
        }
    }
    Ok(None)
}
