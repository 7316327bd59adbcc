use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use super::{Diagnostic, ScenarioAst, Verb};
use crate::decision::{ChoicePath, DecisionError, PathId, WeightTable};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Statement(Verb),
    Output,
}

impl NodeKind {
    fn as_str(self) -> &'static str {
        match self {
            NodeKind::Entry => "entry",
            NodeKind::Statement(v) => v.as_str(),
            NodeKind::Output => "output",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        match s {
            "entry" => Some(NodeKind::Entry),
            "output" => Some(NodeKind::Output),
            other => Verb::from_word(other)
                .filter(|v| v.as_str() == other)
                .map(NodeKind::Statement),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: u32,
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge {
    pub from: u32,
    pub to: u32,
    pub label: Option<String>,
    /// Weight-table entry that scores this edge when it competes with siblings.
    pub weights: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Nodes visited by [`DecisionGraph::walk`] and the weighted edges chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<u32>,
    pub choices: Vec<String>,
    pub output: Option<String>,
}

impl DecisionGraph {
    pub fn entry(&self) -> Option<u32> {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Entry)
            .map(|n| n.id)
    }

    pub fn output_node(&self) -> Option<u32> {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Output)
            .map(|n| n.id)
    }

    /// Labels of the externally manifested actions.
    pub fn outputs(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Output)
            .map(|n| n.label.as_str())
            .collect()
    }

    fn node(&self, id: u32) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Every node reachable from the single entry node.
    pub fn is_connected(&self) -> bool {
        let Some(entry) = self.entry() else {
            return false;
        };
        let mut seen = BTreeSet::from([entry]);
        let mut stack = vec![entry];
        while let Some(n) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.from == n) {
                if seen.insert(e.to) {
                    stack.push(e.to);
                }
            }
        }
        self.nodes.iter().all(|n| seen.contains(&n.id))
    }

    /// Structural checks: unique ids, one entry, known edge endpoints,
    /// connectivity from the entry.
    pub fn validate(&self) -> Result<(), String> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(format!("duplicate node {}", n.id));
            }
        }
        let entries = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Entry)
            .count();
        if entries != 1 {
            return Err(format!("expected exactly one entry node, found {entries}"));
        }
        for e in &self.edges {
            if !ids.contains(&e.from) || !ids.contains(&e.to) {
                return Err(format!(
                    "edge {} -> {} references a missing node",
                    e.from, e.to
                ));
            }
        }
        if !self.is_connected() {
            return Err("graph is not connected from its entry node".into());
        }
        Ok(())
    }

    /// Choice paths for every weighted edge, for seeding a weight table.
    pub fn preference_paths(&self) -> Vec<ChoicePath> {
        self.edges
            .iter()
            .filter_map(|e| {
                let w = e.weights.as_ref()?;
                Some(ChoicePath::new(
                    w.clone(),
                    [format!("node {}", e.from)],
                    format!("node {}", e.to),
                ))
            })
            .collect()
    }

    /// Follows edges from the entry. Where several weighted edges leave a
    /// node, `table` picks one; otherwise the first edge is taken.
    pub fn walk<S: Scalar, R: Rng + ?Sized>(
        &self,
        table: &WeightTable<S>,
        rng: &mut R,
    ) -> Result<Walk, DecisionError> {
        let mut walk = Walk {
            nodes: Vec::new(),
            choices: Vec::new(),
            output: None,
        };
        let mut cur = self.entry();
        let mut visited = BTreeSet::new();
        while let Some(n) = cur.filter(|n| visited.insert(*n)) {
            walk.nodes.push(n);
            if let Some(node) = self.node(n).filter(|x| x.kind == NodeKind::Output) {
                walk.output = Some(node.label.clone());
            }
            let out: Vec<&GraphEdge> = self.edges.iter().filter(|e| e.from == n).collect();
            let weighted: Vec<&GraphEdge> = out
                .iter()
                .copied()
                .filter(|e| e.weights.is_some())
                .collect();
            cur = if weighted.len() > 1 {
                let mut sub = WeightTable::init(
                    &weighted
                        .iter()
                        .map(|e| {
                            ChoicePath::new(e.weights.clone().unwrap_or_default(), ["hop"], "goal")
                        })
                        .collect::<Vec<_>>(),
                    table.tolerance(),
                )?;
                for e in &weighted {
                    let id = e.weights.as_deref().unwrap_or_default();
                    let entry = table
                        .entry(id)
                        .ok_or_else(|| DecisionError::UnknownPath(PathId::new(id)))?;
                    sub.set_weights(id, entry.positive, entry.negative)?;
                }
                let trace = sub.choose(rng)?;
                let edge = weighted
                    .iter()
                    .find(|e| e.weights.as_deref() == Some(trace.chosen.as_str()))
                    .expect("chosen among weighted edges");
                walk.choices.push(trace.chosen.to_string());
                Some(edge.to)
            } else {
                out.first().map(|e| e.to)
            };
        }
        Ok(walk)
    }
}

/// Entry node 0, one node per think/decide statement (or one for the final
/// statement when there are none), an output node when the last of them is an
/// open question about a decision.
pub fn compile(ast: &ScenarioAst) -> Result<DecisionGraph, Diagnostic> {
    let Some(last) = ast.statements.last() else {
        return Err(Diagnostic::error(1, 1, "scenario has no statements"));
    };
    let mut chosen: Vec<_> = ast
        .statements
        .iter()
        .filter(|s| matches!(s.verb, Verb::Think | Verb::Decide))
        .collect();
    if chosen.is_empty() {
        chosen.push(last);
    }
    let mut nodes = vec![GraphNode {
        id: 0,
        kind: NodeKind::Entry,
        label: "entry".into(),
    }];
    for (k, s) in chosen.iter().enumerate() {
        nodes.push(GraphNode {
            id: k as u32 + 1,
            kind: NodeKind::Statement(s.verb),
            label: s.verb.as_str().into(),
        });
    }
    let final_stmt = chosen.last().expect("non-empty");
    let output = (final_stmt.verb == Verb::Decide && final_stmt.wh_question).then(|| {
        let id = nodes.len() as u32;
        nodes.push(GraphNode {
            id,
            kind: NodeKind::Output,
            label: "decision".into(),
        });
        id
    });

    let mut edges = Vec::new();
    if ast.objects.is_empty() {
        edges.push(GraphEdge {
            from: 0,
            to: 1,
            label: None,
            weights: None,
        });
    }
    for o in &ast.objects {
        let label = o.side.clone().unwrap_or_else(|| o.name.clone());
        edges.push(GraphEdge {
            from: 0,
            to: 1,
            weights: Some(format!("preference:{label}")),
            label: Some(label),
        });
    }
    for k in 1..chosen.len() as u32 {
        edges.push(GraphEdge {
            from: k,
            to: k + 1,
            label: None,
            weights: None,
        });
    }
    if let Some(out) = output {
        edges.push(GraphEdge {
            from: out - 1,
            to: out,
            label: None,
            weights: None,
        });
    }
    let graph = DecisionGraph { nodes, edges };
    debug_assert!(graph.validate().is_ok());
    Ok(graph)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text form, one item per line:
///
/// ```text
/// graph nodes=<n> edges=<m>
/// node <id> <kind> "<label>"
/// edge <from> <to> [label="<text>"] [weights="<entry>"]
/// ```
pub fn render(graph: &DecisionGraph) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "graph nodes={} edges={}",
        graph.nodes.len(),
        graph.edges.len()
    )
    .expect("string write");
    for n in &graph.nodes {
        writeln!(out, "node {} {} {}", n.id, n.kind.as_str(), quote(&n.label))
            .expect("string write");
    }
    for e in &graph.edges {
        write!(out, "edge {} {}", e.from, e.to).expect("string write");
        if let Some(l) = &e.label {
            write!(out, " label={}", quote(l)).expect("string write");
        }
        if let Some(w) = &e.weights {
            write!(out, " weights={}", quote(w)).expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Splits a rendered line into bare words and `"..."` strings.
fn fields(line: &str) -> Result<Vec<String>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == ' ' {
            i += 1;
            continue;
        }
        let start = i;
        let mut field = String::new();
        while i < chars.len() && chars[i] != ' ' {
            if chars[i] == '"' {
                field.push('"');
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err((start + 1, "unterminated string".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => field.push('\n'),
                                Some(&c @ ('"' | '\\')) => field.push(c),
                                _ => return Err((i + 1, "bad escape".into())),
                            }
                            i += 2;
                        }
                        Some(&c) => {
                            field.push(c);
                            i += 1;
                        }
                    }
                }
                field.push('"');
            } else {
                field.push(chars[i]);
                i += 1;
            }
        }
        out.push(field);
    }
    Ok(out)
}

fn unquote(field: &str) -> Option<String> {
    field
        .strip_prefix('"')
        .and_then(|f| f.strip_suffix('"'))
        .map(str::to_owned)
}

/// Inverse of [`render`].
pub fn parse_graph(text: &str) -> Result<DecisionGraph, Diagnostic> {
    let mut graph = DecisionGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let mut declared: Option<(usize, usize)> = None;
    for (idx, line) in text.lines().enumerate() {
        let ln = idx + 1;
        let f = fields(line).map_err(|(col, m)| Diagnostic::error(ln, col, m))?;
        let bad = |m: &str| Diagnostic::error(ln, 1, m.to_owned());
        let num = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| bad(&format!("expected a node id, got `{s}`")))
        };
        match f.first().map(String::as_str) {
            None => continue,
            Some("graph") if declared.is_none() && ln == 1 => {
                let count = |k: &str| {
                    f.iter()
                        .find_map(|x| x.strip_prefix(k))
                        .and_then(|v| v.parse::<usize>().ok())
                        .ok_or_else(|| bad(&format!("graph header needs `{k}<count>`")))
                };
                declared = Some((count("nodes=")?, count("edges=")?));
            }
            Some("node") => {
                let [_, id, kind, label] = f.as_slice() else {
                    return Err(bad("expected `node <id> <kind> \"<label>\"`"));
                };
                graph.nodes.push(GraphNode {
                    id: num(id)?,
                    kind: NodeKind::from_str(kind)
                        .ok_or_else(|| bad(&format!("unknown node kind `{kind}`")))?,
                    label: unquote(label).ok_or_else(|| bad("node label must be quoted"))?,
                });
            }
            Some("edge") => {
                if f.len() < 3 {
                    return Err(bad("expected `edge <from> <to>`"));
                }
                let mut edge = GraphEdge {
                    from: num(&f[1])?,
                    to: num(&f[2])?,
                    label: None,
                    weights: None,
                };
                for attr in &f[3..] {
                    let (k, v) = attr
                        .split_once('=')
                        .ok_or_else(|| bad(&format!("bad attribute `{attr}`")))?;
                    let v = unquote(v).ok_or_else(|| bad("attribute value must be quoted"))?;
                    let slot = match k {
                        "label" => &mut edge.label,
                        "weights" => &mut edge.weights,
                        other => return Err(bad(&format!("unknown edge attribute `{other}`"))),
                    };
                    if slot.replace(v).is_some() {
                        return Err(bad(&format!("edge attribute `{k}` given twice")));
                    }
                }
                graph.edges.push(edge);
            }
            Some(other) => return Err(bad(&format!("unexpected `{other}`"))),
        }
    }
    let Some((n, m)) = declared else {
        return Err(Diagnostic::error(1, 1, "missing graph header"));
    };
    if n != graph.nodes.len() || m != graph.edges.len() {
        return Err(Diagnostic::error(
            1,
            1,
            "graph header counts do not match its body",
        ));
    }
    graph.validate().map_err(|m| Diagnostic::error(1, 1, m))?;
    Ok(graph)
}
