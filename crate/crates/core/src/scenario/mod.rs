//! Scenario coding: narrative behaviour descriptions compiled into decision
//! graphs.
//!
//! Source text is split into `Synopsis:`, `Scenario:` and `Explicate:`
//! sections. Sentences in the scenario section that use one of the verbs
//! `awake`, `think`, `search`, `find`, `see` (or mention a decision) are
//! statements. Quoted terms form a closed vocabulary: each must be glossed in
//! the explicate section. The README carries the full grammar.

mod graph;
mod lexer;
mod parser;

use std::fmt;

pub use graph::{
    compile, parse_graph, render, DecisionGraph, GraphEdge, GraphNode, NodeKind, Walk,
};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Section {
    Synopsis,
    Scenario,
    Explicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl Diagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            line,
            column,
        }
    }

    pub fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(line, column, message)
        }
    }

    /// `file:line:col: severity: message`.
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: {}: {}",
            self.line, self.column, self.severity, self.message
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.line, self.column, self.severity, self.message
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verb {
    Awake,
    Think,
    Search,
    Find,
    See,
    Decide,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Awake => "awake",
            Verb::Think => "think",
            Verb::Search => "search",
            Verb::Find => "find",
            Verb::See => "see",
            Verb::Decide => "decide",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        match word.to_lowercase().as_str() {
            "awake" => Some(Verb::Awake),
            "think" => Some(Verb::Think),
            "search" => Some(Verb::Search),
            "find" => Some(Verb::Find),
            "see" => Some(Verb::See),
            "decide" | "decision" => Some(Verb::Decide),
            _ => None,
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub verb: Verb,
    /// Every verb in the sentence, in order.
    pub verbs: Vec<Verb>,
    pub subject_me: bool,
    pub question: bool,
    /// A question opening with what/which/who/where/when/how/why.
    pub wh_question: bool,
    pub terms: Vec<String>,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioObject {
    pub name: String,
    pub side: Option<String>,
    pub color: Option<String>,
    pub attributes: Vec<String>,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explication {
    pub term: String,
    pub bracket: bool,
    pub gloss: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScenarioAst {
    pub synopsis: Option<String>,
    pub statements: Vec<Statement>,
    pub objects: Vec<ScenarioObject>,
    pub moves: Vec<String>,
    pub facilities: Vec<String>,
    pub explications: Vec<Explication>,
    pub degrees_of_freedom: Option<usize>,
    pub warnings: Vec<Diagnostic>,
}

impl ScenarioAst {
    /// Looks an explication up by its normalised term.
    pub fn gloss(&self, term: &str) -> Option<&str> {
        let key = normalize_term(term);
        self.explications
            .iter()
            .find(|e| normalize_term(&e.term) == key)
            .map(|e| e.gloss.as_str())
    }
}

/// Case-insensitive, whitespace-collapsed form used for vocabulary lookups.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Decodes, tokenizes, parses and compiles raw file contents.
pub fn compile_source(bytes: &[u8]) -> Result<DecisionGraph, Vec<Diagnostic>> {
    let text = decode(bytes)?;
    let tokens = tokenize(text)?;
    let ast = parse(&tokens)?;
    compile(&ast).map_err(|d| vec![d])
}

/// UTF-8 decoding with a positioned diagnostic for the first bad byte.
pub fn decode(bytes: &[u8]) -> Result<&str, Vec<Diagnostic>> {
    std::str::from_utf8(bytes).map_err(|e| {
        let good = &bytes[..e.valid_up_to()];
        let valid = std::str::from_utf8(good).expect("prefix is valid");
        let line = valid.matches('\n').count() + 1;
        let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        vec![Diagnostic::error(line, column, "invalid UTF-8")]
    })
}
