use std::collections::BTreeSet;

use super::lexer::{Token, TokenKind};
use super::{
    normalize_term, Diagnostic, Explication, ScenarioAst, ScenarioObject, Section, Statement, Verb,
};

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];
const SIDES: [&str; 6] = ["left", "right", "up", "down", "front", "behind"];
const COLORS: [&str; 11] = [
    "black", "blue", "brown", "green", "grey", "gray", "orange", "purple", "red", "white", "yellow",
];
const WH_WORDS: [&str; 7] = ["what", "which", "who", "where", "when", "how", "why"];

fn number_value(word: &str) -> Option<usize> {
    let w = word.to_lowercase();
    NUMBER_WORDS
        .iter()
        .position(|n| *n == w)
        .or_else(|| w.parse().ok())
}

fn word(t: &Token) -> Option<&str> {
    match &t.kind {
        TokenKind::Word(w) => Some(w),
        _ => None,
    }
}

fn word_is(t: Option<&Token>, expected: &str) -> bool {
    t.and_then(word)
        .is_some_and(|w| w.eq_ignore_ascii_case(expected))
}

fn term_key(kind: &TokenKind) -> Option<String> {
    match kind {
        TokenKind::Quoted(q) | TokenKind::Bracket(q) => Some(normalize_term(q)),
        TokenKind::QuotedAlternative(parts) => Some(normalize_term(&parts.join(" | "))),
        _ => None,
    }
}

fn quoted_text(kind: &TokenKind) -> Option<String> {
    match kind {
        TokenKind::Quoted(q) => Some(q.clone()),
        TokenKind::QuotedAlternative(parts) => Some(parts.join(" | ")),
        _ => None,
    }
}

/// Renders tokens back to readable text.
fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut glue = false;
    for t in tokens {
        let piece = match &t.kind {
            TokenKind::Me => "ME".to_owned(),
            TokenKind::SelfRef => "I".to_owned(),
            TokenKind::Word(w) => w.clone(),
            TokenKind::Quoted(q) => format!("'{q}'"),
            TokenKind::QuotedAlternative(p) => format!("'{}'", p.join(" | ")),
            TokenKind::Bracket(b) => format!("[{b}]"),
            TokenKind::Header(_) => continue,
            TokenKind::Punct(c) => c.to_string(),
        };
        let attach = matches!(
            t.kind,
            TokenKind::Punct('.' | ',' | ';' | ':' | '?' | '!' | ')')
        );
        if !out.is_empty() && !attach && !glue {
            out.push(' ');
        }
        glue = matches!(t.kind, TokenKind::Punct('('));
        out.push_str(&piece);
    }
    out
}

struct Sections<'a> {
    synopsis: Option<&'a [Token]>,
    scenario: Option<&'a [Token]>,
    explicate: Option<&'a [Token]>,
}

fn split_sections<'a>(tokens: &'a [Token], errors: &mut Vec<Diagnostic>) -> Sections<'a> {
    let headers: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t.kind, TokenKind::Header(_)))
        .map(|(i, _)| i)
        .collect();
    if headers.is_empty() {
        return Sections {
            synopsis: None,
            scenario: Some(tokens),
            explicate: None,
        };
    }
    if headers[0] > 0 {
        let t = &tokens[0];
        errors.push(Diagnostic::error(
            t.line,
            t.column,
            "text before the first section header",
        ));
    }
    let mut sections = Sections {
        synopsis: None,
        scenario: None,
        explicate: None,
    };
    for (k, &h) in headers.iter().enumerate() {
        let end = headers.get(k + 1).copied().unwrap_or(tokens.len());
        let body = &tokens[h + 1..end];
        let TokenKind::Header(section) = tokens[h].kind else {
            unreachable!("filtered to headers")
        };
        let slot = match section {
            Section::Synopsis => &mut sections.synopsis,
            Section::Scenario => &mut sections.scenario,
            Section::Explicate => &mut sections.explicate,
        };
        if slot.is_some() {
            errors.push(Diagnostic::error(
                tokens[h].line,
                tokens[h].column,
                format!("duplicate {section:?} section"),
            ));
        } else {
            *slot = Some(body);
        }
    }
    sections
}

fn parse_explications(tokens: &[Token], ast: &mut ScenarioAst, errors: &mut Vec<Diagnostic>) {
    let mut starts = Vec::new();
    let mut prev_line = 0;
    for (i, t) in tokens.iter().enumerate() {
        let first_on_line = t.line != prev_line;
        prev_line = t.line;
        if first_on_line && term_key(&t.kind).is_some() {
            starts.push(i);
        }
    }
    match (starts.first(), tokens.first()) {
        (Some(&0), _) | (_, None) => {}
        (_, Some(t)) => errors.push(Diagnostic::error(
            t.line,
            t.column,
            "explication must start with a quoted or bracketed term",
        )),
    }
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(tokens.len());
        let head = &tokens[s];
        let term = match &head.kind {
            TokenKind::Bracket(b) => b.clone(),
            other => quoted_text(other).expect("start tokens are terms"),
        };
        let key = normalize_term(&term);
        if let Some(first) = ast
            .explications
            .iter()
            .find(|e| normalize_term(&e.term) == key)
        {
            ast.warnings.push(Diagnostic::warning(
                head.line,
                head.column,
                format!(
                    "duplicate explication for `{term}` (first on line {})",
                    first.line
                ),
            ));
            continue;
        }
        ast.explications.push(Explication {
            term,
            bracket: matches!(head.kind, TokenKind::Bracket(_)),
            gloss: join_tokens(&tokens[s + 1..end]),
            line: head.line,
        });
    }
}

fn sentences(tokens: &[Token]) -> Vec<(&[Token], Option<char>)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if let TokenKind::Punct(c @ ('.' | '?' | '!')) = t.kind {
            if i > start {
                out.push((&tokens[start..i], Some(c)));
            }
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push((&tokens[start..], None));
    }
    out
}

fn parse_statement(sentence: &[Token], end: Option<char>) -> Option<Statement> {
    let verbs: Vec<Verb> = sentence
        .iter()
        .filter_map(|t| match &t.kind {
            TokenKind::Word(w) | TokenKind::Quoted(w) => Verb::from_word(w),
            _ => None,
        })
        .collect();
    let first = *verbs.first()?;
    let verb = if verbs.contains(&Verb::Decide) {
        Verb::Decide
    } else {
        first
    };
    let question = end == Some('?');
    let opener = sentence.iter().find_map(word).map(str::to_lowercase);
    Some(Statement {
        verb,
        verbs,
        subject_me: sentence.iter().any(|t| t.kind == TokenKind::Me),
        question,
        wh_question: question && opener.is_some_and(|w| WH_WORDS.contains(&w.as_str())),
        terms: sentence
            .iter()
            .filter_map(|t| quoted_text(&t.kind))
            .collect(),
        line: sentence[0].line,
        column: sentence[0].column,
    })
}

/// `to the <side> is a <name...> ['attribute']*`.
fn placed_objects(sentence: &[Token]) -> Vec<ScenarioObject> {
    let mut out = Vec::new();
    for i in 0..sentence.len() {
        let side = sentence.get(i + 2).and_then(word).map(str::to_lowercase);
        let placed = word_is(sentence.get(i), "to")
            && word_is(sentence.get(i + 1), "the")
            && side.as_deref().is_some_and(|s| SIDES.contains(&s))
            && word_is(sentence.get(i + 3), "is")
            && (word_is(sentence.get(i + 4), "a") || word_is(sentence.get(i + 4), "an"));
        if !placed {
            continue;
        }
        let mut j = i + 5;
        let mut name = Vec::new();
        while let Some(w) = sentence.get(j).and_then(word) {
            if w.eq_ignore_ascii_case("and") {
                break;
            }
            name.push(w.to_owned());
            j += 1;
        }
        if name.is_empty() {
            continue;
        }
        let mut attributes = Vec::new();
        while let Some(TokenKind::Quoted(q)) = sentence.get(j).map(|t| &t.kind) {
            attributes.push(q.clone());
            j += 1;
        }
        let color = name
            .first()
            .map(|w| w.to_lowercase())
            .filter(|w| COLORS.contains(&w.as_str()));
        out.push(ScenarioObject {
            name: name.join(" "),
            side,
            color,
            attributes,
            line: sentence[i].line,
            column: sentence[i].column,
        });
    }
    out
}

/// `<number> objects`, with sides taken from `one to the <side>` in order.
fn counted_objects(sentence: &[Token]) -> Vec<ScenarioObject> {
    let Some((at, count)) = sentence.windows(2).enumerate().find_map(|(i, w)| {
        let n = word(&w[0]).and_then(number_value)?;
        word(&w[1])
            .filter(|x| x.eq_ignore_ascii_case("objects") || x.eq_ignore_ascii_case("object"))
            .map(|_| (i, n))
    }) else {
        return Vec::new();
    };
    let sides: Vec<String> = (0..sentence.len())
        .filter_map(|i| {
            let side = sentence.get(i + 3).and_then(word)?.to_lowercase();
            (word_is(sentence.get(i), "one")
                && word_is(sentence.get(i + 1), "to")
                && word_is(sentence.get(i + 2), "the")
                && SIDES.contains(&side.as_str()))
            .then_some(side)
        })
        .collect();
    (0..count)
        .map(|k| ScenarioObject {
            name: format!("object {}", k + 1),
            side: sides.get(k).cloned(),
            color: None,
            attributes: Vec::new(),
            line: sentence[at].line,
            column: sentence[at].column,
        })
        .collect()
}

fn degrees_of_freedom(term: &str) -> Option<usize> {
    let words: Vec<&str> = term
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    let numbers = words.iter().filter(|w| number_value(w).is_some()).count();
    let only_numbers = words
        .iter()
        .all(|w| number_value(w).is_some() || w.eq_ignore_ascii_case("and"));
    (numbers > 0 && only_numbers).then_some(numbers)
}

/// Builds the AST, checking the closed vocabulary and declared moves.
pub fn parse(tokens: &[Token]) -> Result<ScenarioAst, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut ast = ScenarioAst::default();
    let sections = split_sections(tokens, &mut errors);
    let Some(scenario) = sections.scenario else {
        errors.push(Diagnostic::error(1, 1, "missing Scenario section"));
        return Err(errors);
    };
    ast.synopsis = sections.synopsis.map(join_tokens);
    if let Some(ex) = sections.explicate {
        parse_explications(ex, &mut ast, &mut errors);
    }

    let mut declared = BTreeSet::new();
    for (i, t) in scenario.iter().enumerate() {
        if word_is(Some(t), "move") {
            if let Some(m) = scenario.get(i + 1).and_then(word) {
                if m.len() == 1 && m.chars().all(|c| c.is_ascii_uppercase()) {
                    declared.insert(m.to_owned());
                }
            }
        }
    }

    let mut reported = BTreeSet::new();
    for t in scenario {
        let Some(text) = quoted_text(&t.kind) else {
            continue;
        };
        let key = term_key(&t.kind).expect("quoted");
        if ast.gloss(&text).is_none() && reported.insert(key) {
            errors.push(Diagnostic::error(
                t.line,
                t.column,
                format!("unexplicated term: {text}"),
            ));
        }
        if let TokenKind::QuotedAlternative(parts) = &t.kind {
            let is_move = |p: &String| p.len() == 1 && p.chars().all(|c| c.is_ascii_uppercase());
            if parts.iter().all(is_move) {
                for p in parts.iter().filter(|p| !declared.contains(*p)) {
                    errors.push(Diagnostic::error(
                        t.line,
                        t.column,
                        format!("undeclared move: {p}"),
                    ));
                }
            }
        }
        if ast.degrees_of_freedom.is_none() {
            ast.degrees_of_freedom = degrees_of_freedom(&text);
        }
    }
    ast.moves = declared.into_iter().collect();

    for (sentence, end) in sentences(scenario) {
        if let Some(s) = parse_statement(sentence, end) {
            ast.statements.push(s);
        }
        let placed = placed_objects(sentence);
        if placed.is_empty() {
            ast.objects.extend(counted_objects(sentence));
        } else {
            ast.objects.extend(placed);
        }
        if let Some(k) = sentence.iter().position(
            |t| matches!(&t.kind, TokenKind::Quoted(q) if normalize_term(q) == "facilities"),
        ) {
            for t in &sentence[k + 1..] {
                match &t.kind {
                    TokenKind::Word(w) => ast.facilities.push(w.to_lowercase()),
                    TokenKind::Punct(',') => {}
                    _ => break,
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(ast)
    } else {
        Err(errors)
    }
}
