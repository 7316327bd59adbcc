use super::{Diagnostic, Section};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// The `ME` marker.
    Me,
    /// The pronoun `I`.
    SelfRef,
    /// `'term'`; the text between the quotes with whitespace collapsed.
    Quoted(String),
    /// `'A | B'`; the trimmed alternatives.
    QuotedAlternative(Vec<String>),
    /// `[term]`.
    Bracket(String),
    Header(Section),
    Word(String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn prev(&self) -> Option<char> {
        self.pos
            .checked_sub(1)
            .and_then(|p| self.chars.get(p).copied())
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '\''
}

/// Splits scenario text into tokens, reporting every unterminated quote or
/// bracket.
pub fn tokenize(src: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    if src.trim().is_empty() {
        return Err(vec![Diagnostic::error(1, 1, "empty source")]);
    }
    let mut cur = Cursor::new(src);
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let mut line_start = true;

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        if c == '\n' {
            cur.bump();
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let at_line_start = std::mem::replace(&mut line_start, false);
        let opens_quote = c == '\'' && !cur.prev().is_some_and(char::is_alphanumeric);
        if opens_quote {
            cur.bump();
            let mut body = String::new();
            let mut closed = false;
            while let Some(q) = cur.peek() {
                if q == '\'' && !cur.peek_at(1).is_some_and(char::is_alphanumeric) {
                    cur.bump();
                    closed = true;
                    break;
                }
                body.push(q);
                cur.bump();
            }
            if !closed {
                errors.push(Diagnostic::error(line, column, "unterminated quote"));
                break;
            }
            let kind = if body.contains('|') {
                TokenKind::QuotedAlternative(body.split('|').map(collapse).collect())
            } else {
                TokenKind::Quoted(collapse(&body))
            };
            tokens.push(Token { kind, line, column });
        } else if c == '[' {
            cur.bump();
            let mut body = String::new();
            let mut closed = false;
            while let Some(q) = cur.peek() {
                cur.bump();
                if q == ']' {
                    closed = true;
                    break;
                }
                body.push(q);
            }
            if !closed {
                errors.push(Diagnostic::error(line, column, "unterminated bracket"));
                break;
            }
            tokens.push(Token {
                kind: TokenKind::Bracket(collapse(&body)),
                line,
                column,
            });
        } else if c.is_alphanumeric() || c == '_' {
            let mut word = String::new();
            while let Some(w) = cur.peek().filter(|&w| is_word_char(w)) {
                // A quote followed by a non-letter closes an enclosing quote.
                if w == '\'' && !cur.peek_at(1).is_some_and(char::is_alphanumeric) {
                    break;
                }
                word.push(w);
                cur.bump();
            }
            let header = match word.as_str() {
                "Synopsis" => Some(Section::Synopsis),
                "Scenario" => Some(Section::Scenario),
                "Explicate" => Some(Section::Explicate),
                _ => None,
            };
            let kind = match header {
                Some(s) if at_line_start && cur.peek() == Some(':') => {
                    cur.bump();
                    TokenKind::Header(s)
                }
                _ => match word.as_str() {
                    "ME" => TokenKind::Me,
                    "I" => TokenKind::SelfRef,
                    _ => TokenKind::Word(word),
                },
            };
            tokens.push(Token { kind, line, column });
        } else {
            cur.bump();
            tokens.push(Token {
                kind: TokenKind::Punct(c),
                line,
                column,
            });
        }
    }
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}
