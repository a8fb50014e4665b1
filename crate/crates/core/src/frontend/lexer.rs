//! Source text to tokens.
//!
//! Lexemes are raw slices of the source, so the token stream together with
//! the skipped whitespace and `//` comments reconstructs the input exactly.

use std::fmt;

use super::error::LexError;

pub const KEYWORDS: &[&str] = &[
    "struct",
    "let",
    "infer",
    "confidence",
    "context",
    "call",
    "remember",
    "recall",
    "spawn",
    "spawn_link",
    "spawn_each",
    "send",
    "receive",
    "self",
    "grant",
    "identity",
    "suspend",
    "use",
    "schema",
    "turn",
    "if",
    "else",
    "try",
    "catch",
    "throw",
    "true",
    "false",
    "null",
    "and",
    "or",
    "not",
    "return",
    "echo",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    String,
    Punct,
    Operator,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Keyword => "keyword",
            TokenKind::Identifier => "identifier",
            TokenKind::Number => "number",
            TokenKind::String => "string",
            TokenKind::Punct => "punctuation",
            TokenKind::Operator => "operator",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Raw source text of the token (string literals keep quotes and escapes).
    pub lexeme: String,
    pub line: u32,
    pub column: u32,
    /// Byte offset of the lexeme in the source.
    pub offset: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.is(TokenKind::Keyword, kw)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.is(TokenKind::Punct, p)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.is(TokenKind::Operator, op)
    }

    /// Line on which the token ends (differs from `line` for multi-line strings).
    pub fn end_line(&self) -> u32 {
        self.line + self.lexeme.matches('\n').count() as u32
    }

    /// Decoded value of a string literal token.
    pub fn string_value(&self) -> String {
        debug_assert_eq!(self.kind, TokenKind::String);
        let inner = &self.lexeme[1..self.lexeme.len() - 1];
        let mut out = String::with_capacity(inner.len());
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    // unreachable: the lexer rejects other escapes
                    Some(other) => out.push(other),
                    None => {}
                }
            } else {
                out.push(c);
            }
        }
        out
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.bump();
        }
    }
}

const TWO_CHAR_OPS: &[&str] = &["==", "!=", "<=", ">=", "->"];

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();

    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') if cur.peek_at(1) == Some('/') => cur.eat_while(|c| c != '\n'),
                _ => break,
            }
        }

        let (start, line, column) = (cur.pos, cur.line, cur.column);
        let Some(c) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                line,
                column,
                offset: start,
            });
            return Ok(tokens);
        };

        let kind = if c.is_ascii_alphabetic() || c == '_' {
            cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_');
            if KEYWORDS.contains(&&source[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() {
            cur.eat_while(|c| c.is_ascii_digit());
            if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit()) {
                cur.bump();
                cur.eat_while(|c| c.is_ascii_digit());
            }
            if matches!(cur.peek(), Some('e' | 'E')) {
                let sign = matches!(cur.peek_at(1), Some('+' | '-')) as usize;
                if matches!(cur.peek_at(1 + sign), Some(d) if d.is_ascii_digit()) {
                    for _ in 0..=sign {
                        cur.bump();
                    }
                    cur.eat_while(|c| c.is_ascii_digit());
                }
            }
            TokenKind::Number
        } else if c == '"' {
            cur.bump();
            loop {
                match cur.bump() {
                    None => {
                        return Err(LexError {
                            line,
                            column,
                            message: "unterminated string literal".into(),
                        })
                    }
                    Some('"') => break,
                    Some('\\') => {
                        let (el, ec) = (cur.line, cur.column);
                        match cur.bump() {
                            Some('n' | 't' | '"' | '\\') => {}
                            Some(other) => {
                                return Err(LexError {
                                    line: el,
                                    column: ec,
                                    message: format!("unknown escape sequence \\{other}"),
                                })
                            }
                            None => {
                                return Err(LexError {
                                    line,
                                    column,
                                    message: "unterminated string literal".into(),
                                })
                            }
                        }
                    }
                    Some(_) => {}
                }
            }
            TokenKind::String
        } else if cur.peek_at(1).is_some_and(|n| {
            let mut two = String::new();
            two.push(c);
            two.push(n);
            TWO_CHAR_OPS.contains(&two.as_str())
        }) {
            cur.bump();
            cur.bump();
            TokenKind::Operator
        } else if c == ':' && cur.peek_at(1) == Some(':') {
            cur.bump();
            cur.bump();
            TokenKind::Punct
        } else if "(){}[],:;.".contains(c) {
            cur.bump();
            TokenKind::Punct
        } else if "+-*/<>=".contains(c) {
            cur.bump();
            TokenKind::Operator
        } else {
            return Err(LexError {
                line,
                column,
                message: format!("illegal character {c:?}"),
            });
        };

        tokens.push(Token {
            kind,
            lexeme: source[start..cur.pos].to_string(),
            line,
            column,
            offset: start,
        });
    }
}
