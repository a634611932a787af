//! Tokenizer shared by value literals, kernel expressions and pipeline programs.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Source position of a syntax node.
///
/// Spans are carried for diagnostics only: they never take part in equality,
/// ordering or hashing, so two terms differing only in position are equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub offset: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(offset: usize, line: u32, col: u32) -> Self {
        Span { offset, line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Magnitude only; a leading minus is a separate token.
    Int(u64),
    Float(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Backslash,
    Eq,
    Pipe,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    AndAnd,
    OrOr,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Float(x) => write!(f, "`{x:?}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Eof => f.write_str("end of input"),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Dot => ".",
                    Tok::Backslash => "\\",
                    Tok::Eq => "=",
                    Tok::Pipe => "|",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::Lt => "<",
                    Tok::Le => "<=",
                    Tok::Gt => ">",
                    Tok::Ge => ">=",
                    Tok::Ne => "!=",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(o, _)| o)
            .unwrap_or(self.src.len())
    }

    fn span(&self) -> Span {
        Span::new(self.offset(), self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let span = self.span();
            let Some(c) = self.peek() else {
                out.push(Token { tok: Tok::Eof, span });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == '_' {
                self.ident()
            } else if c.is_ascii_digit() {
                self.number(span)?
            } else if c == '"' {
                self.string(span)?
            } else {
                self.symbol(span)?
            };
            out.push(Token { tok, span });
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    // Hyphens join identifier segments only when a letter follows, so
    // `word-count` is one identifier while `x - 1` and `x-1` are not.
    fn ident(&mut self) -> Tok {
        let mut s = String::new();
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_alphanumeric() || c == '_' => {
                    s.push(c);
                    self.bump();
                }
                Some('-') if self.peek_at(1).is_some_and(|c| c.is_ascii_alphabetic()) => {
                    s.push('-');
                    self.bump();
                }
                Some('+') if s.ends_with("fold") && self.lookahead_is("+reduce") => {
                    for _ in 0.."+reduce".len() {
                        s.push(self.bump().unwrap());
                    }
                }
                _ => break,
            }
        }
        Tok::Ident(s)
    }

    fn lookahead_is(&self, text: &str) -> bool {
        let matches = text
            .chars()
            .enumerate()
            .all(|(i, c)| self.peek_at(i) == Some(c));
        let boundary = self
            .peek_at(text.chars().count())
            .is_none_or(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'));
        matches && boundary
    }

    fn number(&mut self, span: Span) -> Result<Tok, SyntaxError> {
        let mut s = String::new();
        let mut is_float = false;
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
            s.push(c);
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            s.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
                s.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let digits_at = if matches!(self.peek_at(1), Some('+' | '-')) { 2 } else { 1 };
            if self.peek_at(digits_at).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                for _ in 0..digits_at {
                    s.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
                    s.push(c);
                    self.bump();
                }
            }
        }
        if is_float {
            s.parse::<f64>()
                .map(Tok::Float)
                .map_err(|e| SyntaxError::new(span, format!("bad float literal `{s}`: {e}")))
        } else {
            s.parse::<u64>()
                .map(Tok::Int)
                .map_err(|_| SyntaxError::new(span, format!("integer literal `{s}` out of range")))
        }
    }

    fn string(&mut self, span: Span) -> Result<Tok, SyntaxError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(SyntaxError::new(span, "unterminated string literal")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => {
                    let esc_span = self.span();
                    match self.bump() {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some('r') => s.push('\r'),
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some('u') => s.push(self.unicode_escape(esc_span)?),
                        other => {
                            return Err(SyntaxError::new(
                                esc_span,
                                format!("unknown escape `\\{}`", other.unwrap_or(' ')),
                            ))
                        }
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn unicode_escape(&mut self, span: Span) -> Result<char, SyntaxError> {
        let bad = || SyntaxError::new(span, "malformed `\\u{..}` escape");
        if self.bump() != Some('{') {
            return Err(bad());
        }
        let mut hex = String::new();
        loop {
            match self.bump() {
                Some('}') => break,
                Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
                _ => return Err(bad()),
            }
        }
        u32::from_str_radix(&hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(bad)
    }

    fn symbol(&mut self, span: Span) -> Result<Tok, SyntaxError> {
        let c = self.bump().unwrap();
        let next = self.peek();
        let two = |lexer: &mut Self, tok| {
            lexer.bump();
            Ok(tok)
        };
        match (c, next) {
            ('<', Some('=')) => two(self, Tok::Le),
            ('>', Some('=')) => two(self, Tok::Ge),
            ('!', Some('=')) => two(self, Tok::Ne),
            ('&', Some('&')) => two(self, Tok::AndAnd),
            ('|', Some('|')) => two(self, Tok::OrOr),
            ('(', _) => Ok(Tok::LParen),
            (')', _) => Ok(Tok::RParen),
            ('[', _) => Ok(Tok::LBracket),
            (']', _) => Ok(Tok::RBracket),
            (',', _) => Ok(Tok::Comma),
            (';', _) => Ok(Tok::Semi),
            ('.', _) => Ok(Tok::Dot),
            ('\\' | 'λ', _) => Ok(Tok::Backslash),
            ('=', _) => Ok(Tok::Eq),
            ('|', _) => Ok(Tok::Pipe),
            ('+', _) => Ok(Tok::Plus),
            ('-', _) => Ok(Tok::Minus),
            ('*', _) => Ok(Tok::Star),
            ('/', _) => Ok(Tok::Slash),
            ('<', _) => Ok(Tok::Lt),
            ('>', _) => Ok(Tok::Gt),
            ('≤', _) => Ok(Tok::Le),
            ('≥', _) => Ok(Tok::Ge),
            ('≠', _) => Ok(Tok::Ne),
            _ => Err(SyntaxError::new(span, format!("unexpected character `{c}`"))),
        }
    }
}

/// Cursor over a token vector, shared by the recursive-descent parsers.
#[derive(Debug, Clone)]
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Cursor {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    pub fn eat_ident(&mut self, word: &str) -> bool {
        if self.is_ident(word) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Span, SyntaxError> {
        let span = self.span();
        if self.eat(tok) {
            Ok(span)
        } else {
            Err(self.unexpected(&format!("{tok}")))
        }
    }

    pub fn expect_ident(&mut self, word: &str) -> Result<Span, SyntaxError> {
        let span = self.span();
        if self.eat_ident(word) {
            Ok(span)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    pub fn any_ident(&mut self) -> Result<(String, Span), SyntaxError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok((s, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn unexpected(&self, expected: &str) -> SyntaxError {
        SyntaxError::new(
            self.span(),
            format!("expected {expected}, found {}", self.peek()),
        )
    }

    pub fn expect_eof(&self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }
}
