//! Lexer, recursive-descent parser and printer for program text.
//!
//! ```text
//! program ::= motion (';' motion)*
//! motion  ::= '[' INT ',' INT ']' sensor (WS+ sensor)*
//! sensor  ::= JOINT '.' AXIS '(' NUMBER ')'
//! ```
//!
//! Whitespace is only accepted between the sensors of one motion. Integers
//! have no leading zeros; numbers take an optional `-` and at most four
//! fraction digits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, RegistryError, Result, Span};
use crate::program::{validate, Horizon, MotionProgram, MotionSpec, SensorTarget, Target, ValidationReport};
use crate::registry::{resolve_joint, surface_names, Axis, Joint, JointAxisChannel, JointSet};

/// Horizon and joint subset that define the accepted language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Language {
    pub horizon: Horizon,
    pub joints: JointSet,
}

impl Language {
    pub fn new(horizon: Horizon) -> Self {
        Self {
            horizon,
            joints: JointSet::all(),
        }
    }

    pub fn restrict(self, joints: JointSet) -> Self {
        Self { joints, ..self }
    }

    pub fn resolve(&self, name: &str) -> Option<Joint> {
        surface_names()
            .find(|&(n, j)| n == name && self.joints.contains(j))
            .map(|(_, j)| j)
    }
}

impl Default for Language {
    fn default() -> Self {
        Self::new(Horizon::DEFAULT)
    }
}

pub const MAX_FRACTION_DIGITS: usize = Target::DECIMALS;

pub fn is_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    LBracket,
    RBracket,
    Comma,
    Semicolon,
    Dot,
    LParen,
    RParen,
    Integer,
    Number,
    Identifier,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::LBracket => "'['",
            TokenKind::RBracket => "']'",
            TokenKind::Comma => "','",
            TokenKind::Semicolon => "';'",
            TokenKind::Dot => "'.'",
            TokenKind::LParen => "'('",
            TokenKind::RParen => "')'",
            TokenKind::Integer => "integer",
            TokenKind::Number => "number",
            TokenKind::Identifier => "identifier",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
    /// Whitespace separates this token from the previous one.
    pub space_before: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseErrorKind {
    Unexpected { expected: Vec<TokenKind>, found: Token },
    UnexpectedWhitespace { found: Token },
    UnexpectedChar { ch: char },
    LeadingZero,
    MissingFraction,
    TooManyFractionDigits,
    IntegerTooLarge,
    UnknownJoint { name: String, suggestions: Vec<String> },
    UnknownAxis { name: String },
}

/// First syntax error in the input, with its byte span.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} at bytes {}..{}", span.start, span.end)]
pub struct ParseError {
    pub span: Span,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Unexpected { expected, found } => {
                let list: Vec<_> = expected.iter().map(|k| k.to_string()).collect();
                write!(f, "expected {}, found {}", list.join(" or "), found.kind)?;
                if found.kind != TokenKind::Eof {
                    write!(f, " `{}`", found.lexeme)?;
                }
                Ok(())
            }
            ParseErrorKind::UnexpectedWhitespace { found } => {
                write!(f, "unexpected whitespace before {}", found.kind)
            }
            ParseErrorKind::UnexpectedChar { ch } => write!(f, "unexpected character {ch:?}"),
            ParseErrorKind::LeadingZero => f.write_str("integer with leading zero"),
            ParseErrorKind::MissingFraction => f.write_str("expected digit after '.'"),
            ParseErrorKind::TooManyFractionDigits => {
                write!(f, "more than {MAX_FRACTION_DIGITS} fraction digits")
            }
            ParseErrorKind::IntegerTooLarge => f.write_str("integer too large"),
            ParseErrorKind::UnknownJoint { name, suggestions } => {
                write!(f, "unknown joint `{name}`")?;
                if !suggestions.is_empty() {
                    write!(f, " (did you mean {}?)", suggestions.join(", "))?;
                }
                Ok(())
            }
            ParseErrorKind::UnknownAxis { name } => {
                write!(f, "unknown axis `{name}`, expected x, y or z")
            }
        }
    }
}

impl ParseError {
    /// The error rendered with a caret under the offending source text.
    pub fn render(&self, source: &str) -> String {
        let start = self.span.start.min(source.len());
        let line_start = source[..start].rfind('\n').map_or(0, |i| i + 1);
        let line_end = source[start..].find('\n').map_or(source.len(), |i| start + i);
        let line_no = source[..line_start].matches('\n').count() + 1;
        let width = self.span.end.min(line_end).saturating_sub(start).max(1);
        let col = source[line_start..start].chars().count();
        format!(
            "error: {}\n{:>4} | {}\n     | {}{}",
            self,
            line_no,
            &source[line_start..line_end],
            " ".repeat(col),
            "^".repeat(width)
        )
    }
}

/// Splits the input into tokens, ending with an `Eof` token.
pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    Lexer { text, pos: 0 }.run()
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_byte(&self, offset: usize) -> Option<u8> {
        self.text.as_bytes().get(self.pos + offset).copied()
    }

    fn error(&self, span: Span, kind: ParseErrorKind) -> ParseError {
        ParseError { span, kind }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut tokens = Vec::new();
        loop {
            let tok = self.next_token()?;
            let done = tok.kind == TokenKind::Eof;
            tokens.push(tok);
            if done {
                return Ok(tokens);
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        let ws_start = self.pos;
        while self.peek().is_some_and(is_whitespace) {
            self.pos += 1;
        }
        let space_before = self.pos > ws_start;
        let start = self.pos;
        let kind = match self.peek() {
            None => TokenKind::Eof,
            Some('[') => self.single(TokenKind::LBracket),
            Some(']') => self.single(TokenKind::RBracket),
            Some(',') => self.single(TokenKind::Comma),
            Some(';') => self.single(TokenKind::Semicolon),
            Some('.') => self.single(TokenKind::Dot),
            Some('(') => self.single(TokenKind::LParen),
            Some(')') => self.single(TokenKind::RParen),
            Some('-' | '0'..='9') => self.number()?,
            Some(c) if c.is_ascii_alphabetic() => {
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                TokenKind::Identifier
            }
            Some(c) => return Err(self.error(start..start + c.len_utf8(), ParseErrorKind::UnexpectedChar { ch: c })),
        };
        Ok(Token {
            kind,
            lexeme: self.text[start..self.pos].to_string(),
            span: start..self.pos,
            space_before,
        })
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.pos += 1;
        kind
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.peek_byte(0).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<TokenKind, ParseError> {
        let start = self.pos;
        let negative = self.peek_byte(0) == Some(b'-');
        if negative {
            self.pos += 1;
            if !self.peek_byte(0).is_some_and(|b| b.is_ascii_digit()) {
                return Err(self.error(start..self.pos, ParseErrorKind::UnexpectedChar { ch: '-' }));
            }
        }
        let int_start = self.pos;
        let n = self.digits();
        if n > 1 && self.text.as_bytes()[int_start] == b'0' {
            return Err(self.error(start..self.pos, ParseErrorKind::LeadingZero));
        }
        if self.peek_byte(0) != Some(b'.') {
            return Ok(if negative {
                TokenKind::Number
            } else {
                TokenKind::Integer
            });
        }
        self.pos += 1;
        match self.digits() {
            0 => Err(self.error(start..self.pos, ParseErrorKind::MissingFraction)),
            d if d > MAX_FRACTION_DIGITS => Err(self.error(start..self.pos, ParseErrorKind::TooManyFractionDigits)),
            _ => Ok(TokenKind::Number),
        }
    }
}

/// Scaled fixed-point value of an `Integer` or `Number` lexeme, saturating.
fn target_from_lexeme(lexeme: &str) -> Target {
    let (negative, body) = match lexeme.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, lexeme),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let mut scaled: i64 = 0;
    for b in int.bytes() {
        scaled = scaled.saturating_mul(10).saturating_add(i64::from(b - b'0'));
    }
    scaled = scaled.saturating_mul(i64::from(Target::SCALE));
    let mut unit = i64::from(Target::SCALE);
    for b in frac.bytes() {
        unit /= 10;
        scaled = scaled.saturating_add(i64::from(b - b'0') * unit);
    }
    if negative {
        scaled = -scaled;
    }
    Target::from_scaled(scaled.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32)
}

/// Successfully parsed program plus validation warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub program: MotionProgram,
    pub report: ValidationReport,
}

/// Parses and validates program text against the full registry.
pub fn parse(text: &str, horizon: Horizon) -> Result<MotionProgram> {
    parse_in(text, &Language::new(horizon)).map(|p| p.program)
}

/// Parses and validates program text in the given language.
pub fn parse_in(text: &str, language: &Language) -> Result<Parsed> {
    let program = parse_syntax(text, language)?;
    let report = validate(&program, language.horizon);
    if !report.is_valid() {
        return Err(Error::Invalid(report.errors));
    }
    Ok(Parsed { program, report })
}

/// Parses without running the structural validation.
pub fn parse_syntax(text: &str, language: &Language) -> Result<MotionProgram, ParseError> {
    let mut lexer = Lexer { text, pos: 0 };
    let current = lexer.next_token()?;
    Parser {
        lexer,
        current,
        language,
    }
    .program()
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
    language: &'a Language,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.current
    }

    fn bump(&mut self) -> Result<Token, ParseError> {
        let next = if self.current.kind == TokenKind::Eof {
            self.current.clone()
        } else {
            self.lexer.next_token()?
        };
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn unexpected(&self, expected: &[TokenKind]) -> ParseError {
        let found = self.peek().clone();
        ParseError {
            span: found.span.clone(),
            kind: ParseErrorKind::Unexpected {
                expected: expected.to_vec(),
                found,
            },
        }
    }

    /// Consumes a token of `kind` that is not preceded by whitespace.
    fn expect(&mut self, kind: TokenKind) -> Result<Token, ParseError> {
        self.expect_one_of(&[kind])
    }

    fn expect_one_of(&mut self, kinds: &[TokenKind]) -> Result<Token, ParseError> {
        self.check(kinds)?;
        self.bump()
    }

    /// Checks the current token without consuming it.
    fn check(&self, kinds: &[TokenKind]) -> Result<&Token, ParseError> {
        let tok = self.peek();
        if !kinds.contains(&tok.kind) {
            return Err(self.unexpected(kinds));
        }
        if tok.space_before {
            return Err(ParseError {
                span: tok.span.clone(),
                kind: ParseErrorKind::UnexpectedWhitespace { found: tok.clone() },
            });
        }
        Ok(tok)
    }

    fn program(mut self) -> Result<MotionProgram, ParseError> {
        let mut motions = vec![self.motion()?];
        loop {
            match self.peek().kind {
                TokenKind::Semicolon => {
                    self.expect(TokenKind::Semicolon)?;
                    motions.push(self.motion()?);
                }
                TokenKind::Eof => {
                    self.expect(TokenKind::Eof)?;
                    return Ok(MotionProgram::new(motions));
                }
                _ => return Err(self.unexpected(&[TokenKind::Identifier, TokenKind::Semicolon, TokenKind::Eof])),
            }
        }
    }

    fn motion(&mut self) -> Result<MotionSpec, ParseError> {
        self.expect(TokenKind::LBracket)?;
        let t_start = self.timestep()?;
        self.expect(TokenKind::Comma)?;
        let t_end = self.timestep()?;
        self.expect(TokenKind::RBracket)?;
        self.check(&[TokenKind::Identifier])?;
        let mut sensors = vec![self.sensor()?];
        while self.peek().kind == TokenKind::Identifier && self.peek().space_before {
            sensors.push(self.sensor()?);
        }
        Ok(MotionSpec::new(t_start, t_end, sensors))
    }

    fn timestep(&mut self) -> Result<u32, ParseError> {
        let tok = self.check(&[TokenKind::Integer])?;
        let value = tok.lexeme.parse().map_err(|_| ParseError {
            span: tok.span.clone(),
            kind: ParseErrorKind::IntegerTooLarge,
        })?;
        self.bump()?;
        Ok(value)
    }

    /// Parses a sensor; the caller has checked that the current token is an
    /// identifier in an acceptable whitespace position.
    fn sensor(&mut self) -> Result<SensorTarget, ParseError> {
        let tok = self.peek();
        let joint = self.language.resolve(&tok.lexeme).ok_or_else(|| {
            let suggestions = match resolve_joint(&tok.lexeme) {
                Err(RegistryError::UnknownJoint { suggestions, .. }) => suggestions,
                Ok(_) => Vec::new(),
            };
            ParseError {
                span: tok.span.clone(),
                kind: ParseErrorKind::UnknownJoint {
                    name: tok.lexeme.clone(),
                    suggestions,
                },
            }
        })?;
        self.bump()?;
        self.expect(TokenKind::Dot)?;
        let axis_tok = self.check(&[TokenKind::Identifier])?;
        let axis = match axis_tok.lexeme.as_str() {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            other => {
                return Err(ParseError {
                    span: axis_tok.span.clone(),
                    kind: ParseErrorKind::UnknownAxis {
                        name: other.to_string(),
                    },
                })
            }
        };
        self.bump()?;
        self.expect(TokenKind::LParen)?;
        let value = self.expect_one_of(&[TokenKind::Number, TokenKind::Integer])?;
        let target = target_from_lexeme(&value.lexeme);
        self.expect(TokenKind::RParen)?;
        Ok(SensorTarget::new(JointAxisChannel::new(joint, axis), target))
    }
}

/// Canonical text of a program: `;` between motions, one space between sensors.
pub fn print(program: &MotionProgram) -> String {
    program.to_string()
}
