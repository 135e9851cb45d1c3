use std::collections::BTreeMap;
use std::fmt;

use super::{is_variable_name, Literal, Predicate, Rule, Sort, Term, PERMISSIONS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical(String),
    UnknownPredicate(String),
    Arity { predicate: Predicate, expected: usize, found: usize },
    SortMismatch { name: String, expected: Sort, found: Sort },
    Syntax(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Lexical(m) => write!(f, "lexical error: {m}"),
            ParseErrorKind::UnknownPredicate(p) => write!(f, "unknown predicate `{p}`"),
            ParseErrorKind::Arity { predicate, expected, found } => {
                write!(f, "{predicate} takes {expected} arguments, found {found}")
            }
            ParseErrorKind::SortMismatch { name, expected, found } => {
                write!(f, "`{name}` used as {found} where {expected} is required")
            }
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Amp,
    Dot,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "'{s}'"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Arrow => f.write_str("`<-`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Dot => f.write_str("`.`"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError { line: pos.line, column: pos.column, kind }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let bump = |c: char, line: &mut usize, column: &mut usize| {
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
    };
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut column);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    bump(c, &mut line, &mut column);
                }
            }
            '(' | ')' | ',' | '&' | '.' => {
                chars.next();
                bump(c, &mut line, &mut column);
                out.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        '&' => Tok::Amp,
                        _ => Tok::Dot,
                    },
                    pos,
                ));
            }
            '<' => {
                chars.next();
                bump(c, &mut line, &mut column);
                if chars.peek() == Some(&'-') {
                    chars.next();
                    bump('-', &mut line, &mut column);
                    out.push((Tok::Arrow, pos));
                } else {
                    return Err(err(pos, ParseErrorKind::Lexical("expected `<-`".into())));
                }
            }
            '\'' => {
                chars.next();
                bump(c, &mut line, &mut column);
                let mut s = String::new();
                loop {
                    let Some(c) = chars.next() else {
                        return Err(err(pos, ParseErrorKind::Lexical("unterminated quoted constant".into())));
                    };
                    bump(c, &mut line, &mut column);
                    match c {
                        '\'' => break,
                        '\\' => {
                            let Some(e) = chars.next() else {
                                return Err(err(pos, ParseErrorKind::Lexical("dangling escape".into())));
                            };
                            bump(e, &mut line, &mut column);
                            match e {
                                '\'' => s.push('\''),
                                '\\' => s.push('\\'),
                                'n' => s.push('\n'),
                                other => {
                                    return Err(err(
                                        pos,
                                        ParseErrorKind::Lexical(format!("unknown escape `\\{other}`")),
                                    ))
                                }
                            }
                        }
                        c => s.push(c),
                    }
                }
                if s.is_empty() {
                    return Err(err(pos, ParseErrorKind::Lexical("empty quoted constant".into())));
                }
                out.push((Tok::Quoted(s), pos));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                        bump(c, &mut line, &mut column);
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), pos));
            }
            other => {
                return Err(err(pos, ParseErrorKind::Lexical(format!("unexpected character `{other}`"))));
            }
        }
    }
    Ok(out)
}

/// A term before sort resolution.
struct RawTerm {
    text: String,
    variable: bool,
    pos: Pos,
}

struct RawLiteral {
    predicate: Predicate,
    args: Vec<RawTerm>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        let line = text.lines().count().max(1);
        let column = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Ok(Parser { toks, at: 0, end: Pos { line, column } })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((t, p)) if t == want => Ok(p),
            Some((t, _)) => Err(err(pos, ParseErrorKind::Syntax(format!("expected {want}, found {t}")))),
            None => Err(err(pos, ParseErrorKind::Syntax(format!("expected {want}, found end of input")))),
        }
    }

    fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Ident(s), p)) => {
                let variable = is_variable_name(&s);
                if !variable && s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                    return Err(err(p, ParseErrorKind::Lexical(format!("`{s}` is not a valid term"))));
                }
                if s.starts_with('_') {
                    return Err(err(p, ParseErrorKind::Lexical(format!("`{s}` is not a valid term"))));
                }
                Ok(RawTerm { text: s, variable, pos: p })
            }
            Some((Tok::Quoted(s), p)) => Ok(RawTerm { text: s, variable: false, pos: p }),
            Some((t, _)) => Err(err(pos, ParseErrorKind::Syntax(format!("expected a term, found {t}")))),
            None => Err(err(pos, ParseErrorKind::Syntax("expected a term, found end of input".into()))),
        }
    }

    fn literal(&mut self) -> Result<RawLiteral, ParseError> {
        let pos = self.pos();
        let name = match self.next() {
            Some((Tok::Ident(s), _)) => s,
            Some((t, _)) => {
                return Err(err(pos, ParseErrorKind::Syntax(format!("expected a predicate, found {t}"))))
            }
            None => {
                return Err(err(pos, ParseErrorKind::Syntax("expected a predicate, found end of input".into())))
            }
        };
        let predicate =
            Predicate::from_name(&name).ok_or_else(|| err(pos, ParseErrorKind::UnknownPredicate(name)))?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if predicate == Predicate::PreReq && self.peek() == Some(&Tok::LParen) {
            // PreReq((c1,p1),(c2,p2))
            for i in 0..2 {
                if i > 0 {
                    self.expect(Tok::Comma)?;
                }
                self.expect(Tok::LParen)?;
                args.push(self.term()?);
                self.expect(Tok::Comma)?;
                args.push(self.term()?);
                self.expect(Tok::RParen)?;
            }
        } else if self.peek() != Some(&Tok::RParen) {
            args.push(self.term()?);
            while self.peek() == Some(&Tok::Comma) {
                self.next();
                args.push(self.term()?);
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != predicate.arity() {
            return Err(err(
                pos,
                ParseErrorKind::Arity { predicate, expected: predicate.arity(), found: args.len() },
            ));
        }
        Ok(RawLiteral { predicate, args })
    }

    /// `Head.` or `Head <- L1 & ... & Ln.`
    fn statement(&mut self) -> Result<(RawLiteral, Vec<RawLiteral>), ParseError> {
        let head = self.literal()?;
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::Arrow) {
            self.next();
            body.push(self.literal()?);
            while self.peek() == Some(&Tok::Amp) {
                self.next();
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Dot)?;
        Ok((head, body))
    }
}

/// Assigns sorts from predicate signatures; a variable must keep one sort
/// throughout the statement.
struct SortScope {
    vars: BTreeMap<String, Sort>,
}

impl SortScope {
    fn resolve(&mut self, raw: RawLiteral) -> Result<Literal, ParseError> {
        let sig = raw.predicate.signature();
        let mut args = Vec::with_capacity(raw.args.len());
        for (t, sort) in raw.args.into_iter().zip(sig) {
            if t.variable {
                match self.vars.get(&t.text) {
                    Some(prev) if prev != sort => {
                        return Err(err(
                            t.pos,
                            ParseErrorKind::SortMismatch { name: t.text, expected: *prev, found: *sort },
                        ))
                    }
                    _ => {
                        self.vars.insert(t.text.clone(), *sort);
                    }
                }
                args.push(Term::variable(t.text, *sort));
            } else {
                if *sort == Sort::Permission && !PERMISSIONS.contains(&t.text.as_str()) {
                    return Err(err(
                        t.pos,
                        ParseErrorKind::Syntax(format!("permission must be allow or deny, found `{}`", t.text)),
                    ));
                }
                args.push(Term::constant(t.text, *sort));
            }
        }
        Ok(Literal { predicate: raw.predicate, args })
    }
}

fn build_rule(head: RawLiteral, body: Vec<RawLiteral>) -> Result<Rule, ParseError> {
    let mut scope = SortScope { vars: BTreeMap::new() };
    let head = scope.resolve(head)?;
    let body = body.into_iter().map(|l| scope.resolve(l)).collect::<Result<Vec<_>, _>>()?;
    Ok(Rule::new(head, body))
}

/// Parses exactly one rule or fact terminated by a period.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    let mut p = Parser::new(text)?;
    let (head, body) = p.statement()?;
    if !p.at_end() {
        let pos = p.pos();
        return Err(err(pos, ParseErrorKind::Syntax("trailing input after rule".into())));
    }
    build_rule(head, body)
}

/// Parses a sequence of statements (a `.lopat` document).
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    while !p.at_end() {
        let (head, body) = p.statement()?;
        rules.push(build_rule(head, body)?);
    }
    Ok(rules)
}

/// Parses a single literal, with an optional trailing period.
pub fn parse_literal(text: &str) -> Result<Literal, ParseError> {
    let mut p = Parser::new(text)?;
    let raw = p.literal()?;
    if p.peek() == Some(&Tok::Dot) {
        p.next();
    }
    if !p.at_end() {
        let pos = p.pos();
        return Err(err(pos, ParseErrorKind::Syntax("trailing input after literal".into())));
    }
    SortScope { vars: BTreeMap::new() }.resolve(raw)
}
