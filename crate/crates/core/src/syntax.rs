//! Term algebra, concrete syntax and parameterised programs.
//!
//! [`Term`] covers both conventional programs and KBS programs (`or` and
//! `fail`). [`PTerm`] adds holes. Filling a hole is plain structural
//! replacement: a λ in the context *does* capture free variables of the
//! filler. That is what "replace every hole" means here, and it is why
//! comparison goes through [`alpha_eq`] rather than de Bruijn indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::int::Integer;

const RESERVED: [&str; 5] = ["or", "fail", "add", "mul", "halt"];

/// An identifier. Compared by text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(text: &str) -> Result<Name, SyntaxError> {
        if is_identifier(text) && text != "_" && !RESERVED.contains(&text) {
            Ok(Name(Arc::from(text)))
        } else {
            Err(SyntaxError::InvalidName(text.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<&str> for Name {
    type Error = SyntaxError;

    fn try_from(text: &str) -> Result<Self, Self::Error> {
        Name::new(text)
    }
}

/// Built-in operators. All are curried and consume their arguments through
/// the machine's apply instruction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Prim {
    Add,
    Mul,
    Halt,
}

impl Prim {
    pub fn arity(self) -> usize {
        match self {
            Prim::Add | Prim::Mul => 2,
            Prim::Halt => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Prim::Add => "add",
            Prim::Mul => "mul",
            Prim::Halt => "halt",
        }
    }

    fn from_keyword(text: &str) -> Option<Prim> {
        match text {
            "add" => Some(Prim::Add),
            "mul" => Some(Prim::Mul),
            "halt" => Some(Prim::Halt),
            _ => None,
        }
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A program. Children are shared, so cloning a term or handing a subterm to
/// the machine's control is O(1).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term<N> {
    Var(Name),
    Lam(Name, Arc<Term<N>>),
    App(Arc<Term<N>>, Arc<Term<N>>),
    Or(Arc<Term<N>>, Arc<Term<N>>),
    Fail,
    Int(N),
    Prim(Prim),
}

impl<N> Term<N> {
    pub fn var(name: Name) -> Self {
        Term::Var(name)
    }

    pub fn lam(param: Name, body: Term<N>) -> Self {
        Term::Lam(param, Arc::new(body))
    }

    pub fn app(fun: Term<N>, arg: Term<N>) -> Self {
        Term::App(Arc::new(fun), Arc::new(arg))
    }

    pub fn or(left: Term<N>, right: Term<N>) -> Self {
        Term::Or(Arc::new(left), Arc::new(right))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Fail | Term::Int(_) | Term::Prim(_) => 1,
            Term::Lam(_, b) => 1 + b.size(),
            Term::App(a, b) | Term::Or(a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// A parameterised program: a term that may contain holes.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum PTerm<N> {
    Var(Name),
    Lam(Name, Box<PTerm<N>>),
    App(Box<PTerm<N>>, Box<PTerm<N>>),
    Or(Box<PTerm<N>>, Box<PTerm<N>>),
    Fail,
    Int(N),
    Prim(Prim),
    Hole,
}

impl<N: Clone> PTerm<N> {
    pub fn lam(param: Name, body: PTerm<N>) -> Self {
        PTerm::Lam(param, Box::new(body))
    }

    pub fn app(fun: PTerm<N>, arg: PTerm<N>) -> Self {
        PTerm::App(Box::new(fun), Box::new(arg))
    }

    pub fn or(left: PTerm<N>, right: PTerm<N>) -> Self {
        PTerm::Or(Box::new(left), Box::new(right))
    }

    /// Converts to a program; `None` if any hole remains.
    pub fn to_term(&self) -> Option<Term<N>> {
        Some(match self {
            PTerm::Var(x) => Term::Var(x.clone()),
            PTerm::Lam(x, b) => Term::lam(x.clone(), b.to_term()?),
            PTerm::App(a, b) => Term::app(a.to_term()?, b.to_term()?),
            PTerm::Or(a, b) => Term::or(a.to_term()?, b.to_term()?),
            PTerm::Fail => Term::Fail,
            PTerm::Int(n) => Term::Int(n.clone()),
            PTerm::Prim(p) => Term::Prim(*p),
            PTerm::Hole => return None,
        })
    }
}

impl<N: Clone> From<&Term<N>> for PTerm<N> {
    fn from(term: &Term<N>) -> Self {
        match term {
            Term::Var(x) => PTerm::Var(x.clone()),
            Term::Lam(x, b) => PTerm::lam(x.clone(), PTerm::from(&**b)),
            Term::App(a, b) => PTerm::app(PTerm::from(&**a), PTerm::from(&**b)),
            Term::Or(a, b) => PTerm::or(PTerm::from(&**a), PTerm::from(&**b)),
            Term::Fail => PTerm::Fail,
            Term::Int(n) => PTerm::Int(n.clone()),
            Term::Prim(p) => PTerm::Prim(*p),
        }
    }
}

/// One step of a [`Path`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Selector {
    LamBody,
    AppFun,
    AppArg,
    OrLeft,
    OrRight,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::LamBody => "lam-body",
            Selector::AppFun => "app-fun",
            Selector::AppArg => "app-arg",
            Selector::OrLeft => "or-left",
            Selector::OrRight => "or-right",
        }
    }
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "lam-body" => Selector::LamBody,
            "app-fun" => Selector::AppFun,
            "app-arg" => Selector::AppArg,
            "or-left" => Selector::OrLeft,
            "or-right" => Selector::OrRight,
            other => return Err(format!("unknown selector `{other}`")),
        })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Address of a subterm, as the sequence of child selectors from the root.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Path(pub Vec<Selector>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn steps(&self) -> &[Selector] {
        &self.0
    }

    pub fn child(&self, sel: Selector) -> Path {
        let mut steps = self.0.clone();
        steps.push(sel);
        Path(steps)
    }
}

impl FromStr for Path {
    type Err = String;

    /// Comma-separated selector names; the empty string is the root.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Path::root());
        }
        s.split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map(Path)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, sel) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(sel.name())?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Malformed {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("hole `_` not allowed here (line {line}, column {column})")]
    HoleNotAllowed {
        offset: usize,
        line: usize,
        column: usize,
    },
    #[error("invalid name `{0}`")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("invalid path {path}: {detail}")]
    InvalidPath { path: Path, detail: String },
    #[error("an extension context must contain at least one hole")]
    NoHoles,
}

// ---------------------------------------------------------------------------
// Concrete syntax

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Backslash,
    Dot,
    LParen,
    RParen,
    Or,
    Fail,
    Hole,
    Name(String),
    Int(String),
    Meta(u32),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    metas: bool,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str, metas: bool) -> Result<Vec<(Tok, usize)>, SyntaxError> {
        let mut lx = Lexer { src, pos: 0, metas };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let done = tok == Tok::Eof;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn next(&mut self) -> Result<(Tok, usize), SyntaxError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    self.take_while(|c| c != '\n');
                }
                _ => break,
            }
        }
        let start = self.pos;
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, start));
        };
        let tok = match c {
            '\\' => Tok::Backslash,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '-' => {
                if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    return Err(malformed(self.src, start, "`-` must be followed by digits"));
                }
                let digits = self.take_while(|c| c.is_ascii_digit());
                Tok::Int(format!("-{digits}"))
            }
            '$' if self.metas => {
                let digits = self.take_while(|c| c.is_ascii_digit());
                let n = digits.parse().map_err(|_| {
                    malformed(self.src, start, "expected metavariable number after `$`")
                })?;
                Tok::Meta(n)
            }
            c if c.is_ascii_digit() => {
                self.pos = start;
                Tok::Int(self.take_while(|c| c.is_ascii_digit()).to_string())
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                self.pos = start;
                let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                match word {
                    "_" => Tok::Hole,
                    "or" => Tok::Or,
                    "fail" => Tok::Fail,
                    _ => Tok::Name(word.to_string()),
                }
            }
            other => {
                return Err(malformed(
                    self.src,
                    start,
                    &format!("unexpected character `{other}`"),
                ))
            }
        };
        Ok((tok, start))
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn malformed(src: &str, offset: usize, message: &str) -> SyntaxError {
    let (line, column) = line_col(src, offset);
    SyntaxError::Malformed {
        offset,
        line,
        column,
        message: message.to_string(),
    }
}

/// Parse tree shared by programs and rewrite patterns.
#[derive(Clone, Debug)]
pub(crate) enum Raw {
    Var(Name),
    Lam(Name, Box<Raw>),
    App(Box<Raw>, Box<Raw>),
    Or(Box<Raw>, Box<Raw>),
    Fail,
    Int(String, usize),
    Prim(Prim),
    Hole(usize),
    Meta(u32),
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if tok != Tok::Eof {
            self.at += 1;
        }
        tok
    }

    fn error(&self, message: &str) -> SyntaxError {
        malformed(self.src, self.offset(), message)
    }

    fn term(&mut self) -> Result<Raw, SyntaxError> {
        if *self.peek() == Tok::Backslash {
            self.advance();
            let param = match self.advance() {
                Tok::Name(n) => match Prim::from_keyword(&n) {
                    Some(_) => {
                        return Err(malformed(
                            self.src,
                            self.toks[self.at - 1].1,
                            "a primitive cannot be bound",
                        ))
                    }
                    None => Name::new(&n)?,
                },
                _ => {
                    return Err(malformed(
                        self.src,
                        self.toks[self.at.saturating_sub(1)].1,
                        "expected a name after `\\`",
                    ))
                }
            };
            if self.advance() != Tok::Dot {
                return Err(malformed(
                    self.src,
                    self.toks[self.at.saturating_sub(1)].1,
                    "expected `.` after binder",
                ));
            }
            let body = self.term()?;
            return Ok(Raw::Lam(param, Box::new(body)));
        }
        let mut left = self.app()?;
        while *self.peek() == Tok::Or {
            self.advance();
            let right = self.app()?;
            left = Raw::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn app(&mut self) -> Result<Raw, SyntaxError> {
        let mut fun = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            fun = Raw::App(Box::new(fun), Box::new(arg));
        }
        if *self.peek() == Tok::Backslash {
            return Err(self.error("a λ-abstraction in argument position must be parenthesized"));
        }
        Ok(fun)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Name(_) | Tok::Int(_) | Tok::Fail | Tok::Hole | Tok::LParen | Tok::Meta(_)
        )
    }

    fn atom(&mut self) -> Result<Raw, SyntaxError> {
        let offset = self.offset();
        match self.advance() {
            Tok::Name(n) => Ok(match Prim::from_keyword(&n) {
                Some(p) => Raw::Prim(p),
                None => Raw::Var(Name::new(&n)?),
            }),
            Tok::Int(digits) => Ok(Raw::Int(digits, offset)),
            Tok::Fail => Ok(Raw::Fail),
            Tok::Hole => Ok(Raw::Hole(offset)),
            Tok::Meta(n) => Ok(Raw::Meta(n)),
            Tok::LParen => {
                let inner = self.term()?;
                if self.advance() != Tok::RParen {
                    return Err(malformed(
                        self.src,
                        self.toks[self.at.saturating_sub(1)].1,
                        "expected `)`",
                    ));
                }
                Ok(inner)
            }
            Tok::Eof => Err(malformed(self.src, offset, "unexpected end of input")),
            Tok::Backslash => Err(malformed(
                self.src,
                offset,
                "a λ-abstraction in argument position must be parenthesized",
            )),
            other => Err(malformed(
                self.src,
                offset,
                &format!("unexpected {}", describe(&other)),
            )),
        }
    }
}

fn describe(tok: &Tok) -> &'static str {
    match tok {
        Tok::Dot => "`.`",
        Tok::RParen => "`)`",
        Tok::Or => "`or`",
        _ => "token",
    }
}

pub(crate) fn parse_raw(text: &str, metas: bool) -> Result<Raw, SyntaxError> {
    let toks = Lexer::tokens(text, metas)?;
    let mut p = Parser {
        src: text,
        toks,
        at: 0,
    };
    let raw = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("unexpected input after the end of the term"));
    }
    Ok(raw)
}

pub(crate) fn parse_int<N: Integer>(
    src: &str,
    digits: &str,
    offset: usize,
) -> Result<N, SyntaxError> {
    digits.parse().map_err(|_| {
        malformed(
            src,
            offset,
            &format!("integer literal {digits} out of range"),
        )
    })
}

fn lower<N: Integer>(src: &str, raw: Raw, holes: bool) -> Result<PTerm<N>, SyntaxError> {
    Ok(match raw {
        Raw::Var(x) => PTerm::Var(x),
        Raw::Lam(x, b) => PTerm::lam(x, lower(src, *b, holes)?),
        Raw::App(a, b) => PTerm::app(lower(src, *a, holes)?, lower(src, *b, holes)?),
        Raw::Or(a, b) => PTerm::or(lower(src, *a, holes)?, lower(src, *b, holes)?),
        Raw::Fail => PTerm::Fail,
        Raw::Int(digits, offset) => PTerm::Int(parse_int(src, &digits, offset)?),
        Raw::Prim(p) => PTerm::Prim(p),
        Raw::Hole(_) if holes => PTerm::Hole,
        Raw::Hole(offset) => {
            let (line, column) = line_col(src, offset);
            return Err(SyntaxError::HoleNotAllowed {
                offset,
                line,
                column,
            });
        }
        Raw::Meta(_) => unreachable!("metavariables are only lexed for patterns"),
    })
}

/// Parses the concrete syntax. With `allow_holes` off any `_` is rejected.
pub fn parse<N: Integer>(text: &str, allow_holes: bool) -> Result<PTerm<N>, SyntaxError> {
    lower(text, parse_raw(text, false)?, allow_holes)
}

/// Parses a program (no holes).
pub fn parse_term<N: Integer>(text: &str) -> Result<Term<N>, SyntaxError> {
    let p = parse(text, false)?;
    Ok(p.to_term().expect("holes rejected by the parser"))
}

// ---------------------------------------------------------------------------
// Rendering

/// Uniform view over the tree types so one printer serves all of them.
pub(crate) enum View<'a, T> {
    Var(&'a Name),
    Lam(&'a Name, &'a T),
    App(&'a T, &'a T),
    Or(&'a T, &'a T),
    Fail,
    Int(&'a dyn fmt::Display),
    Prim(Prim),
    Hole,
    Meta(u32),
}

pub(crate) trait Syntax: Sized {
    fn view(&self) -> View<'_, Self>;
}

impl<N: fmt::Display> Syntax for Term<N> {
    fn view(&self) -> View<'_, Self> {
        match self {
            Term::Var(x) => View::Var(x),
            Term::Lam(x, b) => View::Lam(x, b),
            Term::App(a, b) => View::App(a, b),
            Term::Or(a, b) => View::Or(a, b),
            Term::Fail => View::Fail,
            Term::Int(n) => View::Int(n),
            Term::Prim(p) => View::Prim(*p),
        }
    }
}

impl<N: fmt::Display> Syntax for PTerm<N> {
    fn view(&self) -> View<'_, Self> {
        match self {
            PTerm::Var(x) => View::Var(x),
            PTerm::Lam(x, b) => View::Lam(x, b),
            PTerm::App(a, b) => View::App(a, b),
            PTerm::Or(a, b) => View::Or(a, b),
            PTerm::Fail => View::Fail,
            PTerm::Int(n) => View::Int(n),
            PTerm::Prim(p) => View::Prim(*p),
            PTerm::Hole => View::Hole,
        }
    }
}

pub(crate) fn write_term<T: Syntax>(t: &T, out: &mut String) {
    match t.view() {
        View::Lam(x, b) => {
            out.push('\\');
            out.push_str(x.as_str());
            out.push_str(". ");
            write_term(b, out);
        }
        _ => write_or(t, out),
    }
}

fn write_or<T: Syntax>(t: &T, out: &mut String) {
    match t.view() {
        View::Or(l, r) => {
            write_or(l, out);
            out.push_str(" or ");
            write_app(r, out);
        }
        _ => write_app(t, out),
    }
}

fn write_app<T: Syntax>(t: &T, out: &mut String) {
    match t.view() {
        View::App(f, a) => {
            write_app(f, out);
            out.push(' ');
            write_atom(a, out);
        }
        _ => write_atom(t, out),
    }
}

fn write_atom<T: Syntax>(t: &T, out: &mut String) {
    use fmt::Write;
    match t.view() {
        View::Var(x) => out.push_str(x.as_str()),
        View::Fail => out.push_str("fail"),
        View::Int(n) => {
            let _ = write!(out, "{n}");
        }
        View::Prim(p) => out.push_str(p.name()),
        View::Hole => out.push('_'),
        View::Meta(n) => {
            let _ = write!(out, "${n}");
        }
        View::Lam(..) | View::App(..) | View::Or(..) => {
            out.push('(');
            write_term(t, out);
            out.push(')');
        }
    }
}

/// Renders with minimal parentheses; `parse(render(p))` gives back `p`.
pub fn render<N: fmt::Display>(p: &PTerm<N>) -> String {
    let mut out = String::new();
    write_term(p, &mut out);
    out
}

impl<N: fmt::Display> fmt::Display for Term<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_term(self, &mut out);
        f.write_str(&out)
    }
}

impl<N: fmt::Display> fmt::Display for PTerm<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

// ---------------------------------------------------------------------------
// Queries

/// True iff the term contains neither `or` nor `fail`.
pub fn is_conventional<N>(e: &Term<N>) -> bool {
    match e {
        Term::Or(..) | Term::Fail => false,
        Term::Var(_) | Term::Int(_) | Term::Prim(_) => true,
        Term::Lam(_, b) => is_conventional(b),
        Term::App(a, b) => is_conventional(a) && is_conventional(b),
    }
}

pub fn hole_count<N>(p: &PTerm<N>) -> usize {
    match p {
        PTerm::Hole => 1,
        PTerm::Var(_) | PTerm::Fail | PTerm::Int(_) | PTerm::Prim(_) => 0,
        PTerm::Lam(_, b) => hole_count(b),
        PTerm::App(a, b) | PTerm::Or(a, b) => hole_count(a) + hole_count(b),
    }
}

pub fn free_vars<N>(e: &Term<N>) -> BTreeSet<Name> {
    fn go<N>(e: &Term<N>, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match e {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, b) => {
                bound.push(x.clone());
                go(b, bound, out);
                bound.pop();
            }
            Term::App(a, b) | Term::Or(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Term::Fail | Term::Int(_) | Term::Prim(_) => {}
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

pub fn is_closed<N>(e: &Term<N>) -> bool {
    free_vars(e).is_empty()
}

/// Every valid path in `e`, in pre-order.
pub fn paths<N>(e: &Term<N>) -> Vec<Path> {
    fn go<N>(e: &Term<N>, here: &mut Vec<Selector>, out: &mut Vec<Path>) {
        out.push(Path(here.clone()));
        let mut visit = |sel, child: &Term<N>, out: &mut Vec<Path>| {
            here.push(sel);
            go(child, here, out);
            here.pop();
        };
        match e {
            Term::Lam(_, b) => visit(Selector::LamBody, b, out),
            Term::App(a, b) => {
                visit(Selector::AppFun, a, out);
                visit(Selector::AppArg, b, out);
            }
            Term::Or(a, b) => {
                visit(Selector::OrLeft, a, out);
                visit(Selector::OrRight, b, out);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

fn invalid_path(at: &Path, depth: usize, found: &str) -> EditError {
    EditError::InvalidPath {
        path: at.clone(),
        detail: format!("selector {} does not apply to {found}", at.0[depth]),
    }
}

fn shape<N>(e: &Term<N>) -> &'static str {
    match e {
        Term::Var(_) => "a variable",
        Term::Lam(..) => "a λ-abstraction",
        Term::App(..) => "an application",
        Term::Or(..) => "an `or`",
        Term::Fail => "`fail`",
        Term::Int(_) => "an integer",
        Term::Prim(_) => "a primitive",
    }
}

fn child<N>(e: &Term<N>, sel: Selector) -> Option<&Term<N>> {
    match (e, sel) {
        (Term::Lam(_, b), Selector::LamBody) => Some(b),
        (Term::App(a, _), Selector::AppFun) => Some(a),
        (Term::App(_, b), Selector::AppArg) => Some(b),
        (Term::Or(a, _), Selector::OrLeft) => Some(a),
        (Term::Or(_, b), Selector::OrRight) => Some(b),
        _ => None,
    }
}

/// The subterm at `at`.
pub fn subterm<'a, N>(e: &'a Term<N>, at: &Path) -> Result<&'a Term<N>, EditError> {
    let mut here = e;
    for (i, sel) in at.0.iter().enumerate() {
        here = child(here, *sel).ok_or_else(|| invalid_path(at, i, shape(here)))?;
    }
    Ok(here)
}

// ---------------------------------------------------------------------------
// Parameterised programs

/// Replaces every hole in `p` by `e`. No renaming: binders in `p` capture
/// free variables of `e`.
pub fn fill<N: Clone>(p: &PTerm<N>, e: &Term<N>) -> Term<N> {
    match p {
        PTerm::Hole => e.clone(),
        PTerm::Var(x) => Term::Var(x.clone()),
        PTerm::Lam(x, b) => Term::lam(x.clone(), fill(b, e)),
        PTerm::App(a, b) => Term::app(fill(a, e), fill(b, e)),
        PTerm::Or(a, b) => Term::or(fill(a, e), fill(b, e)),
        PTerm::Fail => Term::Fail,
        PTerm::Int(n) => Term::Int(n.clone()),
        PTerm::Prim(op) => Term::Prim(*op),
    }
}

/// Splits `e` into a one-hole context and the subterm at `at`, so that
/// `fill(context, subterm) == e`.
pub fn decompose<N: Clone>(e: &Term<N>, at: &Path) -> Result<(PTerm<N>, Term<N>), EditError> {
    fn go<N: Clone>(
        e: &Term<N>,
        at: &Path,
        depth: usize,
    ) -> Result<(PTerm<N>, Term<N>), EditError> {
        let Some(&sel) = at.0.get(depth) else {
            return Ok((PTerm::Hole, e.clone()));
        };
        let inner = child(e, sel).ok_or_else(|| invalid_path(at, depth, shape(e)))?;
        let (ctx, sub) = go(inner, at, depth + 1)?;
        let ctx = match (e, sel) {
            (Term::Lam(x, _), _) => PTerm::lam(x.clone(), ctx),
            (Term::App(_, b), Selector::AppFun) => PTerm::app(ctx, PTerm::from(&**b)),
            (Term::App(a, _), _) => PTerm::app(PTerm::from(&**a), ctx),
            (Term::Or(_, b), Selector::OrLeft) => PTerm::or(ctx, PTerm::from(&**b)),
            (Term::Or(a, _), _) => PTerm::or(PTerm::from(&**a), ctx),
            _ => unreachable!("child() accepted the selector"),
        };
        Ok((ctx, sub))
    }
    go(e, at, 0)
}

/// Replaces the single subterm at `at` by `replacement`.
pub fn modify<N: Clone>(
    e: &Term<N>,
    at: &Path,
    replacement: &Term<N>,
) -> Result<Term<N>, EditError> {
    let (ctx, _) = decompose(e, at)?;
    Ok(fill(&ctx, replacement))
}

/// Wraps `p` around `e`. The context must actually have a hole.
pub fn extend<N: Clone>(p: &PTerm<N>, e: &Term<N>) -> Result<Term<N>, EditError> {
    if hole_count(p) == 0 {
        return Err(EditError::NoHoles);
    }
    Ok(fill(p, e))
}

// ---------------------------------------------------------------------------
// α-equivalence and substitution

/// Equality up to consistent renaming of bound variables. Free variables
/// compare by name.
pub fn alpha_eq<N: PartialEq>(a: &Term<N>, b: &Term<N>) -> bool {
    fn go<N: PartialEq>(a: &Term<N>, b: &Term<N>, binders: &mut Vec<(Name, Name)>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let ix = binders.iter().rposition(|(l, _)| l == x);
                let iy = binders.iter().rposition(|(_, r)| r == y);
                match (ix, iy) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Lam(x, b1), Term::Lam(y, b2)) => {
                binders.push((x.clone(), y.clone()));
                let eq = go(b1, b2, binders);
                binders.pop();
                eq
            }
            (Term::App(f1, a1), Term::App(f2, a2)) | (Term::Or(f1, a1), Term::Or(f2, a2)) => {
                go(f1, f2, binders) && go(a1, a2, binders)
            }
            (Term::Fail, Term::Fail) => true,
            (Term::Int(m), Term::Int(n)) => m == n,
            (Term::Prim(p), Term::Prim(q)) => p == q,
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// A string that is equal for two terms exactly when they are α-equivalent.
/// Bound variables print as de Bruijn indices (`#0`, `#1`, …).
pub fn alpha_key<N: fmt::Display>(e: &Term<N>) -> String {
    fn go<N: fmt::Display>(e: &Term<N>, binders: &mut Vec<Name>, out: &mut String) {
        use fmt::Write;
        match e {
            Term::Var(x) => match binders.iter().rposition(|b| b == x) {
                Some(i) => {
                    let _ = write!(out, "#{}", binders.len() - 1 - i);
                }
                None => out.push_str(x.as_str()),
            },
            Term::Lam(x, b) => {
                out.push_str("(\\ ");
                binders.push(x.clone());
                go(b, binders, out);
                binders.pop();
                out.push(')');
            }
            Term::App(a, b) => {
                out.push_str("(@ ");
                go(a, binders, out);
                out.push(' ');
                go(b, binders, out);
                out.push(')');
            }
            Term::Or(a, b) => {
                out.push_str("(or ");
                go(a, binders, out);
                out.push(' ');
                go(b, binders, out);
                out.push(')');
            }
            Term::Fail => out.push_str("fail"),
            Term::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Term::Prim(p) => out.push_str(p.name()),
        }
    }
    let mut out = String::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// A name based on `base` for which `taken` is false.
pub fn fresh_name(base: &Name, taken: impl Fn(&Name) -> bool) -> Name {
    let stem = base.as_str();
    (1..)
        .map(|i| Name::new(&format!("{stem}_{i}")).expect("suffixing a name keeps it valid"))
        .find(|n| !taken(n))
        .expect("unbounded search")
}

/// Capture-avoiding simultaneous substitution of free variables.
pub fn substitute<N: Clone>(e: &Term<N>, map: &BTreeMap<Name, Term<N>>) -> Term<N> {
    if map.is_empty() {
        return e.clone();
    }
    match e {
        Term::Var(x) => map.get(x).cloned().unwrap_or_else(|| e.clone()),
        Term::Lam(x, body) => {
            let mut inner = map.clone();
            inner.remove(x);
            let body_fv = free_vars(body);
            inner.retain(|k, _| body_fv.contains(k));
            if inner.is_empty() {
                return e.clone();
            }
            let incoming: BTreeSet<Name> = inner.values().flat_map(free_vars).collect();
            if incoming.contains(x) {
                let y = fresh_name(x, |n| {
                    incoming.contains(n) || body_fv.contains(n) || inner.contains_key(n)
                });
                inner.insert(x.clone(), Term::Var(y.clone()));
                Term::lam(y, substitute(body, &inner))
            } else {
                Term::lam(x.clone(), substitute(body, &inner))
            }
        }
        Term::App(a, b) => Term::app(substitute(a, map), substitute(b, map)),
        Term::Or(a, b) => Term::or(substitute(a, map), substitute(b, map)),
        Term::Fail | Term::Int(_) | Term::Prim(_) => e.clone(),
    }
}

/// Substitutes `value` for free occurrences of `x`.
pub fn substitute_one<N: Clone>(e: &Term<N>, x: &Name, value: &Term<N>) -> Term<N> {
    let mut map = BTreeMap::new();
    map.insert(x.clone(), value.clone());
    substitute(e, &map)
}
