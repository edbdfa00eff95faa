//! Concrete syntax: lexer, parser, and printers for session types, global
//! types, computations, and session files.
//!
//! ```text
//! Program   := Decl*
//! Decl      := "global" Id "=" GType ";"
//!            | "participant" Id ":" TypeRef "=" Comp ";"
//! TypeRef   := SType | Id "@" Id
//! SType     := "end" | Id | "rec" Id "." SType
//!            | ("+" | "&") Id "{" Branch ("," Branch)* "}"
//! Branch    := Id "(" Ground ")" "." SType
//! GType     := "end" | Id | "rec" Id "." GType
//!            | Id "->" Id "{" GBranch ("," GBranch)* "}"
//! GBranch   := Id "(" Ground ")" "." GType
//! Ground    := "unit" | "bool" | "int"
//! Comp      := "return" Val | "let" Id "=" Comp "in" Comp
//!            | Val ("+" | "-" | "<") Val
//!            | "if" Val "then" Comp "else" Comp
//!            | "send" Id "(" Val ")" "to" Id ";" Comp
//!            | "recv" "from" Id "{" Arm ("," Arm)* "}"
//!            | "letrec" Id "(" Params ")" ":" Ground ["grade" Id "." SType] "=" Comp "in" Comp
//!            | Id "(" Vals ")" | "(" Comp ":" SType ")"
//! Params    := [Id ":" Ground ("," Id ":" Ground)*]
//! Vals      := [Val ("," Val)*]
//! Arm       := Id "(" Id ":" Ground ")" "->" Comp
//! Val       := Id | "()" | IntLit | "true" | "false"
//! ```
//!
//! Whitespace is insignificant and `//` starts a line comment. Commas
//! between parameters and arguments are optional.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::global::{GBranch, GlobalType};
use crate::lang::{Arm, Computation, FunDef, Value};
use crate::session::{Branch, Branches, GroundType, Label, Participant, Polarity, SessionType};

/// A parse error with its 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    /// Line number.
    pub line: usize,
    /// Column number.
    pub column: usize,
    /// What went wrong.
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 15] = ["->", "+", "-", "<", "&", "{", "}", "(", ")", ",", ".", ":", ";", "=", "@"];

const KEYWORDS: [&str; 21] = [
    "end", "rec", "return", "let", "in", "if", "then", "else", "send", "to", "recv", "from", "letrec", "grade", "global",
    "participant", "unit", "bool", "int", "true", "false",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Token { tok: Tok::Ident(word), line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[s..i].iter().collect();
            col += i - s;
            let n = digits.parse::<i64>().map_err(|_| ParseError {
                line: start_line,
                column: start_col,
                message: format!("integer literal {digits} out of range"),
            })?;
            out.push(Token { tok: Tok::Int(n), line: start_line, column: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push(Token { tok: Tok::Sym(sym), line: start_line, column: start_col });
            }
            None => {
                return Err(ParseError { line, column: col, message: format!("unexpected character `{c}`") });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

/// How a participant declares its type: explicitly or as a projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeRef {
    /// An explicit session type.
    Local(SessionType),
    /// `G @ r`: the projection of a declared global type.
    Projection {
        /// Name of the global declaration.
        global: String,
        /// Role to project onto.
        role: Participant,
    },
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Local(t) => write!(f, "{t}"),
            TypeRef::Projection { global, role } => write!(f, "{global} @ {role}"),
        }
    }
}

/// A participant declaration `participant r : T = t;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantDecl {
    /// Role name.
    pub name: Participant,
    /// Declared type.
    pub ty: TypeRef,
    /// Implementation.
    pub body: Computation,
}

/// A parsed session file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    /// Named global types, in declaration order.
    pub globals: IndexMap<String, GlobalType>,
    /// Participants, in declaration order.
    pub participants: Vec<ParticipantDecl>,
}

impl Program {
    /// Looks up a participant by name.
    pub fn participant(&self, name: &str) -> Option<&ParticipantDecl> {
        self.participants.iter().find(|p| p.name.as_str() == name)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, g) in &self.globals {
            writeln!(f, "global {name} = {g};")?;
        }
        for p in &self.participants {
            writeln!(f, "participant {} : {} = {};", p.name, p.ty, p.body)?;
        }
        Ok(())
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError { line: t.line, column: t.column, message: message.into() })
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.advance();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.advance();
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {other}")),
        }
    }

    fn eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err(format!("unexpected {} after end of input", self.peek()))
        }
    }

    fn ground(&mut self) -> PResult<GroundType> {
        let g = match self.peek() {
            Tok::Ident(s) if s == "unit" => GroundType::Unit,
            Tok::Ident(s) if s == "bool" => GroundType::Bool,
            Tok::Ident(s) if s == "int" => GroundType::Int,
            other => return self.err(format!("expected a ground type (unit, bool, int), found {other}")),
        };
        self.advance();
        Ok(g)
    }

    fn stype(&mut self) -> PResult<SessionType> {
        if self.is_kw("end") {
            self.advance();
            return Ok(SessionType::End);
        }
        if self.is_kw("rec") {
            self.advance();
            let x = self.ident("a type variable")?;
            self.expect_sym(".")?;
            let body = self.stype()?;
            return Ok(SessionType::rec(x, body));
        }
        let pol = if self.is_sym("+") {
            Polarity::Internal
        } else if self.is_sym("&") {
            Polarity::External
        } else {
            return Ok(SessionType::var(self.ident("a session type")?));
        };
        self.advance();
        let p = self.ident("a participant")?;
        self.expect_sym("{")?;
        let mut bs: Branches = IndexMap::new();
        loop {
            let l = self.ident("a label")?;
            self.expect_sym("(")?;
            let b = self.ground()?;
            self.expect_sym(")")?;
            self.expect_sym(".")?;
            let cont = self.stype()?;
            if bs.insert(Label::new(l.clone()), Branch::new(b, cont)).is_some() {
                return self.err(format!("duplicate label {l}"));
            }
            if self.is_sym(",") {
                self.advance();
                continue;
            }
            break;
        }
        self.expect_sym("}")?;
        Ok(SessionType::choice(pol, Participant::new(p), bs))
    }

    fn gtype(&mut self) -> PResult<GlobalType> {
        if self.is_kw("end") {
            self.advance();
            return Ok(GlobalType::End);
        }
        if self.is_kw("rec") {
            self.advance();
            let x = self.ident("a type variable")?;
            self.expect_sym(".")?;
            return Ok(GlobalType::rec(x, self.gtype()?));
        }
        let first = self.ident("a global type")?;
        if !self.is_sym("->") {
            return Ok(GlobalType::var(first));
        }
        self.advance();
        let to = self.ident("a participant")?;
        self.expect_sym("{")?;
        let mut branches: IndexMap<Label, GBranch> = IndexMap::new();
        loop {
            let l = self.ident("a label")?;
            self.expect_sym("(")?;
            let b = self.ground()?;
            self.expect_sym(")")?;
            self.expect_sym(".")?;
            let cont = self.gtype()?;
            if branches.insert(Label::new(l.clone()), GBranch { payload: b, cont }).is_some() {
                return self.err(format!("duplicate label {l}"));
            }
            if self.is_sym(",") {
                self.advance();
                continue;
            }
            break;
        }
        self.expect_sym("}")?;
        Ok(GlobalType::Comm { from: Participant::new(first), to: Participant::new(to), branches })
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Value::Int(n))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.advance();
                let Tok::Int(n) = self.advance() else { unreachable!() };
                Ok(Value::Int(-n))
            }
            Tok::Sym("(") if matches!(self.peek_at(1), Tok::Sym(")")) => {
                self.advance();
                self.advance();
                Ok(Value::Unit)
            }
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Value::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.advance();
                Ok(Value::Bool(false))
            }
            _ => Ok(Value::Var(self.ident("a value")?)),
        }
    }

    fn comp(&mut self) -> PResult<Computation> {
        match self.peek().clone() {
            Tok::Ident(k) if k == "return" => {
                self.advance();
                Ok(Computation::Return(self.value()?))
            }
            Tok::Ident(k) if k == "let" => {
                self.advance();
                let x = self.ident("a variable")?;
                self.expect_sym("=")?;
                let t = self.comp()?;
                self.expect_kw("in")?;
                let u = self.comp()?;
                Ok(Computation::let_(x, t, u))
            }
            Tok::Ident(k) if k == "if" => {
                self.advance();
                let v = self.value()?;
                self.expect_kw("then")?;
                let t = self.comp()?;
                self.expect_kw("else")?;
                let u = self.comp()?;
                Ok(Computation::if_(v, t, u))
            }
            Tok::Ident(k) if k == "send" => {
                self.advance();
                let l = self.ident("a label")?;
                self.expect_sym("(")?;
                let v = self.value()?;
                self.expect_sym(")")?;
                self.expect_kw("to")?;
                let p = self.ident("a participant")?;
                self.expect_sym(";")?;
                let cont = self.comp()?;
                Ok(Computation::send(l, v, p, cont))
            }
            Tok::Ident(k) if k == "recv" => {
                self.advance();
                self.expect_kw("from")?;
                let p = self.ident("a participant")?;
                self.expect_sym("{")?;
                if self.is_sym("}") {
                    return self.err("a receive needs at least one arm (empty choice)");
                }
                let mut arms: IndexMap<Label, Arm> = IndexMap::new();
                loop {
                    let l = self.ident("a label")?;
                    self.expect_sym("(")?;
                    let x = self.ident("a variable")?;
                    self.expect_sym(":")?;
                    let b = self.ground()?;
                    self.expect_sym(")")?;
                    self.expect_sym("->")?;
                    let body = self.comp()?;
                    if arms.insert(Label::new(l.clone()), Arm { binder: x, ground: b, body }).is_some() {
                        return self.err(format!("duplicate label {l}"));
                    }
                    if self.is_sym(",") {
                        self.advance();
                        continue;
                    }
                    break;
                }
                self.expect_sym("}")?;
                Ok(Computation::Recv { from: Participant::new(p), arms })
            }
            Tok::Ident(k) if k == "letrec" => {
                self.advance();
                let name = self.ident("a function name")?;
                self.expect_sym("(")?;
                let mut params = Vec::new();
                while !self.is_sym(")") {
                    let x = self.ident("a parameter")?;
                    self.expect_sym(":")?;
                    params.push((x, self.ground()?));
                    if self.is_sym(",") {
                        self.advance();
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(":")?;
                let result = self.ground()?;
                let grade = if self.is_kw("grade") {
                    self.advance();
                    let x = self.ident("a type variable")?;
                    self.expect_sym(".")?;
                    Some((x, self.stype()?))
                } else {
                    None
                };
                self.expect_sym("=")?;
                let body = self.comp()?;
                self.expect_kw("in")?;
                let cont = self.comp()?;
                Ok(Computation::LetRec(Arc::new(FunDef { name, params, result, grade, body }), Box::new(cont)))
            }
            Tok::Sym("(") if !matches!(self.peek_at(1), Tok::Sym(")")) => {
                self.advance();
                let t = self.comp()?;
                self.expect_sym(":")?;
                let ty = self.stype()?;
                self.expect_sym(")")?;
                Ok(Computation::Ascribe(Box::new(t), ty))
            }
            Tok::Ident(f) if !KEYWORDS.contains(&f.as_str()) && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.advance();
                self.advance();
                let mut args = Vec::new();
                while !self.is_sym(")") {
                    args.push(self.value()?);
                    if self.is_sym(",") {
                        self.advance();
                    }
                }
                self.expect_sym(")")?;
                Ok(Computation::Apply(f, args))
            }
            _ => {
                let v = self.value()?;
                let op = match self.peek() {
                    Tok::Sym("+") => "+",
                    Tok::Sym("-") => "-",
                    Tok::Sym("<") => "<",
                    other => return self.err(format!("expected a computation, found {other}")),
                };
                self.advance();
                let w = self.value()?;
                Ok(match op {
                    "+" => Computation::Add(v, w),
                    "-" => Computation::Sub(v, w),
                    _ => Computation::Less(v, w),
                })
            }
        }
    }

    fn type_ref(&mut self) -> PResult<TypeRef> {
        if let (Tok::Ident(g), Tok::Sym("@")) = (self.peek().clone(), self.peek_at(1).clone()) {
            if !KEYWORDS.contains(&g.as_str()) {
                self.advance();
                self.advance();
                let role = self.ident("a role")?;
                return Ok(TypeRef::Projection { global: g, role: Participant::new(role) });
            }
        }
        Ok(TypeRef::Local(self.stype()?))
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                return Ok(prog);
            }
            if self.is_kw("global") {
                self.advance();
                let name = self.ident("a global type name")?;
                self.expect_sym("=")?;
                let g = self.gtype()?;
                self.expect_sym(";")?;
                if prog.globals.insert(name.clone(), g).is_some() {
                    return self.err(format!("global {name} declared twice"));
                }
            } else if self.is_kw("participant") {
                self.advance();
                let name = self.ident("a participant name")?;
                self.expect_sym(":")?;
                let ty = self.type_ref()?;
                self.expect_sym("=")?;
                let body = self.comp()?;
                self.expect_sym(";")?;
                if prog.participant(&name).is_some() {
                    return self.err(format!("participant {name} declared twice"));
                }
                prog.participants.push(ParticipantDecl { name: Participant::new(name), ty, body });
            } else {
                return self.err(format!("expected `global` or `participant`, found {}", self.peek()));
            }
        }
    }
}

/// Parses a session type.
pub fn parse_session_type(src: &str) -> Result<SessionType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.stype()?;
    p.eof()?;
    Ok(t)
}

/// Parses a global type.
pub fn parse_global_type(src: &str) -> Result<GlobalType, ParseError> {
    let mut p = Parser::new(src)?;
    let g = p.gtype()?;
    p.eof()?;
    Ok(g)
}

/// Parses a computation.
pub fn parse_computation(src: &str) -> Result<Computation, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.comp()?;
    p.eof()?;
    Ok(t)
}

/// Parses a value.
pub fn parse_value(src: &str) -> Result<Value, ParseError> {
    let mut p = Parser::new(src)?;
    let v = p.value()?;
    p.eof()?;
    Ok(v)
}

/// Parses a session file (a sequence of declarations).
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src)?;
    p.program()
}

/// Alias of [`parse_program`].
pub fn parse_session_file(src: &str) -> Result<Program, ParseError> {
    parse_program(src)
}

impl fmt::Display for Computation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Computation::*;
        match self {
            Return(v) => write!(f, "return {v}"),
            Let(x, t, u) => write!(f, "let {x} = {t} in {u}"),
            Add(a, b) => write!(f, "{a} + {b}"),
            Sub(a, b) => write!(f, "{a} - {b}"),
            Less(a, b) => write!(f, "{a} < {b}"),
            If(v, t, u) => write!(f, "if {v} then {t} else {u}"),
            Send { label, value, to, cont } => write!(f, "send {label}({value}) to {to}; {cont}"),
            Recv { from, arms } => {
                write!(f, "recv from {from} {{")?;
                for (i, (l, a)) in arms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, " {l}({}: {}) -> {}", a.binder, a.ground, a.body)?;
                }
                write!(f, " }}")
            }
            LetRec(def, cont) => {
                write!(f, "letrec {}(", def.name)?;
                for (i, (x, b)) in def.params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}: {b}")?;
                }
                write!(f, ") : {}", def.result)?;
                if let Some((x, t)) = &def.grade {
                    write!(f, " grade {x}. {t}")?;
                }
                write!(f, " = {} in {cont}", def.body)
            }
            Apply(fun, args) => {
                write!(f, "{fun}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Ascribe(t, ty) => write!(f, "({t} : {ty})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_return() {
        assert_eq!(parse_computation("return 5").unwrap(), Computation::Return(Value::Int(5)));
    }

    #[test]
    fn empty_receive_is_rejected() {
        let e = parse_computation("recv from p { }").unwrap_err();
        assert!(e.message.contains("empty choice"), "{e}");
    }

    #[test]
    fn session_type_round_trips() {
        let src = "rec X. &c{get(unit). +c{st(int). X}, put(int). X, done(unit). end}";
        let t = parse_session_type(src).unwrap();
        assert_eq!(t.to_string(), src);
    }

    #[test]
    fn negative_literals_and_subtraction() {
        let t = parse_computation("x - -1").unwrap();
        assert_eq!(t, Computation::Sub(Value::Var("x".into()), Value::Int(-1)));
    }

    #[test]
    fn positions_are_reported() {
        let e = parse_session_type("+p{a(int). end,\n  b(float). end}").unwrap_err();
        assert_eq!((e.line, e.column), (2, 5));
    }
}
