//! Model format: parsing, validation, and rendering.
//!
//! A model is a JSON document (schema version 1) describing channels,
//! messages, integer variables, processes (finite control state machines
//! whose transitions carry actions), optional procedures, and assertions.
//! Actions are written as strings:
//!
//! * `skip`
//! * `x := x + 1` (assignment; several assignments may be chained with `;`)
//! * `c ! m` (send message `m` on channel `c`)
//! * `c ? m` (receive)
//! * `assume x > 0`
//!
//! Conditionals are modeled with `assume`, which all shipped value domains
//! treat as the identity; branch pruning is not part of the abstraction.
//!
//! Procedure support is restricted: procedures may only be used by a model
//! with a single process, every procedure body must be loop-free (recursion
//! through calls is fine), and bodies must not receive. [`validate`] reports
//! each violated assumption and names the engines it disables.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type VarId = usize;

/// Binary integer operators. Division is truncating integer division.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Int(BigInt),
    Var(VarId),
    Neg(Box<IntExpr>),
    Bin(BinOp, Box<IntExpr>, Box<IntExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(CmpOp, IntExpr, IntExpr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

/// One edge action. `Seq` holds semicolon-chained simple actions; sends and
/// receives may not appear inside a `Seq` so that every edge moves at most
/// one counter.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Skip,
    Assign(VarId, IntExpr),
    Send(usize, usize),
    Receive(usize, usize),
    Assume(BoolExpr),
    Seq(Vec<Action>),
}

impl Action {
    /// Iterates the atomic actions, flattening one level of `Seq`.
    pub fn atoms(&self) -> Box<dyn Iterator<Item = &Action> + '_> {
        match self {
            Action::Seq(items) => Box::new(items.iter()),
            other => Box::new(std::iter::once(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub init: BigInt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcAct {
    Act(Action),
    /// Procedure call; resolves to an index into `Model::procedures`.
    Call(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub act: ProcAct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub name: String,
    pub nodes: Vec<String>,
    pub entry: usize,
    pub exit: usize,
    pub edges: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub process: usize,
    pub state: usize,
    pub expr: BoolExpr,
    /// Original expression text, kept for reports.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub channels: Vec<String>,
    pub messages: Vec<String>,
    pub variables: Vec<VarDecl>,
    pub processes: Vec<Process>,
    pub procedures: Vec<Procedure>,
    pub assertions: Vec<Assertion>,
}

impl Model {
    pub fn var_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn process_index(&self, name: &str) -> Option<usize> {
        self.processes.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("invalid JSON at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("unsupported schema_version {0} (expected 1)")]
    SchemaVersion(u32),
    #[error("syntax error in {context}: {msg} (in `{text}`)")]
    Syntax { context: String, msg: String, text: String },
    #[error("unknown {kind} `{name}` in {context}")]
    UnknownIdent { kind: &'static str, name: String, context: String },
    #[error("duplicate {kind} declaration `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{0}")]
    Invalid(String),
}

/// The three analysis engines a diagnostic can disable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Backward,
    Forward,
    Jop,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineKind::Backward => write!(f, "backward"),
            EngineKind::Forward => write!(f, "forward"),
            EngineKind::Jop => write!(f, "jop"),
        }
    }
}

/// A validation finding. `fatal` diagnostics make the model unusable by all
/// engines; non-fatal ones only disable the engines listed in `disables`.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    pub disables: Vec<EngineKind>,
    pub fatal: bool,
}

impl Diagnostic {
    fn fatal(code: &str, message: String) -> Self {
        Diagnostic {
            code: code.to_string(),
            message,
            disables: vec![EngineKind::Backward, EngineKind::Forward, EngineKind::Jop],
            fatal: true,
        }
    }
}

/// True when `engine` cannot run under the given diagnostics.
pub fn engine_disabled(diags: &[Diagnostic], engine: EngineKind) -> Option<&Diagnostic> {
    diags
        .iter()
        .find(|d| d.fatal || d.disables.contains(&engine))
}

// ---------------------------------------------------------------------------
// Raw JSON schema (serde side).
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    schema_version: u32,
    #[serde(default)]
    channels: Vec<String>,
    #[serde(default)]
    messages: Vec<String>,
    #[serde(default)]
    variables: Vec<RawVar>,
    #[serde(default)]
    processes: Vec<RawProcess>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    procedures: Vec<RawProcedure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    assertions: Vec<RawAssertion>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVar {
    name: String,
    init: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    name: String,
    initial: String,
    states: Vec<String>,
    transitions: Vec<RawTransition>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    call: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcedure {
    name: String,
    entry: String,
    exit: String,
    nodes: Vec<String>,
    edges: Vec<RawTransition>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssertion {
    process: String,
    state: String,
    expr: String,
}

// ---------------------------------------------------------------------------
// Tokenizer and expression parsing.
// ---------------------------------------------------------------------------

const RESERVED: &[&str] = &["skip", "assume", "true", "false"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(s[start..i].to_string()));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let n = BigInt::parse_bytes(&bytes[start..i], 10)
                .ok_or_else(|| format!("bad integer literal `{}`", &s[start..i]))?;
            out.push(Tok::Int(n));
            continue;
        }
        let two = if i + 1 < bytes.len() { &s[i..i + 2] } else { "" };
        let sym2 = match two {
            ":=" => Some(":="),
            "==" => Some("=="),
            "!=" => Some("!="),
            "<=" => Some("<="),
            ">=" => Some(">="),
            "&&" => Some("&&"),
            "||" => Some("||"),
            _ => None,
        };
        if let Some(sym) = sym2 {
            out.push(Tok::Sym(sym));
            i += 2;
            continue;
        }
        let sym1 = match c {
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '(' => "(",
            ')' => ")",
            '<' => "<",
            '>' => ">",
            '!' => "!",
            '?' => "?",
            ';' => ";",
            _ => return Err(format!("unexpected character `{c}`")),
        };
        out.push(Tok::Sym(sym1));
        i += 1;
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: &'a [Tok],
    pos: usize,
    vars: &'a [String],
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if let Some(Tok::Sym(s)) = self.peek() {
            if *s == sym {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn var_index(&self, name: &str) -> Result<usize, String> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| format!("unknown variable `{name}`"))
    }

    fn int_expr(&mut self) -> Result<IntExpr, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                break;
            };
            let rhs = self.term()?;
            lhs = IntExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<IntExpr, String> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                break;
            };
            let rhs = self.unary()?;
            lhs = IntExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<IntExpr, String> {
        if self.eat_sym("-") {
            return Ok(IntExpr::Neg(Box::new(self.unary()?)));
        }
        match self.bump().cloned() {
            Some(Tok::Int(n)) => Ok(IntExpr::Int(n)),
            Some(Tok::Ident(name)) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(format!("`{name}` is a reserved word"));
                }
                Ok(IntExpr::Var(self.var_index(&name)?))
            }
            Some(Tok::Sym("(")) => {
                let e = self.int_expr()?;
                if !self.eat_sym(")") {
                    return Err("expected `)`".to_string());
                }
                Ok(e)
            }
            other => Err(format!("expected integer expression, found {other:?}")),
        }
    }

    fn bool_expr(&mut self) -> Result<BoolExpr, String> {
        let mut lhs = self.bool_and()?;
        while self.eat_sym("||") {
            let rhs = self.bool_and()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_and(&mut self) -> Result<BoolExpr, String> {
        let mut lhs = self.bool_atom()?;
        while self.eat_sym("&&") {
            let rhs = self.bool_atom()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_atom(&mut self) -> Result<BoolExpr, String> {
        if self.eat_sym("!") {
            return Ok(BoolExpr::Not(Box::new(self.bool_atom()?)));
        }
        if let Some(Tok::Ident(name)) = self.peek() {
            if name == "true" {
                self.pos += 1;
                return Ok(BoolExpr::Lit(true));
            }
            if name == "false" {
                self.pos += 1;
                return Ok(BoolExpr::Lit(false));
            }
        }
        // A `(` may open either a parenthesized boolean or an integer
        // sub-expression of a comparison; try the comparison first and
        // backtrack on failure.
        let save = self.pos;
        match self.comparison() {
            Ok(cmp) => Ok(cmp),
            Err(cmp_err) => {
                self.pos = save;
                if self.eat_sym("(") {
                    let inner = self.bool_expr()?;
                    if !self.eat_sym(")") {
                        return Err("expected `)`".to_string());
                    }
                    Ok(inner)
                } else {
                    Err(cmp_err)
                }
            }
        }
    }

    fn comparison(&mut self) -> Result<BoolExpr, String> {
        let lhs = self.int_expr()?;
        let op = match self.bump() {
            Some(Tok::Sym("==")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            other => return Err(format!("expected comparison operator, found {other:?}")),
        };
        let rhs = self.int_expr()?;
        Ok(BoolExpr::Cmp(op, lhs, rhs))
    }

    fn expect_end(&self) -> Result<(), String> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("trailing input starting at {t:?}")),
        }
    }
}

/// Parses a single boolean expression (assertion syntax).
pub fn parse_bool_expr_str(text: &str, vars: &[String]) -> Result<BoolExpr, String> {
    let toks = tokenize(text)?;
    let mut p = ExprParser { toks: &toks, pos: 0, vars };
    let e = p.bool_expr()?;
    p.expect_end()?;
    Ok(e)
}

/// Parses one action string. Semicolons chain simple actions into an
/// `Action::Seq`; sends and receives may not appear in a chain.
pub fn parse_action_str(
    text: &str,
    vars: &[String],
    channels: &[String],
    messages: &[String],
) -> Result<Action, String> {
    let parts: Vec<&str> = text.split(';').collect();
    let mut atoms = Vec::new();
    for part in &parts {
        atoms.push(parse_atom(part, vars, channels, messages)?);
    }
    if atoms.len() == 1 {
        return Ok(atoms.pop().unwrap());
    }
    for a in &atoms {
        if matches!(a, Action::Send(..) | Action::Receive(..)) {
            return Err("send/receive may not appear in a compound action".to_string());
        }
    }
    Ok(Action::Seq(atoms))
}

fn parse_atom(
    text: &str,
    vars: &[String],
    channels: &[String],
    messages: &[String],
) -> Result<Action, String> {
    let toks = tokenize(text)?;
    match toks.as_slice() {
        [Tok::Ident(w)] if w == "skip" => Ok(Action::Skip),
        [Tok::Ident(w), rest @ ..] if w == "assume" => {
            let mut p = ExprParser { toks: rest, pos: 0, vars };
            let e = p.bool_expr()?;
            p.expect_end()?;
            Ok(Action::Assume(e))
        }
        [Tok::Ident(chan), Tok::Sym("!"), Tok::Ident(msg)] => {
            let c = channels
                .iter()
                .position(|x| x == chan)
                .ok_or_else(|| format!("unknown channel `{chan}`"))?;
            let m = messages
                .iter()
                .position(|x| x == msg)
                .ok_or_else(|| format!("unknown message `{msg}`"))?;
            Ok(Action::Send(c, m))
        }
        [Tok::Ident(chan), Tok::Sym("?"), Tok::Ident(msg)] => {
            let c = channels
                .iter()
                .position(|x| x == chan)
                .ok_or_else(|| format!("unknown channel `{chan}`"))?;
            let m = messages
                .iter()
                .position(|x| x == msg)
                .ok_or_else(|| format!("unknown message `{msg}`"))?;
            Ok(Action::Receive(c, m))
        }
        [Tok::Ident(var), Tok::Sym(":="), rest @ ..] if !rest.is_empty() => {
            if RESERVED.contains(&var.as_str()) {
                return Err(format!("`{var}` is a reserved word"));
            }
            let v = vars
                .iter()
                .position(|x| x == var)
                .ok_or_else(|| format!("unknown variable `{var}`"))?;
            let mut p = ExprParser { toks: rest, pos: 0, vars };
            let e = p.int_expr()?;
            p.expect_end()?;
            Ok(Action::Assign(v, e))
        }
        [] => Err("empty action".to_string()),
        _ => Err(format!("unrecognized action `{}`", text.trim())),
    }
}

// ---------------------------------------------------------------------------
// Rendering back to text.
// ---------------------------------------------------------------------------

fn int_prec(e: &IntExpr) -> u8 {
    match e {
        IntExpr::Int(_) | IntExpr::Var(_) => 3,
        IntExpr::Neg(_) => 2,
        IntExpr::Bin(BinOp::Mul | BinOp::Div, ..) => 1,
        IntExpr::Bin(BinOp::Add | BinOp::Sub, ..) => 0,
    }
}

pub fn render_int_expr(e: &IntExpr, vars: &[String]) -> String {
    fn go(e: &IntExpr, vars: &[String], min_prec: u8) -> String {
        let prec = int_prec(e);
        let body = match e {
            IntExpr::Int(n) => n.to_string(),
            IntExpr::Var(v) => vars[*v].clone(),
            IntExpr::Neg(inner) => format!("-{}", go(inner, vars, 3)),
            IntExpr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                // The right operand binds one step tighter so that
                // left-associative chains reparse identically.
                format!("{} {} {}", go(a, vars, prec), sym, go(b, vars, prec + 1))
            }
        };
        if prec < min_prec {
            format!("({body})")
        } else {
            body
        }
    }
    go(e, vars, 0)
}

pub fn render_bool_expr(e: &BoolExpr, vars: &[String]) -> String {
    fn bool_prec(e: &BoolExpr) -> u8 {
        match e {
            BoolExpr::Or(..) => 0,
            BoolExpr::And(..) => 1,
            BoolExpr::Not(_) | BoolExpr::Lit(_) | BoolExpr::Cmp(..) => 2,
        }
    }
    fn go(e: &BoolExpr, vars: &[String], min_prec: u8) -> String {
        let prec = bool_prec(e);
        let body = match e {
            BoolExpr::Lit(b) => b.to_string(),
            BoolExpr::Cmp(op, a, b) => {
                let sym = match op {
                    CmpOp::Eq => "==",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                format!("{} {} {}", render_int_expr(a, vars), sym, render_int_expr(b, vars))
            }
            BoolExpr::Not(inner) => format!("!{}", go(inner, vars, 2)),
            BoolExpr::And(a, b) => format!("{} && {}", go(a, vars, 1), go(b, vars, 2)),
            BoolExpr::Or(a, b) => format!("{} || {}", go(a, vars, 0), go(b, vars, 1)),
        };
        if prec < min_prec {
            format!("({body})")
        } else {
            body
        }
    }
    go(e, vars, 0)
}

pub fn render_action(a: &Action, vars: &[String], channels: &[String], messages: &[String]) -> String {
    match a {
        Action::Skip => "skip".to_string(),
        Action::Assign(v, e) => format!("{} := {}", vars[*v], render_int_expr(e, vars)),
        Action::Send(c, m) => format!("{} ! {}", channels[*c], messages[*m]),
        Action::Receive(c, m) => format!("{} ? {}", channels[*c], messages[*m]),
        Action::Assume(e) => format!("assume {}", render_bool_expr(e, vars)),
        Action::Seq(items) => items
            .iter()
            .map(|x| render_action(x, vars, channels, messages))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

// ---------------------------------------------------------------------------
// parse_model / render_model
// ---------------------------------------------------------------------------

fn check_name(kind: &'static str, name: &str) -> Result<(), ParseError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.chars().next().unwrap().is_ascii_digit()
        && !RESERVED.contains(&name);
    if ok {
        Ok(())
    } else {
        Err(ParseError::Invalid(format!(
            "invalid {kind} name `{name}`: names are ASCII identifiers and may not be reserved words"
        )))
    }
}

fn unique<'a>(kind: &'static str, names: impl Iterator<Item = &'a String>) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n.clone()) {
            return Err(ParseError::Duplicate { kind, name: n.clone() });
        }
    }
    Ok(())
}

/// Parses and resolves a model from JSON text. Syntax and name resolution
/// errors are reported here; structural assumptions are checked separately by
/// [`validate`].
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ParseError::Json {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    if raw.schema_version != 1 {
        return Err(ParseError::SchemaVersion(raw.schema_version));
    }

    for c in &raw.channels {
        check_name("channel", c)?;
    }
    for m in &raw.messages {
        check_name("message", m)?;
    }
    for v in &raw.variables {
        check_name("variable", &v.name)?;
    }
    unique("channel", raw.channels.iter())?;
    unique("message", raw.messages.iter())?;
    unique("variable", raw.variables.iter().map(|v| &v.name))?;
    unique("process", raw.processes.iter().map(|p| &p.name))?;
    unique("procedure", raw.procedures.iter().map(|p| &p.name))?;

    let vars: Vec<String> = raw.variables.iter().map(|v| v.name.clone()).collect();
    let proc_names: Vec<String> = raw.procedures.iter().map(|p| p.name.clone()).collect();

    let resolve_transition = |t: &RawTransition,
                              names: &[String],
                              context: &str|
     -> Result<Transition, ParseError> {
        let from = names.iter().position(|s| s == &t.from).ok_or_else(|| {
            ParseError::UnknownIdent { kind: "state", name: t.from.clone(), context: context.to_string() }
        })?;
        let to = names.iter().position(|s| s == &t.to).ok_or_else(|| {
            ParseError::UnknownIdent { kind: "state", name: t.to.clone(), context: context.to_string() }
        })?;
        let act = match (&t.action, &t.call) {
            (Some(a), None) => {
                let parsed = parse_action_str(a, &vars, &raw.channels, &raw.messages).map_err(|msg| {
                    ParseError::Syntax { context: context.to_string(), msg, text: a.clone() }
                })?;
                ProcAct::Act(parsed)
            }
            (None, Some(callee)) => {
                let idx = proc_names.iter().position(|p| p == callee).ok_or_else(|| {
                    ParseError::UnknownIdent {
                        kind: "procedure",
                        name: callee.clone(),
                        context: context.to_string(),
                    }
                })?;
                ProcAct::Call(idx)
            }
            (Some(_), Some(_)) => {
                return Err(ParseError::Invalid(format!(
                    "{context}: a transition may carry an action or a call, not both"
                )))
            }
            (None, None) => {
                return Err(ParseError::Invalid(format!(
                    "{context}: a transition needs an `action` or a `call`"
                )))
            }
        };
        Ok(Transition { from, to, act })
    };

    let mut processes = Vec::new();
    for p in &raw.processes {
        check_name("process", &p.name)?;
        for s in &p.states {
            check_name("state", s)?;
        }
        unique("state", p.states.iter())?;
        let initial = p.states.iter().position(|s| s == &p.initial).ok_or_else(|| {
            ParseError::UnknownIdent {
                kind: "state",
                name: p.initial.clone(),
                context: format!("process `{}` initial", p.name),
            }
        })?;
        let mut transitions = Vec::new();
        for (i, t) in p.transitions.iter().enumerate() {
            let ctx = format!("process `{}` transition {i}", p.name);
            transitions.push(resolve_transition(t, &p.states, &ctx)?);
        }
        processes.push(Process { name: p.name.clone(), states: p.states.clone(), initial, transitions });
    }

    let mut procedures = Vec::new();
    for p in &raw.procedures {
        check_name("procedure", &p.name)?;
        for n in &p.nodes {
            check_name("node", n)?;
        }
        unique("node", p.nodes.iter())?;
        let entry = p.nodes.iter().position(|s| s == &p.entry).ok_or_else(|| {
            ParseError::UnknownIdent {
                kind: "node",
                name: p.entry.clone(),
                context: format!("procedure `{}` entry", p.name),
            }
        })?;
        let exit = p.nodes.iter().position(|s| s == &p.exit).ok_or_else(|| {
            ParseError::UnknownIdent {
                kind: "node",
                name: p.exit.clone(),
                context: format!("procedure `{}` exit", p.name),
            }
        })?;
        let mut edges = Vec::new();
        for (i, t) in p.edges.iter().enumerate() {
            let ctx = format!("procedure `{}` edge {i}", p.name);
            edges.push(resolve_transition(t, &p.nodes, &ctx)?);
        }
        procedures.push(Procedure { name: p.name.clone(), nodes: p.nodes.clone(), entry, exit, edges });
    }

    let mut assertions = Vec::new();
    for (i, a) in raw.assertions.iter().enumerate() {
        let ctx = format!("assertion {i}");
        let process = processes.iter().position(|p| p.name == a.process).ok_or_else(|| {
            ParseError::UnknownIdent { kind: "process", name: a.process.clone(), context: ctx.clone() }
        })?;
        let state = processes[process]
            .states
            .iter()
            .position(|s| s == &a.state)
            .ok_or_else(|| ParseError::UnknownIdent {
                kind: "state",
                name: a.state.clone(),
                context: ctx.clone(),
            })?;
        let expr = parse_bool_expr_str(&a.expr, &vars).map_err(|msg| ParseError::Syntax {
            context: ctx,
            msg,
            text: a.expr.clone(),
        })?;
        assertions.push(Assertion { process, state, expr, text: a.expr.clone() });
    }

    Ok(Model {
        channels: raw.channels,
        messages: raw.messages,
        variables: raw
            .variables
            .iter()
            .map(|v| VarDecl { name: v.name.clone(), init: BigInt::from(v.init) })
            .collect(),
        processes,
        procedures,
        assertions,
    })
}

/// Renders a model back to canonical JSON. `parse_model(render_model(m))`
/// yields a model equal to `m`.
pub fn render_model(m: &Model) -> String {
    use num_traits::ToPrimitive;
    let vars = m.var_names();
    let raw_transition = |t: &Transition, names: &[String]| RawTransition {
        from: names[t.from].clone(),
        to: names[t.to].clone(),
        action: match &t.act {
            ProcAct::Act(a) => Some(render_action(a, &vars, &m.channels, &m.messages)),
            ProcAct::Call(_) => None,
        },
        call: match &t.act {
            ProcAct::Call(i) => Some(m.procedures[*i].name.clone()),
            ProcAct::Act(_) => None,
        },
    };
    let raw = RawModel {
        schema_version: 1,
        channels: m.channels.clone(),
        messages: m.messages.clone(),
        variables: m
            .variables
            .iter()
            .map(|v| RawVar {
                name: v.name.clone(),
                init: v.init.to_i64().expect("variable initial values fit in i64"),
            })
            .collect(),
        processes: m
            .processes
            .iter()
            .map(|p| RawProcess {
                name: p.name.clone(),
                initial: p.states[p.initial].clone(),
                states: p.states.clone(),
                transitions: p.transitions.iter().map(|t| raw_transition(t, &p.states)).collect(),
            })
            .collect(),
        procedures: m
            .procedures
            .iter()
            .map(|p| RawProcedure {
                name: p.name.clone(),
                entry: p.nodes[p.entry].clone(),
                exit: p.nodes[p.exit].clone(),
                nodes: p.nodes.clone(),
                edges: p.edges.iter().map(|t| raw_transition(t, &p.nodes)).collect(),
            })
            .collect(),
        assertions: m
            .assertions
            .iter()
            .map(|a| RawAssertion {
                process: m.processes[a.process].name.clone(),
                state: m.processes[a.process].states[a.state].clone(),
                expr: a.text.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("model serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Validation.
// ---------------------------------------------------------------------------

fn collect_pairs(m: &Model) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
    let mut sent = BTreeSet::new();
    let mut received = BTreeSet::new();
    let mut visit = |a: &Action| {
        for atom in a.atoms() {
            match atom {
                Action::Send(c, msg) => {
                    sent.insert((*c, *msg));
                }
                Action::Receive(c, msg) => {
                    received.insert((*c, *msg));
                }
                _ => {}
            }
        }
    };
    for p in &m.processes {
        for t in &p.transitions {
            if let ProcAct::Act(a) = &t.act {
                visit(a);
            }
        }
    }
    for p in &m.procedures {
        for t in &p.edges {
            if let ProcAct::Act(a) = &t.act {
                visit(a);
            }
        }
    }
    (sent, received)
}

fn body_has_cycle(p: &Procedure) -> bool {
    // Call edges count as plain from->to edges here; recursion through the
    // callee's own graph is permitted, a cycle in the body is not.
    let n = p.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for t in &p.edges {
        adj[t.from].push(t.to);
    }
    let mut state = vec![0u8; n]; // 0 unvisited, 1 on stack, 2 done
    fn dfs(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
        state[v] = 1;
        for &w in &adj[v] {
            if state[w] == 1 || (state[w] == 0 && dfs(w, adj, state)) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    (0..n).any(|v| state[v] == 0 && dfs(v, &adj, &mut state))
}

/// Checks the structural assumptions the engines rely on. Each diagnostic
/// names the violated assumption and lists the engines it disables; `fatal`
/// diagnostics disable everything.
pub fn validate(m: &Model) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    if m.processes.is_empty() {
        diags.push(Diagnostic::fatal("empty-model", "model declares no processes".to_string()));
    }

    let (sent, received) = collect_pairs(m);
    for (c, msg) in received.difference(&sent) {
        diags.push(Diagnostic::fatal(
            "receive-without-send",
            format!(
                "pair ({}, {}) is received but never sent; every received (channel, message) pair must be sent somewhere",
                m.channels[*c], m.messages[*msg]
            ),
        ));
    }

    // Procedure ownership: call transitions may appear in at most one
    // process, and procedure support is limited to single-process models.
    let callers: Vec<usize> = m
        .processes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.transitions.iter().any(|t| matches!(t.act, ProcAct::Call(_))))
        .map(|(i, _)| i)
        .collect();
    if callers.len() > 1 {
        diags.push(Diagnostic::fatal(
            "multiple-procedure-owners",
            "procedures are restricted to a single designated process, but more than one process performs calls"
                .to_string(),
        ));
    }
    let uses_procedures = !m.procedures.is_empty() || !callers.is_empty();
    if uses_procedures && m.processes.len() > 1 {
        diags.push(Diagnostic::fatal(
            "procedures-multi-process",
            "procedure support requires a single-process model; move the other processes out or inline the procedures"
                .to_string(),
        ));
    }
    if uses_procedures {
        diags.push(Diagnostic {
            code: "procedures-present".to_string(),
            message: "forward engine unsupported: procedures present (jop likewise); use the backward engine"
                .to_string(),
            disables: vec![EngineKind::Forward, EngineKind::Jop],
            fatal: false,
        });
    }

    for p in &m.procedures {
        for t in &p.edges {
            if let ProcAct::Act(a) = &t.act {
                for atom in a.atoms() {
                    if matches!(atom, Action::Receive(..)) {
                        diags.push(Diagnostic::fatal(
                            "receive-in-procedure",
                            format!(
                                "procedure `{}` contains a receive on edge {} -> {}; procedures must be receive-free",
                                p.name, p.nodes[t.from], p.nodes[t.to]
                            ),
                        ));
                    }
                }
            }
        }
        if body_has_cycle(p) {
            diags.push(Diagnostic::fatal(
                "loop-in-procedure",
                format!("procedure `{}` has a cyclic body; procedure bodies must be loop-free (recursion through calls is fine)", p.name),
            ));
        }
        let mut body_in = vec![0usize; p.nodes.len()];
        let mut body_out = vec![0usize; p.nodes.len()];
        for t in &p.edges {
            body_out[t.from] += 1;
            body_in[t.to] += 1;
        }
        if body_in[p.entry] > 0 {
            diags.push(Diagnostic::fatal(
                "edge-into-entry",
                format!("procedure `{}` has body edges into its entry node; entries are reached only by calls", p.name),
            ));
        }
        if body_out[p.exit] > 0 {
            diags.push(Diagnostic::fatal(
                "edge-out-of-exit",
                format!("procedure `{}` has body edges out of its exit node; exits lead only back to call sites", p.name),
            ));
        }
    }

    // Call sites need a dedicated call node and return node so that the
    // backward engine's case analysis on node roles stays unambiguous.
    let check_call_shape = |diags: &mut Vec<Diagnostic>,
                            owner: &str,
                            names: &[String],
                            transitions: &[Transition]| {
        let n = names.len();
        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        for t in transitions {
            outdeg[t.from] += 1;
            indeg[t.to] += 1;
        }
        for t in transitions {
            if matches!(t.act, ProcAct::Call(_)) {
                if outdeg[t.from] != 1 {
                    diags.push(Diagnostic::fatal(
                        "call-site-shape",
                        format!(
                            "{owner}: call node `{}` must have the call as its only outgoing transition",
                            names[t.from]
                        ),
                    ));
                }
                if indeg[t.to] != 1 {
                    diags.push(Diagnostic::fatal(
                        "return-site-shape",
                        format!(
                            "{owner}: return node `{}` must have the call as its only incoming transition",
                            names[t.to]
                        ),
                    ));
                }
            }
        }
    };
    for p in &m.processes {
        check_call_shape(&mut diags, &format!("process `{}`", p.name), &p.states, &p.transitions);
    }
    for p in &m.procedures {
        check_call_shape(&mut diags, &format!("procedure `{}`", p.name), &p.nodes, &p.edges);
    }

    // Node names must stay globally unique once procedure nodes join the
    // graph next to product states.
    if uses_procedures {
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for p in &m.processes {
            for s in &p.states {
                seen.insert(s.clone(), format!("process `{}`", p.name));
            }
        }
        for p in &m.procedures {
            for nname in &p.nodes {
                if let Some(other) = seen.get(nname) {
                    diags.push(Diagnostic::fatal(
                        "node-name-clash",
                        format!(
                            "node `{nname}` of procedure `{}` collides with a name in {other}; names must be unique across the graph",
                            p.name
                        ),
                    ));
                }
                seen.insert(nname.clone(), format!("procedure `{}`", p.name));
            }
        }
    }

    diags
}

/// The (channel, message) counter table of a model: every pair that appears
/// in a send action, sorted lexicographically by channel then message name.
pub fn counter_table(m: &Model) -> Vec<(usize, usize)> {
    let (sent, _) = collect_pairs(m);
    let mut v: Vec<(usize, usize)> = sent.into_iter().collect();
    v.sort_by(|a, b| {
        (m.channels[a.0].as_str(), m.messages[a.1].as_str())
            .cmp(&(m.channels[b.0].as_str(), m.messages[b.1].as_str()))
    });
    v
}
