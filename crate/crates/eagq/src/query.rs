//! Query graphs: triple patterns over typed entity variables, value
//! variables, wildcards, and constants, with a designated focus node,
//! plus a textual form with a parser and canonical printer.
//!
//! Syntax: `ask <focus> { (<term>, <predicate>, <term>) ... }` where
//! terms are `?name:type` (entity variable), `?name*` (value
//! variable), `_:type@k` (anonymous wildcard k), `"label"`, or a
//! number with optional `px`/`m` suffix. The focus is a variable,
//! `min(?x)`, or `num(?x)`, optionally preceded by `exists` or `label`
//! to ask for a Boolean or a single label instead of the binding set.
//! `#` starts a line comment.

use crate::eag::{EntityType, Quantity, Unit, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid query: {0}")]
    Validation(String),
    #[error("query graph is not connected: {0}")]
    Connectivity(String),
    #[error("unsupported function \"{0}\" (supported: min, num)")]
    UnsupportedFunction(String),
    #[error("unknown template \"{0}\" (expected Q1 through Q7)")]
    UnknownTemplate(String),
}

fn invalid(msg: impl Into<String>) -> QueryError {
    QueryError::Validation(msg.into())
}

/// A term of a query triple.
///
/// Entity variables may omit the type on any given occurrence in the
/// textual form; validation resolves one type per name and rewrites
/// every occurrence to carry it. `FuncApp` is representable but only
/// accepted in focus position, with `min` or `num`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    EntityVar {
        name: String,
        etype: Option<EntityType>,
    },
    ValueVar {
        name: String,
    },
    Wildcard {
        etype: EntityType,
        index: u32,
    },
    Const(Value),
    FuncApp {
        func: String,
        arg: Box<Term>,
    },
}

impl Term {
    pub fn entity_var(name: impl Into<String>, etype: EntityType) -> Self {
        Term::EntityVar {
            name: name.into(),
            etype: Some(etype),
        }
    }

    pub fn value_var(name: impl Into<String>) -> Self {
        Term::ValueVar { name: name.into() }
    }

    pub fn wildcard(etype: EntityType, index: u32) -> Self {
        Term::Wildcard { etype, index }
    }

    pub fn label(s: impl Into<String>) -> Self {
        Term::Const(Value::label(s))
    }

    /// The canonical node key: terms with equal keys denote one node.
    pub fn node_key(&self) -> String {
        match self {
            Term::EntityVar { name, .. } => format!("?{name}"),
            Term::ValueVar { name } => format!("?{name}*"),
            Term::Wildcard { etype, index } => format!("_:{etype}@{index}"),
            Term::Const(v) => render_const(v),
            Term::FuncApp { arg, .. } => arg.node_key(),
        }
    }

    /// The variable name, for named variables.
    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::EntityVar { name, .. } | Term::ValueVar { name } => Some(name),
            _ => None,
        }
    }

}

fn render_const(v: &Value) -> String {
    match v {
        Value::Label(s) => format!("\"{s}\""),
        Value::Number(q) => match q.unit() {
            Unit::Pixels => format!("{}", q.value()),
            Unit::Meters => format!("{}m", q.value()),
        },
    }
}

fn render_term(t: &Term) -> String {
    match t {
        Term::EntityVar { name, etype } => match etype {
            Some(e) => format!("?{name}:{e}"),
            None => format!("?{name}"),
        },
        Term::ValueVar { name } => format!("?{name}*"),
        Term::Wildcard { etype, index } => format!("_:{etype}@{index}"),
        Term::Const(v) => render_const(v),
        Term::FuncApp { func, arg } => format!("{func}({})", render_focus_var(arg)),
    }
}

/// Focus variables print bare: the kind and type are recovered from
/// the triples.
fn render_focus_var(t: &Term) -> String {
    match t {
        Term::EntityVar { name, .. } => format!("?{name}"),
        Term::ValueVar { name } => format!("?{name}*"),
        other => render_term(other),
    }
}

/// One triple pattern. Subjects are entity-like (entity variable or
/// wildcard); objects may be any non-function term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueryTriple {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
}

impl QueryTriple {
    pub fn new(subject: Term, predicate: impl Into<String>, object: Term) -> Self {
        QueryTriple {
            subject,
            predicate: predicate.into(),
            object,
        }
    }
}

/// The shape of the answer a query produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    EntitySet,
    ValueSet,
    Count,
    Boolean,
    Label,
}

impl fmt::Display for AnswerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnswerKind::EntitySet => "entity_set",
            AnswerKind::ValueSet => "value_set",
            AnswerKind::Count => "count",
            AnswerKind::Boolean => "boolean",
            AnswerKind::Label => "label",
        };
        f.write_str(s)
    }
}

/// Focus modifiers: `exists` turns the answer into a Boolean, `label`
/// into a single label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modifier {
    Exists,
    Label,
}

/// A validated query graph: a connected set of triple patterns with a
/// single focus. Construction canonicalizes: entity-variable types are
/// resolved and attached to every occurrence, triples are deduplicated
/// and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    triples: Vec<QueryTriple>,
    focus: Term,
    modifier: Option<Modifier>,
    answer_kind: AnswerKind,
}

impl QueryGraph {
    pub fn new(
        focus: Term,
        modifier: Option<Modifier>,
        triples: Vec<QueryTriple>,
    ) -> Result<Self, QueryError> {
        if triples.is_empty() {
            return Err(invalid("a query needs at least one triple"));
        }

        // Resolve one entity type per variable name, and reject names
        // used both as entity and value variables.
        let mut etypes: BTreeMap<String, EntityType> = BTreeMap::new();
        let mut value_vars: BTreeSet<String> = BTreeSet::new();
        let mut entity_vars: BTreeSet<String> = BTreeSet::new();
        let mut note = |term: &Term| -> Result<(), QueryError> {
            match term {
                Term::EntityVar { name, etype } => {
                    check_name(name)?;
                    entity_vars.insert(name.clone());
                    if let Some(e) = etype {
                        match etypes.get(name) {
                            Some(prev) if prev != e => {
                                return Err(invalid(format!(
                                    "variable ?{name} declared both as {prev} and {e}"
                                )))
                            }
                            _ => {
                                etypes.insert(name.clone(), *e);
                            }
                        }
                    }
                }
                Term::ValueVar { name } => {
                    check_name(name)?;
                    value_vars.insert(name.clone());
                }
                Term::Wildcard { .. } => {}
                Term::Const(v) => {
                    if let Value::Label(s) = v {
                        if s.is_empty() || s.contains(['"', '\n']) {
                            return Err(invalid(
                                "string literals must be nonempty without quotes or newlines",
                            ));
                        }
                    }
                }
                Term::FuncApp { .. } => {
                    return Err(invalid("functions are only allowed in focus position"))
                }
            }
            Ok(())
        };
        for t in &triples {
            if matches!(t.subject, Term::Const(_) | Term::ValueVar { .. }) {
                return Err(invalid(format!(
                    "triple subject {} must be an entity variable or wildcard",
                    render_term(&t.subject)
                )));
            }
            if t.predicate.is_empty()
                || !t.predicate.chars().next().unwrap().is_ascii_alphabetic()
                || !t.predicate.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(invalid(format!("bad predicate \"{}\"", t.predicate)));
            }
            note(&t.subject)?;
            note(&t.object)?;
        }
        if let Some(clash) = entity_vars.intersection(&value_vars).next() {
            return Err(invalid(format!(
                "variable ?{clash} used both as an entity and a value variable"
            )));
        }
        for name in &entity_vars {
            if !etypes.contains_key(name) {
                return Err(invalid(format!(
                    "entity variable ?{name} never declares a type"
                )));
            }
        }

        // Canonical form: every entity-variable occurrence carries its
        // resolved type.
        let attach = |term: Term| -> Term {
            match term {
                Term::EntityVar { name, .. } => {
                    let etype = Some(etypes[&name]);
                    Term::EntityVar { name, etype }
                }
                other => other,
            }
        };
        let mut triples: Vec<QueryTriple> = triples
            .into_iter()
            .map(|t| QueryTriple {
                subject: attach(t.subject),
                predicate: t.predicate,
                object: attach(t.object),
            })
            .collect();
        triples.sort_by(|a, b| {
            let ka = (render_term(&a.subject), &a.predicate, render_term(&a.object));
            let kb = (render_term(&b.subject), &b.predicate, render_term(&b.object));
            ka.cmp(&kb)
        });
        triples.dedup();

        // Resolve the focus: a named variable occurring in the
        // triples, or min/num over an entity variable.
        let focus = match focus {
            Term::EntityVar { name, etype } => {
                let resolved = match etypes.get(&name) {
                    Some(e) => *e,
                    None if value_vars.contains(&name) => {
                        // A bare `?name` focus naming a value variable.
                        let focus = Term::ValueVar { name };
                        return QueryGraph::finish(triples, focus, modifier);
                    }
                    None => {
                        return Err(invalid(format!(
                            "focus ?{name} does not appear in any triple"
                        )))
                    }
                };
                if let Some(stated) = etype {
                    if stated != resolved {
                        return Err(invalid(format!(
                            "variable ?{name} declared both as {resolved} and {stated}"
                        )));
                    }
                }
                Term::EntityVar {
                    name,
                    etype: Some(resolved),
                }
            }
            Term::ValueVar { name } => {
                if !value_vars.contains(&name) {
                    return Err(invalid(format!(
                        "focus ?{name}* does not appear in any triple"
                    )));
                }
                Term::ValueVar { name }
            }
            Term::FuncApp { func, arg } => {
                let func_name = match func.as_str() {
                    "min" | "num" => func,
                    other => return Err(QueryError::UnsupportedFunction(other.to_string())),
                };
                let arg = match *arg {
                    Term::EntityVar { name, etype } => {
                        let resolved = etypes.get(&name).copied().ok_or_else(|| {
                            invalid(format!(
                                "function argument ?{name} does not appear in any triple as an entity variable"
                            ))
                        })?;
                        if let Some(stated) = etype {
                            if stated != resolved {
                                return Err(invalid(format!(
                                    "variable ?{name} declared both as {resolved} and {stated}"
                                )));
                            }
                        }
                        Term::EntityVar {
                            name,
                            etype: Some(resolved),
                        }
                    }
                    other => {
                        return Err(invalid(format!(
                            "{func_name}() takes an entity variable, got {}",
                            render_term(&other)
                        )))
                    }
                };
                if func_name == "min" {
                    // min ranges over the weights of the argument's
                    // distance edges; require exactly one anchor so the
                    // minimized quantity is unambiguous.
                    let anchors = triples
                        .iter()
                        .filter(|t| {
                            t.predicate == crate::eag::predicates::DISTANCE
                                && t.subject.node_key() == arg.node_key()
                        })
                        .count();
                    if anchors != 1 {
                        return Err(invalid(format!(
                            "min({}) must anchor exactly one distance triple, found {anchors}",
                            render_focus_var(&arg)
                        )));
                    }
                }
                Term::FuncApp {
                    func: func_name,
                    arg: Box::new(arg),
                }
            }
            other => {
                return Err(invalid(format!(
                    "focus must be a variable or function, got {}",
                    render_term(&other)
                )))
            }
        };

        QueryGraph::finish(triples, focus, modifier)
    }

    fn finish(
        triples: Vec<QueryTriple>,
        focus: Term,
        modifier: Option<Modifier>,
    ) -> Result<Self, QueryError> {
        // Connectivity over node keys: every triple links subject and
        // object; shared constants connect components too.
        let mut adjacency: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in &triples {
            let s = t.subject.node_key();
            let o = t.object.node_key();
            adjacency.entry(s.clone()).or_default().push(o.clone());
            adjacency.entry(o).or_default().push(s);
        }
        let start = focus.node_key();
        if !adjacency.contains_key(&start) {
            return Err(invalid(format!(
                "focus {} does not appear in any triple",
                render_focus_var(&focus)
            )));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            if seen.insert(node.clone()) {
                for next in &adjacency[&node] {
                    if !seen.contains(next) {
                        stack.push(next.clone());
                    }
                }
            }
        }
        if seen.len() != adjacency.len() {
            let stranded: Vec<String> = adjacency
                .keys()
                .filter(|k| !seen.contains(*k))
                .cloned()
                .collect();
            return Err(QueryError::Connectivity(format!(
                "no undirected path from the focus to {}",
                stranded.join(", ")
            )));
        }

        let answer_kind = match (&modifier, &focus) {
            (Some(_), Term::FuncApp { .. }) => {
                return Err(invalid("exists/label cannot combine with a function focus"))
            }
            (Some(Modifier::Exists), _) => AnswerKind::Boolean,
            (Some(Modifier::Label), Term::ValueVar { .. }) => AnswerKind::Label,
            (Some(Modifier::Label), _) => {
                return Err(invalid("label requires a value-variable focus"))
            }
            (None, Term::FuncApp { func, .. }) if func == "num" => AnswerKind::Count,
            (None, Term::FuncApp { .. }) => AnswerKind::EntitySet,
            (None, Term::ValueVar { .. }) => AnswerKind::ValueSet,
            (None, _) => AnswerKind::EntitySet,
        };

        Ok(QueryGraph {
            triples,
            focus,
            modifier,
            answer_kind,
        })
    }

    pub fn triples(&self) -> &[QueryTriple] {
        &self.triples
    }

    pub fn focus(&self) -> &Term {
        &self.focus
    }

    pub fn answer_kind(&self) -> AnswerKind {
        self.answer_kind
    }

    /// The focus variable's node key (the function argument's, for a
    /// function focus).
    pub fn focus_key(&self) -> String {
        self.focus.node_key()
    }

    /// The distinct node keys of the graph, in sorted order.
    pub fn node_keys(&self) -> BTreeSet<String> {
        let mut keys = BTreeSet::new();
        for t in &self.triples {
            keys.insert(t.subject.node_key());
            keys.insert(t.object.node_key());
        }
        keys
    }
}

fn check_name(name: &str) -> Result<(), QueryError> {
    let mut chars = name.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("bad variable name \"{name}\"")))
    }
}

// ---------------------------------------------------------------------------
// Printer.

/// Renders the canonical text of a query: focus on the `ask` line,
/// one sorted triple per line, two-space indent, trailing newline.
/// The canonical text re-parses to an equal graph, and printing is
/// idempotent across a parse round trip.
pub fn print_query(q: &QueryGraph) -> String {
    let mut out = String::from("ask ");
    match q.modifier {
        Some(Modifier::Exists) => out.push_str("exists "),
        Some(Modifier::Label) => out.push_str("label "),
        None => {}
    }
    out.push_str(&render_term_for_focus(&q.focus));
    out.push_str(" {\n");
    for t in &q.triples {
        out.push_str(&format!(
            "  ({}, {}, {})\n",
            render_term(&t.subject),
            t.predicate,
            render_term(&t.object)
        ));
    }
    out.push_str("}\n");
    out
}

fn render_term_for_focus(t: &Term) -> String {
    match t {
        Term::FuncApp { func, arg } => format!("{func}({})", render_focus_var(arg)),
        other => render_focus_var(other),
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num { value: f64, suffix: Option<String> },
    Star,
    Underscore,
    Colon,
    At,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
}

struct Lexer<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

struct Located {
    tok: Tok,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        next
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn ident_from(&mut self, start: usize) -> String {
        let mut end = start + 1;
        while let Some((i, c)) = self.chars.peek().copied() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.bump();
                end = i + c.len_utf8();
            } else {
                break;
            }
        }
        self.src[start..end].to_string()
    }

    fn tokens(mut self) -> Result<Vec<Located>, QueryError> {
        let mut out = Vec::new();
        while let Some((i, c)) = self.chars.peek().copied() {
            let (line, column) = (self.line, self.column);
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '#' => {
                    while let Some((_, c)) = self.chars.peek().copied() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '(' | ')' | '{' | '}' | ',' | ':' | '@' | '*' | '_' => {
                    self.bump();
                    let tok = match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        ':' => Tok::Colon,
                        '@' => Tok::At,
                        '*' => Tok::Star,
                        _ => Tok::Underscore,
                    };
                    out.push(Located { tok, line, column });
                }
                '?' => {
                    self.bump();
                    let name = match self.chars.peek().copied() {
                        Some((j, c)) if c.is_ascii_alphabetic() => {
                            self.bump();
                            self.ident_from(j)
                        }
                        _ => return Err(self.err(line, column, "expected a variable name after '?'")),
                    };
                    out.push(Located {
                        tok: Tok::Var(name),
                        line,
                        column,
                    });
                }
                '"' => {
                    self.bump();
                    let start = i + 1;
                    let mut end = start;
                    let mut closed = false;
                    while let Some((j, c)) = self.chars.peek().copied() {
                        if c == '"' {
                            self.bump();
                            closed = true;
                            break;
                        }
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                        end = j + c.len_utf8();
                    }
                    if !closed {
                        return Err(self.err(line, column, "unterminated string literal"));
                    }
                    out.push(Located {
                        tok: Tok::Str(self.src[start..end].to_string()),
                        line,
                        column,
                    });
                }
                c if c.is_ascii_digit() || c == '-' => {
                    self.bump();
                    let start = i;
                    let mut end = i + 1;
                    let mut suffix_start = None;
                    while let Some((j, c)) = self.chars.peek().copied() {
                        if c.is_ascii_digit() || c == '.' {
                            self.bump();
                            end = j + 1;
                        } else if c.is_ascii_alphabetic() {
                            suffix_start = Some(j);
                            break;
                        } else {
                            break;
                        }
                    }
                    let value: f64 = self.src[start..end]
                        .parse()
                        .map_err(|_| self.err(line, column, format!("bad number \"{}\"", &self.src[start..end])))?;
                    let suffix = match suffix_start {
                        Some(j) => {
                            self.bump();
                            Some(self.ident_from(j))
                        }
                        None => None,
                    };
                    out.push(Located {
                        tok: Tok::Num { value, suffix },
                        line,
                        column,
                    });
                }
                c if c.is_ascii_alphabetic() => {
                    self.bump();
                    let name = self.ident_from(i);
                    out.push(Located {
                        tok: Tok::Ident(name),
                        line,
                        column,
                    });
                }
                other => return Err(self.err(line, column, format!("unexpected character '{other}'"))),
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Located>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn next(&mut self) -> Option<&Located> {
        let item = self.toks.get(self.pos);
        if item.is_some() {
            self.pos += 1;
        }
        item
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or_else(|| self.toks.last()) {
            Some(l) => (l.line, l.column),
            None => (1, 1),
        }
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        let (line, column) = self.here();
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), QueryError> {
        match self.next() {
            Some(l) if l.tok == want => Ok(()),
            Some(l) => Err(QueryError::Syntax {
                line: l.line,
                column: l.column,
                message: format!("expected {what}"),
            }),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn entity_type(&mut self) -> Result<EntityType, QueryError> {
        match self.next() {
            Some(Located {
                tok: Tok::Ident(name),
                line,
                column,
            }) => name.parse().map_err(|_| QueryError::Syntax {
                line: *line,
                column: *column,
                message: format!("unknown entity type \"{name}\""),
            }),
            _ => Err(self.err("expected an entity type")),
        }
    }

    /// term := ?name(:type)?(*)? | _:type@INT | STRING | NUMBER
    fn term(&mut self) -> Result<Term, QueryError> {
        match self.peek().cloned() {
            Some(Tok::Var(name)) => {
                self.next();
                let mut etype = None;
                if self.peek() == Some(&Tok::Colon) {
                    self.next();
                    etype = Some(self.entity_type()?);
                }
                if self.peek() == Some(&Tok::Star) {
                    self.next();
                    if etype.is_some() {
                        return Err(self.err("value variables cannot declare an entity type"));
                    }
                    return Ok(Term::ValueVar { name });
                }
                Ok(Term::EntityVar { name, etype })
            }
            Some(Tok::Underscore) => {
                self.next();
                self.expect(Tok::Colon, "':' after '_'")?;
                let etype = self.entity_type()?;
                self.expect(Tok::At, "'@' with a wildcard index")?;
                match self.next() {
                    Some(Located {
                        tok: Tok::Num { value, suffix: None },
                        line,
                        column,
                    }) if value.fract() == 0.0 && *value >= 0.0 && *value <= u32::MAX as f64 => {
                        let _ = (line, column);
                        Ok(Term::Wildcard {
                            etype,
                            index: *value as u32,
                        })
                    }
                    _ => Err(self.err("expected a nonnegative integer wildcard index")),
                }
            }
            Some(Tok::Str(s)) => {
                self.next();
                Ok(Term::Const(Value::Label(s)))
            }
            Some(Tok::Num { value, suffix }) => {
                self.next();
                let unit = match suffix.as_deref() {
                    None | Some("px") => Unit::Pixels,
                    Some("m") => Unit::Meters,
                    Some(other) => {
                        return Err(self.err(format!("unknown unit suffix \"{other}\"")))
                    }
                };
                let q = Quantity::new(value, unit)
                    .map_err(|_| self.err("non-finite number"))?;
                Ok(Term::Const(Value::Number(q)))
            }
            _ => Err(self.err("expected a term")),
        }
    }

    /// focus := term | IDENT "(" term ")"
    fn focus(&mut self) -> Result<Term, QueryError> {
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            self.next();
            self.expect(Tok::LParen, "'(' after a function name")?;
            let arg = self.term()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Term::FuncApp {
                func: name,
                arg: Box::new(arg),
            });
        }
        self.term()
    }

    fn triple(&mut self) -> Result<QueryTriple, QueryError> {
        self.expect(Tok::LParen, "'('")?;
        let subject = self.term()?;
        self.expect(Tok::Comma, "','")?;
        let predicate = match self.next() {
            Some(Located {
                tok: Tok::Ident(p), ..
            }) => p.clone(),
            _ => return Err(self.err("expected a predicate name")),
        };
        self.expect(Tok::Comma, "','")?;
        let object = self.term()?;
        self.expect(Tok::RParen, "')'")?;
        Ok(QueryTriple {
            subject,
            predicate,
            object,
        })
    }
}

/// Parses the textual form into a validated query graph.
pub fn parse_query(text: &str) -> Result<QueryGraph, QueryError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };

    match p.next() {
        Some(Located {
            tok: Tok::Ident(kw),
            ..
        }) if kw == "ask" => {}
        _ => return Err(p.err("expected 'ask'")),
    }

    let modifier = match p.peek() {
        Some(Tok::Ident(kw)) if kw == "exists" => {
            p.next();
            Some(Modifier::Exists)
        }
        Some(Tok::Ident(kw)) if kw == "label" => {
            p.next();
            Some(Modifier::Label)
        }
        _ => None,
    };

    let focus = p.focus()?;
    p.expect(Tok::LBrace, "'{'")?;
    let mut triples = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::RBrace) => {
                p.next();
                break;
            }
            Some(Tok::LParen) => triples.push(p.triple()?),
            _ => return Err(p.err("expected a triple or '}'")),
        }
    }
    if p.peek().is_some() {
        return Err(p.err("unexpected trailing input"));
    }
    QueryGraph::new(focus, modifier, triples)
}

// ---------------------------------------------------------------------------
// Built-in templates.

/// The seven built-in question templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Q1,
        TemplateId::Q2,
        TemplateId::Q3,
        TemplateId::Q4,
        TemplateId::Q5,
        TemplateId::Q6,
        TemplateId::Q7,
    ];
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for TemplateId {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "Q1" => Ok(TemplateId::Q1),
            "Q2" => Ok(TemplateId::Q2),
            "Q3" => Ok(TemplateId::Q3),
            "Q4" => Ok(TemplateId::Q4),
            "Q5" => Ok(TemplateId::Q5),
            "Q6" => Ok(TemplateId::Q6),
            "Q7" => Ok(TemplateId::Q7),
            other => Err(QueryError::UnknownTemplate(other.to_string())),
        }
    }
}

/// How a template is answered: plain valuation search, search plus
/// the goalkeeper team-assignment hook, or team-status inference with
/// no matching at all.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplatePlan {
    Match(QueryGraph),
    GoalkeeperTeam(QueryGraph),
    TeamStatusInference,
}

impl TemplatePlan {
    pub fn graph(&self) -> Option<&QueryGraph> {
        match self {
            TemplatePlan::Match(g) | TemplatePlan::GoalkeeperTeam(g) => Some(g),
            TemplatePlan::TeamStatusInference => None,
        }
    }
}

/// Builds the query plan of a built-in template.
///
/// Q1 names the player nearest the ball; Q2 collects referee uniform
/// colors; Q3 asks whether a referee exists; Q4 names the goalkeeper's
/// team color via the centroid hook; Q5 names the defending team by
/// direct inference; Q6 reads the field part; Q7 counts players.
pub fn template(id: TemplateId) -> TemplatePlan {
    use crate::eag::predicates as p;
    let person = |name: &str| Term::entity_var(name, EntityType::Person);
    let build = |focus, modifier, triples| {
        QueryGraph::new(focus, modifier, triples).expect("templates are valid by construction")
    };
    match id {
        TemplateId::Q1 => TemplatePlan::Match(build(
            Term::FuncApp {
                func: "min".into(),
                arg: Box::new(person("p")),
            },
            None,
            vec![
                QueryTriple::new(person("p"), p::ROLE, Term::label("player")),
                QueryTriple::new(
                    person("p"),
                    p::DISTANCE,
                    Term::wildcard(EntityType::Soccer, 1),
                ),
            ],
        )),
        TemplateId::Q2 => TemplatePlan::Match(build(
            Term::value_var("u"),
            None,
            vec![
                QueryTriple::new(person("p"), p::ROLE, Term::label("referee")),
                QueryTriple::new(person("p"), p::UNIFORM, Term::value_var("u")),
            ],
        )),
        TemplateId::Q3 => TemplatePlan::Match(build(
            person("p"),
            Some(Modifier::Exists),
            vec![QueryTriple::new(person("p"), p::ROLE, Term::label("referee"))],
        )),
        TemplateId::Q4 => TemplatePlan::GoalkeeperTeam(build(
            person("g"),
            None,
            vec![QueryTriple::new(
                person("g"),
                p::ROLE,
                Term::label("goalkeeper"),
            )],
        )),
        TemplateId::Q5 => TemplatePlan::TeamStatusInference,
        TemplateId::Q6 => TemplatePlan::Match(build(
            Term::value_var("f"),
            Some(Modifier::Label),
            vec![QueryTriple::new(
                Term::wildcard(EntityType::Field, 1),
                p::PART,
                Term::value_var("f"),
            )],
        )),
        TemplateId::Q7 => TemplatePlan::Match(build(
            Term::FuncApp {
                func: "num".into(),
                arg: Box::new(person("p")),
            },
            None,
            vec![QueryTriple::new(person("p"), p::ROLE, Term::label("player"))],
        )),
    }
}

#[cfg(test)]
pub(crate) mod strategies {
    use super::*;
    use proptest::prelude::*;

    fn arb_etype() -> impl Strategy<Value = EntityType> {
        prop_oneof![
            Just(EntityType::Person),
            Just(EntityType::Field),
            Just(EntityType::Soccer),
            Just(EntityType::Scene),
        ]
    }

    fn arb_const() -> impl Strategy<Value = Term> {
        prop_oneof![
            "[a-z]{1,6}".prop_map(Term::label),
            (0u32..2000).prop_map(|n| Term::Const(Value::Number(
                Quantity::pixels(n as f64).unwrap()
            ))),
            (0u32..200).prop_map(|n| Term::Const(Value::Number(
                Quantity::meters(n as f64 / 4.0).unwrap()
            ))),
        ]
    }

    /// A random valid query graph: a connected pattern built by always
    /// linking each new triple to an already-used subject node, then a
    /// random compatible focus.
    pub fn arb_query_graph() -> impl Strategy<Value = QueryGraph> {
        let parts = (
            1usize..5,
            proptest::collection::vec(arb_etype(), 4),
            proptest::collection::vec((0usize..4, 0usize..6, arb_const(), 0usize..3), 1..5),
            0usize..4,
            0usize..3,
        );
        parts.prop_filter_map(
            "focus/modifier combination must validate",
            |(nvars, types, raw, focus_pick, modifier_pick)| {
                let var_names = ["a", "b", "c", "d"];
                let predicates = ["role", "uniform", "status", "direction", "part", "distance"];
                let nvars = nvars.min(var_names.len());
                let mut triples = Vec::new();
                let mut value_var_used = false;
                for (i, (subj_idx, pred_idx, obj_const, obj_mode)) in raw.iter().enumerate() {
                    // Subject: cycle through declared vars, clamped so
                    // triple i can only use vars that earlier triples
                    // introduced (keeps the graph connected).
                    let max_var = (i + 1).min(nvars);
                    let s = subj_idx % max_var;
                    let subject = Term::entity_var(var_names[s], types[s]);
                    let predicate = predicates[pred_idx % predicates.len()];
                    let object = match obj_mode {
                        0 => obj_const.clone(),
                        1 => {
                            value_var_used = true;
                            Term::value_var("v")
                        }
                        _ => {
                            // Another variable or a wildcard.
                            let o = (subj_idx + 1) % max_var;
                            if o == s {
                                Term::wildcard(types[(s + 1) % 4], 1)
                            } else {
                                Term::entity_var(var_names[o], types[o])
                            }
                        }
                    };
                    triples.push(QueryTriple::new(subject, predicate, object));
                }
                let used_vars: Vec<&str> = var_names[..nvars]
                    .iter()
                    .copied()
                    .filter(|v| {
                        triples.iter().any(|t| {
                            t.subject.var_name() == Some(v) || t.object.var_name() == Some(v)
                        })
                    })
                    .collect();
                if used_vars.is_empty() {
                    return None;
                }
                let focus_var = used_vars[focus_pick % used_vars.len()];
                let (focus, modifier) = match modifier_pick {
                    0 if value_var_used && focus_pick % 2 == 0 => {
                        (Term::value_var("v"), None)
                    }
                    1 => (
                        Term::EntityVar {
                            name: focus_var.into(),
                            etype: None,
                        },
                        Some(Modifier::Exists),
                    ),
                    2 => (
                        Term::FuncApp {
                            func: "num".into(),
                            arg: Box::new(Term::EntityVar {
                                name: focus_var.into(),
                                etype: None,
                            }),
                        },
                        None,
                    ),
                    _ => (
                        Term::EntityVar {
                            name: focus_var.into(),
                            etype: None,
                        },
                        None,
                    ),
                };
                QueryGraph::new(focus, modifier, triples).ok()
            },
        )
    }
}
