//! Graded modal formulas (with the counting global modality) and the
//! schemata of GMSC bodies, which additionally mention head predicates.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::graph::{LabelSet, LabeledGraph, PointedGraph};

/// Core syntax. Sugar (or, implies, iff, bot, box, exact counts) is expanded
/// by the constructors below, so measures always see this grammar.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Top,
    Prop(String),
    Var(String),
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Dia(u32, Arc<Formula>),
    Glob(u32, Arc<Formula>),
}

use Formula::*;

pub fn top() -> Formula {
    Top
}

pub fn bot() -> Formula {
    not(Top)
}

pub fn prop(p: &str) -> Formula {
    Prop(p.to_string())
}

pub fn var(x: &str) -> Formula {
    Var(x.to_string())
}

pub fn not(f: Formula) -> Formula {
    Not(Arc::new(f))
}

pub fn and(a: Formula, b: Formula) -> Formula {
    And(Arc::new(a), Arc::new(b))
}

pub fn or(a: Formula, b: Formula) -> Formula {
    not(and(not(a), not(b)))
}

pub fn implies(a: Formula, b: Formula) -> Formula {
    not(and(a, not(b)))
}

pub fn iff(a: Formula, b: Formula) -> Formula {
    and(implies(a.clone(), b.clone()), implies(b, a))
}

pub fn dia(k: u32, f: Formula) -> Formula {
    Dia(k, Arc::new(f))
}

pub fn glob(k: u32, f: Formula) -> Formula {
    Glob(k, Arc::new(f))
}

pub fn boxed(f: Formula) -> Formula {
    not(dia(1, not(f)))
}

/// Exactly k out-neighbours satisfy f.
pub fn dia_eq(k: u32, f: Formula) -> Formula {
    if k == 0 {
        return not(dia(1, f));
    }
    and(dia(k, f.clone()), not(dia(k + 1, f)))
}

/// Exactly k nodes of the graph satisfy f.
pub fn glob_eq(k: u32, f: Formula) -> Formula {
    if k == 0 {
        return not(glob(1, f));
    }
    and(glob(k, f.clone()), not(glob(k + 1, f)))
}

fn balanced(items: Vec<Formula>, join: fn(Formula, Formula) -> Formula) -> Formula {
    let mut level = items;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => join(a, b),
                None => a,
            });
        }
        level = next;
    }
    level.pop().expect("non-empty")
}

/// Conjunction of all items as a balanced tree; the empty conjunction is
/// top.
pub fn and_all(items: impl IntoIterator<Item = Formula>) -> Formula {
    let items: Vec<Formula> = items.into_iter().collect();
    if items.is_empty() {
        return Top;
    }
    balanced(items, and)
}

/// Disjunction of all items as a balanced tree; the empty disjunction is
/// bot.
pub fn or_all(items: impl IntoIterator<Item = Formula>) -> Formula {
    let items: Vec<Formula> = items.into_iter().collect();
    if items.is_empty() {
        return bot();
    }
    balanced(items, or)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measures {
    pub modal_depth: u32,
    pub width: u32,
    pub formula_depth: u32,
}

impl Formula {
    pub fn modal_depth(&self) -> u32 {
        match self {
            Top | Prop(_) | Var(_) => 0,
            Not(f) => f.modal_depth(),
            And(a, b) => a.modal_depth().max(b.modal_depth()),
            Dia(_, f) | Glob(_, f) => 1 + f.modal_depth(),
        }
    }

    pub fn width(&self) -> u32 {
        match self {
            Top | Prop(_) | Var(_) => 0,
            Not(f) => f.width(),
            And(a, b) => a.width().max(b.width()),
            Dia(k, f) | Glob(k, f) => (*k).max(f.width()),
        }
    }

    pub fn formula_depth(&self) -> u32 {
        match self {
            Top | Prop(_) | Var(_) => 0,
            Not(f) | Dia(_, f) | Glob(_, f) => 1 + f.formula_depth(),
            And(a, b) => 1 + a.formula_depth().max(b.formula_depth()),
        }
    }

    pub fn measures(&self) -> Measures {
        Measures {
            modal_depth: self.modal_depth(),
            width: self.width(),
            formula_depth: self.formula_depth(),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Top | Prop(_) | Var(_) => 1,
            Not(f) | Dia(_, f) | Glob(_, f) => 1 + f.size(),
            And(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn has_glob(&self) -> bool {
        match self {
            Top | Prop(_) | Var(_) => false,
            Glob(..) => true,
            Not(f) | Dia(_, f) => f.has_glob(),
            And(a, b) => a.has_glob() || b.has_glob(),
        }
    }

    pub fn props(&self, out: &mut BTreeSet<String>) {
        match self {
            Prop(p) => {
                out.insert(p.clone());
            }
            Top | Var(_) => {}
            Not(f) | Dia(_, f) | Glob(_, f) => f.props(out),
            And(a, b) => {
                a.props(out);
                b.props(out)
            }
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Var(x) => {
                out.insert(x.clone());
            }
            Top | Prop(_) => {}
            Not(f) | Dia(_, f) | Glob(_, f) => f.vars(out),
            And(a, b) => {
                a.vars(out);
                b.vars(out)
            }
        }
    }

    pub fn is_gml(&self) -> bool {
        let mut v = BTreeSet::new();
        self.vars(&mut v);
        v.is_empty()
    }

    /// Replaces every head predicate by the formula `f` assigns to it.
    pub fn substitute(&self, f: &impl Fn(&str) -> Formula) -> Formula {
        match self {
            Var(x) => f(x),
            Top | Prop(_) => self.clone(),
            Not(a) => not(a.substitute(f)),
            And(a, b) => and(a.substitute(f), b.substitute(f)),
            Dia(k, a) => dia(*k, a.substitute(f)),
            Glob(k, a) => glob(*k, a.substitute(f)),
        }
    }

    pub fn parse(text: &str) -> Result<Formula> {
        let mut p = Parser::new(text)?;
        let f = p.formula()?;
        p.expect_end()?;
        Ok(f)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Top => f.write_str("top"),
            Prop(p) | Var(p) => f.write_str(p),
            Not(a) => write!(f, "!{a}"),
            And(a, b) => write!(f, "({a} & {b})"),
            Dia(k, a) => write!(f, "<{k}> {a}"),
            Glob(k, a) => write!(f, "<e {k}> {a}"),
        }
    }
}

/// Truth of a variable-free formula at the point.
pub fn eval_gml(pg: &PointedGraph, phi: &Formula) -> Result<bool> {
    Ok(eval_all(&pg.graph, phi)?[pg.point])
}

/// Truth of a variable-free formula at every node.
pub fn eval_all(g: &LabeledGraph, phi: &Formula) -> Result<Vec<bool>> {
    if !phi.is_gml() {
        return Err(Error::Invalid(format!("formula mentions head predicates: {phi}")));
    }
    let mut props = BTreeSet::new();
    phi.props(&mut props);
    for p in &props {
        if !g.pi().contains(p) {
            return Err(Error::UndeclaredProp(p.clone()));
        }
    }
    let mut c = Circuit::new(g.pi().to_vec(), Vec::new());
    let out = c.add(phi)?;
    let labels: Vec<LabelSet> = (0..g.len()).map(|v| g.labels(v)).collect();
    let vals = c.eval(g, &labels, &|_, _| false);
    Ok(vals.column(out).to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Nat(u32),
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Arrow,
    DArrow,
    Lt,
    Gt,
    Eq,
    BoxOp,
    Turnstile,
    Semi,
    Colon,
    Comma,
}

pub(crate) fn lex(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |i: usize, msg: &str| Error::Parse(format!("{msg} at offset {i}"));
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            _ if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            '!' => {
                out.push(Tok::Bang);
                i += 1
            }
            '&' => {
                out.push(Tok::Amp);
                i += 1
            }
            '|' => {
                out.push(Tok::Pipe);
                i += 1
            }
            '>' => {
                out.push(Tok::Gt);
                i += 1
            }
            '=' => {
                out.push(Tok::Eq);
                i += 1
            }
            ';' => {
                out.push(Tok::Semi);
                i += 1
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1
            }
            '-' if next == Some('>') => {
                out.push(Tok::Arrow);
                i += 2
            }
            '<' if next == Some('-') && chars.get(i + 2) == Some(&'>') => {
                out.push(Tok::DArrow);
                i += 3
            }
            '<' => {
                out.push(Tok::Lt);
                i += 1
            }
            '[' if next == Some(']') => {
                out.push(Tok::BoxOp);
                i += 2
            }
            ':' if next == Some('-') => {
                out.push(Tok::Turnstile);
                i += 2
            }
            ':' => {
                out.push(Tok::Colon);
                i += 1
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(Tok::Nat(s.parse().map_err(|_| err(start, "number too large"))?));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(err(i, &format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

pub(crate) fn is_head_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    pub(crate) fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    pub(crate) fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn expect(&mut self, t: Tok) -> Result<()> {
        match self.bump() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(Error::Parse(format!("expected {t:?}, found {got:?}"))),
        }
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(Error::Parse(format!("trailing input at {:?}", self.peek())))
        }
    }

    fn nat(&mut self) -> Result<u32> {
        match self.bump() {
            Some(Tok::Nat(k)) => Ok(k),
            got => Err(Error::Parse(format!("expected a number, found {got:?}"))),
        }
    }

    pub(crate) fn formula(&mut self) -> Result<Formula> {
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(match s.as_str() {
                "top" => Top,
                "bot" => bot(),
                _ if is_head_name(&s) => Var(s),
                _ => Prop(s),
            }),
            Some(Tok::Bang) => Ok(not(self.formula()?)),
            Some(Tok::BoxOp) => Ok(boxed(self.formula()?)),
            Some(Tok::Lt) => {
                let global = matches!(self.peek(), Some(Tok::Ident(e)) if e == "e");
                if global {
                    self.bump();
                }
                let exact = self.peek() == Some(&Tok::Eq);
                if exact {
                    self.bump();
                }
                let k = self.nat()?;
                self.expect(Tok::Gt)?;
                let body = self.formula()?;
                Ok(match (global, exact) {
                    (false, false) => dia(k, body),
                    (false, true) => dia_eq(k, body),
                    (true, false) => glob(k, body),
                    (true, true) => glob_eq(k, body),
                })
            }
            Some(Tok::LParen) => {
                let first = self.formula()?;
                let mut acc = first;
                loop {
                    match self.bump() {
                        Some(Tok::RParen) => return Ok(acc),
                        Some(Tok::Amp) => acc = and(acc, self.formula()?),
                        Some(Tok::Pipe) => acc = or(acc, self.formula()?),
                        Some(Tok::Arrow) => acc = implies(acc, self.formula()?),
                        Some(Tok::DArrow) => acc = iff(acc, self.formula()?),
                        got => {
                            return Err(Error::Parse(format!(
                                "expected a connective or `)`, found {got:?}"
                            )))
                        }
                    }
                }
            }
            got => Err(Error::Parse(format!("expected a formula, found {got:?}"))),
        }
    }
}

/// Collects the distinct subformulas in post-order (children first), each once.
pub fn subformulas(roots: &[&Formula]) -> Vec<Formula> {
    fn walk(f: &Formula, seen: &mut HashMap<Formula, ()>, out: &mut Vec<Formula>) {
        if seen.contains_key(f) {
            return;
        }
        match f {
            Top | Prop(_) | Var(_) => {}
            Not(a) | Dia(_, a) | Glob(_, a) => walk(a, seen, out),
            And(a, b) => {
                walk(a, seen, out);
                walk(b, seen, out)
            }
        }
        seen.insert(f.clone(), ());
        out.push(f.clone());
    }
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for r in roots {
        walk(r, &mut seen, &mut out);
    }
    out
}
