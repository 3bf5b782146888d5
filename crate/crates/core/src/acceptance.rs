//! Run traces with exact cycle detection, and the classifiers evaluated on
//! them.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MachineKind {
    Program,
    Automaton,
    Gnn,
}

/// A synchronous machine over labeled graphs with finitely many states per
/// node.
pub trait Machine: Sync {
    type State: Clone + Eq + Hash + fmt::Debug + Send + Sync;

    fn kind(&self) -> MachineKind;
    fn alphabet(&self) -> &[String];
    fn start(&self, g: &LabeledGraph) -> Result<Vec<Self::State>>;
    fn next(&self, g: &LabeledGraph, cur: &[Self::State]) -> Result<Vec<Self::State>>;
    fn accepting(&self, s: &Self::State) -> bool;
}

/// Default ceiling on simulated rounds before a trace gives up.
pub const DEFAULT_CEILING: usize = 100_000;

/// Configurations c_0..c_{mu+lambda-1}; c_{mu+lambda} equals c_mu.
#[derive(Clone, Debug)]
pub struct RunTrace<S> {
    pub kind: MachineKind,
    pub configs: Vec<Vec<S>>,
    pub mu: usize,
    pub lambda: usize,
    pub flags: Vec<Vec<bool>>,
}

pub fn trace<M: Machine + ?Sized>(
    m: &M,
    g: &LabeledGraph,
    ceiling: usize,
) -> Result<RunTrace<M::State>> {
    // Configurations are stored once; the map only holds their hashes.
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut configs: Vec<Vec<M::State>> = Vec::new();
    let mut cur = m.start(g)?;
    loop {
        let h = {
            let mut hasher = DefaultHasher::new();
            cur.hash(&mut hasher);
            hasher.finish()
        };
        let hit = seen
            .get(&h)
            .and_then(|ix| ix.iter().copied().find(|&i| configs[i] == cur));
        if let Some(mu) = hit {
            let flags = configs
                .iter()
                .map(|c| c.iter().map(|s| m.accepting(s)).collect())
                .collect();
            return Ok(RunTrace {
                kind: m.kind(),
                lambda: configs.len() - mu,
                mu,
                configs,
                flags,
            });
        }
        if configs.len() >= ceiling {
            return Err(Error::Ceiling(ceiling));
        }
        seen.entry(h).or_default().push(configs.len());
        let next = m.next(g, &cur)?;
        configs.push(cur);
        cur = next;
    }
}

/// Runs exactly `rounds` rounds, returning c_0..c_rounds.
pub fn run<M: Machine + ?Sized>(
    m: &M,
    g: &LabeledGraph,
    rounds: usize,
) -> Result<Vec<Vec<M::State>>> {
    let mut out = vec![m.start(g)?];
    for _ in 0..rounds {
        let next = m.next(g, out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

impl<S> RunTrace<S> {
    /// Round index inside the stored prefix that round `r` coincides with.
    pub fn fold_round(&self, r: usize) -> usize {
        if r < self.mu + self.lambda {
            r
        } else {
            self.mu + (r - self.mu) % self.lambda
        }
    }

    pub fn flag(&self, v: usize, r: usize) -> bool {
        self.flags[self.fold_round(r)][v]
    }

    pub fn classify(&self, v: usize, c: &Classifier, size: usize) -> Result<bool> {
        if self.flags.first().is_none_or(|f| v >= f.len()) {
            return Err(Error::UnknownNode(v.to_string()));
        }
        let cycle = self.mu..self.mu + self.lambda;
        Ok(match c {
            Classifier::Standard => (0..self.mu + self.lambda).any(|r| self.flags[r][v]),
            Classifier::FixedPoint => cycle.clone().all(|r| self.flags[r][v]),
            Classifier::Buchi => cycle.clone().any(|r| self.flags[r][v]),
            Classifier::GraphSize(e) => self.flag(v, e.eval(size as u64)? as usize),
            Classifier::Convergence => self.lambda == 1 && self.flags[self.mu][v],
        })
    }
}

/// Verdict at every node.
pub fn classify_all<M: Machine + ?Sized>(
    m: &M,
    g: &LabeledGraph,
    c: &Classifier,
    ceiling: usize,
) -> Result<Vec<bool>> {
    let t = trace(m, g, ceiling)?;
    (0..g.len()).map(|v| t.classify(v, c, g.len())).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classifier {
    Standard,
    FixedPoint,
    Buchi,
    GraphSize(IterExpr),
    Convergence,
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::Standard => f.write_str("standard"),
            Classifier::FixedPoint => f.write_str("fixed-point"),
            Classifier::Buchi => f.write_str("buchi"),
            Classifier::GraphSize(e) => write!(f, "graph-size:{e}"),
            Classifier::Convergence => f.write_str("convergence"),
        }
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(Classifier::Standard),
            "fixed-point" => Ok(Classifier::FixedPoint),
            "buchi" => Ok(Classifier::Buchi),
            "convergence" => Ok(Classifier::Convergence),
            other => match other.strip_prefix("graph-size:") {
                Some(e) => Ok(Classifier::GraphSize(e.parse()?)),
                None => Err(Error::Parse(format!("unknown classifier `{s}`"))),
            },
        }
    }
}

/// Closed-form round count in the graph size V: integers, `V`, `+`, `*`,
/// `^` and parentheses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IterExpr {
    Const(u64),
    V,
    Add(Box<IterExpr>, Box<IterExpr>),
    Mul(Box<IterExpr>, Box<IterExpr>),
    Pow(Box<IterExpr>, u32),
}

impl IterExpr {
    pub fn eval(&self, v: u64) -> Result<u64> {
        let overflow = || Error::guard("graph-size round", "overflow", u64::MAX);
        Ok(match self {
            IterExpr::Const(c) => *c,
            IterExpr::V => v,
            IterExpr::Add(a, b) => a.eval(v)?.checked_add(b.eval(v)?).ok_or_else(overflow)?,
            IterExpr::Mul(a, b) => a.eval(v)?.checked_mul(b.eval(v)?).ok_or_else(overflow)?,
            IterExpr::Pow(a, k) => a.eval(v)?.checked_pow(*k).ok_or_else(overflow)?,
        })
    }
}

impl fmt::Display for IterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterExpr::Const(c) => write!(f, "{c}"),
            IterExpr::V => f.write_str("V"),
            IterExpr::Add(a, b) => write!(f, "({a}+{b})"),
            IterExpr::Mul(a, b) => write!(f, "({a}*{b})"),
            IterExpr::Pow(a, k) => write!(f, "({a}^{k})"),
        }
    }
}

impl FromStr for IterExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let e = sum(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(Error::Parse(format!("bad round expression `{s}`")));
        }
        Ok(e)
    }
}

fn sum(c: &[char], pos: &mut usize) -> Result<IterExpr> {
    let mut acc = product(c, pos)?;
    while c.get(*pos) == Some(&'+') {
        *pos += 1;
        acc = IterExpr::Add(Box::new(acc), Box::new(product(c, pos)?));
    }
    Ok(acc)
}

fn product(c: &[char], pos: &mut usize) -> Result<IterExpr> {
    let mut acc = power(c, pos)?;
    while c.get(*pos) == Some(&'*') {
        *pos += 1;
        acc = IterExpr::Mul(Box::new(acc), Box::new(power(c, pos)?));
    }
    Ok(acc)
}

fn power(c: &[char], pos: &mut usize) -> Result<IterExpr> {
    let base = atom(c, pos)?;
    if c.get(*pos) == Some(&'^') {
        *pos += 1;
        match atom(c, pos)? {
            IterExpr::Const(k) => Ok(IterExpr::Pow(Box::new(base), k as u32)),
            _ => Err(Error::Parse("exponent must be a constant".into())),
        }
    } else {
        Ok(base)
    }
}

fn atom(c: &[char], pos: &mut usize) -> Result<IterExpr> {
    match c.get(*pos) {
        Some('V') | Some('v') => {
            *pos += 1;
            Ok(IterExpr::V)
        }
        Some('(') => {
            *pos += 1;
            let e = sum(c, pos)?;
            if c.get(*pos) != Some(&')') {
                return Err(Error::Parse("missing `)` in round expression".into()));
            }
            *pos += 1;
            Ok(e)
        }
        Some(d) if d.is_ascii_digit() => {
            let start = *pos;
            while c.get(*pos).is_some_and(|d| d.is_ascii_digit()) {
                *pos += 1;
            }
            let s: String = c[start..*pos].iter().collect();
            s.parse()
                .map(IterExpr::Const)
                .map_err(|_| Error::Parse(format!("bad constant `{s}`")))
        }
        other => Err(Error::Parse(format!("unexpected {other:?} in round expression"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Machine whose node states cycle through a fixed flag pattern.
    struct Pattern {
        prefix: Vec<bool>,
        cycle: Vec<bool>,
        pi: Vec<String>,
    }

    impl Machine for Pattern {
        type State = usize;

        fn kind(&self) -> MachineKind {
            MachineKind::Automaton
        }

        fn alphabet(&self) -> &[String] {
            &self.pi
        }

        fn start(&self, g: &LabeledGraph) -> Result<Vec<usize>> {
            Ok(vec![0; g.len()])
        }

        fn next(&self, _: &LabeledGraph, cur: &[usize]) -> Result<Vec<usize>> {
            let len = self.prefix.len() + self.cycle.len();
            Ok(cur
                .iter()
                .map(|&s| {
                    if s + 1 < len {
                        s + 1
                    } else {
                        self.prefix.len()
                    }
                })
                .collect())
        }

        fn accepting(&self, s: &usize) -> bool {
            if *s < self.prefix.len() {
                self.prefix[*s]
            } else {
                self.cycle[*s - self.prefix.len()]
            }
        }
    }

    fn single() -> LabeledGraph {
        LabeledGraph::new(vec![], vec![("a".into(), vec![])], vec![]).unwrap()
    }

    fn verdicts(m: &Pattern) -> Vec<bool> {
        let t = trace(m, &single(), 1000).unwrap();
        [
            Classifier::Standard,
            Classifier::FixedPoint,
            Classifier::Buchi,
            Classifier::GraphSize("V+3".parse().unwrap()),
            Classifier::Convergence,
        ]
        .iter()
        .map(|c| t.classify(0, c, 1).unwrap())
        .collect()
    }

    #[test]
    fn constant_machine_has_unit_cycle() {
        let m = Pattern {
            prefix: vec![],
            cycle: vec![true],
            pi: vec![],
        };
        let t = trace(&m, &single(), 10).unwrap();
        assert_eq!((t.mu, t.lambda), (0, 1));
        assert_eq!(verdicts(&m), vec![true; 5]);
    }

    #[test]
    fn alternating_flags() {
        let m = Pattern {
            prefix: vec![false],
            cycle: vec![true, false],
            pi: vec![],
        };
        let t = trace(&m, &single(), 10).unwrap();
        assert_eq!((t.mu, t.lambda), (1, 2));
        // Round V+3 = 4 folds to round 2, which is non-accepting.
        assert_eq!(verdicts(&m), vec![true, false, true, false, false]);
    }

    #[test]
    fn ceiling_errors_instead_of_truncating() {
        let m = Pattern {
            prefix: vec![false; 50],
            cycle: vec![true],
            pi: vec![],
        };
        assert_eq!(trace(&m, &single(), 10).unwrap_err(), Error::Ceiling(10));
    }

    #[test]
    fn unknown_node_rejected() {
        let m = Pattern {
            prefix: vec![],
            cycle: vec![true],
            pi: vec![],
        };
        let t = trace(&m, &single(), 10).unwrap();
        assert!(t.classify(3, &Classifier::Standard, 1).is_err());
    }

    #[test]
    fn classifier_strings() {
        for s in ["standard", "fixed-point", "buchi", "convergence", "graph-size:(V^2)"] {
            assert_eq!(s.parse::<Classifier>().unwrap().to_string(), s);
        }
        let e: IterExpr = "2*V+1".parse().unwrap();
        assert_eq!(e.eval(5).unwrap(), 11);
        assert_eq!("V^2".parse::<IterExpr>().unwrap().eval(4).unwrap(), 16);
        assert!("V+".parse::<IterExpr>().is_err());
        assert!("sometimes".parse::<Classifier>().is_err());
    }
}
