//! GMSC programs: terminal clauses fire at round 0, iteration clauses are
//! re-evaluated every round over the previous round's head truth values.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::acceptance::{Machine, MachineKind};
use crate::bits::Bits;
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gml::{is_head_name, Formula, Parser, Tok};
use crate::graph::{LabelSet, LabeledGraph};

/// AST size cap for literal iteration-formula expansion.
pub const EXPANSION_GUARD: usize = 100_000;

#[derive(Clone, Debug)]
pub struct GmscProgram {
    pi: Vec<String>,
    heads: Vec<String>,
    terminal: Vec<Formula>,
    iteration: Vec<Formula>,
    appointed: Vec<bool>,
    global: bool,
    term: Circuit,
    term_out: Vec<usize>,
    iter: Circuit,
    iter_out: Vec<usize>,
}

/// Head truth per node at some round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GmscConfiguration {
    pub round: usize,
    pub truth: Vec<Bits>,
}

impl GmscProgram {
    /// Builds and validates a program. `pi` defaults to the propositions
    /// that occur in the bodies.
    pub fn new(
        pi: Option<Vec<String>>,
        heads: Vec<String>,
        terminal: Vec<Formula>,
        iteration: Vec<Formula>,
        appointed: &[String],
    ) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::Invalid("a program needs at least one head".into()));
        }
        if terminal.len() != heads.len() || iteration.len() != heads.len() {
            return Err(Error::Invalid("one terminal and one iteration clause per head".into()));
        }
        let mut seen = BTreeSet::new();
        for h in &heads {
            if !is_head_name(h) {
                return Err(Error::Invalid(format!("head `{h}` must start uppercase")));
            }
            if !seen.insert(h) {
                return Err(Error::Invalid(format!("duplicate head `{h}`")));
            }
        }
        let mut props = BTreeSet::new();
        for (h, t) in heads.iter().zip(&terminal) {
            if !t.is_gml() {
                return Err(Error::Invalid(format!(
                    "terminal clause of {h} mentions a head predicate"
                )));
            }
            t.props(&mut props);
        }
        for f in &iteration {
            f.props(&mut props);
        }
        let pi = match pi {
            Some(pi) => {
                if let Some(p) = props.iter().find(|p| !pi.contains(p)) {
                    return Err(Error::UndeclaredProp(p.clone()));
                }
                pi
            }
            None => props.into_iter().collect(),
        };
        if pi.len() > crate::graph::MAX_PI {
            return Err(Error::Invalid("too many propositions".into()));
        }
        let mut flags = vec![false; heads.len()];
        for a in appointed {
            let i = heads
                .iter()
                .position(|h| h == a)
                .ok_or_else(|| Error::Invalid(format!("appointed `{a}` is not a head")))?;
            flags[i] = true;
        }
        let global = terminal.iter().chain(&iteration).any(Formula::has_glob);
        let mut term = Circuit::new(pi.clone(), heads.clone());
        let term_out = terminal.iter().map(|f| term.add(f)).collect::<Result<_>>()?;
        let mut iter = Circuit::new(pi.clone(), heads.clone());
        let iter_out = iteration.iter().map(|f| iter.add(f)).collect::<Result<_>>()?;
        Ok(GmscProgram {
            pi,
            heads,
            terminal,
            iteration,
            appointed: flags,
            global,
            term,
            term_out,
            iter,
            iter_out,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser::new(text)?;
        let mut pi: Option<Vec<String>> = None;
        let mut appointed: Option<Vec<String>> = None;
        let mut heads: Vec<String> = Vec::new();
        let mut terminal: HashMap<String, Formula> = HashMap::new();
        let mut iteration: HashMap<String, Formula> = HashMap::new();
        while !p.at_end() {
            let directive = match (p.peek(), p.peek_at(1)) {
                (Some(Tok::Ident(s)), Some(Tok::Colon)) => Some(s.clone()),
                _ => None,
            };
            if let Some(d) = directive {
                p.bump();
                p.bump();
                let mut names = Vec::new();
                while let Some(Tok::Ident(s)) = p.peek() {
                    names.push(s.clone());
                    p.bump();
                    if p.peek() == Some(&Tok::Comma) {
                        p.bump();
                    }
                }
                p.expect(Tok::Semi)?;
                let slot = match d.as_str() {
                    "appointed" => &mut appointed,
                    "pi" => &mut pi,
                    _ => return Err(Error::Parse(format!("unknown directive `{d}`"))),
                };
                if slot.replace(names).is_some() {
                    return Err(Error::Parse(format!("duplicate `{d}` directive")));
                }
                continue;
            }
            let head = match p.bump() {
                Some(Tok::Ident(s)) if is_head_name(&s) => s,
                got => return Err(Error::Parse(format!("expected a head predicate, found {got:?}"))),
            };
            let is_terminal = p.peek() == Some(&Tok::LParen);
            if is_terminal {
                p.bump();
                p.expect(Tok::Nat(0))?;
                p.expect(Tok::RParen)?;
            }
            p.expect(Tok::Turnstile)?;
            let body = p.formula()?;
            p.expect(Tok::Semi)?;
            if !heads.contains(&head) {
                heads.push(head.clone());
            }
            let table = if is_terminal { &mut terminal } else { &mut iteration };
            if table.insert(head.clone(), body).is_some() {
                return Err(Error::Parse(format!("duplicate clause for `{head}`")));
            }
        }
        let appointed =
            appointed.ok_or_else(|| Error::Parse("missing `appointed:` declaration".into()))?;
        let mut t = Vec::new();
        let mut it = Vec::new();
        for h in &heads {
            t.push(
                terminal
                    .remove(h)
                    .ok_or_else(|| Error::Parse(format!("missing terminal clause for `{h}`")))?,
            );
            it.push(
                iteration
                    .remove(h)
                    .ok_or_else(|| Error::Parse(format!("missing iteration clause for `{h}`")))?,
            );
        }
        let mut vars = BTreeSet::new();
        for f in &it {
            f.vars(&mut vars);
        }
        if let Some(v) = vars.iter().find(|v| !heads.contains(v)) {
            return Err(Error::Parse(format!("undeclared head predicate `{v}`")));
        }
        GmscProgram::new(pi, heads, t, it, &appointed)
    }

    pub fn pi(&self) -> &[String] {
        &self.pi
    }

    pub fn heads(&self) -> &[String] {
        &self.heads
    }

    pub fn head_index(&self, h: &str) -> Result<usize> {
        self.heads
            .iter()
            .position(|x| x == h)
            .ok_or_else(|| Error::Invalid(format!("no head `{h}`")))
    }

    pub fn terminal(&self, i: usize) -> &Formula {
        &self.terminal[i]
    }

    pub fn iteration(&self, i: usize) -> &Formula {
        &self.iteration[i]
    }

    pub fn is_appointed(&self, i: usize) -> bool {
        self.appointed[i]
    }

    pub fn appointed(&self) -> Vec<String> {
        self.heads
            .iter()
            .zip(&self.appointed)
            .filter(|(_, &a)| a)
            .map(|(h, _)| h.clone())
            .collect()
    }

    pub fn is_global(&self) -> bool {
        self.global
    }

    /// Largest grade over all bodies.
    pub fn width(&self) -> u32 {
        self.terminal
            .iter()
            .chain(&self.iteration)
            .map(Formula::width)
            .max()
            .unwrap_or(0)
    }

    /// Total AST size of all bodies.
    pub fn size(&self) -> usize {
        self.terminal.iter().chain(&self.iteration).map(Formula::size).sum()
    }

    /// Terminal bodies of modal depth 0 and iteration bodies of depth <= 1.
    pub fn is_normal_form(&self) -> bool {
        self.terminal.iter().all(|f| f.modal_depth() == 0)
            && self.iteration.iter().all(|f| f.modal_depth() <= 1)
    }

    /// Same program over a larger alphabet.
    pub fn with_pi(&self, pi: Vec<String>) -> Result<Self> {
        GmscProgram::new(
            Some(pi),
            self.heads.clone(),
            self.terminal.clone(),
            self.iteration.clone(),
            &self.appointed(),
        )
    }

    /// Same clauses with a different appointed set.
    pub fn with_appointed(&self, appointed: &[String]) -> Result<Self> {
        GmscProgram::new(
            Some(self.pi.clone()),
            self.heads.clone(),
            self.terminal.clone(),
            self.iteration.clone(),
            appointed,
        )
    }

    fn node_labels(&self, g: &LabeledGraph) -> Result<Vec<LabelSet>> {
        let map: Vec<usize> = self
            .pi
            .iter()
            .map(|p| {
                g.pi()
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::UndeclaredProp(p.clone()))
            })
            .collect::<Result<_>>()?;
        Ok((0..g.len())
            .map(|v| {
                let l = g.labels(v);
                map.iter()
                    .enumerate()
                    .filter(|(_, &j)| l.contains(j))
                    .fold(LabelSet::default(), |acc, (i, _)| acc.with(i))
            })
            .collect())
    }

    fn collect(&self, g: &LabeledGraph, vals: &crate::circuit::Values, outs: &[usize]) -> Vec<Bits> {
        (0..g.len())
            .map(|v| {
                let mut b = Bits::new(self.heads.len());
                for (h, &o) in outs.iter().enumerate() {
                    if vals.column(o)[v] {
                        b.set(h, true);
                    }
                }
                b
            })
            .collect()
    }

    pub fn initial(&self, g: &LabeledGraph) -> Result<GmscConfiguration> {
        let labels = self.node_labels(g)?;
        let vals = self.term.eval(g, &labels, &|_, _| false);
        Ok(GmscConfiguration {
            round: 0,
            truth: self.collect(g, &vals, &self.term_out),
        })
    }

    pub fn step(&self, g: &LabeledGraph, c: &GmscConfiguration) -> Result<GmscConfiguration> {
        if c.truth.len() != g.len() {
            return Err(Error::Invalid("configuration does not match the graph".into()));
        }
        Ok(GmscConfiguration {
            round: c.round + 1,
            truth: self.advance(g, &self.node_labels(g)?, &c.truth),
        })
    }

    fn advance(&self, g: &LabeledGraph, labels: &[LabelSet], truth: &[Bits]) -> Vec<Bits> {
        let vals = self.iter.eval(g, labels, &|v, h| truth[v].get(h));
        self.collect(g, &vals, &self.iter_out)
    }

    /// The literal n-fold substitution X^n.
    pub fn iteration_formula(&self, head: &str, n: usize) -> Result<Formula> {
        let h = self.head_index(head)?;
        let mut memo: HashMap<(usize, usize), Formula> = HashMap::new();
        self.expand(h, n, &mut memo)
    }

    fn expand(
        &self,
        h: usize,
        n: usize,
        memo: &mut HashMap<(usize, usize), Formula>,
    ) -> Result<Formula> {
        if let Some(f) = memo.get(&(h, n)) {
            return Ok(f.clone());
        }
        let f = if n == 0 {
            self.terminal[h].clone()
        } else {
            let mut vars = BTreeSet::new();
            self.iteration[h].vars(&mut vars);
            let mut sub = HashMap::new();
            for v in vars {
                let i = self.head_index(&v)?;
                sub.insert(v, self.expand(i, n - 1, memo)?);
            }
            self.iteration[h].substitute(&|x| sub[x].clone())
        };
        if f.size() > EXPANSION_GUARD {
            return Err(Error::guard("iteration formula AST size", f.size(), EXPANSION_GUARD));
        }
        memo.insert((h, n), f.clone());
        Ok(f)
    }
}

impl fmt::Display for GmscProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pi: {};", self.pi.join(", "))?;
        for (i, h) in self.heads.iter().enumerate() {
            writeln!(f, "{h}(0) :- {};", self.terminal[i])?;
            writeln!(f, "{h} :- {};", self.iteration[i])?;
        }
        writeln!(f, "appointed: {};", self.appointed().join(", "))
    }
}

impl Machine for GmscProgram {
    type State = Bits;

    fn kind(&self) -> MachineKind {
        MachineKind::Program
    }

    fn alphabet(&self) -> &[String] {
        &self.pi
    }

    fn start(&self, g: &LabeledGraph) -> Result<Vec<Bits>> {
        Ok(self.initial(g)?.truth)
    }

    fn next(&self, g: &LabeledGraph, cur: &[Bits]) -> Result<Vec<Bits>> {
        Ok(self.advance(g, &self.node_labels(g)?, cur))
    }

    fn accepting(&self, s: &Bits) -> bool {
        s.ones().any(|h| self.appointed[h])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::gml::{eval_gml, Formula};
    use crate::graph::{enumerate_pointed_graphs, PointedGraph};

    fn path_wu() -> LabeledGraph {
        LabeledGraph::new(
            vec!["p".into()],
            vec![("w".into(), vec![]), ("u".into(), vec!["p".into()])],
            vec![("w".into(), "u".into())],
        )
        .unwrap()
    }

    #[test]
    fn parses_reachability() {
        let p = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        assert_eq!(p.heads(), &["X".to_string()]);
        assert_eq!(p.pi(), &["p".to_string()]);
        assert_eq!(p.iteration(0), &Formula::parse("<1> X").unwrap());
        assert_eq!(p.appointed(), vec!["X".to_string()]);
        assert!(!p.is_global());
    }

    #[test]
    fn rejects_malformed_programs() {
        for bad in [
            "X(0) :- X; X :- X; appointed: X;",
            "X(0) :- p; appointed: X;",
            "X :- p; appointed: X;",
            "X(0) :- p; X(0) :- p; X :- p; appointed: X;",
            "X(0) :- p; X :- Y; appointed: X;",
            "X(0) :- p; X :- X; appointed: Y;",
            "X(0) :- p; X :- X;",
            "x(0) :- p; x :- p; appointed: x;",
        ] {
            assert!(GmscProgram::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn reachability_steps() {
        let p = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        let g = path_wu();
        let c0 = p.initial(&g).unwrap();
        assert!(!c0.truth[0].get(0) && c0.truth[1].get(0));
        let c1 = p.step(&g, &c0).unwrap();
        assert!(c1.truth[0].get(0));
        // X^1 = <1> p is false at u, which has no successors.
        assert!(!c1.truth[1].get(0));
        let wrong = GmscConfiguration {
            round: 0,
            truth: vec![Bits::new(1)],
        };
        assert!(p.step(&g, &wrong).is_err());
    }

    #[test]
    fn top_body_holds_from_round_one() {
        let p = GmscProgram::parse("X(0) :- bot; X :- top; appointed: X;").unwrap();
        let g = path_wu();
        let c1 = p.step(&g, &p.initial(&g).unwrap()).unwrap();
        assert!(c1.truth.iter().all(|b| b.get(0)));
    }

    #[test]
    fn centre_point_on_isolated_node() {
        let p = GmscProgram::parse(corpus::CENTRE_POINT).unwrap();
        let g = LabeledGraph::new(vec![], vec![("a".into(), vec![])], vec![]).unwrap();
        assert!(p.initial(&g).unwrap().truth[0].get(0));
    }

    #[test]
    fn iteration_formula_examples() {
        let reach = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        assert_eq!(
            reach.iteration_formula("X", 2).unwrap(),
            Formula::parse("<1> <1> p").unwrap()
        );
        assert_eq!(reach.iteration_formula("X", 0).unwrap(), Formula::parse("p").unwrap());
        let centre = GmscProgram::parse(corpus::CENTRE_POINT).unwrap();
        assert_eq!(
            centre.iteration_formula("X", 1).unwrap(),
            Formula::parse("(<1> [] bot & [] [] bot)").unwrap()
        );
        let blow = GmscProgram::parse("X(0) :- p; X :- (X & <1> X); appointed: X;").unwrap();
        assert!(blow.iteration_formula("X", 40).unwrap_err().is_resource());
    }

    #[test]
    fn configurations_agree_with_iteration_formulas() {
        for src in corpus::PROGRAMS.iter().map(|(_, s)| *s) {
            let prog = GmscProgram::parse(src).unwrap();
            let graphs: Vec<PointedGraph> = enumerate_pointed_graphs(prog.pi(), 2)
                .unwrap()
                .filter(|pg| pg.point == 0)
                .collect();
            for h in prog.heads().to_vec() {
                let hi = prog.head_index(&h).unwrap();
                for n in 0..=3 {
                    let Ok(f) = prog.iteration_formula(&h, n) else { continue };
                    for pg in &graphs {
                        let mut c = prog.initial(&pg.graph).unwrap();
                        for _ in 0..n {
                            c = prog.step(&pg.graph, &c).unwrap();
                        }
                        assert_eq!(c.truth[pg.point].get(hi), eval_gml(pg, &f).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn display_roundtrip() {
        for (_, src) in corpus::PROGRAMS {
            let p = GmscProgram::parse(src).unwrap();
            let q = GmscProgram::parse(&p.to_string()).unwrap();
            assert_eq!(p.to_string(), q.to_string());
        }
    }
}
