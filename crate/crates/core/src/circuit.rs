//! Formulas compiled to a shared DAG of gates, evaluated column-wise over
//! all nodes of a graph at once. Gates are stored children-first, so the
//! gate list doubles as a subformula enumeration.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gml::Formula;
use crate::graph::{LabelSet, LabeledGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Top,
    Prop(usize),
    Var(usize),
    Not(usize),
    And(usize, usize),
    Dia(u32, usize),
    Glob(u32, usize),
}

#[derive(Clone, Debug)]
pub struct Circuit {
    pi: Vec<String>,
    heads: Vec<String>,
    gates: Vec<Gate>,
    formulas: Vec<Formula>,
    index: HashMap<Gate, usize>,
}

/// Gate values, gate-major: `column(g)[v]` is gate g at node v.
pub struct Values {
    nodes: usize,
    data: Vec<bool>,
}

impl Values {
    pub fn column(&self, gate: usize) -> &[bool] {
        &self.data[gate * self.nodes..(gate + 1) * self.nodes]
    }
}

impl Circuit {
    pub fn new(pi: Vec<String>, heads: Vec<String>) -> Self {
        Circuit {
            pi,
            heads,
            gates: Vec::new(),
            formulas: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn formula(&self, gate: usize) -> &Formula {
        &self.formulas[gate]
    }

    pub fn lookup(&self, f: &Formula) -> Option<usize> {
        let gate = match f {
            Formula::Top => Gate::Top,
            Formula::Prop(p) => Gate::Prop(self.pi.iter().position(|q| q == p)?),
            Formula::Var(x) => Gate::Var(self.heads.iter().position(|h| h == x)?),
            Formula::Not(a) => Gate::Not(self.lookup(a)?),
            Formula::And(a, b) => Gate::And(self.lookup(a)?, self.lookup(b)?),
            Formula::Dia(k, a) => Gate::Dia(*k, self.lookup(a)?),
            Formula::Glob(k, a) => Gate::Glob(*k, self.lookup(a)?),
        };
        self.index.get(&gate).copied()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Adds `f` and all its subformulas, returning the gate of `f`.
    /// Gates are hash-consed on their children's ids.
    pub fn add(&mut self, f: &Formula) -> Result<usize> {
        self.add_shared(f, &mut HashMap::new())
    }

    /// Shared subtrees are visited once per call, keyed by address.
    fn add_shared(&mut self, f: &Formula, seen: &mut HashMap<*const Formula, usize>) -> Result<usize> {
        if let Some(&g) = seen.get(&(f as *const Formula)) {
            return Ok(g);
        }
        let gate = match f {
            Formula::Top => Gate::Top,
            Formula::Prop(p) => Gate::Prop(
                self.pi
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::UndeclaredProp(p.clone()))?,
            ),
            Formula::Var(x) => Gate::Var(
                self.heads
                    .iter()
                    .position(|h| h == x)
                    .ok_or_else(|| Error::Invalid(format!("undeclared head predicate `{x}`")))?,
            ),
            Formula::Not(a) => Gate::Not(self.add_shared(a, seen)?),
            Formula::And(a, b) => {
                let a = self.add_shared(a, seen)?;
                Gate::And(a, self.add_shared(b, seen)?)
            }
            Formula::Dia(k, a) => Gate::Dia(*k, self.add_shared(a, seen)?),
            Formula::Glob(k, a) => Gate::Glob(*k, self.add_shared(a, seen)?),
        };
        let id = match self.index.get(&gate) {
            Some(&g) => g,
            None => {
                let id = self.gates.len();
                self.gates.push(gate);
                self.formulas.push(f.clone());
                self.index.insert(gate, id);
                id
            }
        };
        seen.insert(f as *const Formula, id);
        Ok(id)
    }

    /// Evaluates every gate at every node. `labels` are over this circuit's
    /// alphabet; `var(v, h)` gives head h at node v.
    pub fn eval(
        &self,
        g: &LabeledGraph,
        labels: &[LabelSet],
        var: &dyn Fn(usize, usize) -> bool,
    ) -> Values {
        let n = g.len();
        let mut data = vec![false; self.gates.len() * n];
        for (gi, gate) in self.gates.iter().enumerate() {
            let (done, rest) = data.split_at_mut(gi * n);
            let out = &mut rest[..n];
            let col = |c: usize| &done[c * n..(c + 1) * n];
            match *gate {
                Gate::Top => out.fill(true),
                Gate::Prop(i) => {
                    for v in 0..n {
                        out[v] = labels[v].contains(i);
                    }
                }
                Gate::Var(h) => {
                    for (v, o) in out.iter_mut().enumerate() {
                        *o = var(v, h);
                    }
                }
                Gate::Not(a) => {
                    for (o, &x) in out.iter_mut().zip(col(a)) {
                        *o = !x;
                    }
                }
                Gate::And(a, b) => {
                    for v in 0..n {
                        out[v] = col(a)[v] && col(b)[v];
                    }
                }
                Gate::Dia(k, a) => {
                    let ca = col(a);
                    for (v, o) in out.iter_mut().enumerate() {
                        let c = g.succ(v).iter().filter(|&&u| ca[u]).count();
                        *o = c >= k as usize;
                    }
                }
                Gate::Glob(k, a) => {
                    let c = col(a).iter().filter(|&&x| x).count();
                    out.fill(c >= k as usize);
                }
            }
        }
        Values { nodes: n, data }
    }
}
