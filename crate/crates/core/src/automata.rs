//! Finite counting message-passing automata (FCMPA): every node updates its
//! state from its own state and the k-projected multiset of its
//! out-neighbours' states (plus, for global automata, the multiset of all
//! states in the graph). Also the translations between normal-form programs
//! and automata, and the counting type automata.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acceptance::{Machine, MachineKind};
use crate::error::{Error, Result};
use crate::gml::{and, and_all, dia, dia_eq, glob, glob_eq, implies, not, or_all, prop, var, Formula};
use crate::gmsc::GmscProgram;
use crate::graph::{LabelSet, LabeledGraph, PointedGraph};
use crate::types::{GradedType, TypeKind};

/// Sorted (state, count) pairs with positive counts.
pub type Msg = Vec<(usize, u32)>;

pub type TransitionFn = dyn Fn(usize, &[(usize, u32)], Option<&[(usize, u32)]>) -> usize + Send + Sync;

/// Cap on multiset enumerations, (k+1)^|Q| (squared for global automata).
pub const MULTISET_GUARD: u128 = 100_000;
/// Cap on the state-set size of a program-to-automaton translation.
pub const STATE_BITS_GUARD: usize = 20;

#[derive(Clone)]
pub enum Transition {
    Table(HashMap<(usize, Msg, Option<Msg>), usize>),
    Callback(Arc<TransitionFn>),
    Counting(Arc<Counting>),
}

pub type CountingRule = dyn Fn(usize, &[u32], &[u32]) -> usize + Send + Sync;

/// A transition that sees the neighbour multiset only through capped counts
/// of a few state sets: delta(q, S, G) = rule(q, c, g) with
/// c_j = min(|S restricted to local[j]|, cap_j), likewise g over G.
#[derive(Clone)]
pub struct Counting {
    /// (membership per state, cap).
    pub local: Vec<(Vec<bool>, u32)>,
    pub global: Vec<(Vec<bool>, u32)>,
    pub rule: Arc<CountingRule>,
}

impl Counting {
    fn counts(sets: &[(Vec<bool>, u32)], m: &[(usize, u32)]) -> Vec<u32> {
        sets.iter()
            .map(|(mem, cap)| {
                let c: u64 = m.iter().filter(|(q, _)| mem[*q]).map(|&(_, c)| c as u64).sum();
                c.min(*cap as u64) as u32
            })
            .collect()
    }

    /// Every capped count vector over `sets`.
    fn vectors(sets: &[(Vec<bool>, u32)]) -> Result<Vec<Vec<u32>>> {
        let size = sets.iter().fold(1u128, |a, (_, cap)| a.saturating_mul(*cap as u128 + 1));
        if size > MULTISET_GUARD {
            return Err(Error::guard("count-vector enumeration", size, MULTISET_GUARD));
        }
        let mut out = Vec::new();
        let mut c = vec![0u32; sets.len()];
        loop {
            out.push(c.clone());
            let Some(i) = (0..sets.len()).find(|&i| c[i] < sets[i].1) else { break };
            c[i] += 1;
            c[..i].fill(0);
        }
        Ok(out)
    }

    fn combos(&self) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
        let l = Counting::vectors(&self.local)?;
        let g = Counting::vectors(&self.global)?;
        if (l.len() as u128) * (g.len() as u128) > MULTISET_GUARD {
            return Err(Error::guard("count-vector enumeration", l.len() * g.len(), MULTISET_GUARD));
        }
        Ok(l.iter().flat_map(|a| g.iter().map(move |b| (a.clone(), b.clone()))).collect())
    }
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Table(t) => write!(f, "Table({} entries)", t.len()),
            Transition::Callback(_) => f.write_str("Callback"),
            Transition::Counting(c) => write!(f, "Counting({} local, {} global sets)", c.local.len(), c.global.len()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fcmpa {
    pi: Vec<String>,
    states: Vec<String>,
    init: Vec<usize>,
    transition: Transition,
    accepting: Vec<bool>,
    bound: Option<u32>,
    global: bool,
    /// For translated automata: symbols (pi, then heads) and each state's
    /// subset of them as a bit mask.
    symbols: Option<(Vec<String>, Vec<u64>)>,
}

fn project(m: &mut Msg, bound: Option<u32>) {
    if let Some(k) = bound {
        m.retain(|e| k > 0 || e.1 == 0);
        for e in m.iter_mut() {
            e.1 = e.1.min(k);
        }
    }
}

fn collect_msg(states: impl Iterator<Item = usize>, bound: Option<u32>) -> Msg {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for s in states {
        *counts.entry(s).or_insert(0) += 1;
    }
    let mut m: Msg = counts.into_iter().collect();
    project(&mut m, bound);
    m
}

/// Size of M_k(Q), or a guard error.
fn multiset_space(n: usize, k: u32, global: bool) -> Result<u128> {
    let mut size: u128 = 1;
    let exp = if global { 2 * n } else { n };
    for _ in 0..exp {
        size = size.saturating_mul(k as u128 + 1);
        if size > MULTISET_GUARD {
            return Err(Error::guard(
                "multiset enumeration (k+1)^|Q|",
                format!("(k+1)^{exp} with k = {k}"),
                MULTISET_GUARD,
            ));
        }
    }
    Ok(size)
}

/// Every multiset over `n` states with counts at most k.
fn multisets(n: usize, k: u32) -> Vec<Msg> {
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    loop {
        out.push(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c))
                .collect(),
        );
        let Some(i) = counts.iter().position(|&c| c < k) else { break };
        counts[i] += 1;
        counts[..i].fill(0);
    }
    out
}

fn render_mask(mask: u64, symbols: &[String]) -> String {
    let names: Vec<&str> = (0..symbols.len())
        .filter(|&i| (mask >> i) & 1 == 1)
        .map(|i| symbols[i].as_str())
        .collect();
    format!("{{{}}}", names.join(","))
}

impl Fcmpa {
    /// Validates the parts; table transitions must cover every state and
    /// every k-bounded multiset.
    pub fn new(
        pi: Vec<String>,
        states: Vec<String>,
        init: Vec<usize>,
        transition: Transition,
        accepting: Vec<bool>,
        bound: Option<u32>,
        global: bool,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Invalid("an automaton needs at least one state".into()));
        }
        if pi.len() > crate::graph::MAX_PI.min(16) {
            return Err(Error::Invalid("label alphabet too large for an init table".into()));
        }
        if init.len() != 1 << pi.len() {
            return Err(Error::Invalid("init must map every label subset".into()));
        }
        if init.iter().any(|&q| q >= n) || accepting.len() != n {
            return Err(Error::Invalid("init or accepting refers to an unknown state".into()));
        }
        let names: BTreeSet<&String> = states.iter().collect();
        if names.len() != n {
            return Err(Error::Invalid("duplicate state name".into()));
        }
        let a = Fcmpa {
            pi,
            states,
            init,
            transition,
            accepting,
            bound,
            global,
            symbols: None,
        };
        if let Transition::Table(t) = &a.transition {
            let k = bound.ok_or_else(|| Error::Invalid("table automata must be bounded".into()))?;
            multiset_space(n, k, global)?;
            let all = multisets(n, k);
            let globals: Vec<Option<Msg>> = if global {
                all.iter().cloned().map(Some).collect()
            } else {
                vec![None]
            };
            for q in 0..n {
                for s in &all {
                    for gl in &globals {
                        match t.get(&(q, s.clone(), gl.clone())) {
                            Some(&r) if r < n => {}
                            Some(_) => {
                                return Err(Error::Invalid("transition to an unknown state".into()))
                            }
                            None => {
                                return Err(Error::Invalid(format!(
                                    "transition table is not total: no entry for state {} and multiset {}",
                                    a.states[q],
                                    a.render_msg(s)
                                )))
                            }
                        }
                    }
                }
            }
        }
        Ok(a)
    }

    pub fn pi(&self) -> &[String] {
        &self.pi
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn bound(&self) -> Option<u32> {
        self.bound
    }

    pub fn is_global(&self) -> bool {
        self.global
    }

    pub fn init(&self, labels: LabelSet) -> usize {
        self.init[labels.0 as usize]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    /// Symbols and the subset of them a state stands for, when the
    /// automaton was translated from a program.
    pub fn state_set(&self, q: usize) -> Option<(&[String], u64)> {
        self.symbols.as_ref().map(|(s, m)| (s.as_slice(), m[q]))
    }

    fn render_msg(&self, m: &[(usize, u32)]) -> String {
        let parts: Vec<String> = m.iter().map(|(q, c)| format!("{}:{}", self.states[*q], c)).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// delta(q, S[, G]); S and G are projected first.
    pub fn delta(&self, q: usize, nb: &[(usize, u32)], gl: Option<&[(usize, u32)]>) -> Result<usize> {
        let mut s = nb.to_vec();
        project(&mut s, self.bound);
        let g = gl.map(|g| {
            let mut g = g.to_vec();
            project(&mut g, self.bound);
            g
        });
        let g = if self.global { Some(g.unwrap_or_default()) } else { None };
        let r = match &self.transition {
            Transition::Table(t) => *t.get(&(q, s, g)).ok_or_else(|| {
                Error::Invalid(format!("no transition for state {}", self.states[q]))
            })?,
            Transition::Callback(f) => f(q, &s, g.as_deref()),
            Transition::Counting(c) => (c.rule)(
                q,
                &Counting::counts(&c.local, &s),
                &g.as_deref().map(|g| Counting::counts(&c.global, g)).unwrap_or_default(),
            ),
        };
        if r >= self.states.len() {
            return Err(Error::Invalid("transition returned an unknown state".into()));
        }
        Ok(r)
    }

    pub fn initial(&self, g: &LabeledGraph) -> Result<Vec<usize>> {
        Ok(g.labels_over(&self.pi)?.iter().map(|&l| self.init(l)).collect())
    }

    /// One synchronous round.
    pub fn step_automaton(&self, g: &LabeledGraph, cur: &[usize]) -> Result<Vec<usize>> {
        if cur.len() != g.len() {
            return Err(Error::Invalid("configuration does not match the graph".into()));
        }
        let gl = self.global.then(|| collect_msg(cur.iter().copied(), self.bound));
        (0..g.len())
            .map(|v| {
                let nb = collect_msg(g.succ(v).iter().map(|&u| cur[u]), self.bound);
                self.delta(cur[v], &nb, gl.as_deref())
            })
            .collect()
    }

    /// Reachable-state closure, renumbered. Counting transitions stay
    /// counting transitions; the others become a materialized table.
    pub fn compact(&self) -> Result<Fcmpa> {
        let k = self.bound.ok_or_else(|| Error::Invalid("only bounded automata compact".into()))?;
        if let Transition::Counting(c) = &self.transition {
            return self.compact_counting(c);
        }
        let mut reach: Vec<usize> = Vec::new();
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for &q in &self.init {
            if seen.insert(q) {
                reach.push(q);
            }
        }
        let mut table: HashMap<(usize, Msg, Option<Msg>), usize> = HashMap::new();
        loop {
            multiset_space(reach.len(), k, self.global)?;
            let all = multisets(reach.len(), k);
            let globals: Vec<Option<Msg>> = if self.global {
                all.iter().cloned().map(Some).collect()
            } else {
                vec![None]
            };
            let lift = |m: &Msg| -> Msg {
                let mut v: Msg = m.iter().map(|&(i, c)| (reach[i], c)).collect();
                v.sort_unstable();
                v
            };
            let mut grown = Vec::new();
            table.clear();
            for (qi, &q) in reach.iter().enumerate() {
                for s in &all {
                    for gl in &globals {
                        let r = self.delta(q, &lift(s), gl.as_ref().map(&lift).as_deref())?;
                        if seen.insert(r) {
                            grown.push(r);
                        }
                        table.insert((qi, s.clone(), gl.clone()), r);
                    }
                }
            }
            if grown.is_empty() {
                break;
            }
            reach.extend(grown);
        }
        let index: HashMap<usize, usize> = reach.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let table = table.into_iter().map(|(key, r)| (key, index[&r])).collect();
        let mut out = Fcmpa::new(
            self.pi.clone(),
            reach.iter().map(|&q| self.states[q].clone()).collect(),
            self.init.iter().map(|q| index[q]).collect(),
            Transition::Table(table),
            reach.iter().map(|&q| self.accepting[q]).collect(),
            self.bound,
            self.global,
        )?;
        out.symbols = self
            .symbols
            .as_ref()
            .map(|(s, m)| (s.clone(), reach.iter().map(|&q| m[q]).collect()));
        Ok(out)
    }

    fn compact_counting(&self, c: &Counting) -> Result<Fcmpa> {
        let mut reach: Vec<usize> = Vec::new();
        let mut seen = vec![false; self.len()];
        for &q in &self.init {
            if !seen[q] {
                seen[q] = true;
                reach.push(q);
            }
        }
        let combos = c.combos()?;
        // A count vector is only realizable if every counted set meets the
        // states found so far; the closure is re-run until nothing grows.
        loop {
            let grown_from = reach.len();
            let live = |sets: &[(Vec<bool>, u32)], v: &[u32]| {
                sets.iter().zip(v).all(|((mem, _), &n)| n == 0 || reach.iter().any(|&q| mem[q]))
            };
            let usable: Vec<&(Vec<u32>, Vec<u32>)> =
                combos.iter().filter(|(l, g)| live(&c.local, l) && live(&c.global, g)).collect();
            let mut fresh = Vec::new();
            for &q in &reach {
                for (l, g) in &usable {
                    let r = (c.rule)(q, l, g);
                    if r >= self.len() {
                        return Err(Error::Invalid("transition returned an unknown state".into()));
                    }
                    if !seen[r] {
                        seen[r] = true;
                        fresh.push(r);
                    }
                }
            }
            reach.extend(fresh);
            if reach.len() == grown_from {
                break;
            }
        }
        let index: HashMap<usize, usize> = reach.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let restrict = |sets: &[(Vec<bool>, u32)]| -> Vec<(Vec<bool>, u32)> {
            sets.iter()
                .map(|(mem, cap)| (reach.iter().map(|&q| mem[q]).collect(), *cap))
                .collect()
        };
        let old = c.rule.clone();
        let back: Arc<Vec<usize>> = Arc::new(reach.clone());
        let fwd = Arc::new(index.clone());
        let rule = move |q: usize, l: &[u32], g: &[u32]| -> usize { fwd[&old(back[q], l, g)] };
        let mut out = Fcmpa::new(
            self.pi.clone(),
            reach.iter().map(|&q| self.states[q].clone()).collect(),
            self.init.iter().map(|q| index[q]).collect(),
            Transition::Counting(Arc::new(Counting {
                local: restrict(&c.local),
                global: restrict(&c.global),
                rule: Arc::new(rule),
            })),
            reach.iter().map(|&q| self.accepting[q]).collect(),
            self.bound,
            self.global,
        )?;
        out.symbols = self
            .symbols
            .as_ref()
            .map(|(s, m)| (s.clone(), reach.iter().map(|&q| m[q]).collect()));
        Ok(out)
    }

    /// Compacted automaton with an explicit table over M_k(Q).
    pub fn to_table(&self) -> Result<Fcmpa> {
        let a = self.compact()?;
        if matches!(a.transition, Transition::Table(_)) {
            return Ok(a);
        }
        let k = a.bound.expect("compacted automata are bounded");
        multiset_space(a.len(), k, a.global)?;
        let all = multisets(a.len(), k);
        let globals: Vec<Option<Msg>> = if a.global {
            all.iter().cloned().map(Some).collect()
        } else {
            vec![None]
        };
        let mut table = HashMap::new();
        for q in 0..a.len() {
            for s in &all {
                for g in &globals {
                    table.insert((q, s.clone(), g.clone()), a.delta(q, s, g.as_deref())?);
                }
            }
        }
        let mut out = Fcmpa::new(
            a.pi.clone(),
            a.states.clone(),
            a.init.clone(),
            Transition::Table(table),
            a.accepting.clone(),
            a.bound,
            a.global,
        )?;
        out.symbols = a.symbols;
        Ok(out)
    }

    /// Same automaton with a different accepting set.
    pub fn with_accepting(&self, accepting: Vec<bool>) -> Result<Fcmpa> {
        if accepting.len() != self.len() {
            return Err(Error::Invalid("accepting set has the wrong length".into()));
        }
        Ok(Fcmpa {
            accepting,
            ..self.clone()
        })
    }

    /// Same automaton with the table entry for (q, S[, G]) redirected.
    pub fn with_entry(&self, q: usize, s: Msg, g: Option<Msg>, to: usize) -> Result<Fcmpa> {
        let Transition::Table(t) = &self.transition else {
            return Err(Error::Invalid("only table automata can be edited".into()));
        };
        let mut t = t.clone();
        t.insert((q, s, g), to);
        Fcmpa::new(
            self.pi.clone(),
            self.states.clone(),
            self.init.clone(),
            Transition::Table(t),
            self.accepting.clone(),
            self.bound,
            self.global,
        )
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        let a = match self.transition {
            Transition::Table(_) => self.clone(),
            _ => self.to_table()?,
        };
        let Transition::Table(t) = &a.transition else { unreachable!() };
        let named = |m: &Msg| -> BTreeMap<String, u32> {
            m.iter().map(|&(q, c)| (a.states[q].clone(), c)).collect()
        };
        let mut entries: Vec<_> = t.iter().collect();
        entries.sort();
        let file = AutomatonFile {
            pi: a.pi.clone(),
            states: a.states.clone(),
            init: LabelSet::all(a.pi.len())
                .map(|l| InitEntry {
                    labels: l.names(&a.pi),
                    state: a.states[a.init(l)].clone(),
                })
                .collect(),
            bound: a.bound.unwrap_or(0),
            global: a.global,
            transitions: entries
                .into_iter()
                .map(|((q, s, g), r)| TransitionEntry {
                    state: a.states[*q].clone(),
                    neighbors: named(s),
                    global: g.as_ref().map(named),
                    next: a.states[*r].clone(),
                })
                .collect(),
            accepting: (0..a.len())
                .filter(|&q| a.accepting[q])
                .map(|q| a.states[q].clone())
                .collect(),
        };
        Ok(serde_json::to_value(file).expect("automaton serializes"))
    }

    pub fn parse(text: &str) -> Result<Fcmpa> {
        let file: AutomatonFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("automaton JSON: {e}")))?;
        let idx: HashMap<&str, usize> =
            file.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let state = |s: &str| -> Result<usize> {
            idx.get(s)
                .copied()
                .ok_or_else(|| Error::Invalid(format!("unknown state `{s}`")))
        };
        let label_set = |names: &[String]| -> Result<LabelSet> {
            names.iter().try_fold(LabelSet::default(), |acc, n| {
                let i = file
                    .pi
                    .iter()
                    .position(|p| p == n)
                    .ok_or_else(|| Error::UndeclaredProp(n.clone()))?;
                Ok(acc.with(i))
            })
        };
        if file.pi.len() > 16 {
            return Err(Error::Invalid("label alphabet too large for an init table".into()));
        }
        let mut init = vec![usize::MAX; 1 << file.pi.len()];
        for e in &file.init {
            init[label_set(&e.labels)?.0 as usize] = state(&e.state)?;
        }
        if init.contains(&usize::MAX) {
            return Err(Error::Invalid("init does not cover every label subset".into()));
        }
        let to_msg = |m: &BTreeMap<String, u32>| -> Result<Msg> {
            let mut v: Msg = m
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| Ok((state(s)?, c)))
                .collect::<Result<_>>()?;
            v.sort_unstable();
            Ok(v)
        };
        let mut table = HashMap::new();
        for e in &file.transitions {
            let g = match (&e.global, file.global) {
                (Some(g), true) => Some(to_msg(g)?),
                (None, false) => None,
                _ => return Err(Error::Invalid("global multiset present iff the automaton is global".into())),
            };
            let key = (state(&e.state)?, to_msg(&e.neighbors)?, g);
            if table.insert(key, state(&e.next)?).is_some() {
                return Err(Error::Invalid("duplicate transition entry".into()));
            }
        }
        let mut accepting = vec![false; file.states.len()];
        for s in &file.accepting {
            accepting[state(s)?] = true;
        }
        Fcmpa::new(
            file.pi.clone(),
            file.states.clone(),
            init,
            Transition::Table(table),
            accepting,
            Some(file.bound),
            file.global,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct InitEntry {
    labels: Vec<String>,
    state: String,
}

#[derive(Serialize, Deserialize)]
struct TransitionEntry {
    state: String,
    neighbors: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    global: Option<BTreeMap<String, u32>>,
    next: String,
}

#[derive(Serialize, Deserialize)]
struct AutomatonFile {
    pi: Vec<String>,
    states: Vec<String>,
    init: Vec<InitEntry>,
    bound: u32,
    #[serde(default)]
    global: bool,
    transitions: Vec<TransitionEntry>,
    accepting: Vec<String>,
}

impl Machine for Fcmpa {
    type State = usize;

    fn kind(&self) -> MachineKind {
        MachineKind::Automaton
    }

    fn alphabet(&self) -> &[String] {
        &self.pi
    }

    fn start(&self, g: &LabeledGraph) -> Result<Vec<usize>> {
        self.initial(g)
    }

    fn next(&self, g: &LabeledGraph, cur: &[usize]) -> Result<Vec<usize>> {
        self.step_automaton(g, cur)
    }

    fn accepting(&self, s: &usize) -> bool {
        self.accepting[*s]
    }
}

/// Counted sets collected while compiling: (child formula, membership, cap).
#[derive(Default)]
struct CountSets {
    local: Vec<(Formula, Vec<bool>, u32)>,
    global: Vec<(Formula, Vec<bool>, u32)>,
}

/// Iteration body over symbol bits and capped set counts.
enum Cf {
    Top,
    Bit(usize),
    Not(Box<Cf>),
    And(Box<Cf>, Box<Cf>),
    Local(usize, u32),
    Global(usize, u32),
}

impl Cf {
    fn compile(f: &Formula, symbols: &[String], sets: &mut CountSets, masks: &[u64]) -> Cf {
        let mut slot = |global: bool, k: u32, a: &Formula| -> usize {
            let list = if global { &mut sets.global } else { &mut sets.local };
            if let Some(j) = list.iter().position(|(g, _, _)| g == a) {
                list[j].2 = list[j].2.max(k);
                return j;
            }
            // Bodies have modal depth <= 1, so `a` is modal-free.
            let cf = Cf::compile(a, symbols, &mut CountSets::default(), masks);
            list.push((a.clone(), masks.iter().map(|&m| cf.holds(m, &[], &[])).collect(), k));
            list.len() - 1
        };
        match f {
            Formula::Dia(k, a) => Cf::Local(slot(false, *k, a), *k),
            Formula::Glob(k, a) => Cf::Global(slot(true, *k, a), *k),
            Formula::Top => Cf::Top,
            Formula::Prop(p) | Formula::Var(p) => {
                Cf::Bit(symbols.iter().position(|x| x == p).expect("symbol declared"))
            }
            Formula::Not(a) => Cf::Not(Box::new(Cf::compile(a, symbols, sets, masks))),
            Formula::And(a, b) => Cf::And(
                Box::new(Cf::compile(a, symbols, sets, masks)),
                Box::new(Cf::compile(b, symbols, sets, masks)),
            ),
        }
    }

    fn holds(&self, q: u64, local: &[u32], global: &[u32]) -> bool {
        match self {
            Cf::Top => true,
            Cf::Bit(i) => (q >> i) & 1 == 1,
            Cf::Not(a) => !a.holds(q, local, global),
            Cf::And(a, b) => a.holds(q, local, global) && b.holds(q, local, global),
            Cf::Local(j, k) => local[*j] >= *k,
            Cf::Global(j, k) => global[*j] >= *k,
        }
    }
}

/// Automaton whose states are the subsets of pi ∪ heads; at round n a node
/// holds its labels together with the heads true there at round n.
pub fn gmsc1_to_fcmpa(prog: &GmscProgram) -> Result<Fcmpa> {
    if !prog.is_normal_form() {
        return Err(Error::Invalid(
            "program is not in normal form (terminal modal depth 0, iteration modal depth <= 1)".into(),
        ));
    }
    let symbols: Vec<String> = prog.pi().iter().chain(prog.heads()).cloned().collect();
    if symbols.len() > STATE_BITS_GUARD {
        return Err(Error::guard("automaton state bits", symbols.len(), STATE_BITS_GUARD));
    }
    let np = prog.pi().len();
    let nh = prog.heads().len();
    let n = 1usize << symbols.len();
    let masks: Vec<u64> = (0..n as u64).collect();
    let term: Vec<Cf> = (0..nh)
        .map(|i| Cf::compile(prog.terminal(i), &symbols, &mut CountSets::default(), &masks))
        .collect();
    let mut sets = CountSets::default();
    let iter: Arc<Vec<Cf>> = Arc::new(
        (0..nh)
            .map(|i| Cf::compile(prog.iteration(i), &symbols, &mut sets, &masks))
            .collect(),
    );
    let label_mask = (1u64 << np) - 1;
    let init: Vec<usize> = LabelSet::all(np)
        .map(|l| {
            let heads = term
                .iter()
                .enumerate()
                .filter(|(_, f)| f.holds(l.0, &[], &[]))
                .fold(0u64, |acc, (i, _)| acc | 1 << (np + i));
            (l.0 | heads) as usize
        })
        .collect();
    let states = masks.iter().map(|&m| render_mask(m, &symbols)).collect();
    let accepting = masks
        .iter()
        .map(|&m| (0..nh).any(|i| prog.is_appointed(i) && (m >> (np + i)) & 1 == 1))
        .collect();
    let rule = move |q: usize, local: &[u32], global: &[u32]| -> usize {
        let q = q as u64;
        let heads = iter
            .iter()
            .enumerate()
            .filter(|(_, f)| f.holds(q, local, global))
            .fold(0u64, |acc, (i, _)| acc | 1 << (np + i));
        ((q & label_mask) | heads) as usize
    };
    let counting = Counting {
        local: sets.local.into_iter().map(|(_, mem, cap)| (mem, cap)).collect(),
        global: sets.global.into_iter().map(|(_, mem, cap)| (mem, cap)).collect(),
        rule: Arc::new(rule),
    };
    let mut a = Fcmpa::new(
        prog.pi().to_vec(),
        states,
        init,
        Transition::Counting(Arc::new(counting)),
        accepting,
        Some(prog.width().max(1)),
        prog.is_global(),
    )?;
    a.symbols = Some((symbols, masks));
    Ok(a)
}

fn label_formula(l: LabelSet, pi: &[String]) -> Formula {
    and_all((0..pi.len()).map(|i| {
        if l.contains(i) {
            prop(&pi[i])
        } else {
            not(prop(&pi[i]))
        }
    }))
}

/// Program with one head per state: X_q holds at round n exactly where the
/// automaton is in state q at round n.
pub fn fcmpa_to_gmsc(a: &Fcmpa) -> Result<GmscProgram> {
    let k = a.bound.ok_or_else(|| Error::Invalid("unbounded automata have no program".into()))?;
    let n = a.len();
    let heads: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
    // by_target[q][q'] = disjuncts describing the neighbourhoods that move
    // q' to q.
    let mut by_target: Vec<Vec<Vec<Formula>>> = vec![vec![Vec::new(); n]; n];
    if let Transition::Counting(c) = &a.transition {
        let sigma = |sets: &[(Vec<bool>, u32)]| -> Vec<Formula> {
            sets.iter()
                .map(|(mem, _)| or_all((0..n).filter(|&q| mem[q]).map(|q| var(&heads[q]))))
                .collect()
        };
        let (ls, gs) = (sigma(&c.local), sigma(&c.global));
        let part = |sets: &[(Vec<bool>, u32)], sig: &[Formula], v: &[u32], modal: fn(u32, Formula) -> Formula, exact: fn(u32, Formula) -> Formula| {
            and_all(sets.iter().zip(sig).zip(v).filter(|(((_, cap), _), _)| *cap > 0).map(
                |(((_, cap), f), &x)| {
                    if x >= *cap {
                        modal(*cap, f.clone())
                    } else {
                        exact(x, f.clone())
                    }
                },
            ))
        };
        for (l, g) in c.combos()? {
            let phi = and(part(&c.local, &ls, &l, dia, dia_eq), part(&c.global, &gs, &g, glob, glob_eq));
            for qp in 0..n {
                by_target[(c.rule)(qp, &l, &g)][qp].push(phi.clone());
            }
        }
    } else {
        multiset_space(n, k, a.global)?;
        let all = multisets(n, k);
        let phi = |s: &Msg, modal: fn(u32, Formula) -> Formula, exact: fn(u32, Formula) -> Formula| {
            let mut counts = vec![0u32; n];
            for &(q, c) in s {
                counts[q] = c;
            }
            and_all((0..n).map(|q| {
                if counts[q] >= k {
                    modal(k, var(&heads[q]))
                } else {
                    exact(counts[q], var(&heads[q]))
                }
            }))
        };
        let phis: Vec<Formula> = all.iter().map(|s| phi(s, dia, dia_eq)).collect();
        let gphis: Vec<Formula> = if a.global {
            all.iter().map(|s| phi(s, glob, glob_eq)).collect()
        } else {
            Vec::new()
        };
        for qp in 0..n {
            for (si, s) in all.iter().enumerate() {
                if a.global {
                    for (gi, g) in all.iter().enumerate() {
                        let r = a.delta(qp, s, Some(g))?;
                        by_target[r][qp].push(and(phis[si].clone(), gphis[gi].clone()));
                    }
                } else {
                    let r = a.delta(qp, s, None)?;
                    by_target[r][qp].push(phis[si].clone());
                }
            }
        }
    }
    let terminal = (0..n)
        .map(|q| {
            or_all(
                LabelSet::all(a.pi.len())
                    .filter(|&l| a.init(l) == q)
                    .map(|l| label_formula(l, &a.pi)),
            )
        })
        .collect();
    let iteration = by_target
        .into_iter()
        .map(|row| {
            and_all(
                row.into_iter()
                    .enumerate()
                    .map(|(qp, ds)| implies(var(&heads[qp]), or_all(ds))),
            )
        })
        .collect();
    let appointed: Vec<String> = (0..n).filter(|&q| a.accepting[q]).map(|q| heads[q].clone()).collect();
    GmscProgram::new(Some(a.pi.clone()), heads, terminal, iteration, &appointed)
}

/// Polynomial size bound asserted for `fcmpa_to_gmsc`.
pub fn program_size_bound(a: &Fcmpa) -> u128 {
    let k = a.bound.unwrap_or(0) as u128;
    let q = a.len() as u128;
    let mut m: u128 = 1;
    let mut w: u128 = 1;
    if let Transition::Counting(c) = &a.transition {
        for (_, cap) in c.local.iter().chain(&c.global) {
            m = m.saturating_mul(*cap as u128 + 1);
        }
        w = w.saturating_add(q.saturating_mul((c.local.len() + c.global.len()) as u128));
    } else {
        for _ in 0..if a.global { 2 * a.len() } else { a.len() } {
            m = m.saturating_mul(k + 1);
        }
    }
    let base = (1u128 << a.pi.len()).saturating_add(q.saturating_mul(m).saturating_mul(w));
    16u128.saturating_mul(base.saturating_mul(base))
}

/// Round-n state of the width-k counting type automaton at the point.
pub fn simulate_type_automaton(pg: &PointedGraph, k: u32, n: u32) -> Result<GradedType> {
    if k == 0 {
        return Err(Error::Invalid("type width must be at least 1".into()));
    }
    Ok(run_type_automaton(pg, TypeKind::Width(k), n))
}

pub fn simulate_full_type_automaton(pg: &PointedGraph, n: u32) -> GradedType {
    run_type_automaton(pg, TypeKind::Full, n)
}

fn run_type_automaton(pg: &PointedGraph, kind: TypeKind, n: u32) -> GradedType {
    let g = &pg.graph;
    let mut cur: Vec<Arc<GradedType>> = (0..g.len())
        .map(|v| Arc::new(GradedType::leaf(kind, g.labels(v))))
        .collect();
    for round in 1..=n {
        cur = (0..g.len())
            .map(|v| {
                let kids = g.succ(v).iter().map(|&u| cur[u].clone());
                Arc::new(GradedType::extend(kind, cur[v].labels, round, kids))
            })
            .collect();
    }
    (*cur[pg.point]).clone()
}

fn table_from(
    n: usize,
    k: u32,
    f: impl Fn(usize, &Msg) -> usize,
) -> HashMap<(usize, Msg, Option<Msg>), usize> {
    let mut t = HashMap::new();
    for q in 0..n {
        for s in multisets(n, k) {
            let r = f(q, &s);
            t.insert((q, s, None), r);
        }
    }
    t
}

/// Alternates between two states forever, accepting in the second.
pub fn two_phase_clock() -> Fcmpa {
    Fcmpa::new(
        Vec::new(),
        vec!["tick".into(), "tock".into()],
        vec![0],
        Transition::Table(table_from(2, 1, |q, _| 1 - q)),
        vec![false, true],
        Some(1),
        false,
    )
    .expect("well formed")
}

/// Keeps its initial state, which records whether p holds.
pub fn constant_automaton() -> Fcmpa {
    Fcmpa::new(
        vec!["p".into()],
        vec!["no".into(), "yes".into()],
        vec![0, 1],
        Transition::Table(table_from(2, 1, |q, _| q)),
        vec![false, true],
        Some(1),
        false,
    )
    .expect("well formed")
}

/// Accepts from round 1 on at nodes of even out-degree; not bounded.
pub fn even_out_degree() -> Fcmpa {
    let delta = |_: usize, nb: &[(usize, u32)], _: Option<&[(usize, u32)]>| -> usize {
        let total: u32 = nb.iter().map(|&(_, c)| c).sum();
        if total.is_multiple_of(2) {
            1
        } else {
            2
        }
    };
    Fcmpa::new(
        Vec::new(),
        vec!["start".into(), "even".into(), "odd".into()],
        vec![0],
        Transition::Callback(Arc::new(delta)),
        vec![false, true, false],
        None,
        false,
    )
    .expect("well formed")
}
