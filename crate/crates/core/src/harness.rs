//! Brute-force equivalence checks: sweep a graph source, compare verdicts
//! (or decoded runs) of several machines node by node, report the first
//! disagreement.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::acceptance::{classify_all, run, Classifier, Machine, MachineKind, DEFAULT_CEILING};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{sample_graphs, GraphSpace, LabelSet, LabeledGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphSource {
    /// Every graph on 1..=max_nodes nodes, every node as the point.
    Exhaustive { max_nodes: usize },
    Sampled { max_nodes: usize, count: usize, seed: u64 },
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::Exhaustive { max_nodes } => write!(f, "exhaustive(nodes<={max_nodes})"),
            GraphSource::Sampled {
                max_nodes,
                count,
                seed,
            } => write!(f, "sampled(count={count}, nodes<={max_nodes}, seed={seed})"),
        }
    }
}

/// Index-addressable materialization of a source over a fixed alphabet.
pub enum Sweep {
    Space(GraphSpace),
    List(Vec<LabeledGraph>),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::Space(s) => s.len() as usize,
            Sweep::List(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> LabeledGraph {
        match self {
            Sweep::Space(s) => s.get(i as u64),
            Sweep::List(l) => l[i].clone(),
        }
    }
}

impl GraphSource {
    pub fn sweep(&self, pi: &[String]) -> Result<Sweep> {
        Ok(match *self {
            GraphSource::Exhaustive { max_nodes } => Sweep::Space(GraphSpace::new(pi, max_nodes)?),
            GraphSource::Sampled {
                max_nodes,
                count,
                seed,
            } => Sweep::List(sample_graphs(pi, max_nodes, count, seed)),
        })
    }
}

/// Object-safe view of a machine: enough to classify and to report runs.
pub trait Acceptor: Sync {
    fn kind(&self) -> MachineKind;
    fn alphabet(&self) -> &[String];
    fn verdicts(&self, g: &LabeledGraph, c: &Classifier, ceiling: usize) -> Result<Vec<bool>>;
    /// Accepting flags of rounds 0..=rounds, round-major.
    fn flags(&self, g: &LabeledGraph, rounds: usize) -> Result<Vec<Vec<bool>>>;
}

impl<M: Machine> Acceptor for M {
    fn kind(&self) -> MachineKind {
        Machine::kind(self)
    }

    fn alphabet(&self) -> &[String] {
        Machine::alphabet(self)
    }

    fn verdicts(&self, g: &LabeledGraph, c: &Classifier, ceiling: usize) -> Result<Vec<bool>> {
        classify_all(self, g, c, ceiling)
    }

    fn flags(&self, g: &LabeledGraph, rounds: usize) -> Result<Vec<Vec<bool>>> {
        Ok(run(self, g, rounds)?
            .iter()
            .map(|c| c.iter().map(|s| self.accepting(s)).collect())
            .collect())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub graph: Value,
    pub point: String,
    /// Verdict of each machine, in input order.
    pub verdicts: Vec<bool>,
    /// First round whose accepting flags at the point differ, if any within
    /// the inspected prefix.
    pub diverging_round: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivReport {
    pub machines: Vec<MachineKind>,
    pub classifier: String,
    pub source: String,
    pub graphs_checked: usize,
    pub pointed_checked: usize,
    pub equivalent: bool,
    pub counterexamples: Vec<Counterexample>,
    pub elapsed_ms: u128,
}

impl EquivReport {
    pub fn counterexample(&self) -> Option<&Counterexample> {
        self.counterexamples.first()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EquivOptions {
    pub exec: Exec,
    pub ceiling: usize,
    /// Keep sweeping after the first disagreement.
    pub collect_all: bool,
    /// Rounds inspected when locating the diverging round.
    pub divergence_rounds: usize,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions {
            exec: Exec::default(),
            ceiling: DEFAULT_CEILING,
            collect_all: false,
            divergence_rounds: 64,
        }
    }
}

fn same_alphabet(ms: &[&dyn Acceptor]) -> Result<Vec<String>> {
    let first = ms.first().ok_or_else(|| Error::Invalid("no machines to compare".into()))?;
    let set: BTreeSet<&String> = first.alphabet().iter().collect();
    for m in &ms[1..] {
        let other: BTreeSet<&String> = m.alphabet().iter().collect();
        if other != set {
            return Err(Error::PiMismatch(first.alphabet().to_vec(), m.alphabet().to_vec()));
        }
    }
    Ok(first.alphabet().to_vec())
}

fn disagreements(
    ms: &[&dyn Acceptor],
    g: &LabeledGraph,
    c: &Classifier,
    opts: &EquivOptions,
) -> Result<Vec<Counterexample>> {
    let verdicts: Vec<Vec<bool>> = ms.iter().map(|m| m.verdicts(g, c, opts.ceiling)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut flags: Option<Vec<Vec<Vec<bool>>>> = None;
    for v in 0..g.len() {
        let here: Vec<bool> = verdicts.iter().map(|vs| vs[v]).collect();
        if here.iter().all(|&b| b == here[0]) {
            continue;
        }
        if flags.is_none() {
            flags = Some(
                ms.iter()
                    .map(|m| m.flags(g, opts.divergence_rounds))
                    .collect::<Result<_>>()?,
            );
        }
        let fl = flags.as_ref().unwrap();
        let diverging_round =
            (0..=opts.divergence_rounds).find(|&r| fl.iter().any(|f| f[r][v] != fl[0][r][v]));
        out.push(Counterexample {
            graph: g.to_json(),
            point: g.id(v).to_string(),
            verdicts: here,
            diverging_round,
        });
        if !opts.collect_all {
            break;
        }
    }
    Ok(out)
}

/// Do all machines accept the same pointed graphs of `source` under `c`?
/// Resource guards and ceilings surface as errors, never as verdicts.
pub fn check_acceptance_equiv(
    ms: &[&dyn Acceptor],
    c: &Classifier,
    source: GraphSource,
    opts: EquivOptions,
) -> Result<EquivReport> {
    let start = Instant::now();
    let pi = same_alphabet(ms)?;
    let sweep = source.sweep(&pi)?;
    let n = sweep.len();
    let counterexamples = if opts.collect_all {
        let all = opts.exec.map(n, |i| disagreements(ms, &sweep.get(i), c, &opts));
        let mut out = Vec::new();
        for r in all {
            out.extend(r?);
        }
        out
    } else {
        match opts.exec.find_first(n, |i| match disagreements(ms, &sweep.get(i), c, &opts) {
            Ok(v) if v.is_empty() => None,
            other => Some(other),
        }) {
            None => Vec::new(),
            Some(r) => r?,
        }
    };
    let (graphs_checked, pointed_checked) = if counterexamples.is_empty() || opts.collect_all {
        let pointed = opts.exec.map(n, |i| sweep.get(i).len()).into_iter().sum();
        (n, pointed)
    } else {
        (0, 0)
    };
    Ok(EquivReport {
        machines: ms.iter().map(|m| m.kind()).collect(),
        classifier: c.to_string(),
        source: source.to_string(),
        graphs_checked,
        pointed_checked,
        equivalent: counterexamples.is_empty(),
        counterexamples,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

/// Which rounds of a machine are sampled: round `rate * n + offset` stands
/// for step n.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub rate: usize,
    pub offset: usize,
}

impl Schedule {
    pub const LOCKSTEP: Schedule = Schedule { rate: 1, offset: 0 };

    fn at(&self, n: usize) -> usize {
        self.rate * n + self.offset
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMismatch {
    pub graph: Value,
    pub point: String,
    pub step: usize,
    pub left: String,
    pub right: String,
}

/// Compares decoded per-node states of two machines for steps 0..=steps on
/// every graph of `source`; decoders also receive the node's labels.
#[allow(clippy::too_many_arguments)]
pub fn check_run_correspondence<A, B, V, DA, DB>(
    a: &A,
    b: &B,
    decode_a: DA,
    decode_b: DB,
    sched_a: Schedule,
    sched_b: Schedule,
    steps: usize,
    source: GraphSource,
    exec: Exec,
) -> Result<Option<RunMismatch>>
where
    A: Machine,
    B: Machine,
    V: PartialEq + fmt::Debug,
    DA: Fn(&A::State, LabelSet) -> V + Sync,
    DB: Fn(&B::State, LabelSet) -> V + Sync,
{
    let pi = same_alphabet(&[a as &dyn Acceptor, b as &dyn Acceptor])?;
    let sweep = source.sweep(&pi)?;
    let check = |i: usize| -> Result<Option<RunMismatch>> {
        let g = sweep.get(i);
        let labels = g.labels_over(&pi)?;
        let ra = run(a, &g, sched_a.at(steps))?;
        let rb = run(b, &g, sched_b.at(steps))?;
        for n in 0..=steps {
            for v in 0..g.len() {
                let x = decode_a(&ra[sched_a.at(n)][v], labels[v]);
                let y = decode_b(&rb[sched_b.at(n)][v], labels[v]);
                if x != y {
                    return Ok(Some(RunMismatch {
                        graph: g.to_json(),
                        point: g.id(v).to_string(),
                        step: n,
                        left: format!("{x:?}"),
                        right: format!("{y:?}"),
                    }));
                }
            }
        }
        Ok(None)
    };
    exec.find_first(sweep.len(), |i| check(i).transpose()).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::gmsc::GmscProgram;

    #[test]
    fn program_agrees_with_itself_and_not_with_its_negation() {
        let p = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        let q = GmscProgram::parse("X(0) :- !p; X :- !<1> !X; appointed: X;").unwrap();
        let src = GraphSource::Exhaustive { max_nodes: 2 };
        let same = check_acceptance_equiv(&[&p, &p.clone()], &Classifier::Standard, src, EquivOptions::default()).unwrap();
        assert!(same.equivalent);
        assert_eq!(same.pointed_checked as u128, crate::graph::pointed_graph_count(1, 2));
        for exec in [Exec::Sequential, Exec::Parallel] {
            let opts = EquivOptions {
                exec,
                ..EquivOptions::default()
            };
            let diff = check_acceptance_equiv(&[&p, &q], &Classifier::Standard, src, opts).unwrap();
            let cex = diff.counterexample().unwrap();
            assert_eq!(cex.verdicts.len(), 2);
            assert_ne!(cex.verdicts[0], cex.verdicts[1]);
            assert_eq!(cex.diverging_round, Some(0));
        }
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let p = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        let q = GmscProgram::parse("X(0) :- q; X :- X; appointed: X;").unwrap();
        let r = check_acceptance_equiv(
            &[&p, &q],
            &Classifier::Standard,
            GraphSource::Exhaustive { max_nodes: 1 },
            EquivOptions::default(),
        );
        assert!(matches!(r, Err(Error::PiMismatch(..))));
    }

    #[test]
    fn lockstep_runs_of_identical_programs_match() {
        let p = GmscProgram::parse(corpus::GLOBAL).unwrap();
        let dec = |s: &crate::bits::Bits, _: LabelSet| s.clone();
        let m = check_run_correspondence(
            &p,
            &p,
            dec,
            dec,
            Schedule::LOCKSTEP,
            Schedule::LOCKSTEP,
            4,
            GraphSource::Sampled {
                max_nodes: 4,
                count: 50,
                seed: 7,
            },
            Exec::default(),
        )
        .unwrap();
        assert!(m.is_none());
    }
}
