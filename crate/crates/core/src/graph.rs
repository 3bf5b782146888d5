use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subset of a label alphabet, bit `i` standing for the `i`-th proposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSet(pub u64);

impl LabelSet {
    pub fn contains(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        LabelSet(self.0 | (1 << i))
    }

    /// Every subset of an alphabet of size `n`, in binary counting order.
    pub fn all(n: usize) -> impl Iterator<Item = LabelSet> {
        (0..1u64 << n).map(LabelSet)
    }

    pub fn names(self, pi: &[String]) -> Vec<String> {
        (0..pi.len())
            .filter(|&i| self.contains(i))
            .map(|i| pi[i].clone())
            .collect()
    }
}

pub(crate) const MAX_PI: usize = 32;

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Finite directed graph with node labels over an alphabet `pi`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledGraph {
    pi: Vec<String>,
    ids: Vec<String>,
    labels: Vec<LabelSet>,
    succ: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    id: String,
    #[serde(default)]
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    pi: Vec<String>,
    nodes: Vec<NodeFile>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

impl LabeledGraph {
    /// Builds a graph from node ids, their label names, and edges by id.
    pub fn new(
        pi: Vec<String>,
        nodes: Vec<(String, Vec<String>)>,
        edges: Vec<(String, String)>,
    ) -> Result<Self> {
        if pi.len() > MAX_PI {
            return Err(Error::Invalid(format!("at most {MAX_PI} propositions")));
        }
        let mut seen = BTreeSet::new();
        for p in &pi {
            if !seen.insert(p) {
                return Err(Error::Invalid(format!("duplicate proposition `{p}`")));
            }
        }
        let mut index = HashMap::new();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (id, ls) in nodes {
            if !valid_id(&id) {
                return Err(Error::Invalid(format!("bad node id `{id}`")));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::Invalid(format!("duplicate node id `{id}`")));
            }
            let mut set = LabelSet::default();
            for l in ls {
                let i = pi
                    .iter()
                    .position(|p| *p == l)
                    .ok_or_else(|| Error::Invalid(format!("label `{l}` outside declared pi")))?;
                set = set.with(i);
            }
            ids.push(id);
            labels.push(set);
        }
        let mut succ = vec![BTreeSet::new(); ids.len()];
        for (a, b) in edges {
            let u = *index
                .get(&a)
                .ok_or_else(|| Error::Invalid(format!("undeclared node `{a}`")))?;
            let v = *index
                .get(&b)
                .ok_or_else(|| Error::Invalid(format!("undeclared node `{b}`")))?;
            succ[u].insert(v);
        }
        Ok(LabeledGraph {
            pi,
            ids,
            labels,
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Index-level constructor; caller guarantees consistency.
    pub(crate) fn from_parts(
        pi: Vec<String>,
        ids: Vec<String>,
        labels: Vec<LabelSet>,
        succ: Vec<Vec<usize>>,
    ) -> Self {
        LabeledGraph { pi, ids, labels, succ }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph json: {e}")))?;
        LabeledGraph::new(
            file.pi,
            file.nodes.into_iter().map(|n| (n.id, n.labels)).collect(),
            file.edges,
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = GraphFile {
            pi: self.pi.clone(),
            nodes: (0..self.len())
                .map(|v| NodeFile {
                    id: self.ids[v].clone(),
                    labels: self.labels[v].names(&self.pi),
                })
                .collect(),
            edges: self
                .edges()
                .map(|(u, v)| (self.ids[u].clone(), self.ids[v].clone()))
                .collect(),
        };
        serde_json::to_value(file).expect("graph serializes")
    }

    pub fn pi(&self) -> &[String] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn labels(&self, v: usize) -> LabelSet {
        self.labels[v]
    }

    pub fn has_label(&self, v: usize, prop: &str) -> Result<bool> {
        let i = self
            .pi
            .iter()
            .position(|p| p == prop)
            .ok_or_else(|| Error::UndeclaredProp(prop.to_string()))?;
        Ok(self.labels[v].contains(i))
    }

    /// Out-neighbours of `v` in declaration order.
    pub fn succ(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn out_neighbors(&self, id: &str) -> Result<Vec<&str>> {
        let v = self.node(id)?;
        Ok(self.succ[v].iter().map(|&u| self.id(u)).collect())
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    /// Node labels re-expressed over another alphabet. Fails if a node
    /// carries a label the target alphabet lacks.
    pub fn labels_over(&self, pi: &[String]) -> Result<Vec<LabelSet>> {
        if pi == self.pi.as_slice() {
            return Ok(self.labels.clone());
        }
        let map: Vec<Option<usize>> = self
            .pi
            .iter()
            .map(|p| pi.iter().position(|q| q == p))
            .collect();
        self.labels
            .iter()
            .map(|l| {
                let mut out = LabelSet::default();
                for (i, target) in map.iter().enumerate() {
                    if l.contains(i) {
                        match target {
                            Some(j) => out = out.with(*j),
                            None => {
                                return Err(Error::Invalid(format!(
                                    "label `{}` outside the machine alphabet",
                                    self.pi[i]
                                )))
                            }
                        }
                    }
                }
                Ok(out)
            })
            .collect()
    }

    pub fn with_point(self, id: &str) -> Result<PointedGraph> {
        let point = self.node(id)?;
        Ok(PointedGraph { graph: self, point })
    }

    /// Isomorphic copy with node v moved to position perm[v] and renamed.
    pub fn permuted(&self, perm: &[usize]) -> LabeledGraph {
        let n = self.len();
        let mut ids = vec![String::new(); n];
        let mut labels = vec![LabelSet::default(); n];
        let mut succ = vec![Vec::new(); n];
        for v in 0..n {
            ids[perm[v]] = format!("r{}", self.ids[v]);
            labels[perm[v]] = self.labels[v];
        }
        for (u, v) in self.edges() {
            succ[perm[u]].push(perm[v]);
        }
        for s in &mut succ {
            s.sort_unstable();
        }
        LabeledGraph::from_parts(self.pi.clone(), ids, labels, succ)
    }
}

impl fmt::Display for LabeledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// A graph together with a distinguished node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointedGraph {
    pub graph: LabeledGraph,
    pub point: usize,
}

impl PointedGraph {
    pub fn new(graph: LabeledGraph, point: usize) -> Result<Self> {
        if point >= graph.len() {
            return Err(Error::UnknownNode(point.to_string()));
        }
        Ok(PointedGraph { graph, point })
    }
}

/// The space of all graphs on 1..=max_nodes nodes named "1".."n" over `pi`,
/// addressable by index so that sweeps can be split across workers.
#[derive(Clone, Debug)]
pub struct GraphSpace {
    pi: Vec<String>,
    max_nodes: usize,
    starts: Vec<u64>,
}

/// Default cap on |pi| * max_nodes for exhaustive enumeration.
pub const ENUM_LABEL_GUARD: usize = 12;
/// Default cap on the number of pointed graphs in one exhaustive sweep.
pub const ENUM_COUNT_GUARD: u64 = 50_000_000;

impl GraphSpace {
    pub fn new(pi: &[String], max_nodes: usize) -> Result<Self> {
        if max_nodes == 0 {
            return Err(Error::Invalid("max_nodes must be at least 1".into()));
        }
        let pointed = pointed_graph_count(pi.len(), max_nodes);
        if pi.len() * max_nodes > ENUM_LABEL_GUARD || pointed > ENUM_COUNT_GUARD as u128 {
            return Err(Error::guard(
                "pointed-graph enumeration",
                pointed,
                format!("|pi|*max_nodes <= {ENUM_LABEL_GUARD} and count <= {ENUM_COUNT_GUARD}"),
            ));
        }
        let mut starts = vec![0u64];
        for n in 1..=max_nodes {
            let here = 1u64 << (n * n + pi.len() * n);
            starts.push(starts.last().unwrap() + here);
        }
        Ok(GraphSpace {
            pi: pi.to_vec(),
            max_nodes,
            starts,
        })
    }

    pub fn len(&self) -> u64 {
        self.starts[self.max_nodes]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: u64) -> LabeledGraph {
        let n = (1..=self.max_nodes)
            .find(|&n| index < self.starts[n])
            .expect("index in range");
        let local = index - self.starts[n - 1];
        let label_bits = self.pi.len() * n;
        let label_word = local & ((1u64 << label_bits) - 1);
        let edge_word = local >> label_bits;
        let ids = (1..=n).map(|i| i.to_string()).collect();
        let labels = (0..n)
            .map(|v| LabelSet((label_word >> (v * self.pi.len())) & ((1 << self.pi.len()) - 1)))
            .collect();
        let succ = (0..n)
            .map(|u| (0..n).filter(|v| (edge_word >> (u * n + v)) & 1 == 1).collect())
            .collect();
        LabeledGraph::from_parts(self.pi.clone(), ids, labels, succ)
    }
}

/// Closed-form count: sum over n of n * 2^(n^2) * 2^(|pi| n).
pub fn pointed_graph_count(pi_len: usize, max_nodes: usize) -> u128 {
    (1..=max_nodes as u32)
        .map(|n| {
            let shift = n * n + pi_len as u32 * n;
            if shift >= 120 {
                u128::MAX / 2
            } else {
                n as u128 * (1u128 << shift)
            }
        })
        .fold(0u128, |a, b| a.saturating_add(b))
}

pub fn enumerate_pointed_graphs(
    pi: &[String],
    max_nodes: usize,
) -> Result<impl Iterator<Item = PointedGraph>> {
    let space = GraphSpace::new(pi, max_nodes)?;
    Ok((0..space.len()).flat_map(move |i| {
        let g = space.get(i);
        (0..g.len()).map(move |v| PointedGraph {
            graph: g.clone(),
            point: v,
        })
    }))
}

/// Seeded random graphs: node count uniform in 1..=max_nodes, each edge and
/// each label present with probability one half.
pub fn sample_graphs(pi: &[String], max_nodes: usize, count: usize, seed: u64) -> Vec<LabeledGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_nodes.max(1));
            let ids = (1..=n).map(|i| i.to_string()).collect();
            let labels = (0..n)
                .map(|_| {
                    let mut s = LabelSet::default();
                    for i in 0..pi.len() {
                        if rng.gen_bool(0.5) {
                            s = s.with(i);
                        }
                    }
                    s
                })
                .collect();
            let succ = (0..n)
                .map(|_| (0..n).filter(|_| rng.gen_bool(0.5)).collect())
                .collect();
            LabeledGraph::from_parts(pi.to_vec(), ids, labels, succ)
        })
        .collect()
}

/// Tree of walks from the point of length at most `depth`; each walk is
/// labeled like its last node.
pub fn unravel(pg: &PointedGraph, depth: usize) -> PointedGraph {
    let g = &pg.graph;
    let mut ids: Vec<String> = vec![g.id(pg.point).to_string()];
    let mut tails = vec![pg.point];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new()];
    let mut used: BTreeSet<String> = ids.iter().cloned().collect();
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &w in &frontier {
            for &u in g.succ(tails[w]) {
                let mut name = format!("{}_{}", ids[w], g.id(u));
                if used.contains(&name) {
                    name = format!("{}_{}", name, ids.len());
                }
                used.insert(name.clone());
                let id = ids.len();
                ids.push(name);
                tails.push(u);
                succ.push(Vec::new());
                succ[w].push(id);
                next.push(id);
            }
        }
        frontier = next;
    }
    let labels = tails.iter().map(|&t| g.labels(t)).collect();
    PointedGraph {
        graph: LabeledGraph::from_parts(g.pi().to_vec(), ids, labels, succ),
        point: 0,
    }
}
