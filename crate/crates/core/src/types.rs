//! Graded types: canonical descriptions of a node's neighbourhood up to a
//! modal depth, distinguishing child counts up to a width k (or exactly,
//! for full types).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gml::{and_all, dia, dia_eq, eval_gml, not, or_all, prop, top, Formula};
use crate::graph::{LabelSet, LabeledGraph, PointedGraph};

/// Guard on the number of width-k types enumerated at once.
pub const TYPE_GUARD: u128 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeKind {
    Width(u32),
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GradedType {
    pub kind: TypeKind,
    pub depth: u32,
    pub labels: LabelSet,
    pub children: BTreeMap<Arc<GradedType>, u32>,
    /// Total number of out-neighbours; full types of positive depth only.
    pub out_degree: Option<u32>,
}

impl GradedType {
    pub fn leaf(kind: TypeKind, labels: LabelSet) -> Self {
        GradedType {
            kind,
            depth: 0,
            labels,
            children: BTreeMap::new(),
            out_degree: None,
        }
    }

    /// The type one level deeper, given the labels and the multiset of
    /// child types (counted exactly; capped here for width types).
    pub fn extend(
        kind: TypeKind,
        labels: LabelSet,
        depth: u32,
        kids: impl IntoIterator<Item = Arc<GradedType>>,
    ) -> Self {
        let mut children: BTreeMap<Arc<GradedType>, u32> = BTreeMap::new();
        let mut degree = 0;
        for c in kids {
            degree += 1;
            let e = children.entry(c).or_insert(0);
            match kind {
                TypeKind::Width(k) => *e = (*e + 1).min(k),
                TypeKind::Full => *e += 1,
            }
        }
        GradedType {
            kind,
            depth,
            labels,
            children,
            out_degree: matches!(kind, TypeKind::Full).then_some(degree),
        }
    }

    /// Same type truncated to depth `d`.
    pub fn truncate(&self, d: u32) -> GradedType {
        if d >= self.depth {
            return self.clone();
        }
        if d == 0 {
            return GradedType::leaf(self.kind, self.labels);
        }
        let mut children: BTreeMap<Arc<GradedType>, u32> = BTreeMap::new();
        for (c, &n) in &self.children {
            let e = children.entry(Arc::new(c.truncate(d - 1))).or_insert(0);
            *e = match self.kind {
                TypeKind::Width(k) => (*e + n).min(k),
                TypeKind::Full => *e + n,
            };
        }
        GradedType {
            children,
            depth: d,
            ..self.clone()
        }
    }

    pub fn to_json(&self, pi: &[String]) -> Value {
        let children: Vec<Value> = self
            .children
            .iter()
            .map(|(c, n)| json!({"count": n, "type": c.to_json(pi)}))
            .collect();
        let mut v = json!({
            "depth": self.depth,
            "labels": self.labels.names(pi),
            "children": children,
        });
        if let Some(d) = self.out_degree {
            v["out_degree"] = json!(d);
        }
        v
    }

    pub fn render(&self, pi: &[String]) -> String {
        let mut s = format!("{{{}}}", self.labels.names(pi).join(","));
        if self.depth > 0 {
            let kids: Vec<String> = self
                .children
                .iter()
                .map(|(c, n)| format!("{}x{}", n, c.render(pi)))
                .collect();
            s.push_str(&format!("[{}]", kids.join(" ")));
        }
        s
    }
}

impl fmt::Display for GradedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..64).map(|i| format!("p{i}")).collect();
        f.write_str(&self.render(&names))
    }
}

fn types_at(g: &LabeledGraph, kind: TypeKind, n: u32) -> Vec<Arc<GradedType>> {
    let mut memo: HashMap<(usize, u32), Arc<GradedType>> = HashMap::new();
    (0..g.len()).map(|v| type_of(g, kind, v, n, &mut memo)).collect()
}

fn type_of(
    g: &LabeledGraph,
    kind: TypeKind,
    v: usize,
    n: u32,
    memo: &mut HashMap<(usize, u32), Arc<GradedType>>,
) -> Arc<GradedType> {
    if let Some(t) = memo.get(&(v, n)) {
        return t.clone();
    }
    let t = if n == 0 {
        Arc::new(GradedType::leaf(kind, g.labels(v)))
    } else {
        let kids: Vec<Arc<GradedType>> =
            g.succ(v).iter().map(|&u| type_of(g, kind, u, n - 1, memo)).collect();
        Arc::new(GradedType::extend(kind, g.labels(v), n, kids))
    };
    memo.insert((v, n), t.clone());
    t
}

/// Width-k, depth-n type of the point.
pub fn graded_type(pg: &PointedGraph, k: u32, n: u32) -> Result<GradedType> {
    if k == 0 {
        return Err(Error::Invalid("type width must be at least 1".into()));
    }
    Ok((*types_at(&pg.graph, TypeKind::Width(k), n)[pg.point]).clone())
}

pub fn full_type(pg: &PointedGraph, n: u32) -> GradedType {
    (*types_at(&pg.graph, TypeKind::Full, n)[pg.point]).clone()
}

fn label_formula(labels: LabelSet, pi: &[String]) -> Formula {
    and_all((0..pi.len()).map(|i| {
        if labels.contains(i) {
            prop(&pi[i])
        } else {
            not(prop(&pi[i]))
        }
    }))
}

/// Defining formula. Width types list the present child types with their
/// capped counts and box the disjunction of them, which pins every absent
/// type to count zero; full types pin the out-degree instead.
pub fn type_to_formula(t: &GradedType, pi: &[String]) -> Formula {
    let mut parts = vec![label_formula(t.labels, pi)];
    if t.depth > 0 {
        for (c, &n) in &t.children {
            let f = type_to_formula(c, pi);
            parts.push(match t.kind {
                TypeKind::Width(k) if n >= k => dia(k, f),
                _ => dia_eq(n, f),
            });
        }
        match t.kind {
            TypeKind::Width(_) => {
                let any = or_all(t.children.keys().map(|c| type_to_formula(c, pi)));
                parts.push(not(dia(1, not(any))));
            }
            TypeKind::Full => parts.push(dia_eq(t.out_degree.unwrap_or(0), top())),
        }
    }
    and_all(parts)
}

/// |T_{k,n}| over an alphabet of `pi_len` letters, or a guard error.
pub fn type_count(pi_len: usize, k: u32, n: u32) -> Result<u128> {
    let labels = 1u128 << pi_len;
    let mut t = labels;
    for _ in 0..n {
        let mut next = labels;
        for _ in 0..t {
            next = next.saturating_mul(k as u128 + 1);
            if next > TYPE_GUARD {
                return Err(Error::guard("graded type enumeration", format!("> {TYPE_GUARD}"), TYPE_GUARD));
            }
        }
        t = next;
    }
    if t > TYPE_GUARD {
        return Err(Error::guard("graded type enumeration", t, TYPE_GUARD));
    }
    Ok(t)
}

/// Every width-k type of depth n, in canonical order.
pub fn enumerate_types(pi_len: usize, k: u32, n: u32) -> Result<Vec<Arc<GradedType>>> {
    if k == 0 {
        return Err(Error::Invalid("type width must be at least 1".into()));
    }
    type_count(pi_len, k, n)?;
    let kind = TypeKind::Width(k);
    let mut level: Vec<Arc<GradedType>> = LabelSet::all(pi_len)
        .map(|l| Arc::new(GradedType::leaf(kind, l)))
        .collect();
    for d in 1..=n {
        let mut next = Vec::new();
        let mut counts = vec![0u32; level.len()];
        loop {
            let children: BTreeMap<Arc<GradedType>, u32> = level
                .iter()
                .zip(&counts)
                .filter(|(_, &c)| c > 0)
                .map(|(t, &c)| (t.clone(), c))
                .collect();
            for l in LabelSet::all(pi_len) {
                next.push(Arc::new(GradedType {
                    kind,
                    depth: d,
                    labels: l,
                    children: children.clone(),
                    out_degree: None,
                }));
            }
            // Odometer over [0..k]^|level|.
            let Some(i) = counts.iter().position(|&c| c < k) else { break };
            counts[i] += 1;
            counts[..i].fill(0);
        }
        next.sort();
        level = next;
    }
    Ok(level)
}

/// Tree whose root has exactly type `t`.
pub fn realizing_tree(t: &GradedType, pi: &[String]) -> PointedGraph {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut succ: Vec<Vec<usize>> = Vec::new();
    fn build(
        t: &GradedType,
        ids: &mut Vec<String>,
        labels: &mut Vec<LabelSet>,
        succ: &mut Vec<Vec<usize>>,
    ) -> usize {
        let me = ids.len();
        ids.push(format!("t{me}"));
        labels.push(t.labels);
        succ.push(Vec::new());
        for (c, &n) in &t.children {
            for _ in 0..n {
                let child = build(c, ids, labels, succ);
                succ[me].push(child);
            }
        }
        me
    }
    build(t, &mut ids, &mut labels, &mut succ);
    PointedGraph {
        graph: LabeledGraph::from_parts(pi.to_vec(), ids, labels, succ),
        point: 0,
    }
}

/// The width-k, depth-n types whose realizing trees satisfy `phi`.
pub fn gml_to_type_disjunction(
    phi: &Formula,
    pi: &[String],
    k: u32,
    n: u32,
) -> Result<Vec<Arc<GradedType>>> {
    if phi.has_glob() || !phi.is_gml() {
        return Err(Error::Invalid("type disjunctions need a GML formula without <e k>".into()));
    }
    let m = phi.measures();
    if m.modal_depth > n || m.width > k {
        return Err(Error::Invalid(format!(
            "formula has modal depth {} and width {}, types have depth {n} and width {k}",
            m.modal_depth, m.width
        )));
    }
    let mut out = Vec::new();
    for t in enumerate_types(pi.len(), k, n)? {
        if eval_gml(&realizing_tree(&t, pi), phi)? {
            out.push(t);
        }
    }
    Ok(out)
}
