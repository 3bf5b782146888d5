//! Graph neural networks over a finite floating-point system: R-simple
//! aggregate-combine networks, lookup/callback networks, N-layer networks,
//! and the constructions from programs and automata.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::acceptance::{Machine, MachineKind};
use crate::automata::Fcmpa;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::float::{sum_sorted, Float, FloatSystem};
use crate::gml::Formula;
use crate::gmsc::GmscProgram;
use crate::graph::{LabelSet, LabeledGraph};
use crate::transform::{balance, balanced_depth};

/// Sorted (vector, count) pairs.
pub type VecMsg = Vec<(Vec<Float>, u32)>;

pub type GnnFn = dyn Fn(&[Float], &[(Vec<Float>, u32)], Option<&[(Vec<Float>, u32)]>) -> Vec<Float> + Send + Sync;

/// x' = ReLU*(SUM_S{x_k C_kl, y_k A_kl, z_k R_kl, b_l}), y and z the
/// per-coordinate SUM_S over out-neighbours and over all nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RSimpleParams {
    pub c: Vec<Vec<Float>>,
    pub a: Vec<Vec<Float>>,
    pub r: Option<Vec<Vec<Float>>>,
    pub b: Vec<Float>,
}

/// Nonzero entries of each column, cached for stepping.
#[derive(Clone, Debug, Default)]
struct Columns {
    c: Vec<Vec<(usize, Float)>>,
    a: Vec<Vec<(usize, Float)>>,
    r: Vec<Vec<(usize, Float)>>,
    a_rows: Vec<usize>,
    r_rows: Vec<usize>,
}

impl RSimpleParams {
    pub fn zeros(sys: FloatSystem, d: usize, global: bool) -> Self {
        let z = vec![vec![sys.zero(); d]; d];
        RSimpleParams {
            c: z.clone(),
            a: z.clone(),
            r: global.then_some(z),
            b: vec![sys.zero(); d],
        }
    }

    fn columns(&self) -> Columns {
        let d = self.b.len();
        let col = |m: &Vec<Vec<Float>>| -> Vec<Vec<(usize, Float)>> {
            (0..d)
                .map(|l| (0..d).filter(|&k| !m[k][l].is_zero()).map(|k| (k, m[k][l])).collect())
                .collect()
        };
        let rows = |m: &Vec<Vec<Float>>| -> Vec<usize> {
            (0..d).filter(|&k| m[k].iter().any(|x| !x.is_zero())).collect()
        };
        Columns {
            c: col(&self.c),
            a: col(&self.a),
            r: self.r.as_ref().map(col).unwrap_or_else(|| vec![Vec::new(); d]),
            a_rows: rows(&self.a),
            r_rows: self.r.as_ref().map(rows).unwrap_or_default(),
        }
    }
}

#[derive(Clone)]
pub enum GnnTransition {
    RSimple(RSimpleParams),
    Callback(Arc<GnnFn>),
}

impl fmt::Debug for GnnTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GnnTransition::RSimple(p) => write!(f, "RSimple(d = {})", p.b.len()),
            GnnTransition::Callback(_) => f.write_str("Callback"),
        }
    }
}

#[derive(Clone)]
pub enum Accepting {
    Set(BTreeSet<Vec<Float>>),
    /// Some appointed coordinate is 1 while the clock coordinate is 1;
    /// vectors with the clock coordinate off are accepting iff `aux_accept`.
    Structural {
        appointed: Vec<usize>,
        clock: usize,
        aux_accept: bool,
    },
    Predicate(Arc<AcceptFn>),
}

impl fmt::Debug for Accepting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Accepting::Set(s) => write!(f, "Set({} vectors)", s.len()),
            Accepting::Structural {
                appointed,
                clock,
                aux_accept,
            } => write!(f, "Structural({appointed:?}, clock {clock}, aux {aux_accept})"),
            Accepting::Predicate(_) => f.write_str("Predicate"),
        }
    }
}

pub type AcceptFn = dyn Fn(&[Float]) -> bool + Send + Sync;

/// Accepting-round convention of `gmsc_to_rsimple`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RSimpleMode {
    /// Accept only in rounds that close a clock period.
    Standard,
    /// Rounds inside a period count as accepting.
    FixedPoint,
    /// Same flags as standard.
    Buchi,
    /// The clock runs once and latches; heads are held at 0 until it
    /// latches so that every interleaved copy of the run is synchronized.
    Convergence,
}

/// Where the program lives inside a network built by `gmsc_to_rsimple`.
#[derive(Clone, Debug)]
pub struct RSimpleLayout {
    pub balanced: GmscProgram,
    pub subformulas: Vec<Formula>,
    /// Coordinate of each head of `balanced`.
    pub head_coords: Vec<usize>,
    /// First clock coordinate; the clock occupies `depth + 1` coordinates.
    pub clock: usize,
    /// Common formula depth of the balanced iteration bodies.
    pub depth: u32,
    pub mode: RSimpleMode,
}

impl RSimpleLayout {
    pub fn period(&self) -> usize {
        self.depth as usize + 1
    }
}

#[derive(Clone, Debug)]
pub struct GnnF {
    system: FloatSystem,
    dim: usize,
    pi: Vec<String>,
    init: Vec<Vec<Float>>,
    transition: GnnTransition,
    accepting: Accepting,
    bound: Option<u32>,
    columns: Columns,
    layout: Option<Arc<RSimpleLayout>>,
}

fn relu_star(sys: FloatSystem, x: Float) -> Float {
    if x.is_negative() {
        return sys.zero();
    }
    if sys.n() >= 1 {
        let one = sys.int(1);
        if x > one {
            return one;
        }
    }
    x
}

fn times(x: Float, w: Float) -> Float {
    if w.is_negative() && w.negate() == w.system().int(1) && w.system().n() >= 1 {
        return x.negate();
    }
    if w.system().n() >= 1 && w == w.system().int(1) {
        return x;
    }
    x.times(w)
}

fn sum_s(sys: FloatSystem, mut xs: Vec<Float>) -> Float {
    sum_sorted(sys, &mut xs)
}

fn collect_vec_msg<'a>(vs: impl Iterator<Item = &'a Vec<Float>>, bound: Option<u32>) -> VecMsg {
    let mut m: BTreeMap<&Vec<Float>, u32> = BTreeMap::new();
    for v in vs {
        *m.entry(v).or_insert(0) += 1;
    }
    m.into_iter()
        .filter_map(|(v, c)| {
            let c = bound.map_or(c, |k| c.min(k));
            (c > 0).then(|| (v.clone(), c))
        })
        .collect()
}

impl GnnF {
    pub fn new(
        system: FloatSystem,
        pi: Vec<String>,
        init: Vec<Vec<Float>>,
        transition: GnnTransition,
        accepting: Accepting,
        bound: Option<u32>,
    ) -> Result<Self> {
        if pi.len() > 16 {
            return Err(Error::Invalid("label alphabet too large for an init table".into()));
        }
        if init.len() != 1 << pi.len() {
            return Err(Error::Invalid("init must map every label subset".into()));
        }
        let dim = init[0].len();
        let in_sys = |v: &Vec<Float>| v.len() == dim && v.iter().all(|x| x.system() == system);
        if !init.iter().all(in_sys) {
            return Err(Error::Invalid("init vectors must share the dimension and system".into()));
        }
        if let GnnTransition::RSimple(p) = &transition {
            let square = |m: &Vec<Vec<Float>>| m.len() == dim && m.iter().all(in_sys);
            if !square(&p.c) || !square(&p.a) || !p.r.as_ref().is_none_or(square) || !in_sys(&p.b) {
                return Err(Error::Invalid(format!("R-simple parameters must be {dim}x{dim} over {system}")));
            }
        }
        if let Accepting::Structural { appointed, clock, .. } = &accepting {
            if *clock >= dim || appointed.iter().any(|&a| a >= dim) {
                return Err(Error::Invalid("accepting coordinates out of range".into()));
            }
        }
        let columns = match &transition {
            GnnTransition::RSimple(p) => p.columns(),
            GnnTransition::Callback(_) => Columns::default(),
        };
        Ok(GnnF {
            system,
            dim,
            pi,
            init,
            transition,
            accepting,
            bound,
            columns,
            layout: None,
        })
    }

    pub fn system(&self) -> FloatSystem {
        self.system
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pi(&self) -> &[String] {
        &self.pi
    }

    pub fn init(&self, l: LabelSet) -> &[Float] {
        &self.init[l.0 as usize]
    }

    pub fn params(&self) -> Option<&RSimpleParams> {
        match &self.transition {
            GnnTransition::RSimple(p) => Some(p),
            GnnTransition::Callback(_) => None,
        }
    }

    pub fn layout(&self) -> Option<&RSimpleLayout> {
        self.layout.as_deref()
    }

    pub fn is_accepting(&self, x: &[Float]) -> bool {
        match &self.accepting {
            Accepting::Set(s) => s.contains(x),
            Accepting::Structural {
                appointed,
                clock,
                aux_accept,
            } => {
                let one = self.system.int(1);
                if x[*clock] != one {
                    *aux_accept
                } else {
                    appointed.iter().any(|&a| x[a] == one)
                }
            }
            Accepting::Predicate(p) => p(x),
        }
    }

    /// Same network with replaced R-simple parameters.
    pub fn with_params(&self, p: RSimpleParams) -> Result<GnnF> {
        let mut g = GnnF::new(
            self.system,
            self.pi.clone(),
            self.init.clone(),
            GnnTransition::RSimple(p),
            self.accepting.clone(),
            self.bound,
        )?;
        g.layout = self.layout.clone();
        Ok(g)
    }

    pub fn initial(&self, g: &LabeledGraph) -> Result<Vec<Vec<Float>>> {
        Ok(g.labels_over(&self.pi)?.iter().map(|&l| self.init(l).to_vec()).collect())
    }

    /// One synchronous round.
    pub fn step_gnn(&self, g: &LabeledGraph, cur: &[Vec<Float>]) -> Result<Vec<Vec<Float>>> {
        if cur.len() != g.len() || cur.iter().any(|x| x.len() != self.dim) {
            return Err(Error::Invalid("configuration does not match the graph".into()));
        }
        let sys = self.system;
        match &self.transition {
            GnnTransition::RSimple(_) => {
                let cols = &self.columns;
                let mut z = vec![sys.zero(); self.dim];
                for &k in &cols.r_rows {
                    z[k] = sum_s(sys, cur.iter().map(|x| x[k]).filter(|x| !x.is_zero()).collect());
                }
                let b = &self.params().expect("R-simple").b;
                Ok((0..g.len())
                    .map(|v| {
                        let x = &cur[v];
                        let mut y = vec![sys.zero(); self.dim];
                        for &k in &cols.a_rows {
                            y[k] = sum_s(
                                sys,
                                g.succ(v).iter().map(|&u| cur[u][k]).filter(|x| !x.is_zero()).collect(),
                            );
                        }
                        (0..self.dim)
                            .map(|l| {
                                let mut terms: Vec<Float> = Vec::new();
                                for (src, col) in [(x, &cols.c[l]), (&y, &cols.a[l]), (&z, &cols.r[l])] {
                                    for &(k, w) in col {
                                        if !src[k].is_zero() {
                                            terms.push(times(src[k], w));
                                        }
                                    }
                                }
                                if !b[l].is_zero() {
                                    terms.push(b[l]);
                                }
                                relu_star(sys, sum_s(sys, terms))
                            })
                            .collect()
                    })
                    .collect())
            }
            GnnTransition::Callback(f) => {
                let gl = Some(collect_vec_msg(cur.iter(), self.bound));
                (0..g.len())
                    .map(|v| {
                        let nb = collect_vec_msg(g.succ(v).iter().map(|&u| &cur[u]), self.bound);
                        let out = f(&cur[v], &nb, gl.as_deref());
                        if out.len() != self.dim || out.iter().any(|x| x.system() != sys) {
                            return Err(Error::Invalid("transition left the feature space".into()));
                        }
                        Ok(out)
                    })
                    .collect()
            }
        }
    }

    pub fn to_json(&self) -> Result<Value> {
        let p = self
            .params()
            .ok_or_else(|| Error::Invalid("only R-simple networks can be exported".into()))?;
        let lit = |v: &Vec<Float>| -> Vec<String> { v.iter().map(Float::literal).collect() };
        let mat = |m: &Vec<Vec<Float>>| -> Vec<Vec<String>> { m.iter().map(lit).collect() };
        let accepting = match &self.accepting {
            Accepting::Set(s) => json!({"kind": "set", "vectors": s.iter().map(lit).collect::<Vec<_>>()}),
            Accepting::Structural {
                appointed,
                clock,
                aux_accept,
            } => json!({"kind": "structural", "appointed": appointed, "clock": clock, "aux_accept": aux_accept}),
            Accepting::Predicate(_) => {
                return Err(Error::Invalid("predicate acceptance cannot be exported".into()))
            }
        };
        let mut v = json!({
            "system": self.system.to_string(),
            "dim": self.dim,
            "pi": self.pi,
            "init": LabelSet::all(self.pi.len())
                .map(|l| json!({"labels": l.names(&self.pi), "vector": lit(&self.init[l.0 as usize])}))
                .collect::<Vec<_>>(),
            "C": mat(&p.c),
            "A": mat(&p.a),
            "b": lit(&p.b),
            "accepting": accepting,
        });
        if let Some(r) = &p.r {
            v["R"] = json!(mat(r));
        }
        Ok(v)
    }

    pub fn parse(text: &str) -> Result<GnnF> {
        let file: GnnFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("GNN JSON: {e}")))?;
        let sys: FloatSystem = file.system.parse()?;
        let vec = |v: &[String]| -> Result<Vec<Float>> { v.iter().map(|s| Float::parse(sys, s)).collect() };
        let mat = |m: &[Vec<String>]| -> Result<Vec<Vec<Float>>> { m.iter().map(|r| vec(r)).collect() };
        if file.pi.len() > 16 {
            return Err(Error::Invalid("label alphabet too large for an init table".into()));
        }
        let mut init: Vec<Option<Vec<Float>>> = vec![None; 1 << file.pi.len()];
        for e in &file.init {
            let mut l = LabelSet::default();
            for n in &e.labels {
                let i = file
                    .pi
                    .iter()
                    .position(|p| p == n)
                    .ok_or_else(|| Error::UndeclaredProp(n.clone()))?;
                l = l.with(i);
            }
            init[l.0 as usize] = Some(vec(&e.vector)?);
        }
        let init: Vec<Vec<Float>> = init
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Invalid("init does not cover every label subset".into()))?;
        if init[0].len() != file.dim {
            return Err(Error::Invalid("init vectors disagree with dim".into()));
        }
        let accepting = match file.accepting {
            AcceptFile::Set { vectors } => Accepting::Set(vectors.iter().map(|v| vec(v)).collect::<Result<_>>()?),
            AcceptFile::Structural {
                appointed,
                clock,
                aux_accept,
            } => Accepting::Structural {
                appointed,
                clock,
                aux_accept,
            },
        };
        let params = RSimpleParams {
            c: mat(&file.c)?,
            a: mat(&file.a)?,
            r: file.r.as_deref().map(mat).transpose()?,
            b: vec(&file.b)?,
        };
        GnnF::new(sys, file.pi, init, GnnTransition::RSimple(params), accepting, None)
    }
}

#[derive(Deserialize)]
struct InitFile {
    labels: Vec<String>,
    vector: Vec<String>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum AcceptFile {
    Set {
        vectors: Vec<Vec<String>>,
    },
    Structural {
        appointed: Vec<usize>,
        clock: usize,
        #[serde(default)]
        aux_accept: bool,
    },
}

#[derive(Deserialize)]
struct GnnFile {
    system: String,
    dim: usize,
    pi: Vec<String>,
    init: Vec<InitFile>,
    #[serde(rename = "C")]
    c: Vec<Vec<String>>,
    #[serde(rename = "A")]
    a: Vec<Vec<String>>,
    #[serde(rename = "R", default)]
    r: Option<Vec<Vec<String>>>,
    b: Vec<String>,
    accepting: AcceptFile,
}

impl Machine for GnnF {
    type State = Vec<Float>;

    fn kind(&self) -> MachineKind {
        MachineKind::Gnn
    }

    fn alphabet(&self) -> &[String] {
        &self.pi
    }

    fn start(&self, g: &LabeledGraph) -> Result<Vec<Vec<Float>>> {
        self.initial(g)
    }

    fn next(&self, g: &LabeledGraph, cur: &[Vec<Float>]) -> Result<Vec<Vec<Float>>> {
        self.step_gnn(g, cur)
    }

    fn accepting(&self, s: &Vec<Float>) -> bool {
        self.is_accepting(s)
    }
}

/// Float system used by `gmsc_to_rsimple`: p = 1, n = 1 and base
/// max(2, K + 1), so that 0..K are exact and neighbour sums saturate at K.
pub fn rsimple_system(width: u32) -> Result<FloatSystem> {
    FloatSystem::new(1, 1, (width + 1).max(2))
}

/// R-simple network equivalent to `prog` under the classifier matching
/// `mode`. Program round n is network round (n + 1)(D' + 1), D' being the
/// balanced depth; the extra period absorbs the balancing shift.
pub fn gmsc_to_rsimple(prog: &GmscProgram, mode: RSimpleMode) -> Result<GnnF> {
    let bal = balance(prog)?;
    let depth = balanced_depth(prog);
    let sys = rsimple_system(bal.width())?;
    let mut circ = Circuit::new(bal.pi().to_vec(), bal.heads().to_vec());
    let bodies: Vec<usize> = (0..bal.heads().len())
        .map(|i| circ.add(bal.iteration(i)))
        .collect::<Result<_>>()?;
    let head_coords: Vec<usize> = bal
        .heads()
        .iter()
        .map(|h| circ.add(&Formula::Var(h.clone())))
        .collect::<Result<_>>()?;
    let n = circ.len();
    let clock = n;
    let last = n + depth as usize;
    let d = last + 1;
    let one = sys.int(1);
    let int = |v: i64| sys.exact_int(v);
    let mut p = RSimpleParams::zeros(sys, d, bal.is_global());
    for (l, gate) in circ.gates().iter().enumerate() {
        match *gate {
            Gate::Top | Gate::Prop(_) => p.c[l][l] = one,
            Gate::Var(h) => {
                p.c[bodies[h]][l] = one;
                if mode == RSimpleMode::Convergence {
                    for m in clock..last {
                        p.c[m][l] = int(-1)?;
                    }
                }
            }
            Gate::Not(a) => {
                p.c[a][l] = int(-1)?;
                p.b[l] = one;
            }
            Gate::And(a, b) if a == b => p.c[a][l] = one,
            Gate::And(a, b) => {
                p.c[a][l] = one;
                p.c[b][l] = one;
                p.b[l] = int(-1)?;
            }
            Gate::Dia(k, a) => {
                p.a[a][l] = one;
                p.b[l] = int(1 - k as i64)?;
            }
            Gate::Glob(k, a) => {
                p.r.as_mut().expect("global program")[a][l] = one;
                p.b[l] = int(1 - k as i64)?;
            }
        }
    }
    for m in clock..last {
        p.c[m][m + 1] = one;
    }
    let start_bit = if mode == RSimpleMode::Convergence {
        p.c[last][last] = one;
        clock
    } else {
        p.c[last][clock] = one;
        last
    };
    let init = LabelSet::all(bal.pi().len())
        .map(|lab| {
            let mut x = vec![sys.zero(); d];
            for (l, gate) in circ.gates().iter().enumerate() {
                match *gate {
                    Gate::Top => x[l] = one,
                    Gate::Prop(i) if lab.contains(i) => x[l] = one,
                    _ => {}
                }
            }
            x[start_bit] = one;
            x
        })
        .collect();
    let appointed = (0..bal.heads().len())
        .filter(|&i| bal.is_appointed(i))
        .map(|i| head_coords[i])
        .collect();
    let accepting = Accepting::Structural {
        appointed,
        clock: last,
        aux_accept: mode == RSimpleMode::FixedPoint,
    };
    let mut gnn = GnnF::new(sys, bal.pi().to_vec(), init, GnnTransition::RSimple(p), accepting, None)?;
    gnn.layout = Some(Arc::new(RSimpleLayout {
        subformulas: (0..n).map(|g| circ.formula(g).clone()).collect(),
        balanced: bal,
        head_coords,
        clock,
        depth,
        mode,
    }));
    Ok(gnn)
}

/// Guard on |Q|^2 for the one-hot construction.
pub const ONEHOT_GUARD: usize = 16_384;

/// Network whose round-n feature at a node is the one-hot code of the
/// automaton's round-n state there. Aggregation maps the neighbour multiset
/// M to the code of the map q -> delta(q, M); combination applies that map
/// to the node's own state.
pub fn fcmpa_to_onehot_gnn(a: &Fcmpa) -> Result<GnnF> {
    let q = a.len();
    let d = q * q;
    if d > ONEHOT_GUARD {
        return Err(Error::guard("one-hot dimension |Q|^2", d, ONEHOT_GUARD));
    }
    let sys = FloatSystem::new(1, 1, 2)?;
    let one = sys.int(1);
    let encode = move |i: usize| -> Vec<Float> {
        let mut x = vec![sys.zero(); d];
        x[i] = one;
        x
    };
    let decode = move |x: &[Float]| -> usize { x.iter().position(|v| *v == one).unwrap_or(0) };
    let init = LabelSet::all(a.pi().len()).map(|l| encode(a.init(l))).collect();
    let auto = a.clone();
    let agg = move |nb: &[(Vec<Float>, u32)], gl: Option<&[(Vec<Float>, u32)]>| -> Vec<Float> {
        let states = |m: &[(Vec<Float>, u32)]| -> Vec<(usize, u32)> {
            let mut s: BTreeMap<usize, u32> = BTreeMap::new();
            for (x, c) in m {
                *s.entry(decode(x)).or_insert(0) += c;
            }
            s.into_iter().collect()
        };
        let m = states(nb);
        let g = gl.map(states);
        let mut out = vec![sys.zero(); d];
        for i in 0..q {
            let j = auto.delta(i, &m, g.as_deref()).expect("automaton transition");
            out[i * q + j] = one;
        }
        out
    };
    let com = move |x: &[Float], table: &[Float]| -> Vec<Float> {
        let i = decode(x);
        let j = (0..q).find(|&j| table[i * q + j] == one).unwrap_or(i);
        encode(j)
    };
    let global = a.is_global();
    let f = move |x: &[Float], nb: &[(Vec<Float>, u32)], gl: Option<&[(Vec<Float>, u32)]>| {
        com(x, &agg(nb, if global { gl } else { None }))
    };
    let auto = a.clone();
    let accepting = Accepting::Predicate(Arc::new(move |x: &[Float]| auto.is_accepting(decode(x))));
    GnnF::new(sys, a.pi().to_vec(), init, GnnTransition::Callback(Arc::new(f)), accepting, None)
}

/// Decodes a one-hot feature vector into a state index.
pub fn onehot_state(x: &[Float]) -> Option<usize> {
    let mut it = x.iter().enumerate().filter(|(_, v)| !v.is_zero());
    match (it.next(), it.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// N-layer network: layer i is applied in round i; classification is read
/// at round N.
#[derive(Clone)]
pub struct NLayerGnn {
    pub system: FloatSystem,
    pub pi: Vec<String>,
    pub init: Vec<Vec<Float>>,
    pub layers: Vec<GnnTransition>,
    pub accepting: Accepting,
}

impl NLayerGnn {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn layer(&self, i: usize) -> Result<GnnF> {
        GnnF::new(
            self.system,
            self.pi.clone(),
            self.init.clone(),
            self.layers[i].clone(),
            self.accepting.clone(),
            None,
        )
    }

    /// Round-N acceptance at every node.
    pub fn classify(&self, g: &LabeledGraph) -> Result<Vec<bool>> {
        if self.layers.is_empty() {
            return Err(Error::Invalid("an N-layer network needs N >= 1".into()));
        }
        let first = self.layer(0)?;
        let mut x = first.initial(g)?;
        for i in 0..self.layers.len() {
            x = self.layer(i)?.step_gnn(g, &x)?;
        }
        Ok(x.iter().map(|v| first.is_accepting(v)).collect())
    }
}

/// Constant-iteration twin of an N-layer network: N clock coordinates are
/// appended, the 1 sitting in clock slot t at round t (cyclically), and
/// the layer applied is picked by the clock. Classify it at round N.
pub fn nlayer_to_constant(net: &NLayerGnn) -> Result<(GnnF, usize)> {
    let layers: Vec<GnnF> = (0..net.layers.len()).map(|i| net.layer(i)).collect::<Result<_>>()?;
    let n = layers.len();
    if n == 0 {
        return Err(Error::Invalid("an N-layer network needs N >= 1".into()));
    }
    let sys = net.system;
    let d = layers[0].dim();
    let one = sys.int(1);
    let init = net
        .init
        .iter()
        .map(|x| {
            let mut v = x.clone();
            v.extend((0..n).map(|i| if i == 0 { one } else { sys.zero() }));
            v
        })
        .collect();
    let acc = layers[0].clone();
    let f = move |x: &[Float], nb: &[(Vec<Float>, u32)], gl: Option<&[(Vec<Float>, u32)]>| -> Vec<Float> {
        let slot = (0..n).find(|&i| x[d + i] == one).unwrap_or(0);
        let strip = |m: &[(Vec<Float>, u32)]| -> Vec<Vec<Float>> {
            m.iter()
                .flat_map(|(v, c)| std::iter::repeat_n(v[..d].to_vec(), *c as usize))
                .collect()
        };
        let mut out = layers[slot].apply_one(&x[..d], &strip(nb), gl.map(strip).as_deref());
        out.extend((0..n).map(|i| if i == (slot + 1) % n { one } else { sys.zero() }));
        out
    };
    let accepting = Accepting::Predicate(Arc::new(move |x: &[Float]| acc.is_accepting(&x[..d])));
    let gnn = GnnF::new(sys, net.pi.clone(), init, GnnTransition::Callback(Arc::new(f)), accepting, None)?;
    Ok((gnn, n))
}

impl GnnF {
    /// Transition of one node given its neighbours' and all nodes' vectors.
    fn apply_one(&self, x: &[Float], nb: &[Vec<Float>], all: Option<&[Vec<Float>]>) -> Vec<Float> {
        // A star whose centre sees `nb` reproduces the update exactly.
        let mut cur = vec![x.to_vec()];
        cur.extend(nb.iter().cloned());
        let ids = (0..cur.len()).map(|i| format!("n{i}")).collect();
        let succ = std::iter::once((1..cur.len()).collect())
            .chain((1..cur.len()).map(|_| Vec::new()))
            .collect();
        let labels = vec![LabelSet::default(); cur.len()];
        let star = LabeledGraph::from_parts(self.pi.clone(), ids, labels, succ);
        if let (Some(all), GnnTransition::Callback(f)) = (all, &self.transition) {
            let nbm = collect_vec_msg(nb.iter(), self.bound);
            let glm = collect_vec_msg(all.iter(), self.bound);
            return f(x, &nbm, Some(&glm));
        }
        self.step_gnn(&star, &cur).expect("star step")[0].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::run;
    use crate::corpus;
    use crate::graph::{enumerate_pointed_graphs, GraphSpace};

    fn path_wu() -> LabeledGraph {
        LabeledGraph::new(
            vec!["p".into()],
            vec![("w".into(), vec![]), ("u".into(), vec!["p".into()])],
            vec![("w".into(), "u".into())],
        )
        .unwrap()
    }

    fn reach_gnn() -> GnnF {
        let sys = FloatSystem::new(1, 1, 2).unwrap();
        let one = sys.int(1);
        let p = RSimpleParams {
            c: vec![vec![one]],
            a: vec![vec![one]],
            r: None,
            b: vec![sys.zero()],
        };
        GnnF::new(
            sys,
            vec!["p".into()],
            vec![vec![sys.zero()], vec![one]],
            GnnTransition::RSimple(p),
            Accepting::Set([vec![one]].into_iter().collect()),
            None,
        )
        .unwrap()
    }

    #[test]
    fn reachability_by_hand() {
        let g = reach_gnn();
        let r = run(&g, &path_wu(), 3).unwrap();
        let w: Vec<String> = r.iter().map(|c| c[0][0].decimal()).collect();
        assert_eq!(w, ["0", "1", "1", "1"]);
    }

    #[test]
    fn zero_network_goes_dark() {
        let sys = FloatSystem::new(1, 1, 2).unwrap();
        let g = reach_gnn()
            .with_params(RSimpleParams::zeros(sys, 1, false))
            .unwrap();
        let r = run(&g, &path_wu(), 1).unwrap();
        assert!(r[1].iter().all(|x| x[0].is_zero()));
    }

    #[test]
    fn relu_star_clamps() {
        let sys = FloatSystem::new(1, 1, 4).unwrap();
        assert_eq!(relu_star(sys, sys.int(3)), sys.int(1));
        assert_eq!(relu_star(sys, sys.int(-2)), sys.zero());
        let half = Float::parse(sys, "0.5").unwrap();
        assert_eq!(relu_star(sys, half), half);
    }

    /// Star with `leaves` p-labeled leaves; centre first.
    fn star(leaves: usize) -> LabeledGraph {
        let mut nodes = vec![("c".to_string(), vec![])];
        let mut edges = Vec::new();
        for i in 0..leaves {
            nodes.push((format!("l{i}"), vec!["p".to_string()]));
            edges.push(("c".to_string(), format!("l{i}")));
        }
        LabeledGraph::new(vec!["p".into()], nodes, edges).unwrap()
    }

    #[test]
    fn saturating_counts_still_decide_thresholds() {
        for k in 1..=3u32 {
            let prog = GmscProgram::parse(&format!("X(0) :- bot; X :- <{k}> p; appointed: X;")).unwrap();
            let gnn = gmsc_to_rsimple(&prog, RSimpleMode::Standard).unwrap();
            let lay = gnn.layout().unwrap();
            let coord = lay.subformulas.iter().position(|f| *f == Formula::parse(&format!("<{k}> p")).unwrap()).unwrap();
            for leaves in 0..=4 {
                let r = run(&gnn, &star(leaves), 2).unwrap();
                // Depth-1 subformula is valid from round 1 on.
                assert_eq!(r[1][0][coord] == gnn.system().int(1), leaves >= k as usize, "k={k} leaves={leaves}");
            }
        }
    }

    #[test]
    fn timing_invariant_on_corpus() {
        for (name, prog) in corpus::all_programs() {
            let gnn = gmsc_to_rsimple(&prog, RSimpleMode::Standard).unwrap();
            let lay = gnn.layout().unwrap().clone();
            let per = lay.period();
            let bal = &lay.balanced;
            let mut circ = Circuit::new(bal.pi().to_vec(), bal.heads().to_vec());
            let gates: Vec<usize> = lay.subformulas.iter().map(|f| circ.add(f).unwrap()).collect();
            let one = gnn.system().int(1);
            let space = GraphSpace::new(prog.pi(), 2).unwrap();
            for g in (0..space.len()).map(|i| space.get(i)) {
                let rounds = run(&gnn, &g, 3 * per).unwrap();
                let labels = g.labels_over(bal.pi()).unwrap();
                let mut conf = bal.initial(&g).unwrap();
                for n in 0..3 {
                    let vals = circ.eval(&g, &labels, &|v, h| conf.truth[v].get(h));
                    for (l, f) in lay.subformulas.iter().enumerate() {
                        let at = n * per + f.formula_depth() as usize;
                        for v in 0..g.len() {
                            assert_eq!(rounds[at][v][l] == one, vals.column(gates[l])[v], "{name} {f} n={n}");
                        }
                    }
                    conf = bal.step(&g, &conf).unwrap();
                }
            }
        }
    }

    #[test]
    fn clock_is_one_hot_and_cycles() {
        let prog = GmscProgram::parse(corpus::REACHABILITY).unwrap();
        let gnn = gmsc_to_rsimple(&prog, RSimpleMode::Standard).unwrap();
        let lay = gnn.layout().unwrap();
        let per = lay.period();
        let one = gnn.system().int(1);
        let r = run(&gnn, &path_wu(), 2 * per).unwrap();
        for (t, c) in r.iter().enumerate() {
            let hot: Vec<usize> = (lay.clock..gnn.dim()).filter(|&i| c[0][i] == one).collect();
            assert_eq!(hot, [lay.clock + (t + per - 1) % per]);
        }
    }

    #[test]
    fn json_round_trip() {
        let prog = GmscProgram::parse(corpus::GLOBAL).unwrap();
        let gnn = gmsc_to_rsimple(&prog, RSimpleMode::Standard).unwrap();
        let back = GnnF::parse(&gnn.to_json().unwrap().to_string()).unwrap();
        assert_eq!(back.params(), gnn.params());
        for pg in enumerate_pointed_graphs(prog.pi(), 2).unwrap().filter(|p| p.point == 0) {
            assert_eq!(run(&gnn, &pg.graph, 8).unwrap(), run(&back, &pg.graph, 8).unwrap());
        }
    }

    #[test]
    fn onehot_encodes_states() {
        let a = crate::automata::two_phase_clock();
        let g = fcmpa_to_onehot_gnn(&a).unwrap();
        assert_eq!(g.dim(), 4);
        let one = g.system().int(1);
        assert_eq!(g.init(LabelSet::default()), &[one, g.system().zero(), g.system().zero(), g.system().zero()]);
        let bare = LabeledGraph::new(vec![], vec![("a".into(), vec![])], vec![]).unwrap();
        let r = run(&g, &bare, 3).unwrap();
        let states: Vec<usize> = r.iter().map(|c| onehot_state(&c[0]).unwrap()).collect();
        assert_eq!(states, [0, 1, 0, 1]);
    }

    #[test]
    fn single_layer_wrapper_adds_one_clock_bit() {
        let base = reach_gnn();
        let net = NLayerGnn {
            system: base.system(),
            pi: base.pi().to_vec(),
            init: vec![base.init(LabelSet(0)).to_vec(), base.init(LabelSet(1)).to_vec()],
            layers: vec![base.transition.clone()],
            accepting: base.accepting.clone(),
        };
        let (flat, n) = nlayer_to_constant(&net).unwrap();
        assert_eq!((flat.dim(), n), (2, 1));
        let g = path_wu();
        let r = run(&flat, &g, 1).unwrap();
        let direct = net.classify(&g).unwrap();
        let via: Vec<bool> = r[1].iter().map(|x| flat.is_accepting(x)).collect();
        assert_eq!(direct, via);
    }
}
