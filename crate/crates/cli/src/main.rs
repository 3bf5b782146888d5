mod load;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gmsc_core::acceptance::{trace, Classifier, Machine, DEFAULT_CEILING};
use gmsc_core::automata::{fcmpa_to_gmsc, gmsc1_to_fcmpa};
use gmsc_core::bits::Bits;
use gmsc_core::exec::{with_jobs, Exec};
use gmsc_core::float::sum_increasing;
use gmsc_core::gml::{eval_gml, Formula};
use gmsc_core::gnn::{fcmpa_to_onehot_gnn, gmsc_to_rsimple, RSimpleMode};
use gmsc_core::harness::{check_acceptance_equiv, EquivOptions, GraphSource};
use gmsc_core::transform::to_normal_form;
use gmsc_core::types::{gml_to_type_disjunction, graded_type};
use gmsc_core::{BoundedMultiset, Error, Float, FloatSystem, GmscProgram, LabeledGraph, PointedGraph};

use load::{Kind, Loaded};

#[derive(Parser)]
#[command(name = "gmsc", version, about = "Simulate, translate and compare GMSC programs, counting automata and float GNNs")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Give up on runs that have not cycled after this many rounds.
    #[arg(long, global = true, default_value_t = DEFAULT_CEILING)]
    ceiling: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Truth of a GML formula at a node (exit 1 when false).
    Eval {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
    },
    /// Print the configurations of a run.
    Simulate(SimulateArgs),
    /// Classify one pointed graph (exit 1 on rejection).
    Accepts {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long, default_value = "standard")]
        classifier: Classifier,
    },
    /// Translate between machine models.
    Translate(TranslateArgs),
    /// Compare two machines on every pointed graph of a source (exit 1 on a counterexample).
    CheckEquiv(EquivArgs),
    /// Arithmetic in a finite floating-point system.
    Float(FloatArgs),
    /// Graded type of a pointed graph.
    Type {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        depth: u32,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("model").required(true).args(["program", "automaton", "gnn"])))]
struct SimulateArgs {
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long)]
    automaton: Option<PathBuf>,
    #[arg(long)]
    gnn: Option<PathBuf>,
    #[arg(long)]
    graph: PathBuf,
    /// Rounds to run.
    #[arg(long, default_value_t = 5, conflicts_with = "trace")]
    rounds: usize,
    /// Run until the configuration repeats; accepting states are marked `*`.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lang {
    Gmsc,
    Gml,
    Fcmpa,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum To {
    NormalForm,
    Fcmpa,
    Rsimple,
    GmlTypes,
    Gmsc,
    OnehotGnn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Standard,
    FixedPoint,
    Buchi,
    Convergence,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long, value_enum)]
    from: Lang,
    #[arg(long, value_enum)]
    to: To,
    /// Source file (.gmsc or .fcmpa.json).
    input: Option<PathBuf>,
    /// Formula text, with --from gml.
    #[arg(long)]
    formula: Option<String>,
    /// Comma-separated propositions, with --from gml.
    #[arg(long, value_delimiter = ',')]
    pi: Vec<String>,
    /// Keep the full powerset automaton.
    #[arg(long)]
    no_compact: bool,
    /// Acceptance convention of the R-simple network.
    #[arg(long, value_enum, default_value = "standard")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    width: u32,
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Iteration round whose head formulas are expanded, with --to gml-types.
    #[arg(long, default_value_t = 0)]
    round: usize,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["exhaustive", "samples"])))]
struct EquivArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum)]
    kind_a: Option<Kind>,
    #[arg(long, value_enum)]
    kind_b: Option<Kind>,
    #[arg(long, default_value = "standard")]
    classifier: Classifier,
    /// Every graph with at most this many nodes.
    #[arg(long)]
    exhaustive: Option<usize>,
    /// This many random graphs.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node bound for sampled graphs.
    #[arg(long, default_value_t = 6)]
    max_nodes: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Keep going after the first counterexample.
    #[arg(long)]
    collect_all: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("op").required(true).args(["sum_file", "bound", "add", "mul"])))]
struct FloatArgs {
    /// p=<digits>,n=<exponent bound>,beta=<base>
    #[arg(long)]
    system: FloatSystem,
    /// Sum the whitespace-separated values of a file in increasing order.
    #[arg(long)]
    sum_file: Option<PathBuf>,
    /// Multiplicity beyond which sums stop changing.
    #[arg(long)]
    bound: bool,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
    add: Option<Vec<String>>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
    mul: Option<Vec<String>>,
}

pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn context(self, path: &Path) -> Self {
        match self {
            Failure::Core(e) if !e.is_resource() => Failure::Usage(format!("{}: {e}", path.display())),
            other => other,
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_resource() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(s) => write!(f, "{s}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

/// What a subcommand printed, and whether it was a positive answer.
struct Answer {
    text: String,
    json: Value,
    yes: bool,
}

fn answer(text: impl Into<String>, json: Value, yes: bool) -> Result<Answer, Failure> {
    Ok(Answer {
        text: text.into(),
        json,
        yes,
    })
}

fn pointed(g: LabeledGraph, node: &str) -> Result<PointedGraph, Failure> {
    Ok(g.with_point(node)?)
}

fn eval(formula: &str, graph: &Path, node: &str) -> Result<Answer, Failure> {
    let f = Formula::parse(formula)?;
    let pg = pointed(load::graph(graph)?, node)?;
    let v = eval_gml(&pg, &f)?;
    answer(v.to_string(), json!({ "value": v }), v)
}

fn head_names(p: &GmscProgram, b: &Bits) -> Value {
    json!(b.ones().map(|i| p.heads()[i].clone()).collect::<Vec<_>>())
}

fn vector(x: &[Float]) -> Value {
    json!(x.iter().map(Float::decimal).collect::<Vec<_>>())
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|xs| xs.iter().map(|x| x.as_str().unwrap_or_default().to_string()).collect())
        .unwrap_or_default()
}

fn simulate_with<M: Machine>(
    m: &M,
    g: &LabeledGraph,
    args: &SimulateArgs,
    ceiling: usize,
    show: impl Fn(&M::State) -> Value,
    human: impl Fn(&Value) -> String,
) -> Result<Answer, Failure> {
    let (configs, cycle) = if args.trace {
        let t = trace(m, g, ceiling)?;
        (t.configs, Some((t.mu, t.lambda)))
    } else {
        (gmsc_core::acceptance::run(m, g, args.rounds)?, None)
    };
    let mut text = Vec::new();
    let mut rounds = Vec::new();
    for (r, c) in configs.iter().enumerate() {
        let mut line = format!("round {r}:");
        let mut nodes = serde_json::Map::new();
        for (v, s) in c.iter().enumerate() {
            let shown = show(s);
            let mark = if m.accepting(s) { "*" } else { "" };
            line.push_str(&format!(" {}={}{mark}", g.id(v), human(&shown)));
            nodes.insert(g.id(v).to_string(), json!({ "state": shown, "accepting": m.accepting(s) }));
        }
        text.push(line);
        rounds.push(Value::Object(nodes));
    }
    let mut out = json!({ "rounds": rounds });
    if let Some((mu, lambda)) = cycle {
        text.push(format!("cycle: round {} equals round {mu} (period {lambda})", mu + lambda));
        out["mu"] = json!(mu);
        out["lambda"] = json!(lambda);
    }
    answer(text.join("\n"), out, true)
}

fn simulate(args: &SimulateArgs, ceiling: usize) -> Result<Answer, Failure> {
    let g = load::graph(&args.graph)?;
    let m = if let Some(p) = &args.program {
        load::machine(p, Some(Kind::Program))?
    } else if let Some(p) = &args.automaton {
        load::machine(p, Some(Kind::Automaton))?
    } else {
        load::machine(args.gnn.as_ref().expect("group is required"), Some(Kind::Gnn))?
    };
    let (m, g) = aligned(m, g)?;
    match &m {
        Loaded::Program(p) => simulate_with(p, &g, args, ceiling, |b| head_names(p, b), |v| {
            format!("{{{}}}", strings(v).join(","))
        }),
        Loaded::Automaton(a) => simulate_with(a, &g, args, ceiling, |q| json!(a.states()[*q]), |v| {
            v.as_str().unwrap_or_default().to_string()
        }),
        Loaded::Gnn(n) => simulate_with(n, &g, args, ceiling, |x| vector(x), |v| {
            format!("({})", strings(v).join(","))
        }),
    }
}

/// Programs move to the graph's alphabet when it is larger; otherwise the
/// graph's labels are re-read over the machine's alphabet.
fn aligned(m: Loaded, g: LabeledGraph) -> Result<(Loaded, LabeledGraph), Failure> {
    let pi = m.acceptor().alphabet().to_vec();
    if g.pi() == pi {
        return Ok((m, g));
    }
    if let Loaded::Program(p) = &m {
        if pi.iter().all(|x| g.pi().contains(x)) {
            return Ok((Loaded::Program(p.with_pi(g.pi().to_vec())?), g));
        }
    }
    let labels = g.labels_over(&pi)?;
    let nodes = (0..g.len())
        .map(|v| (g.id(v).to_string(), labels[v].names(&pi)))
        .collect();
    let edges = g.edges().map(|(u, v)| (g.id(u).to_string(), g.id(v).to_string())).collect();
    Ok((m, LabeledGraph::new(pi, nodes, edges)?))
}

fn accepts_with<M: Machine>(
    m: &M,
    g: &LabeledGraph,
    v: usize,
    c: &Classifier,
    ceiling: usize,
) -> Result<Answer, Failure> {
    let t = trace(m, g, ceiling)?;
    let yes = t.classify(v, c, g.len())?;
    let cycle = t.mu..t.mu + t.lambda;
    let round = if !yes {
        None
    } else {
        match c {
            Classifier::Standard => (0..t.mu + t.lambda).find(|&r| t.flag(v, r)),
            Classifier::Buchi => cycle.clone().find(|&r| t.flag(v, r)),
            Classifier::FixedPoint | Classifier::Convergence => Some(t.mu),
            Classifier::GraphSize(e) => Some(e.eval(g.len() as u64)? as usize),
        }
    };
    let text = match round {
        Some(r) => format!("accept at round {r}"),
        None => "reject".to_string(),
    };
    let json = json!({
        "accept": yes,
        "round": round,
        "classifier": c.to_string(),
        "mu": t.mu,
        "lambda": t.lambda,
    });
    answer(text, json, yes)
}

fn accepts(
    machine: &Path,
    kind: Option<Kind>,
    graph: &Path,
    node: &str,
    c: &Classifier,
    ceiling: usize,
) -> Result<Answer, Failure> {
    let (m, g) = aligned(load::machine(machine, kind)?, load::graph(graph)?)?;
    let v = g.node(node)?;
    match &m {
        Loaded::Program(p) => accepts_with(p, &g, v, c, ceiling),
        Loaded::Automaton(a) => accepts_with(a, &g, v, c, ceiling),
        Loaded::Gnn(n) => accepts_with(n, &g, v, c, ceiling),
    }
}

fn input(args: &TranslateArgs) -> Result<&Path, Failure> {
    args.input
        .as_deref()
        .ok_or_else(|| Failure::Usage("translate needs an input file".into()))
}

fn program_answer(p: &GmscProgram) -> Result<Answer, Failure> {
    let text = p.to_string();
    answer(text.trim_end(), json!({ "program": text }), true)
}

fn document(v: Value) -> Result<Answer, Failure> {
    let text = serde_json::to_string_pretty(&v).expect("json values serialize");
    answer(text, v, true)
}

fn types(formulas: &[(String, Formula)], pi: &[String], k: u32, n: u32) -> Result<Answer, Failure> {
    let mut text = Vec::new();
    let mut out = serde_json::Map::new();
    for (name, f) in formulas {
        let ts = gml_to_type_disjunction(f, pi, k, n)?;
        text.push(format!("{name}: {} types", ts.len()));
        text.extend(ts.iter().map(|t| format!("  {}", t.render(pi))));
        out.insert(name.clone(), json!(ts.iter().map(|t| t.to_json(pi)).collect::<Vec<_>>()));
    }
    answer(text.join("\n"), Value::Object(out), true)
}

fn translate(args: &TranslateArgs) -> Result<Answer, Failure> {
    match (args.from, args.to) {
        (Lang::Gmsc, to) => {
            let p = load::program(input(args)?)?;
            match to {
                To::NormalForm => program_answer(&to_normal_form(&p)?),
                To::Fcmpa => {
                    let a = gmsc1_to_fcmpa(&to_normal_form(&p)?)?;
                    let a = if args.no_compact { a } else { a.compact()? };
                    document(a.to_json()?)
                }
                To::Rsimple => {
                    let mode = match args.mode {
                        Mode::Standard => RSimpleMode::Standard,
                        Mode::FixedPoint => RSimpleMode::FixedPoint,
                        Mode::Buchi => RSimpleMode::Buchi,
                        Mode::Convergence => RSimpleMode::Convergence,
                    };
                    document(gmsc_to_rsimple(&p, mode)?.to_json()?)
                }
                To::GmlTypes => {
                    let fs = p
                        .appointed()
                        .into_iter()
                        .map(|h| Ok((h.clone(), p.iteration_formula(&h, args.round)?)))
                        .collect::<Result<Vec<_>, Error>>()?;
                    types(&fs, p.pi(), args.width, args.depth)
                }
                To::Gmsc => program_answer(&p),
                To::OnehotGnn => Err(Failure::Usage("gmsc to onehot-gnn goes through --to fcmpa first".into())),
            }
        }
        (Lang::Gml, To::GmlTypes) => {
            let f = Formula::parse(
                args.formula
                    .as_deref()
                    .ok_or_else(|| Failure::Usage("--from gml needs --formula".into()))?,
            )?;
            types(&[("formula".into(), f)], &args.pi, args.width, args.depth)
        }
        (Lang::Fcmpa, To::Gmsc) => program_answer(&fcmpa_to_gmsc(&load::automaton(input(args)?)?)?),
        (Lang::Fcmpa, To::OnehotGnn) => document(fcmpa_to_onehot_gnn(&load::automaton(input(args)?)?)?.to_json()?),
        _ => Err(Failure::Usage(
            "supported: gmsc -> normal-form|fcmpa|rsimple|gml-types, gml -> gml-types, fcmpa -> gmsc|onehot-gnn".into(),
        )),
    }
}

/// Programs read only the propositions they mention, so they can move to a
/// larger alphabet; automata and networks cannot.
fn widen(a: Loaded, b: Loaded) -> Result<(Loaded, Loaded), Failure> {
    let (pa, pb) = (a.acceptor().alphabet().to_vec(), b.acceptor().alphabet().to_vec());
    if pa == pb {
        return Ok((a, b));
    }
    // A fixed-alphabet side dictates the order.
    let target = if matches!(b, Loaded::Program(_)) || matches!(a, Loaded::Automaton(_) | Loaded::Gnn(_)) {
        let mut u = pa.clone();
        u.extend(pb.iter().filter(|p| !pa.contains(p)).cloned());
        u
    } else {
        let mut u = pb.clone();
        u.extend(pa.iter().filter(|p| !pb.contains(p)).cloned());
        u
    };
    let to = |m: Loaded| -> Result<Loaded, Failure> {
        match m {
            Loaded::Program(p) if p.pi() != target.as_slice() => Ok(Loaded::Program(p.with_pi(target.clone())?)),
            other => Ok(other),
        }
    };
    Ok((to(a)?, to(b)?))
}

fn check_equiv(args: &EquivArgs, ceiling: usize) -> Result<Answer, Failure> {
    let (a, b) = widen(load::machine(&args.a, args.kind_a)?, load::machine(&args.b, args.kind_b)?)?;
    let source = match (args.exhaustive, args.samples) {
        (Some(n), _) => GraphSource::Exhaustive { max_nodes: n },
        (None, Some(count)) => GraphSource::Sampled {
            max_nodes: args.max_nodes,
            count,
            seed: args.seed,
        },
        (None, None) => unreachable!("clap requires a source"),
    };
    let opts = EquivOptions {
        exec: if args.jobs > 1 { Exec::default() } else { Exec::Sequential },
        ceiling,
        collect_all: args.collect_all,
        ..EquivOptions::default()
    };
    let report = with_jobs(args.jobs.max(1), || {
        check_acceptance_equiv(&[a.acceptor(), b.acceptor()], &args.classifier, source, opts)
    })?;
    let text = match report.counterexample() {
        None => format!(
            "equivalent under {} on {}: {} graphs, {} pointed graphs",
            report.classifier, report.source, report.graphs_checked, report.pointed_checked
        ),
        Some(cex) => {
            let round = cex
                .diverging_round
                .map_or("none in the inspected prefix".to_string(), |r| r.to_string());
            format!(
                "counterexample at node {}: verdicts {:?}, first diverging round {round}\n{}",
                cex.point, cex.verdicts, cex.graph
            )
        }
    };
    let yes = report.equivalent;
    answer(text, serde_json::to_value(&report).expect("report serializes"), yes)
}

fn number(sys: FloatSystem, s: &str) -> Result<Float, Failure> {
    Ok(Float::parse(sys, s)?)
}

fn float_value(f: Float) -> Result<Answer, Failure> {
    answer(f.decimal(), json!({ "value": f.decimal(), "literal": f.literal() }), true)
}

fn float(args: &FloatArgs) -> Result<Answer, Failure> {
    let sys = args.system;
    if args.bound {
        let exact = sys.sum_bound_exact()?;
        let closed = sys.sum_bound()?;
        return answer(
            exact.to_string(),
            json!({ "system": sys.to_string(), "bound": exact.to_string(), "closed_form": closed.to_string() }),
            true,
        );
    }
    if let Some(xs) = &args.add {
        return float_value(number(sys, &xs[0])?.add(&number(sys, &xs[1])?)?);
    }
    if let Some(xs) = &args.mul {
        return float_value(number(sys, &xs[0])?.mul(&number(sys, &xs[1])?)?);
    }
    let path = args.sum_file.as_ref().expect("group is required");
    let mut m = BoundedMultiset::new();
    for tok in load::read(path)?.split_whitespace() {
        m.insert(number(sys, tok).map_err(|e| e.context(path))?);
    }
    float_value(sum_increasing(sys, &m)?)
}

fn graded(graph: &Path, node: &str, k: u32, n: u32) -> Result<Answer, Failure> {
    let g = load::graph(graph)?;
    let pi = g.pi().to_vec();
    let t = graded_type(&pointed(g, node)?, k, n)?;
    answer(t.render(&pi), t.to_json(&pi), true)
}

fn dispatch(cli: &Cli) -> Result<Answer, Failure> {
    match &cli.cmd {
        Cmd::Eval { formula, graph, node } => eval(formula, graph, node),
        Cmd::Simulate(args) => simulate(args, cli.ceiling),
        Cmd::Accepts {
            machine,
            kind,
            graph,
            node,
            classifier,
        } => accepts(machine, *kind, graph, node, classifier, cli.ceiling),
        Cmd::Translate(args) => translate(args),
        Cmd::CheckEquiv(args) => check_equiv(args, cli.ceiling),
        Cmd::Float(args) => float(args),
        Cmd::Type {
            graph,
            node,
            width,
            depth,
        } => graded(graph, node, *width, *depth),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(a) => {
            let body = if cli.json {
                serde_json::to_string_pretty(&a.json).expect("json values serialize")
            } else {
                a.text
            };
            let written = match &cli.output {
                Some(path) => fs::write(path, body + "\n"),
                None => {
                    // A closed pipe downstream is not our failure.
                    let _ = writeln!(std::io::stdout(), "{body}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(if a.yes { 0 } else { 1 })
        }
        Err(e) => {
            if cli.json {
                eprintln!("{}", json!({ "error": e.to_string(), "code": e.code() }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code())
        }
    }
}
