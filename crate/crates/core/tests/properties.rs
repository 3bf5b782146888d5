use proptest::prelude::*;

use gmsc_core::acceptance::{classify_all, Classifier, Machine, DEFAULT_CEILING};
use gmsc_core::corpus;
use gmsc_core::exec::Exec;
use gmsc_core::gml::{and, dia, eval_all, glob, not, prop, top, Formula};
use gmsc_core::gnn::{gmsc_to_rsimple, GnnF, RSimpleMode};
use gmsc_core::graph::{enumerate_pointed_graphs, pointed_graph_count, unravel, LabeledGraph, PointedGraph};
use gmsc_core::harness::{check_acceptance_equiv, EquivOptions, GraphSource};
use gmsc_core::transform::{balance, to_normal_form};
use gmsc_core::types::graded_type;
use gmsc_core::GmscProgram;

fn pi() -> Vec<String> {
    vec!["p".into(), "q".into()]
}

fn build(pi: Vec<String>, labels: &[u8], edges: &[bool]) -> LabeledGraph {
    let n = labels.len();
    let nodes = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let ls = (0..pi.len()).filter(|b| l >> b & 1 == 1).map(|b| pi[b].clone()).collect();
            (format!("v{i}"), ls)
        })
        .collect();
    let es = (0..n * n)
        .filter(|&i| edges[i])
        .map(|i| (format!("v{}", i / n), format!("v{}", i % n)))
        .collect();
    LabeledGraph::new(pi, nodes, es).unwrap()
}

fn graph_over(pi: Vec<String>, max: usize) -> impl Strategy<Value = LabeledGraph> {
    let labels = 1u8 << pi.len();
    (1..=max).prop_flat_map(move |n| {
        let pi = pi.clone();
        (
            proptest::collection::vec(0u8..labels, n),
            proptest::collection::vec(any::<bool>(), n * n),
        )
            .prop_map(move |(l, e)| build(pi.clone(), &l, &e))
    })
}

fn graph(max: usize) -> impl Strategy<Value = LabeledGraph> {
    graph_over(pi(), max)
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![Just(top()), Just(prop("p")), Just(prop("q"))];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| and(a, b)),
            (1u32..3, inner.clone()).prop_map(|(k, f)| dia(k, f)),
            (1u32..3, inner).prop_map(|(k, f)| glob(k, f)),
        ]
    })
}

fn program() -> impl Strategy<Value = GmscProgram> {
    let corpus: Vec<GmscProgram> = corpus::PROGRAMS
        .iter()
        .map(|(_, src)| GmscProgram::parse(src).unwrap())
        .collect();
    prop_oneof![
        proptest::sample::select(corpus),
        (0u64..40).prop_map(corpus::random_program),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gml_truth_is_isomorphism_invariant(
        (g, perm) in graph(4).prop_flat_map(|g| { let n = g.len(); (Just(g), permutation(n)) }),
        f in formula(),
    ) {
        let h = g.permuted(&perm);
        let a = eval_all(&g, &f).unwrap();
        let b = eval_all(&h, &f).unwrap();
        for v in 0..g.len() {
            prop_assert_eq!(a[v], b[perm[v]]);
        }
    }

    #[test]
    fn formula_text_round_trips(f in formula()) {
        prop_assert_eq!(Formula::parse(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn graph_json_round_trips(g in graph(4)) {
        let back = LabeledGraph::parse(&g.to_json().to_string()).unwrap();
        prop_assert_eq!(back.to_json(), g.to_json());
    }

    #[test]
    fn unraveling_keeps_the_graded_type(g in graph(4), v in 0usize..4, k in 1u32..3, n in 0u32..3) {
        let v = v % g.len();
        let pg = PointedGraph::new(g, v).unwrap();
        let tree = unravel(&pg, n as usize);
        prop_assert_eq!(graded_type(&tree, k, n).unwrap(), graded_type(&pg, k, n).unwrap());
    }

    #[test]
    fn configurations_match_iteration_formulas(p in program(), g in graph(3)) {
        let mut c = p.start(&g).unwrap();
        for n in 0..4 {
            for (i, h) in p.heads().iter().enumerate() {
                let f = p.iteration_formula(h, n).unwrap();
                let truth = eval_all(&g, &f).unwrap();
                for v in 0..g.len() {
                    prop_assert_eq!(c[v].get(i), truth[v], "head {} round {}", h, n);
                }
            }
            c = p.next(&g, &c).unwrap();
        }
    }

    #[test]
    fn normal_form_and_balance_keep_acceptance(p in program(), g in graph(4)) {
        let base = classify_all(&p, &g, &Classifier::Standard, DEFAULT_CEILING).unwrap();
        let nf = to_normal_form(&p).unwrap();
        prop_assert_eq!(&classify_all(&nf, &g, &Classifier::Standard, DEFAULT_CEILING).unwrap(), &base);
        let bal = balance(&nf).unwrap();
        prop_assert_eq!(&classify_all(&bal, &g, &Classifier::Standard, DEFAULT_CEILING).unwrap(), &base);
    }

    #[test]
    fn program_text_round_trip_keeps_runs(p in program(), g in graph(3)) {
        let q = GmscProgram::parse(&p.to_string()).unwrap();
        let (mut a, mut b) = (p.start(&g).unwrap(), q.start(&g).unwrap());
        for _ in 0..5 {
            prop_assert_eq!(&a, &b);
            a = p.next(&g, &a).unwrap();
            b = q.next(&g, &b).unwrap();
        }
    }
}

fn reach_gnn() -> GnnF {
    gmsc_to_rsimple(&GmscProgram::parse(corpus::TWO_SUCCESSORS).unwrap(), RSimpleMode::Standard).unwrap()
}

fn star(leaves: usize, labelled: bool) -> LabeledGraph {
    let mut nodes = vec![("c".to_string(), vec![])];
    let mut edges = Vec::new();
    for i in 0..leaves {
        let ls = if labelled { vec!["p".to_string()] } else { vec![] };
        nodes.push((format!("l{i}"), ls));
        edges.push(("c".to_string(), format!("l{i}")));
    }
    LabeledGraph::new(vec!["p".into()], nodes, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rsimple_states_stay_in_the_unit_box(g in graph_over(vec!["p".into()], 4)) {
        let net = reach_gnn();
        let vals = net.system().values().unwrap();
        let one = net.system().int(1);
        let mut x = net.initial(&g).unwrap();
        for _ in 0..6 {
            for row in &x {
                for f in row {
                    prop_assert!(vals.contains(f));
                    prop_assert!(!f.is_negative() && *f <= one);
                }
            }
            x = net.step_gnn(&g, &x).unwrap();
        }
    }

    #[test]
    fn rsimple_step_sees_only_capped_counts(extra in 0usize..12, labelled in any::<bool>()) {
        // Past the sum bound, more identical neighbours change nothing.
        let net = reach_gnn();
        let k = net.system().sum_bound().unwrap() as usize;
        let small = star(k, labelled);
        let big = star(k + extra, labelled);
        let (mut a, mut b) = (net.initial(&small).unwrap(), net.initial(&big).unwrap());
        for _ in 0..4 {
            a = net.step_gnn(&small, &a).unwrap();
            b = net.step_gnn(&big, &b).unwrap();
            prop_assert_eq!(&a[0], &b[0]);
        }
    }
}

#[test]
fn enumeration_matches_closed_form() {
    for (k, n) in [(0, 3), (1, 2), (1, 3), (2, 2)] {
        let pi: Vec<String> = pi().into_iter().take(k).collect();
        let count = enumerate_pointed_graphs(&pi, n).unwrap().count() as u128;
        assert_eq!(count, pointed_graph_count(k, n), "|pi|={k} n={n}");
    }
}

#[test]
fn harness_is_deterministic_across_strategies() {
    let p = GmscProgram::parse(corpus::REACHABILITY).unwrap();
    let nf = to_normal_form(&p).unwrap();
    let src = GraphSource::Sampled { max_nodes: 5, count: 200, seed: 7 };
    let run = |exec| {
        let opts = EquivOptions { exec, collect_all: true, ..EquivOptions::default() };
        let mut r = check_acceptance_equiv(&[&p, &nf], &Classifier::Buchi, src, opts).unwrap();
        r.elapsed_ms = 0;
        serde_json::to_value(&r).unwrap()
    };
    let seq = run(Exec::Sequential);
    assert_eq!(seq, run(Exec::Sequential));
    assert_eq!(seq, run(Exec::Parallel));
    assert_eq!(seq["equivalent"], true);
}

#[test]
fn harness_reports_a_real_disagreement() {
    let a = GmscProgram::parse(corpus::REACHABILITY).unwrap();
    let b = GmscProgram::parse("X(0) :- p; X :- p; appointed: X;").unwrap();
    let r = check_acceptance_equiv(
        &[&a, &b],
        &Classifier::Standard,
        GraphSource::Exhaustive { max_nodes: 2 },
        EquivOptions::default(),
    )
    .unwrap();
    let cex = r.counterexample().expect("reachability differs from p");
    let g = LabeledGraph::parse(&cex.graph.to_string()).unwrap();
    let v = g.node(&cex.point).unwrap();
    let va = classify_all(&a, &g, &Classifier::Standard, DEFAULT_CEILING).unwrap();
    let vb = classify_all(&b, &g, &Classifier::Standard, DEFAULT_CEILING).unwrap();
    assert_ne!(va[v], vb[v]);
}
