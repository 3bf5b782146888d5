//! Program-to-program transforms: the modal-depth normal form and the
//! balanced form consumed by the GNN construction.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::gml::{and, bot, not, or, subformulas, top, var, Formula};
use crate::gmsc::GmscProgram;

fn fresh(base: &str, used: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    let mut i = 1;
    while used.contains(&name) {
        name = format!("{base}_{i}");
        i += 1;
    }
    used.insert(name.clone());
    name
}

struct Clauses {
    heads: Vec<String>,
    terminal: Vec<Formula>,
    iteration: Vec<Formula>,
}

impl Clauses {
    fn of(prog: &GmscProgram) -> Self {
        let n = prog.heads().len();
        Clauses {
            heads: prog.heads().to_vec(),
            terminal: (0..n).map(|i| prog.terminal(i).clone()).collect(),
            iteration: (0..n).map(|i| prog.iteration(i).clone()).collect(),
        }
    }

    fn push(&mut self, head: String, terminal: Formula, iteration: Formula) {
        self.heads.push(head);
        self.terminal.push(terminal);
        self.iteration.push(iteration);
    }

    fn build(self, prog: &GmscProgram) -> Result<GmscProgram> {
        GmscProgram::new(
            Some(prog.pi().to_vec()),
            self.heads,
            self.terminal,
            self.iteration,
            &prog.appointed(),
        )
    }

    /// Moves every terminal body into the iteration clause behind a fresh
    /// round indicator I (false at round 0, true afterwards). The result
    /// lags the input by one round.
    fn shift_terminals(&mut self, used: &mut BTreeSet<String>) {
        let i = fresh("I", used);
        for h in 0..self.heads.len() {
            let phi = std::mem::replace(&mut self.terminal[h], bot());
            let psi = self.iteration[h].clone();
            self.iteration[h] = or(and(not(var(&i)), phi), and(var(&i), psi));
        }
        self.push(i, bot(), top());
    }
}

fn is_modal(f: &Formula) -> bool {
    matches!(f, Formula::Dia(..) | Formula::Glob(..))
}

/// Rewrites the maximal modal subformulas of `f` through `on_modal`.
fn map_modal(f: &Formula, on_modal: &dyn Fn(&Formula) -> Formula) -> Formula {
    match f {
        Formula::Dia(..) | Formula::Glob(..) => on_modal(f),
        Formula::Not(a) => not(map_modal(a, on_modal)),
        Formula::And(a, b) => and(map_modal(a, on_modal), map_modal(b, on_modal)),
        _ => f.clone(),
    }
}

fn with_child(f: &Formula, child: Formula) -> Formula {
    match f {
        Formula::Dia(k, _) => Formula::Dia(*k, std::sync::Arc::new(child)),
        Formula::Glob(k, _) => Formula::Glob(*k, std::sync::Arc::new(child)),
        _ => unreachable!("modal formula expected"),
    }
}

fn modal_child(f: &Formula) -> &Formula {
    match f {
        Formula::Dia(_, a) | Formula::Glob(_, a) => a,
        _ => unreachable!("modal formula expected"),
    }
}

/// Equivalent program whose terminal bodies have modal depth 0 and whose
/// iteration bodies have modal depth at most 1.
///
/// Terminal bodies with modalities are first pushed into the iteration
/// clauses. If some iteration body still has modal depth m > 1, a cyclic
/// clock T1..Tm splits each source round into m rounds: every modal
/// subformula of height h < m gets a head that recomputes it while Th holds
/// and keeps its value otherwise, and each original head recomputes its
/// body (one modality deep over those heads) while Tm holds. Original heads
/// therefore keep their source value for a whole period, so every
/// classifier sees the same accept pattern up to a finite prefix and a
/// uniform stretch.
pub fn to_normal_form(prog: &GmscProgram) -> Result<GmscProgram> {
    if prog.is_normal_form() {
        return Ok(prog.clone());
    }
    let mut used: BTreeSet<String> = prog.heads().iter().cloned().collect();
    let mut cl = Clauses::of(prog);
    if cl.terminal.iter().any(|f| f.modal_depth() > 0) {
        cl.shift_terminals(&mut used);
    }
    let m = cl.iteration.iter().map(Formula::modal_depth).max().unwrap_or(0);
    if m <= 1 {
        return cl.build(prog);
    }

    let clock: Vec<String> = (1..=m).map(|i| fresh(&format!("T{i}"), &mut used)).collect();
    let roots: Vec<&Formula> = cl.iteration.iter().collect();
    let strata: Vec<Formula> = subformulas(&roots)
        .into_iter()
        .filter(|f| is_modal(f) && f.modal_depth() < m)
        .collect();
    let mut name_of: HashMap<Formula, String> = HashMap::new();
    for (i, f) in strata.iter().enumerate() {
        name_of.insert(f.clone(), fresh(&format!("Y{}", i + 1), &mut used));
    }
    let to_head = |f: &Formula| -> Formula { var(&name_of[f]) };
    let lowered = |f: &Formula| -> Formula { with_child(f, map_modal(modal_child(f), &to_head)) };
    let gate = |t: &str, update: Formula, hold: &str| -> Formula {
        or(and(var(t), update), and(not(var(t)), var(hold)))
    };

    let mut out = Clauses {
        heads: Vec::new(),
        terminal: Vec::new(),
        iteration: Vec::new(),
    };
    for h in 0..cl.heads.len() {
        let body = map_modal(&cl.iteration[h], &|f: &Formula| {
            if f.modal_depth() < m {
                to_head(f)
            } else {
                lowered(f)
            }
        });
        let x = cl.heads[h].clone();
        out.push(
            x.clone(),
            cl.terminal[h].clone(),
            gate(&clock[m as usize - 1], body, &x),
        );
    }
    for f in &strata {
        let y = name_of[f].clone();
        let h = f.modal_depth() as usize;
        out.push(y.clone(), bot(), gate(&clock[h - 1], lowered(f), &y));
    }
    for (i, t) in clock.iter().enumerate() {
        let (init, prev) = if i == 0 {
            (top(), clock[m as usize - 1].clone())
        } else {
            (bot(), clock[i - 1].clone())
        };
        out.push(t.clone(), init, var(&prev));
    }
    out.build(prog)
}

/// `(!)^n f` for even n, `(!)^(n-1) (f & top)` for odd n.
fn pad(f: Formula, target: u32) -> Formula {
    let n = target - f.formula_depth();
    if n == 0 {
        return f;
    }
    let mut g = if n % 2 == 1 { and(f, top()) } else { f };
    for _ in 0..(n - n % 2) {
        g = not(g);
    }
    g
}

/// Pads the shallower conjunct of every conjunction without a `top`
/// conjunct, bottom-up. Formula depths of all nodes are unchanged.
fn level_conjunctions(f: &Formula) -> Formula {
    match f {
        Formula::And(a, b) => {
            let (a, b) = (level_conjunctions(a), level_conjunctions(b));
            if a == Formula::Top || b == Formula::Top {
                return and(a, b);
            }
            let d = a.formula_depth().max(b.formula_depth());
            and(pad(a, d), pad(b, d))
        }
        Formula::Not(a) => not(level_conjunctions(a)),
        Formula::Dia(..) | Formula::Glob(..) => with_child(f, level_conjunctions(modal_child(f))),
        _ => f.clone(),
    }
}

/// Depth every iteration body of `balance(prog)` is padded to, measured on
/// the core syntax: the round-indicator wrapper adds four levels.
pub fn balanced_depth(prog: &GmscProgram) -> u32 {
    let n = prog.heads().len();
    let d = (0..n)
        .flat_map(|i| [prog.terminal(i).formula_depth(), prog.iteration(i).formula_depth()])
        .max()
        .unwrap_or(0);
    d.max(1) + 4
}

/// Equivalent program, one round behind the input, in which every terminal
/// body is bot, every iteration body has the same formula depth, and both
/// conjuncts of any conjunction without a `top` conjunct have equal depth.
pub fn balance(prog: &GmscProgram) -> Result<GmscProgram> {
    let target = balanced_depth(prog);
    let mut used: BTreeSet<String> = prog.heads().iter().cloned().collect();
    let mut cl = Clauses::of(prog);
    cl.shift_terminals(&mut used);
    for body in cl.iteration.iter_mut() {
        *body = pad(level_conjunctions(body), target);
    }
    cl.build(prog)
}

/// True iff every conjunction without a `top` conjunct has equal-depth
/// conjuncts.
pub fn conjunctions_level(f: &Formula) -> bool {
    match f {
        Formula::And(a, b) => {
            (**a == Formula::Top
                || **b == Formula::Top
                || a.formula_depth() == b.formula_depth())
                && conjunctions_level(a)
                && conjunctions_level(b)
        }
        Formula::Not(a) | Formula::Dia(_, a) | Formula::Glob(_, a) => conjunctions_level(a),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::gml::Formula;

    fn parse(s: &str) -> GmscProgram {
        GmscProgram::parse(s).unwrap()
    }

    #[test]
    fn normal_form_shapes() {
        for (name, prog) in corpus::all_programs() {
            let nf = to_normal_form(&prog).unwrap();
            assert!(nf.is_normal_form(), "{name}");
            assert_eq!(nf.appointed(), prog.appointed());
        }
    }

    #[test]
    fn deep_example_gets_three_phase_clock() {
        let nf = to_normal_form(&parse(corpus::DEEP)).unwrap();
        let heads: Vec<&str> = nf.heads().iter().map(String::as_str).collect();
        assert_eq!(heads, ["X", "Y1", "Y2", "Y3", "T1", "T2", "T3"]);
        let t1 = nf.head_index("T1").unwrap();
        assert_eq!(nf.terminal(t1), &Formula::Top);
        assert_eq!(nf.iteration(t1), &var("T3"));
    }

    #[test]
    fn already_normal_is_untouched() {
        let p = parse(corpus::REACHABILITY);
        assert_eq!(to_normal_form(&p).unwrap().to_string(), p.to_string());
    }

    #[test]
    fn terminal_modalities_are_shifted() {
        let nf = to_normal_form(&parse(corpus::CENTRE_POINT)).unwrap();
        assert_eq!(nf.heads().len(), 2);
        assert_eq!(nf.terminal(0), &bot());
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let p = parse("I(0) :- <1> p; I :- <1> <1> I; T1(0) :- p; T1 :- T1; appointed: I;");
        let nf = to_normal_form(&p).unwrap();
        let set: BTreeSet<_> = nf.heads().iter().collect();
        assert_eq!(set.len(), nf.heads().len());
        assert!(nf.is_normal_form());
    }

    #[test]
    fn balanced_bodies_share_depth() {
        for (name, prog) in corpus::all_programs() {
            let b = balance(&prog).unwrap();
            let d = balanced_depth(&prog);
            for i in 0..b.heads().len() {
                assert_eq!(b.terminal(i), &bot(), "{name}");
                assert_eq!(b.iteration(i).formula_depth(), d, "{name}");
                assert!(conjunctions_level(b.iteration(i)), "{name}");
            }
        }
    }

    #[test]
    fn balanced_depth_of_reachability() {
        // D = 1 (body <1> X): wrapper depth 4 + max(1, D) = 5.
        assert_eq!(balanced_depth(&parse(corpus::REACHABILITY)), 5);
    }

    #[test]
    fn conjunction_padding() {
        let f = level_conjunctions(&Formula::parse("(p & <1> q)").unwrap());
        assert_eq!(f, Formula::parse("((p & top) & <1> q)").unwrap());
        let g = level_conjunctions(&Formula::parse("(p & <1> <1> q)").unwrap());
        assert_eq!(g, Formula::parse("(!!p & <1> <1> q)").unwrap());
        assert!(conjunctions_level(&g));
    }
}
