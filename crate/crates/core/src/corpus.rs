//! Reference programs used by tests, benches and the CLI examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gml::{and, dia, not, prop, top, var, Formula};
use crate::gmsc::GmscProgram;

/// Accepts exactly the nodes from which a p-node is reachable.
pub const REACHABILITY: &str = "X(0) :- p; X :- <1> X; appointed: X;";

/// Accepts nodes all of whose maximal walks have the same length.
pub const CENTRE_POINT: &str = "X(0) :- [] bot; X :- (<1> X & [] X); appointed: X;";

/// Modal depth three, normalized by the clock construction.
pub const DEEP: &str = "X(0) :- bot; X :- <3> (!<2> <1> X & <3> q); appointed: X;";

pub const TWO_SUCCESSORS: &str = "X(0) :- p; X :- <2> X; appointed: X;";

/// Spreads backwards along edges, or everywhere once every node holds it.
pub const GLOBAL: &str = "X(0) :- p; X :- (<1> X | !<e 1> !X); appointed: X;";

pub const PROGRAMS: [(&str, &str); 5] = [
    ("reachability", REACHABILITY),
    ("centre-point", CENTRE_POINT),
    ("deep", DEEP),
    ("two-successors", TWO_SUCCESSORS),
    ("global", GLOBAL),
];

pub const RANDOM_SEED: u64 = 20_241;

fn random_formula(rng: &mut ChaCha8Rng, depth: u32, heads: &[&str], modal: bool) -> Formula {
    let leaf = |rng: &mut ChaCha8Rng| -> Formula {
        let pick = rng.gen_range(0..2 + heads.len());
        match pick {
            0 => top(),
            1 => prop("p"),
            i => var(heads[i - 2]),
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..5) {
        0 => leaf(rng),
        1 => not(random_formula(rng, depth - 1, heads, modal)),
        2 | 3 => and(
            random_formula(rng, depth - 1, heads, modal),
            random_formula(rng, depth - 1, heads, modal),
        ),
        _ if modal => dia(1, random_formula(rng, depth - 1, heads, false)),
        _ => not(random_formula(rng, depth - 1, heads, modal)),
    }
}

/// Two heads over {p}; terminal bodies modal-free, iteration bodies of
/// modal depth at most one and width one.
pub fn random_program(seed: u64) -> GmscProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = ["X", "Y"];
    let terminal = heads
        .iter()
        .map(|_| random_formula(&mut rng, 2, &[], false))
        .collect();
    let iteration = heads
        .iter()
        .map(|_| random_formula(&mut rng, 3, &heads, true))
        .collect();
    GmscProgram::new(
        Some(vec!["p".into()]),
        heads.iter().map(|s| s.to_string()).collect(),
        terminal,
        iteration,
        &["X".to_string()],
    )
    .expect("generated program is well formed")
}

/// Every corpus program, the seeded random one last.
pub fn all_programs() -> Vec<(String, GmscProgram)> {
    let mut out: Vec<(String, GmscProgram)> = PROGRAMS
        .iter()
        .map(|(n, s)| (n.to_string(), GmscProgram::parse(s).expect("corpus parses")))
        .collect();
    out.push(("random".into(), random_program(RANDOM_SEED)));
    out
}
