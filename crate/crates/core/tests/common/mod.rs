#![allow(dead_code)]

use std::collections::BTreeSet;

use pjtree::decomposition::{td_from_elimination_order, TreeDecomposition};
use pjtree::formula::{gaifman_graph, parse_cnf, CnfFormula, LiteralWeight, Var, WeightFunction};
use pjtree::jointree::{read_jt, ProjectJoinTree};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SAMPLE_CNF: &str = include_str!("../data/sample.cnf");
pub const SAMPLE_JT: &str = include_str!("../data/sample.jt");

pub fn sample_cnf() -> CnfFormula {
    parse_cnf(SAMPLE_CNF).expect("the sample formula parses")
}

pub fn sample_jt() -> ProjectJoinTree {
    read_jt(SAMPLE_JT).expect("the sample tree parses")
}

/// Every variable gets `x ↦ 0.5, ¬x ↦ 1.5` or the reverse, by coin flip.
pub fn benchmark_weights(rng: &mut impl Rng, m: usize) -> WeightFunction {
    let mut w = WeightFunction::unit(m);
    for x in 1..=m {
        let lw = if rng.gen_bool(0.5) {
            LiteralWeight::new(1.5, 0.5)
        } else {
            LiteralWeight::new(0.5, 1.5)
        };
        w.set(x, lw);
    }
    w
}

/// Random CNF with `vars` variables and `clauses` clauses of 1 to 4 distinct
/// variables each. Some variables may occur in no clause.
pub fn random_cnf(rng: &mut impl Rng, vars: usize, clauses: usize) -> CnfFormula {
    let all: Vec<i64> = (1..=vars as i64).collect();
    let rows: Vec<Vec<i64>> = (0..clauses)
        .map(|_| {
            let len = rng.gen_range(1..=vars.min(4));
            all.choose_multiple(rng, len)
                .map(|&x| if rng.gen_bool(0.5) { x } else { -x })
                .collect()
        })
        .collect();
    let w = benchmark_weights(rng, vars);
    CnfFormula::from_dimacs_clauses(vars, &rows).with_weights(w)
}

/// The fuzz corpus: `count` formulas with 3 to 12 variables and 1 to 30
/// clauses, fixed by `seed`.
pub fn corpus(seed: u64, count: usize) -> Vec<CnfFormula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.gen_range(3..=12);
            let l = rng.gen_range(1..=30);
            random_cnf(&mut rng, m, l)
        })
        .collect()
}

/// Smaller instances, `m ≤ max_vars`.
pub fn small_corpus(seed: u64, count: usize, max_vars: usize) -> Vec<CnfFormula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.gen_range(1..=max_vars);
            let l = rng.gen_range(1..=3 * m);
            random_cnf(&mut rng, m, l)
        })
        .collect()
}

/// A valid decomposition of the formula's Gaifman graph from a random
/// elimination order, sometimes padded with duplicate leaf bags so the
/// result is not minimal.
pub fn random_td(rng: &mut impl Rng, formula: &CnfFormula) -> TreeDecomposition {
    let g = gaifman_graph(formula);
    let mut order: Vec<Var> = (1..=formula.var_count).collect();
    order.shuffle(rng);
    let td = td_from_elimination_order(&g, &order);
    let mut bags: Vec<BTreeSet<Var>> = td.bags().to_vec();
    let mut edges = td.edges().to_vec();
    for _ in 0..rng.gen_range(0..3) {
        if bags.is_empty() {
            break;
        }
        let at = rng.gen_range(1..=bags.len());
        let copy: BTreeSet<Var> = bags[at - 1].iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        bags.push(copy);
        edges.push((at, bags.len()));
    }
    TreeDecomposition::new(formula.var_count, bags, edges)
}
