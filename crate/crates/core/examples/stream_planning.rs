//! Feeds a stream of improving decompositions to the anytime planner and
//! shows how the stopping coefficient decides which one is kept.
//!
//! `cargo run --example stream_planning`

use pjtree::decomposition::parse_td_stream;
use pjtree::formula::parse_cnf;
use pjtree::planner::td::{best_of_stream, CostModel};

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

/// A solver's output: one bag, then a path of width 1.
const STREAM: &str = "\
c first answer
s td 1 5 5
b 1 1 2 3 4 5
c improved
s td 4 2 5
b 1 1 3
b 2 3 4
b 3 2
b 4 5
1 2
2 3
3 4
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = parse_cnf(SAMPLE)?;
    for kappa in [0.0, 1e-7, 1e9] {
        for model in [CostModel::Add, CostModel::Tensor] {
            let out = best_of_stream(&f, parse_td_stream(STREAM), model, kappa)?;
            println!(
                "kappa {kappa:e} {model:?}: kept #{} of {} seen, cost {}, width {}, stopped early {}",
                out.chosen + 1,
                out.seen,
                out.cost,
                out.tree.width(&f),
                out.stopped_early
            );
        }
    }
    Ok(())
}
