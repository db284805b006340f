//! Counts by dense tensor contraction and checks the flop estimate.
//!
//! `cargo run --example valuate_tensor [FILE]`

use pjtree::formula::parse_cnf;
use pjtree::planner::td::plan_minfill;
use pjtree::tensor::{estimate, valuate_tensor};

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let f = parse_cnf(&text)?;
    let tree = plan_minfill(&f)?;
    let predicted = estimate(&tree, &f);
    let (count, measured) = valuate_tensor(&tree, &f)?;
    println!("count {count}");
    println!("predicted {} flops, max rank {}", predicted.flops, predicted.max_rank);
    println!("measured  {} flops, max rank {}", measured.flops, measured.max_rank);
    assert_eq!(predicted, measured);
    Ok(())
}
