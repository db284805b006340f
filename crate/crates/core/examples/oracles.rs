//! The two reference counters: exhaustive enumeration and dynamic
//! programming over a nice tree decomposition.
//!
//! `cargo run --example oracles [FILE]`

use pjtree::decomposition::build_td_minfill;
use pjtree::formula::{gaifman_graph, parse_cnf};
use pjtree::oracle::{brute_force_wmc, make_nice, nice_td_wmc, NiceKind};

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let f = parse_cnf(&text)?;
    let nice = make_nice(&build_td_minfill(&gaifman_graph(&f)))?;
    let joins = nice.nodes().iter().filter(|n| matches!(n.kind, NiceKind::Join { .. })).count();
    println!("nice decomposition: {} nodes, {joins} joins, width {}", nice.nodes().len(), nice.width());
    println!("brute force  {}", brute_force_wmc(&f)?);
    println!("nice td dp   {}", nice_td_wmc(&f, &nice)?);
    Ok(())
}
