//! Runs all 36 heuristic planner configurations and ranks them by width.
//!
//! `cargo run --example plan_htb [FILE]`

use pjtree::formula::parse_cnf;
use pjtree::planner::htb::{build_tree_traced, HtbConfig};

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let f = parse_cnf(&text)?;
    let mut rows = Vec::new();
    for cfg in HtbConfig::all(0) {
        let (tree, trace) = build_tree_traced(&f, &cfg)?;
        rows.push((tree.width(&f), cfg, tree.len(), trace.order.sequence()));
    }
    rows.sort_by_key(|r| r.0);
    for (width, cfg, nodes, order) in rows {
        println!("{cfg:<24} width {width}  nodes {nodes:>3}  order {order:?}");
    }
    Ok(())
}
