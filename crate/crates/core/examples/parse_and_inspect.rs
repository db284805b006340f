//! Parses a weighted DIMACS CNF and prints its shape and Gaifman graph.
//!
//! `cargo run --example parse_and_inspect [FILE]`

use pjtree::formula::{gaifman_graph, parse_cnf};

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let f = parse_cnf(&text)?;
    println!("{} variables, {} clauses, longest clause {}", f.var_count, f.clauses.len(), f.max_clause_len());
    for c in &f.clauses {
        println!("  clause {}: {c}", c.id);
    }
    println!("free variables: {:?}", f.free_vars());
    for (x, w) in f.weights.iter().filter(|(_, w)| w.neg != 1.0 || w.pos != 1.0) {
        println!("  W({x}) = {}, W(-{x}) = {}", w.pos, w.neg);
    }
    let g = gaifman_graph(&f);
    println!("gaifman graph: {} edges", g.edge_count());
    for (u, v) in g.edges() {
        println!("  {u} -- {v}");
    }
    Ok(())
}
