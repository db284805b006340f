//! Builds a tree decomposition with min-fill, turns it into a project-join
//! tree, and compares widths.
//!
//! `cargo run --example plan_from_td [FILE]`

use pjtree::decomposition::build_td_minfill;
use pjtree::formula::{gaifman_graph, parse_cnf};
use pjtree::jointree::write_jt;
use pjtree::planner::td::td_to_pjt_traced;

const SAMPLE: &str = include_str!("../tests/data/sample.cnf");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let f = parse_cnf(&text)?;
    let td = build_td_minfill(&gaifman_graph(&f));
    print!("{}", td.to_pace());
    let (tree, calls) = td_to_pjt_traced(&f, &td)?;
    for call in &calls {
        println!("c process bag {} keep {:?} -> {:?}", call.bag, call.keep, call.returned);
    }
    println!("c treewidth bound {}, tree width {}", td.width(), tree.width(&f));
    print!("{}", write_jt(&tree)?);
    Ok(())
}
