//! Counts with algebraic decision diagrams and prints each node's diagram
//! size.
//!
//! `cargo run --example valuate_add`

use pjtree::add::{default_order, valuate_nodes};
use pjtree::formula::{parse_cnf, LiteralWeight};
use pjtree::jointree::read_jt;

const FORMULA: &str = include_str!("../tests/data/sample.cnf");
const TREE: &str = include_str!("../tests/data/sample.jt");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut f = parse_cnf(FORMULA)?;
    for x in 1..=f.var_count {
        f.weights.set(x, LiteralWeight::new(1.5, 0.5));
    }
    let tree = read_jt(TREE)?;
    let order = default_order(&f);
    println!("diagram order {:?}", order.sequence());
    let (mgr, val) = valuate_nodes(&tree, &f, &order)?;
    for id in tree.postorder() {
        let add = val[&id];
        println!("node {id:>2}: {} nodes, support {:?}", mgr.node_count(add)?, mgr.support(add)?);
    }
    println!("count {}", mgr.value(val[&tree.root()])?.expect("root is a constant"));
    println!("{} nodes stored in the manager", mgr.stored_nodes());
    Ok(())
}
