//! Reads a JT file, validates it, writes it back, and converts it to a PACE
//! tree decomposition.
//!
//! `cargo run --example jt_roundtrip [CNF JT]`

use pjtree::formula::parse_cnf;
use pjtree::jointree::{read_jt, tree_to_td, validate, write_jt};

const FORMULA: &str = include_str!("../tests/data/sample.cnf");
const TREE: &str = include_str!("../tests/data/sample.jt");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (cnf, jt) = match args.as_slice() {
        [c, j] => (std::fs::read_to_string(c)?, std::fs::read_to_string(j)?),
        _ => (FORMULA.to_string(), TREE.to_string()),
    };
    let f = parse_cnf(&cnf)?;
    let tree = read_jt(&jt)?;
    if let Err(violations) = validate(&tree, &f) {
        for v in violations {
            eprintln!("{v}");
        }
        std::process::exit(1);
    }
    let text = write_jt(&tree)?;
    assert_eq!(read_jt(&text)?, tree);
    print!("{text}");
    let td = tree_to_td(&tree, &f)?;
    println!("c width {} as a tree decomposition:", td.width());
    print!("{}", td.to_pace());
    Ok(())
}
