mod common;

use std::fs;
use std::io::Cursor;
use std::path::PathBuf;
use std::process::Command;

use pjtree::decomposition::parse_td;
use pjtree::formula::parse_cnf;
use pjtree::jointree::{read_jt, validate};
use pjtree::oracle::brute_force_wmc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_cnf, SAMPLE_CNF, SAMPLE_JT};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Run {
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("pjtree").chain(args.iter().copied());
    let code = pjtree::cli::run(argv, &mut input, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with_stdin(args, "")
}

fn scratch(name: &str, text: &str) -> String {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn last_line(text: &str) -> &str {
    text.lines().last().unwrap_or("")
}

const WEIGHTED_SAMPLE: &str = "p cnf 5 6\nw 1 0.5 0\nw -1 1.5 0\nw 2 0.5 0\nw -2 1.5 0\nw 3 0.5 0\nw -3 1.5 0\nw 4 0.5 0\nw -4 1.5 0\nw 5 0.5 0\nw -5 1.5 0\n1 3 0\n-1 -3 0\n2 0\n3 4 0\n-4 0\n5 0\n";

/// The sample formula's Gaifman graph is the path 1-3-4 plus isolated 2 and 5.
const PATH_TD: &str = "s td 4 2 5\nb 1 1 3\nb 2 3 4\nb 3 2\nb 4 5\n1 2\n2 3\n3 4\n";

#[test]
fn plan_with_the_representative_heuristic() {
    let cnf = scratch("plan_l1.cnf", SAMPLE_CNF);
    let r = run(&["plan", &cnf, "--planner", "htb", "--order", "invlexp", "--rank", "be", "--cluster", "tree"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let tree = read_jt(&r.out).unwrap();
    let f = parse_cnf(SAMPLE_CNF).unwrap();
    assert!(validate(&tree, &f).is_ok());
    assert!(tree.width(&f) <= 5);
    assert!(r.out.contains(&format!("c width {}\n", tree.width(&f))));
    assert!(r.out.contains("c cost_add "));
    assert!(r.out.contains("c cost_tensor "));
}

#[test]
fn plan_from_a_path_decomposition() {
    let cnf = scratch("plan_td.cnf", SAMPLE_CNF);
    let td = scratch("path.td", PATH_TD);
    let r = run(&["plan", &cnf, "--planner", "td", "--td", &td]);
    assert_eq!(r.code, 0, "{}", r.err);
    let tree = read_jt(&r.out).unwrap();
    assert!(tree.width(&parse_cnf(SAMPLE_CNF).unwrap()) <= 2);
    let from_stdin = run_with_stdin(&["plan", &cnf, "--planner", "td", "--td", "-"], PATH_TD);
    assert_eq!(from_stdin.out, r.out);
}

#[test]
fn plan_without_clauses_projects_everything_at_the_root() {
    let cnf = scratch("empty.cnf", "p cnf 3 0\n");
    for planner in ["htb", "td"] {
        let r = run(&["plan", &cnf, "--planner", planner]);
        assert_eq!(r.code, 0, "{planner}: {}", r.err);
        let tree = read_jt(&r.out).unwrap();
        assert_eq!(tree.len(), 1);
        let root = tree.node(tree.root()).unwrap();
        assert_eq!(root.projected().iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        let count = run(&["count", &cnf, "--planner", planner]);
        assert_eq!(last_line(&count.out), "8");
    }
}

#[test]
fn count_sample_tree_on_both_executors() {
    let cnf = scratch("count_l1.cnf", SAMPLE_CNF);
    let jt = scratch("count_l2.jt", SAMPLE_JT);
    let r = run(&["count", &cnf, "--jt", &jt, "--executor", "add"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(last_line(&r.out), "1");
    assert!(r.out.contains("c executor add\n"));
    assert!(r.out.contains("c width "));
    assert!(r.err.contains("c elapsed "));

    let weighted = scratch("count_w.cnf", WEIGHTED_SAMPLE);
    let r = run(&["count", &weighted, "--executor", "tensor"]);
    assert_eq!(last_line(&r.out), "0.28125");
    let r = run(&["count", &weighted, "--jt", &jt, "--executor", "oracle-nicetd"]);
    assert_eq!(last_line(&r.out), "0.28125");
}

#[test]
fn every_executor_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for i in 0..100 {
        let f = random_cnf(&mut rng, 3 + i % 8, 1 + i % 20);
        let cnf = scratch(&format!("fuzz{i}.cnf"), &f.to_dimacs());
        let truth = brute_force_wmc(&f).unwrap();
        let brute: f64 = last_line(&run(&["count", &cnf, "--executor", "oracle-brute"]).out).parse().unwrap();
        assert_eq!(brute, truth);
        let planner = ["htb", "td"][i % 2];
        for exec in ["add", "tensor", "oracle-nicetd"] {
            let r = run(&["count", &cnf, "--planner", planner, "--executor", exec]);
            assert_eq!(r.code, 0, "{exec}: {}", r.err);
            let v: f64 = last_line(&r.out).parse().unwrap();
            assert!((v - truth).abs() <= 1e-9 * truth.abs().max(v.abs()), "#{i} {exec}: {v} vs {truth}");
        }
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let cnf = scratch("det.cnf", WEIGHTED_SAMPLE);
    for args in [
        vec!["count", &cnf, "--order", "random", "--seed", "5", "--executor", "tensor"],
        vec!["plan", &cnf, "--order", "random", "--seed", "5"],
        vec!["count", &cnf, "--emit", "kv", "--diagram-order", "identity"],
    ] {
        assert_eq!(run(&args).out, run(&args).out);
    }
}

#[test]
fn key_value_output() {
    let cnf = scratch("kv.cnf", SAMPLE_CNF);
    let r = run(&["count", &cnf, "--executor", "tensor", "--emit", "kv"]);
    let keys: Vec<&str> = r.out.lines().map(|l| l.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["planner", "width", "executor", "max_rank", "flops", "count"]);
    assert_eq!(last_line(&r.out), "count=1");
}

#[test]
fn validate_reports_violations() {
    let cnf = scratch("val.cnf", SAMPLE_CNF);
    let jt = scratch("val.jt", SAMPLE_JT);
    let r = run(&["validate", &cnf, "--jt", &jt]);
    assert_eq!((r.code, r.out.as_str()), (0, "ok\n"));

    // Drop variable 4 from the π of node 15.
    let mutated = SAMPLE_JT.replace("15 10 14 e 4", "15 10 14 e");
    assert_ne!(mutated, SAMPLE_JT);
    let bad = scratch("val_bad.jt", &mutated);
    let r = run(&["validate", &cnf, "--jt", &bad]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("partition violated: variable 4"), "{}", r.out);

    let missing_edge = scratch("val_bad.td", "s td 2 1 5\nb 1 1 2 5\nb 2 4\n1 2\n");
    let r = run(&["validate", &cnf, "--td", &missing_edge]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("edge coverage violated"), "{}", r.out);
    assert!(r.out.lines().count() >= 2);
}

#[test]
fn count_refuses_a_mismatched_tree() {
    let cnf = scratch("mismatch.cnf", SAMPLE_CNF);
    let bad = scratch("mismatch.jt", &SAMPLE_JT.replace("15 10 14 e 4", "15 10 14 e"));
    let r = run(&["count", &cnf, "--jt", &bad]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("partition violated"));
    assert!(r.out.is_empty());
}

#[test]
fn convert_between_formats() {
    let cnf = scratch("conv.cnf", SAMPLE_CNF);
    let jt = scratch("conv.jt", SAMPLE_JT);
    let r = run(&["convert", &cnf, "--jt", &jt]);
    assert_eq!(r.code, 0, "{}", r.err);
    let td = parse_td(&r.out).unwrap();
    assert_eq!(td.width(), 1);

    let td_path = scratch("conv.td", &r.out);
    let back = run(&["convert", &cnf, "--td", &td_path]);
    assert_eq!(back.code, 0, "{}", back.err);
    let jt2 = scratch("conv2.jt", &back.out);
    assert_eq!(run(&["validate", &cnf, "--jt", &jt2]).code, 0);
    let again = run(&["convert", &cnf, "--jt", &jt2]);
    let td2 = scratch("conv2.td", &again.out);
    assert_eq!(run(&["validate", &cnf, "--td", &td2]).code, 0);
}

#[test]
fn single_bag_decomposition_counts_like_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..20 {
        let f = random_cnf(&mut rng, 2 + i % 6, 1 + i);
        let all: Vec<String> = (1..=f.var_count).map(|x| x.to_string()).collect();
        let td = format!("s td 1 {} {}\nb 1 {}\n", f.var_count, f.var_count, all.join(" "));
        let cnf = scratch(&format!("bag{i}.cnf"), &f.to_dimacs());
        let td = scratch(&format!("bag{i}.td"), &td);
        let jt = run(&["convert", &cnf, "--td", &td]);
        assert_eq!(jt.code, 0, "{}", jt.err);
        let jt = scratch(&format!("bag{i}.jt"), &jt.out);
        let v: f64 = last_line(&run(&["count", &cnf, "--jt", &jt]).out).parse().unwrap();
        let truth = brute_force_wmc(&f).unwrap();
        assert!((v - truth).abs() <= 1e-9 * truth.abs().max(v.abs()));
    }
}

#[test]
fn stream_planning_from_stdin() {
    let cnf = scratch("stream.cnf", SAMPLE_CNF);
    let wide = "s td 1 5 5\nb 1 1 2 3 4 5\n";
    let stream = format!("{wide}{PATH_TD}");
    let r = run_with_stdin(&["plan", &cnf, "--planner", "td-stream", "--td", "-", "--kappa", "0"], &stream);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("chosen=1 seen=1"), "{}", r.out);
    let r = run_with_stdin(&["plan", &cnf, "--planner", "td-stream", "--td", "-", "--kappa", "1e9"], &stream);
    assert!(r.out.contains("chosen=2 seen=2"), "{}", r.out);
    assert_eq!(run(&["plan", &cnf, "--planner", "td-stream"]).code, 2);
}

#[test]
fn exit_codes_by_failure_class() {
    assert_eq!(run(&["count", "/nonexistent/x.cnf"]).code, 2);
    let garbage = scratch("garbage.cnf", "p cnf x y\n");
    assert_eq!(run(&["count", &garbage]).code, 2);
    assert_eq!(run(&["count"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);

    let lits: Vec<String> = (1..=31).map(|x| x.to_string()).collect();
    let wide = scratch("wide.cnf", &format!("p cnf 31 1\n{} 0\n", lits.join(" ")));
    let r = run(&["count", &wide, "--executor", "tensor"]);
    assert_eq!(r.code, 3, "{}", r.err);
    assert_eq!(run(&["count", &wide, "--executor", "oracle-brute"]).code, 3);
    let r = run(&["count", &wide]);
    assert_eq!((r.code, last_line(&r.out)), (0, "2147483647"));
}

#[test]
fn binary_runs_end_to_end() {
    let cnf = scratch("bin.cnf", SAMPLE_CNF);
    let out = Command::new(env!("CARGO_BIN_EXE_pjtree")).args(["count", &cnf]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(last_line(&String::from_utf8(out.stdout).unwrap()), "1");
    let help = Command::new(env!("CARGO_BIN_EXE_pjtree")).arg("--help").output().unwrap();
    assert!(help.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_pjtree")).args(["count", "/nonexistent"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
