//! Project-join trees from tree decompositions of the Gaifman graph, and
//! best-of selection over a stream of improving decompositions.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::decomposition::{build_td_minfill, td_validate, TdError, TreeDecomposition};
use crate::formula::{gaifman_graph, CnfFormula, Var};
use crate::jointree::{NodeId, ProjectJoinTree};
use crate::tensor::estimate_flops;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TdPlanError {
    #[error("clause {clause} fits in no bag")]
    ClauseNotCovered { clause: usize },
    #[error("bag {bag} holds vertex {vertex}, outside 1..={var_count}")]
    VertexOutOfRange {
        bag: usize,
        vertex: Var,
        var_count: usize,
    },
    #[error("decomposition is not a tree")]
    NotATree,
    #[error("decomposition stream is empty")]
    EmptyStream,
    #[error("none of the {seen} decompositions in the stream was usable; last problem: {last}")]
    NoValidDecomposition { seen: usize, last: String },
}

/// One call of the recursive conversion: the bag processed, the variables
/// it had to keep, and the tree nodes it returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessCall {
    pub bag: usize,
    pub keep: BTreeSet<Var>,
    pub returned: Vec<NodeId>,
}

/// Root bag: the largest, lowest id on ties.
fn root_bag(td: &TreeDecomposition) -> usize {
    let mut best = 1;
    for i in 2..=td.bag_count() {
        if td.bag(i).len() > td.bag(best).len() {
            best = i;
        }
    }
    best
}

pub fn td_to_pjt(formula: &CnfFormula, td: &TreeDecomposition) -> Result<ProjectJoinTree, TdPlanError> {
    td_to_pjt_traced(formula, td).map(|(t, _)| t)
}

/// Converts `td` and records every call, children before parents.
///
/// Each bag claims the not-yet-claimed clauses it covers, in preorder from
/// the root bag. A bag then returns its leaves and its children's results,
/// wrapped in a new node projecting the bag minus its parent's bag unless
/// that set is empty or nothing was collected. Variables left unprojected
/// (those in no clause) are projected by a chain of one-variable nodes above
/// the root so no node grows past the decomposition's width plus one.
pub fn td_to_pjt_traced(
    formula: &CnfFormula,
    td: &TreeDecomposition,
) -> Result<(ProjectJoinTree, Vec<ProcessCall>), TdPlanError> {
    let m = formula.var_count;
    for (i, bag) in td.bags().iter().enumerate() {
        if let Some(&v) = bag.iter().find(|&&v| v == 0 || v > m) {
            return Err(TdPlanError::VertexOutOfRange {
                bag: i + 1,
                vertex: v,
                var_count: m,
            });
        }
    }
    let mut tree = ProjectJoinTree::with_leaves(m, formula.clause_count());
    let mut calls = Vec::new();
    let mut top: Vec<NodeId> = Vec::new();

    if td.bag_count() > 0 {
        if !td.is_tree() {
            return Err(TdPlanError::NotATree);
        }
        let root = root_bag(td);
        let (parent, _) = td.rooted(root);
        let mut children = vec![Vec::new(); td.bag_count()];
        for b in 1..=td.bag_count() {
            if b != root {
                children[parent[b - 1] - 1].push(b);
            }
        }

        // Preorder and postorder, children ascending.
        let mut preorder = Vec::with_capacity(td.bag_count());
        let mut postorder = Vec::with_capacity(td.bag_count());
        let mut stack = vec![(root, false)];
        while let Some((b, expanded)) = stack.pop() {
            if expanded {
                postorder.push(b);
            } else {
                preorder.push(b);
                stack.push((b, true));
                stack.extend(children[b - 1].iter().rev().map(|&c| (c, false)));
            }
        }

        let mut claimed: Vec<Vec<usize>> = vec![Vec::new(); td.bag_count()];
        for c in &formula.clauses {
            let home = preorder
                .iter()
                .find(|&&b| c.literals.iter().all(|l| td.bag(b).contains(&l.var)))
                .ok_or(TdPlanError::ClauseNotCovered { clause: c.id })?;
            claimed[home - 1].push(c.id);
        }

        let mut returned: Vec<Vec<NodeId>> = vec![Vec::new(); td.bag_count()];
        let empty = BTreeSet::new();
        for &b in &postorder {
            let mut collected: Vec<NodeId> = claimed[b - 1].clone();
            for &ch in &children[b - 1] {
                collected.append(&mut returned[ch - 1]);
            }
            let keep = if b == root { &empty } else { td.bag(parent[b - 1]) };
            let bag = td.bag(b);
            let result = if collected.is_empty() || bag.is_subset(keep) {
                collected
            } else {
                vec![tree.add_internal(collected, bag.difference(keep).copied())]
            };
            calls.push((b, keep.clone(), result.clone()));
            returned[b - 1] = result;
        }
        top = std::mem::take(&mut returned[root - 1]);
    }

    let projected: BTreeSet<Var> = tree
        .internal_nodes()
        .flat_map(|n| n.projected().iter().copied())
        .collect();
    let mut root = match top.as_slice() {
        [] => None,
        [only] if !tree.node(*only).is_some_and(|n| n.is_leaf()) => Some(*only),
        _ => Some(tree.add_internal(top.iter().copied(), std::iter::empty())),
    };
    let leftover: Vec<Var> = (1..=m).filter(|x| !projected.contains(x)).collect();
    match root {
        None => root = Some(tree.add_internal(std::iter::empty(), leftover)),
        Some(_) => {
            for x in leftover {
                root = Some(tree.add_internal(root, [x]));
            }
        }
    }
    tree.set_root(root.expect("root"));

    let calls = calls
        .into_iter()
        .map(|(bag, keep, returned)| ProcessCall { bag, keep, returned })
        .collect();
    Ok((tree, calls))
}

/// Conversion of the built-in min-fill decomposition.
pub fn plan_minfill(formula: &CnfFormula) -> Result<ProjectJoinTree, TdPlanError> {
    td_to_pjt(formula, &build_td_minfill(&gaifman_graph(formula)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostModel {
    /// `2^w` for a tree of width `w`.
    Add,
    /// Floating-point operations of the tensor executor.
    Tensor,
}

impl CostModel {
    pub fn cost(self, tree: &ProjectJoinTree, formula: &CnfFormula) -> f64 {
        match self {
            CostModel::Add => 2f64.powi(tree.width(formula) as i32),
            CostModel::Tensor => estimate_flops(tree, formula) as f64,
        }
    }
}

impl std::str::FromStr for CostModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(CostModel::Add),
            "tensor" => Ok(CostModel::Tensor),
            _ => Err(format!("unknown cost model `{s}`")),
        }
    }
}

/// Default stopping coefficient, in seconds per cost unit.
pub const DEFAULT_KAPPA: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    pub tree: ProjectJoinTree,
    pub cost: f64,
    /// Zero-based stream position of the decomposition that won.
    pub chosen: usize,
    /// Items taken from the stream, usable or not.
    pub seen: usize,
    /// Whether the stopping rule fired before the stream ended.
    pub stopped_early: bool,
    pub elapsed: Duration,
}

/// Converts decompositions as they arrive and keeps the cheapest tree.
/// Stops once the time spent reaches `kappa` seconds per unit of the best
/// cost so far, or when the stream ends. Unusable items are skipped.
pub fn best_of_stream<I>(
    formula: &CnfFormula,
    stream: I,
    cost_model: CostModel,
    kappa: f64,
) -> Result<StreamOutcome, TdPlanError>
where
    I: IntoIterator<Item = Result<TreeDecomposition, TdError>>,
{
    let start = Instant::now();
    let graph = gaifman_graph(formula);
    let mut best: Option<(ProjectJoinTree, f64, usize)> = None;
    let mut seen = 0;
    let mut last = String::new();
    let mut stopped_early = false;
    for item in stream {
        let index = seen;
        seen += 1;
        let td = match item {
            Ok(td) => td,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        if let Err(violations) = td_validate(&td, &graph) {
            last = violations[0].to_string();
            continue;
        }
        let tree = match td_to_pjt(formula, &td) {
            Ok(t) => t,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let cost = cost_model.cost(&tree, formula);
        if best.as_ref().is_none_or(|(_, c, _)| cost < *c) {
            best = Some((tree, cost, index));
        }
        let budget = kappa * best.as_ref().expect("best").1;
        if start.elapsed().as_secs_f64() >= budget {
            stopped_early = true;
            break;
        }
    }
    match best {
        Some((tree, cost, chosen)) => Ok(StreamOutcome {
            tree,
            cost,
            chosen,
            seen,
            stopped_early,
            elapsed: start.elapsed(),
        }),
        None if seen == 0 => Err(TdPlanError::EmptyStream),
        None => Err(TdPlanError::NoValidDecomposition { seen, last }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{parse_td, parse_td_stream};
    use crate::formula::parse_cnf;
    use crate::jointree::validate;

    fn sample_cnf() -> CnfFormula {
        parse_cnf(include_str!("../../tests/data/sample.cnf")).unwrap()
    }

    const PATH_TD: &str = "s td 4 2 5\nb 1 1 3\nb 2 3 4\nb 3 2\nb 4 5\n1 2\n2 3\n3 4\n";

    #[test]
    fn sample_with_path_decomposition() {
        let f = sample_cnf();
        let td = parse_td(PATH_TD).unwrap();
        let (t, calls) = td_to_pjt_traced(&f, &td).unwrap();
        assert_eq!(validate(&t, &f), Ok(()));
        assert!(t.width(&f) <= 2);
        let vars = t.all_node_vars(&f);
        for call in &calls {
            for n in &call.returned {
                assert!(vars[n].is_subset(&call.keep));
            }
        }
        // Children precede parents in the log; the root bag comes last.
        assert_eq!(calls.last().unwrap().bag, 1);
    }

    #[test]
    fn single_clause_single_bag() {
        let f = CnfFormula::from_dimacs_clauses(2, &[vec![1, 2]]);
        let td = parse_td("s td 1 2 2\nb 1 1 2").unwrap();
        let t = td_to_pjt(&f, &td).unwrap();
        assert_eq!(t.len(), 2);
        let root = t.node(t.root()).unwrap();
        assert_eq!(root.children(), &[1]);
        assert_eq!(root.projected(), &BTreeSet::from([1, 2]));
        assert_eq!(t.width(&f), 2);
    }

    #[test]
    fn uncovered_clause_is_reported() {
        let f = CnfFormula::from_dimacs_clauses(2, &[vec![1, 2]]);
        let td = parse_td("s td 2 1 2\nb 1 1\nb 2 2\n1 2").unwrap();
        assert_eq!(td_to_pjt(&f, &td), Err(TdPlanError::ClauseNotCovered { clause: 1 }));
    }

    #[test]
    fn free_variables_are_chained_above_the_root() {
        // Decomposition lacks vertex 3 entirely.
        let f = CnfFormula::from_dimacs_clauses(3, &[vec![1, 2]]);
        let td = parse_td("s td 1 2 3\nb 1 1 2").unwrap();
        let t = td_to_pjt(&f, &td).unwrap();
        assert_eq!(validate(&t, &f), Ok(()));
        assert_eq!(t.node(t.root()).unwrap().projected(), &BTreeSet::from([3]));
        assert_eq!(t.width(&f), 2);
    }

    #[test]
    fn empty_root_bag_gets_a_synthetic_root() {
        let f = CnfFormula::from_dimacs_clauses(1, &[vec![], vec![]]);
        let td = parse_td("s td 1 0 1\nb 1").unwrap();
        let t = td_to_pjt(&f, &td).unwrap();
        assert_eq!(validate(&t, &f), Ok(()));
        // Leaves 1 and 2 under a π = ∅ node, then x1 on top.
        assert_eq!(t.node(3).unwrap().children(), &[1, 2]);
        assert_eq!(t.node(t.root()).unwrap().projected(), &BTreeSet::from([1]));

        let g = CnfFormula::from_dimacs_clauses(1, &[vec![]]);
        let t = td_to_pjt(&g, &td).unwrap();
        assert_eq!(validate(&t, &g), Ok(()));
        assert_eq!(t.node(2).unwrap().children(), &[1]);
    }

    #[test]
    fn minfill_plans_are_valid() {
        let f = sample_cnf();
        let t = plan_minfill(&f).unwrap();
        assert_eq!(validate(&t, &f), Ok(()));
        assert!(t.width(&f) <= 2);
    }

    #[test]
    fn stream_selection() {
        let f = CnfFormula::from_dimacs_clauses(
            6,
            &[vec![1, 2, 3, 4, 5, 6], vec![1, 2], vec![3, 4]],
        );
        // Both decompositions have width 5; the tie keeps the earlier one.
        let wide = "s td 1 6 6\nb 1 1 2 3 4 5 6\n";
        let also = "s td 2 6 6\nb 1 1 2 3 4 5 6\nb 2 1 2\n1 2\n";
        let text = format!("{wide}{also}");
        let out = best_of_stream(&f, parse_td_stream(&text), CostModel::Add, 1e9).unwrap();
        assert_eq!(out.seen, 2);
        assert_eq!(out.chosen, 0);
        assert!(!out.stopped_early);

        let first = best_of_stream(&f, parse_td_stream(&text), CostModel::Add, 0.0).unwrap();
        assert_eq!(first.seen, 1);
        assert!(first.stopped_early);
    }

    #[test]
    fn stream_prefers_narrower_trees() {
        let f = CnfFormula::from_dimacs_clauses(4, &[vec![1, 2], vec![2, 3], vec![3, 4]]);
        let wide = "s td 1 4 4\nb 1 1 2 3 4\n";
        let narrow = "s td 3 2 4\nb 1 1 2\nb 2 2 3\nb 3 3 4\n1 2\n2 3\n";
        let text = format!("{wide}{narrow}");
        let out = best_of_stream(&f, parse_td_stream(&text), CostModel::Add, 1e9).unwrap();
        assert_eq!(out.chosen, 1);
        assert_eq!(out.cost, 4.0);
        let out = best_of_stream(&f, parse_td_stream(&text), CostModel::Tensor, 1e9).unwrap();
        assert_eq!(out.chosen, 1);
    }

    #[test]
    fn stream_errors() {
        let f = sample_cnf();
        let none: Vec<Result<TreeDecomposition, TdError>> = Vec::new();
        assert_eq!(
            best_of_stream(&f, none, CostModel::Add, DEFAULT_KAPPA).unwrap_err(),
            TdPlanError::EmptyStream
        );
        let bad = parse_td_stream("s td 1 1 5\nb 1 1\n");
        assert!(matches!(
            best_of_stream(&f, bad, CostModel::Add, DEFAULT_KAPPA),
            Err(TdPlanError::NoValidDecomposition { seen: 1, .. })
        ));
    }
}
