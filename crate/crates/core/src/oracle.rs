//! Reference weighted model counters: exhaustive enumeration, and dynamic
//! programming over a nice tree decomposition.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::decomposition::TreeDecomposition;
use crate::formula::{CnfFormula, Var};

/// Largest variable count the enumerator accepts.
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{var_count} variables is above the enumeration limit of {MAX_BRUTE_FORCE_VARS}")]
    TooManyVariables { var_count: usize },
    #[error("decomposition is not a tree")]
    NotATree,
    #[error("clause {clause} fits in no bag")]
    ClauseNotCovered { clause: usize },
    #[error("bag holds vertex {vertex}, outside 1..={var_count}")]
    VertexOutOfRange { vertex: Var, var_count: usize },
}

/// `∑_τ φ(τ)·W(τ)` over all `2^m` assignments.
pub fn brute_force_wmc(formula: &CnfFormula) -> Result<f64, OracleError> {
    let m = formula.var_count;
    if m > MAX_BRUTE_FORCE_VARS {
        return Err(OracleError::TooManyVariables { var_count: m });
    }
    // Bit x − 1 of an assignment is the value of x.
    let masks: Vec<(u32, u32)> = formula
        .clauses
        .iter()
        .map(|c| {
            c.literals.iter().fold((0, 0), |(pos, neg), l| {
                let bit = 1u32 << (l.var - 1);
                if l.positive {
                    (pos | bit, neg)
                } else {
                    (pos, neg | bit)
                }
            })
        })
        .collect();
    let weights: Vec<(f64, f64)> = (1..=m)
        .map(|x| {
            let w = formula.weights.get(x);
            (w.neg, w.pos)
        })
        .collect();
    let mut total = 0.0;
    for tau in 0u32..(1u32 << m) {
        if masks.iter().all(|&(pos, neg)| tau & pos != 0 || !tau & neg != 0) {
            let mut w = 1.0;
            for (k, &(neg, pos)) in weights.iter().enumerate() {
                w *= if tau >> k & 1 == 1 { pos } else { neg };
            }
            total += w;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiceKind {
    Leaf,
    Intro { child: usize, var: Var },
    Removal { child: usize, var: Var },
    Join { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceNode {
    pub kind: NiceKind,
    pub bag: BTreeSet<Var>,
}

/// A nice decomposition. Nodes are stored children first; the root is last
/// and has an empty bag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceTd {
    vertex_count: usize,
    nodes: Vec<NiceNode>,
}

impl NiceTd {
    pub fn nodes(&self) -> &[NiceNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn width(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.bag.len())
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// Checks the shape rules of each node kind.
    pub fn is_nice(&self) -> bool {
        let root_ok = self.nodes.last().is_some_and(|n| n.bag.is_empty());
        root_ok
            && self.nodes.iter().enumerate().all(|(i, n)| match n.kind {
                NiceKind::Leaf => n.bag.is_empty(),
                NiceKind::Intro { child, var } => {
                    child < i && !self.nodes[child].bag.contains(&var) && {
                        let mut b = self.nodes[child].bag.clone();
                        b.insert(var);
                        b == n.bag
                    }
                }
                NiceKind::Removal { child, var } => {
                    child < i && self.nodes[child].bag.contains(&var) && {
                        let mut b = self.nodes[child].bag.clone();
                        b.remove(&var);
                        b == n.bag
                    }
                }
                NiceKind::Join { left, right } => {
                    left < i && right < i && self.nodes[left].bag == n.bag && self.nodes[right].bag == n.bag
                }
            })
    }

    /// As a plain decomposition, numbered in preorder from the root (bag 1),
    /// left subtrees first.
    pub fn to_td(&self) -> TreeDecomposition {
        let mut ids = vec![0; self.nodes.len()];
        let mut bags = Vec::with_capacity(self.nodes.len());
        let mut edges = Vec::new();
        let mut stack = vec![(self.root(), 0usize)];
        while let Some((n, parent)) = stack.pop() {
            bags.push(self.nodes[n].bag.clone());
            ids[n] = bags.len();
            if parent != 0 {
                edges.push((parent, ids[n]));
            }
            match self.nodes[n].kind {
                NiceKind::Leaf => {}
                NiceKind::Intro { child, .. } | NiceKind::Removal { child, .. } => stack.push((child, ids[n])),
                NiceKind::Join { left, right } => {
                    stack.push((right, ids[n]));
                    stack.push((left, ids[n]));
                }
            }
        }
        TreeDecomposition::new(self.vertex_count, bags, edges)
    }
}

struct NiceBuilder {
    nodes: Vec<NiceNode>,
}

impl NiceBuilder {
    fn push(&mut self, kind: NiceKind, bag: BTreeSet<Var>) -> usize {
        self.nodes.push(NiceNode { kind, bag });
        self.nodes.len() - 1
    }

    /// Walks from node `from` to `target`: removals (descending), then
    /// introductions (ascending).
    fn transition(&mut self, mut from: usize, target: &BTreeSet<Var>) -> usize {
        let gone: Vec<Var> = self.nodes[from].bag.difference(target).copied().collect();
        for &x in gone.iter().rev() {
            let mut bag = self.nodes[from].bag.clone();
            bag.remove(&x);
            from = self.push(NiceKind::Removal { child: from, var: x }, bag);
        }
        let new: Vec<Var> = target.difference(&self.nodes[from].bag).copied().collect();
        for x in new {
            let mut bag = self.nodes[from].bag.clone();
            bag.insert(x);
            from = self.push(NiceKind::Intro { child: from, var: x }, bag);
        }
        from
    }
}

/// Nice form of `td` rooted at bag 1: every bag reappears, children are
/// handled in ascending bag id and joined by a left fold, and removals
/// above the root empty its bag. Width is unchanged.
pub fn make_nice(td: &TreeDecomposition) -> Result<NiceTd, OracleError> {
    let mut b = NiceBuilder { nodes: Vec::new() };
    if td.bag_count() == 0 {
        b.push(NiceKind::Leaf, BTreeSet::new());
        return Ok(NiceTd {
            vertex_count: td.vertex_count(),
            nodes: b.nodes,
        });
    }
    if !td.is_tree() {
        return Err(OracleError::NotATree);
    }
    let (parent, bfs) = td.rooted(1);
    let mut children = vec![Vec::new(); td.bag_count()];
    for &c in bfs.iter().skip(1) {
        children[parent[c - 1] - 1].push(c);
    }
    for list in &mut children {
        list.sort_unstable();
    }

    // Postorder, children ascending.
    let mut post = Vec::with_capacity(td.bag_count());
    let mut stack = vec![(1usize, false)];
    while let Some((n, expanded)) = stack.pop() {
        if expanded {
            post.push(n);
        } else {
            stack.push((n, true));
            stack.extend(children[n - 1].iter().rev().map(|&c| (c, false)));
        }
    }

    let mut top = vec![usize::MAX; td.bag_count()];
    for &n in &post {
        let bag = td.bag(n);
        let node = if children[n - 1].is_empty() {
            let leaf = b.push(NiceKind::Leaf, BTreeSet::new());
            b.transition(leaf, bag)
        } else {
            let mut acc: Option<usize> = None;
            for &c in &children[n - 1] {
                let branch = b.transition(top[c - 1], bag);
                acc = Some(match acc {
                    None => branch,
                    Some(left) => b.push(NiceKind::Join { left, right: branch }, bag.clone()),
                });
            }
            acc.expect("at least one child")
        };
        top[n - 1] = node;
    }
    b.transition(top[0], &BTreeSet::new());
    Ok(NiceTd {
        vertex_count: td.vertex_count(),
        nodes: b.nodes,
    })
}

/// Dynamic programming over `nice`, one table per node keyed by assignments
/// to its bag. A node introducing `a` zeroes assignments falsifying a clause
/// that contains `a` and lies inside the new bag; a node removing `a` sums
/// `a` out with its literal weights; a join multiplies pointwise. Variables
/// in no bag contribute `w.neg + w.pos` each.
pub fn nice_td_wmc(formula: &CnfFormula, nice: &NiceTd) -> Result<f64, OracleError> {
    let m = formula.var_count;
    let mut in_some_bag = BTreeSet::new();
    for n in &nice.nodes {
        if let Some(&v) = n.bag.iter().find(|&&v| v == 0 || v > m) {
            return Err(OracleError::VertexOutOfRange { vertex: v, var_count: m });
        }
        in_some_bag.extend(n.bag.iter().copied());
    }
    if formula.clauses.iter().any(|c| c.is_empty()) {
        return Ok(0.0);
    }
    for c in &formula.clauses {
        let vars = c.vars();
        if !nice.nodes.iter().any(|n| vars.is_subset(&n.bag)) {
            return Err(OracleError::ClauseNotCovered { clause: c.id });
        }
    }

    let mut tables: Vec<Option<Vec<f64>>> = vec![None; nice.nodes.len()];
    for (i, node) in nice.nodes.iter().enumerate() {
        let vars: Vec<Var> = node.bag.iter().copied().collect();
        let table = match node.kind {
            NiceKind::Leaf => vec![1.0; 1 << vars.len()],
            NiceKind::Intro { child, var } => {
                let prev = tables[child].take().expect("child table");
                let k = vars.binary_search(&var).expect("introduced variable in bag");
                let low = (1usize << k) - 1;
                let checks: Vec<(usize, usize)> = formula
                    .clauses
                    .iter()
                    .filter(|c| c.literals.iter().any(|l| l.var == var))
                    .filter(|c| c.literals.iter().all(|l| node.bag.contains(&l.var)))
                    .map(|c| {
                        c.literals.iter().fold((0, 0), |(pos, neg), l| {
                            let bit = 1usize << vars.binary_search(&l.var).expect("in bag");
                            if l.positive {
                                (pos | bit, neg)
                            } else {
                                (pos, neg | bit)
                            }
                        })
                    })
                    .collect();
                (0..1usize << vars.len())
                    .map(|idx| {
                        let from = (idx & low) | ((idx >> 1) & !low);
                        if checks.iter().all(|&(pos, neg)| idx & pos != 0 || !idx & neg != 0) {
                            prev[from]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            NiceKind::Removal { child, var } => {
                let prev = tables[child].take().expect("child table");
                let child_vars: Vec<Var> = nice.nodes[child].bag.iter().copied().collect();
                let k = child_vars.binary_search(&var).expect("removed variable in child bag");
                let low = (1usize << k) - 1;
                let w = formula.weights.get(var);
                (0..1usize << vars.len())
                    .map(|idx| {
                        let lo = (idx & low) | ((idx & !low) << 1);
                        prev[lo] * w.neg + prev[lo | (1 << k)] * w.pos
                    })
                    .collect()
            }
            NiceKind::Join { left, right } => {
                let l = tables[left].take().expect("left table");
                let r = tables[right].take().expect("right table");
                l.iter().zip(&r).map(|(a, b)| a * b).collect()
            }
        };
        tables[i] = Some(table);
    }
    let root = tables[nice.root()].take().expect("root table");
    let mut value = root.iter().sum::<f64>();
    for x in (1..=m).filter(|x| !in_some_bag.contains(x)) {
        value *= formula.weights.get(x).total();
    }
    Ok(value)
}
