//! Project-join trees: data model, validation, node metrics, JT text format,
//! and conversion to tree decompositions.
//!
//! Node ids follow the JT numbering: leaves are `1..=l` (leaf `i` holds
//! clause `i` when built through [`ProjectJoinTree::with_leaves`]) and
//! internal nodes are numbered after them in creation order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::decomposition::TreeDecomposition;
use crate::formula::{CnfFormula, Var};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Leaf {
        clause: usize,
    },
    Internal {
        children: Vec<NodeId>,
        projected: BTreeSet<Var>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PjNode {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl PjNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn children(&self) -> &[NodeId] {
        match &self.kind {
            NodeKind::Leaf { .. } => &[],
            NodeKind::Internal { children, .. } => children,
        }
    }

    /// `π(n)`; empty for leaves.
    pub fn projected(&self) -> &BTreeSet<Var> {
        static EMPTY: BTreeSet<Var> = BTreeSet::new();
        match &self.kind {
            NodeKind::Leaf { .. } => &EMPTY,
            NodeKind::Internal { projected, .. } => projected,
        }
    }
}

/// A rooted tree whose leaves are clauses and whose internal nodes carry the
/// variables projected there. Well-formedness is checked by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectJoinTree {
    var_count: usize,
    clause_count: usize,
    nodes: Vec<PjNode>,
    root: NodeId,
}

/// Reasons a tree is not a project-join tree of a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CountMismatch {
        what: &'static str,
        tree: usize,
        formula: usize,
    },
    DuplicateNodeId { node: NodeId },
    UnknownRoot { root: NodeId },
    UnknownChild { node: NodeId, child: NodeId },
    MultipleParents { node: NodeId },
    RootHasParent { root: NodeId },
    Unreachable { node: NodeId },
    ChildlessInternal { node: NodeId },
    LeafClauseOutOfRange { node: NodeId, clause: usize },
    ClauseWithoutLeaf { clause: usize },
    ClauseWithManyLeaves { clause: usize, leaves: Vec<NodeId> },
    VariableOutOfRange { node: NodeId, var: Var },
    UnprojectedVariable { var: Var },
    ProjectedTwice { var: Var, nodes: Vec<NodeId> },
    ClauseNotBelowProjection { node: NodeId, var: Var, clause: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            CountMismatch {
                what,
                tree,
                formula,
            } => write!(f, "tree declares {tree} {what}, formula has {formula}"),
            DuplicateNodeId { node } => write!(f, "node id {node} is used more than once"),
            UnknownRoot { root } => write!(f, "root {root} is not a node of the tree"),
            UnknownChild { node, child } => {
                write!(f, "node {node} lists unknown child {child}")
            }
            MultipleParents { node } => write!(f, "node {node} has more than one parent"),
            RootHasParent { root } => write!(f, "root {root} is a child of another node"),
            Unreachable { node } => write!(f, "node {node} is not reachable from the root"),
            ChildlessInternal { node } => write!(f, "internal node {node} has no children"),
            LeafClauseOutOfRange { node, clause } => {
                write!(f, "leaf {node} refers to nonexistent clause {clause}")
            }
            ClauseWithoutLeaf { clause } => write!(f, "clause {clause} has no leaf"),
            ClauseWithManyLeaves { clause, leaves } => {
                write!(f, "clause {clause} has several leaves {leaves:?}")
            }
            VariableOutOfRange { node, var } => {
                write!(f, "node {node} projects nonexistent variable {var}")
            }
            UnprojectedVariable { var } => write!(
                f,
                "partition violated: variable {var} is not projected by any node"
            ),
            ProjectedTwice { var, nodes } => write!(
                f,
                "partition violated: variable {var} is projected by nodes {nodes:?}"
            ),
            ClauseNotBelowProjection { node, var, clause } => write!(
                f,
                "descendant rule violated: node {node} projects variable {var} but clause {clause} is not below it"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("tree is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl ProjectJoinTree {
    /// A tree holding one leaf per clause (leaf `i` ↦ clause `i`) and no
    /// internal nodes yet.
    pub fn with_leaves(var_count: usize, clause_count: usize) -> Self {
        let nodes = (1..=clause_count)
            .map(|i| PjNode {
                id: i,
                kind: NodeKind::Leaf { clause: i },
            })
            .collect();
        ProjectJoinTree {
            var_count,
            clause_count,
            nodes,
            root: 0,
        }
    }

    /// Assembles a tree from arbitrary parts without checking anything.
    pub fn from_nodes(
        var_count: usize,
        clause_count: usize,
        nodes: Vec<PjNode>,
        root: NodeId,
    ) -> Self {
        ProjectJoinTree {
            var_count,
            clause_count,
            nodes,
            root,
        }
    }

    /// Appends an internal node with the next free id. Children and projected
    /// variables are stored in ascending order.
    pub fn add_internal(
        &mut self,
        children: impl IntoIterator<Item = NodeId>,
        projected: impl IntoIterator<Item = Var>,
    ) -> NodeId {
        let id = self.nodes.iter().map(|n| n.id).max().unwrap_or(0) + 1;
        let mut children: Vec<NodeId> = children.into_iter().collect();
        children.sort_unstable();
        self.nodes.push(PjNode {
            id,
            kind: NodeKind::Internal {
                children,
                projected: projected.into_iter().collect(),
            },
        });
        id
    }

    /// Adds variables to `π(id)`. Panics if `id` is not an internal node.
    pub fn extend_projected(&mut self, id: NodeId, vars: impl IntoIterator<Item = Var>) {
        let node = self.node_mut(id).expect("known node");
        match &mut node.kind {
            NodeKind::Internal { projected, .. } => projected.extend(vars),
            NodeKind::Leaf { .. } => panic!("leaf {id} has no projection label"),
        }
    }

    pub fn set_root(&mut self, root: NodeId) {
        self.root = root;
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn clause_count(&self) -> usize {
        self.clause_count
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[PjNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&PjNode> {
        // Fast path for the canonical numbering, then a scan.
        match self.nodes.get(id.wrapping_sub(1)) {
            Some(n) if n.id == id => Some(n),
            _ => self.nodes.iter().find(|n| n.id == id),
        }
    }

    fn node_mut(&mut self, id: NodeId) -> Option<&mut PjNode> {
        if matches!(self.nodes.get(id.wrapping_sub(1)), Some(n) if n.id == id) {
            return self.nodes.get_mut(id - 1);
        }
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &PjNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &PjNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node ids, children before parents, children visited in stored order.
    /// Nodes unreachable from the root are omitted; repeated visits are cut.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = BTreeSet::new();
        if self.node(self.root).is_none() {
            return out;
        }
        let mut stack = vec![(self.root, 0usize)];
        seen.insert(self.root);
        while let Some((id, next)) = stack.pop() {
            let children = self.node(id).map(PjNode::children).unwrap_or(&[]);
            if next < children.len() {
                stack.push((id, next + 1));
                let child = children[next];
                if self.node(child).is_some() && seen.insert(child) {
                    stack.push((child, 0));
                }
            } else {
                out.push(id);
            }
        }
        out
    }

    /// `vars(n)` for every reachable node.
    pub fn all_node_vars(&self, formula: &CnfFormula) -> BTreeMap<NodeId, BTreeSet<Var>> {
        let mut vars: BTreeMap<NodeId, BTreeSet<Var>> = BTreeMap::new();
        for id in self.postorder() {
            let node = self.node(id).unwrap();
            let v = match &node.kind {
                NodeKind::Leaf { clause } => formula
                    .clauses
                    .get(clause.wrapping_sub(1))
                    .map(|c| c.vars())
                    .unwrap_or_default(),
                NodeKind::Internal {
                    children,
                    projected,
                } => children
                    .iter()
                    .filter_map(|c| vars.get(c))
                    .flatten()
                    .filter(|x| !projected.contains(x))
                    .copied()
                    .collect(),
            };
            vars.insert(id, v);
        }
        vars
    }

    /// `vars(n)`: variables of the node's valuation.
    pub fn node_vars(&self, formula: &CnfFormula, id: NodeId) -> Result<BTreeSet<Var>, TreeError> {
        self.all_node_vars(formula)
            .remove(&id)
            .ok_or(TreeError::UnknownNode(id))
    }

    /// `|vars(n)|` for leaves and `|vars(n) ∪ π(n)|` for internal nodes.
    pub fn node_sizes(&self, formula: &CnfFormula) -> BTreeMap<NodeId, usize> {
        self.all_node_vars(formula)
            .into_iter()
            .map(|(id, vars)| {
                let node = self.node(id).unwrap();
                (id, vars.union(node.projected()).count())
            })
            .collect()
    }

    /// Largest node size.
    pub fn width(&self, formula: &CnfFormula) -> usize {
        self.node_sizes(formula).into_values().max().unwrap_or(0)
    }

    /// `Φ(n)`: ids of the clauses at leaves below `n`.
    pub fn subtree_clauses(&self, id: NodeId) -> Result<BTreeSet<usize>, TreeError> {
        let mut out = BTreeSet::new();
        self.walk_subtree(id, |n| {
            if let NodeKind::Leaf { clause } = n.kind {
                out.insert(clause);
            }
        })?;
        Ok(out)
    }

    /// `P(n)`: variables projected anywhere below and at `n`.
    pub fn subtree_projected(&self, id: NodeId) -> Result<BTreeSet<Var>, TreeError> {
        let mut out = BTreeSet::new();
        self.walk_subtree(id, |n| out.extend(n.projected().iter().copied()))?;
        Ok(out)
    }

    fn walk_subtree(&self, id: NodeId, mut visit: impl FnMut(&PjNode)) -> Result<(), TreeError> {
        self.node(id).ok_or(TreeError::UnknownNode(id))?;
        let mut seen = BTreeSet::from([id]);
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let node = self.node(n).unwrap();
            visit(node);
            for &c in node.children() {
                if self.node(c).is_some() && seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        Ok(())
    }

    /// Map from node to its parent (first parent seen, for malformed trees).
    pub fn parents(&self) -> BTreeMap<NodeId, NodeId> {
        let mut parents = BTreeMap::new();
        for n in &self.nodes {
            for &c in n.children() {
                parents.entry(c).or_insert(n.id);
            }
        }
        parents
    }
}

/// Checks that `tree` is a project-join tree of `formula` and reports every
/// violation found.
pub fn validate(tree: &ProjectJoinTree, formula: &CnfFormula) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let m = formula.var_count;
    let l = formula.clause_count();
    if tree.var_count != m {
        violations.push(Violation::CountMismatch {
            what: "variables",
            tree: tree.var_count,
            formula: m,
        });
    }
    if tree.clause_count != l {
        violations.push(Violation::CountMismatch {
            what: "clauses",
            tree: tree.clause_count,
            formula: l,
        });
    }

    // Shape: ids unique, children known, one parent each, all reachable.
    let mut ids = BTreeSet::new();
    for n in &tree.nodes {
        if !ids.insert(n.id) {
            violations.push(Violation::DuplicateNodeId { node: n.id });
        }
    }
    let mut parent_count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for n in &tree.nodes {
        for &c in n.children() {
            if ids.contains(&c) {
                *parent_count.entry(c).or_default() += 1;
            } else {
                violations.push(Violation::UnknownChild {
                    node: n.id,
                    child: c,
                });
            }
        }
        if let NodeKind::Internal { children, .. } = &n.kind {
            let clause_free_root = n.id == tree.root && l == 0;
            if children.is_empty() && !clause_free_root {
                violations.push(Violation::ChildlessInternal { node: n.id });
            }
        }
    }
    for (&node, &count) in &parent_count {
        if count > 1 {
            violations.push(Violation::MultipleParents { node });
        }
    }
    let root_known = ids.contains(&tree.root);
    if !root_known {
        violations.push(Violation::UnknownRoot { root: tree.root });
    } else if parent_count.contains_key(&tree.root) {
        violations.push(Violation::RootHasParent { root: tree.root });
    }
    let reachable: BTreeSet<NodeId> = tree.postorder().into_iter().collect();
    if root_known {
        for &id in &ids {
            if !reachable.contains(&id) {
                violations.push(Violation::Unreachable { node: id });
            }
        }
    }
    let shape_ok = violations.is_empty();

    // Leaves ↔ clauses.
    let mut leaves_of: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for n in &tree.nodes {
        if let NodeKind::Leaf { clause } = n.kind {
            if clause == 0 || clause > l {
                violations.push(Violation::LeafClauseOutOfRange {
                    node: n.id,
                    clause,
                });
            } else {
                leaves_of.entry(clause).or_default().push(n.id);
            }
        }
    }
    for clause in 1..=l {
        match leaves_of.get(&clause) {
            None => violations.push(Violation::ClauseWithoutLeaf { clause }),
            Some(ls) if ls.len() > 1 => violations.push(Violation::ClauseWithManyLeaves {
                clause,
                leaves: ls.clone(),
            }),
            _ => {}
        }
    }

    // π labels partition 1..=m.
    let mut projected_by: BTreeMap<Var, Vec<NodeId>> = BTreeMap::new();
    for n in tree.internal_nodes() {
        for &x in n.projected() {
            if x == 0 || x > m {
                violations.push(Violation::VariableOutOfRange { node: n.id, var: x });
            } else {
                projected_by.entry(x).or_default().push(n.id);
            }
        }
    }
    for x in 1..=m {
        match projected_by.get(&x) {
            None => violations.push(Violation::UnprojectedVariable { var: x }),
            Some(ns) if ns.len() > 1 => violations.push(Violation::ProjectedTwice {
                var: x,
                nodes: ns.clone(),
            }),
            _ => {}
        }
    }

    // Every clause mentioning a projected variable lies below the projecting node.
    if shape_ok {
        let mut below: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
        for id in tree.postorder() {
            let node = tree.node(id).unwrap();
            let set = match &node.kind {
                NodeKind::Leaf { clause } => BTreeSet::from([*clause]),
                NodeKind::Internal { children, .. } => children
                    .iter()
                    .flat_map(|c| below[c].iter().copied())
                    .collect(),
            };
            below.insert(id, set);
        }
        for n in tree.internal_nodes() {
            for &x in n.projected() {
                for c in &formula.clauses {
                    if c.literals.iter().any(|lit| lit.var == x) && !below[&n.id].contains(&c.id) {
                        violations.push(Violation::ClauseNotBelowProjection {
                            node: n.id,
                            var: x,
                            clause: c.id,
                        });
                    }
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Tree decomposition with the same shape as `tree`: leaf bags are `vars(n)`,
/// internal bags `vars(n) ∪ π(n)`. Bag `i` corresponds to node `i`.
pub fn tree_to_td(
    tree: &ProjectJoinTree,
    formula: &CnfFormula,
) -> Result<TreeDecomposition, TreeError> {
    validate(tree, formula).map_err(TreeError::Invalid)?;
    let vars = tree.all_node_vars(formula);
    // Renumber densely so bags are 1..=n even for non-canonical node ids.
    let index: BTreeMap<NodeId, usize> = tree
        .nodes
        .iter()
        .map(|n| n.id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i + 1))
        .collect();
    let mut bags = vec![BTreeSet::new(); index.len()];
    let mut edges = Vec::new();
    for n in &tree.nodes {
        let bag: BTreeSet<Var> = vars[&n.id].union(n.projected()).copied().collect();
        bags[index[&n.id] - 1] = bag;
        for c in n.children() {
            edges.push((index[&n.id], index[c]));
        }
    }
    edges.sort_unstable();
    Ok(TreeDecomposition::new(formula.var_count, bags, edges))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JtError {
    #[error("no `p jt` problem line found")]
    NoProblemLine,
    #[error("line {line}: node data before the problem line")]
    MissingProblemLine { line: usize },
    #[error("line {line}: duplicate problem line")]
    DuplicateProblemLine { line: usize },
    #[error("line {line}: malformed problem line")]
    MalformedProblemLine { line: usize },
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: missing `e` separator")]
    MissingSeparator { line: usize },
    #[error("line {line}: node {node} is outside the branch range {first}..={last}")]
    NodeOutOfRange {
        line: usize,
        node: NodeId,
        first: NodeId,
        last: NodeId,
    },
    #[error("line {line}: child {child} of node {node} must be smaller than {node}")]
    ChildNotBelow {
        line: usize,
        node: NodeId,
        child: NodeId,
    },
    #[error("line {line}: node {node} defined twice")]
    DuplicateNode { line: usize, node: NodeId },
    #[error("line {line}: variable {var} is outside 1..={var_count}")]
    VariableOutOfRange {
        line: usize,
        var: Var,
        var_count: usize,
    },
    #[error("branch node {node} is never defined")]
    MissingNode { node: NodeId },
    #[error("tree cannot be written as JT: {0}")]
    NotWritable(String),
}

/// Reads a JT document. The root is the branch node that is nobody's child,
/// falling back to the highest id when that is ambiguous.
pub fn read_jt(text: &str) -> Result<ProjectJoinTree, JtError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut branches: BTreeMap<NodeId, (Vec<NodeId>, BTreeSet<Var>)> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(JtError::DuplicateProblemLine { line: line_no });
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || JtError::MalformedProblemLine { line: line_no };
            if toks.len() != 5 || toks[0] != "p" || toks[1] != "jt" {
                return Err(bad());
            }
            let nums: Vec<usize> = toks[2..]
                .iter()
                .map(|t| t.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            if nums[2] < nums[1] {
                return Err(bad());
            }
            header = Some((nums[0], nums[1], nums[2]));
            continue;
        }
        let Some((m, l, n)) = header else {
            return Err(JtError::MissingProblemLine { line: line_no });
        };
        let parse = |tok: &str| -> Result<usize, JtError> {
            tok.parse().map_err(|_| JtError::MalformedToken {
                line: line_no,
                token: tok.to_string(),
            })
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let sep = toks
            .iter()
            .position(|&t| t == "e")
            .ok_or(JtError::MissingSeparator { line: line_no })?;
        if sep == 0 {
            return Err(JtError::MalformedToken {
                line: line_no,
                token: "e".into(),
            });
        }
        let node = parse(toks[0])?;
        if node <= l || node > n {
            return Err(JtError::NodeOutOfRange {
                line: line_no,
                node,
                first: l + 1,
                last: n,
            });
        }
        let mut children = Vec::new();
        for t in &toks[1..sep] {
            let child = parse(t)?;
            if child == 0 || child >= node {
                return Err(JtError::ChildNotBelow {
                    line: line_no,
                    node,
                    child,
                });
            }
            children.push(child);
        }
        let mut projected = BTreeSet::new();
        for t in &toks[sep + 1..] {
            let var = parse(t)?;
            if var == 0 || var > m {
                return Err(JtError::VariableOutOfRange {
                    line: line_no,
                    var,
                    var_count: m,
                });
            }
            projected.insert(var);
        }
        children.sort_unstable();
        if branches.insert(node, (children, projected)).is_some() {
            return Err(JtError::DuplicateNode { line: line_no, node });
        }
    }

    let (m, l, n) = header.ok_or(JtError::NoProblemLine)?;
    if let Some(node) = (l + 1..=n).find(|id| !branches.contains_key(id)) {
        return Err(JtError::MissingNode { node });
    }
    let child_ids: BTreeSet<NodeId> = branches.values().flat_map(|(c, _)| c.iter().copied()).collect();
    let parentless: Vec<NodeId> = branches.keys().copied().filter(|id| !child_ids.contains(id)).collect();
    let root = match parentless.as_slice() {
        [only] => *only,
        _ => n,
    };
    let mut tree = ProjectJoinTree::with_leaves(m, l);
    for (id, (children, projected)) in branches {
        tree.nodes.push(PjNode {
            id,
            kind: NodeKind::Internal {
                children,
                projected,
            },
        });
    }
    tree.root = root;
    Ok(tree)
}

/// Writes the JT document: problem line, then one branch line per internal
/// node in ascending id with the root last.
pub fn write_jt(tree: &ProjectJoinTree) -> Result<String, JtError> {
    let l = tree.clause_count;
    let n = tree.nodes.len();
    let mut sorted: Vec<&PjNode> = tree.nodes.iter().collect();
    sorted.sort_by_key(|node| node.id);
    for (i, node) in sorted.iter().enumerate() {
        let id = i + 1;
        if node.id != id {
            return Err(JtError::NotWritable(format!("node ids are not 1..={n}")));
        }
        match node.kind {
            NodeKind::Leaf { clause } if id > l || clause != id => {
                return Err(JtError::NotWritable(format!(
                    "leaf {id} must hold clause {id} and leaves must be 1..={l}"
                )))
            }
            NodeKind::Internal { .. } if id <= l => {
                return Err(JtError::NotWritable(format!("node {id} should be a leaf")))
            }
            _ => {}
        }
    }
    let mut out = format!("p jt {} {} {}\n", tree.var_count, l, n);
    let line = |node: &PjNode| {
        let mut s = node.id.to_string();
        for c in node.children() {
            s.push_str(&format!(" {c}"));
        }
        s.push_str(" e");
        for x in node.projected() {
            s.push_str(&format!(" {x}"));
        }
        s.push('\n');
        s
    };
    for node in sorted.iter().filter(|node| !node.is_leaf() && node.id != tree.root) {
        out.push_str(&line(node));
    }
    if let Some(root) = tree.node(tree.root).filter(|r| !r.is_leaf()) {
        out.push_str(&line(root));
    }
    Ok(out)
}
