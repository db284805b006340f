//! Reduced ordered algebraic decision diagrams with real terminals, and
//! project-join tree valuation over them.
//!
//! All diagrams live in an [`AddManager`]: a unique table makes every stored
//! node distinct, so equal functions under one order share one handle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::formula::{gaifman_graph, Clause, CnfFormula, LiteralWeight, Var};
use crate::jointree::{validate, NodeId, NodeKind, ProjectJoinTree, Violation};
use crate::order::{mcs_order, OrderHeuristic, VarOrder};
use crate::pbf::{DenseFunction, PbfError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AddError {
    #[error("diagram belongs to another manager")]
    ForeignHandle,
    #[error("variable {var} has no level in the diagram order")]
    UnknownVariable { var: Var },
    #[error("diagram depends on variable {var}, which is not in the requested domain")]
    InsufficientVars { var: Var },
    #[error("tree is not a project-join tree of the formula: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<Violation>),
    #[error("root valuation still depends on variable {var}")]
    NonTerminalRoot { var: Var },
    #[error(transparent)]
    Dense(#[from] PbfError),
}

/// `σ`: variable ↦ level, 1 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramOrder {
    level: Vec<usize>,
    var_at: Vec<Var>,
}

impl DiagramOrder {
    /// Level `i + 1` for `seq[i]`; `seq` must be a permutation of `1..=m`.
    pub fn from_sequence(seq: &[Var]) -> Self {
        let order = VarOrder::from_sequence(seq, OrderHeuristic::Mcs);
        Self::from_var_order(&order)
    }

    /// Levels equal to ranks.
    pub fn from_var_order(order: &VarOrder) -> Self {
        let level: Vec<usize> = (1..=order.len()).map(|x| order.rank(x)).collect();
        DiagramOrder {
            var_at: order.sequence(),
            level,
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::from_sequence(&(1..=m).collect::<Vec<_>>())
    }

    pub fn var_count(&self) -> usize {
        self.level.len()
    }

    pub fn level(&self, x: Var) -> Option<usize> {
        x.checked_sub(1).and_then(|i| self.level.get(i)).copied()
    }

    pub fn var_at(&self, level: usize) -> Var {
        self.var_at[level - 1]
    }

    /// Variables from the top level down.
    pub fn sequence(&self) -> &[Var] {
        &self.var_at
    }
}

/// Maximum-cardinality search on the Gaifman graph.
pub fn default_order(formula: &CnfFormula) -> DiagramOrder {
    DiagramOrder::from_sequence(&mcs_order(&gaifman_graph(formula)))
}

/// Handle to a diagram stored in a particular manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Add {
    manager: u64,
    node: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Terminal(f64),
    Decision { level: usize, lo: u32, hi: u32 },
}

static NEXT_MANAGER: AtomicU64 = AtomicU64::new(1);

fn terminal_key(c: f64) -> u64 {
    if c == 0.0 {
        0f64.to_bits()
    } else {
        c.to_bits()
    }
}

/// Node store for one diagram order.
#[derive(Debug)]
pub struct AddManager {
    id: u64,
    order: DiagramOrder,
    nodes: Vec<Node>,
    terminals: HashMap<u64, u32>,
    unique: HashMap<(usize, u32, u32), u32>,
    products: HashMap<(u32, u32), u32>,
    sums: HashMap<(u32, u32), u32>,
}

impl AddManager {
    pub fn new(order: DiagramOrder) -> Self {
        AddManager {
            id: NEXT_MANAGER.fetch_add(1, Ordering::Relaxed),
            order,
            nodes: Vec::new(),
            terminals: HashMap::new(),
            unique: HashMap::new(),
            products: HashMap::new(),
            sums: HashMap::new(),
        }
    }

    pub fn order(&self) -> &DiagramOrder {
        &self.order
    }

    /// Nodes stored so far, live or not.
    pub fn stored_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn handle(&self, node: u32) -> Add {
        Add { manager: self.id, node }
    }

    fn check(&self, f: Add) -> Result<u32, AddError> {
        if f.manager == self.id {
            Ok(f.node)
        } else {
            Err(AddError::ForeignHandle)
        }
    }

    fn level_of(&self, x: Var) -> Result<usize, AddError> {
        self.order.level(x).ok_or(AddError::UnknownVariable { var: x })
    }

    fn term(&mut self, c: f64) -> u32 {
        let next = self.nodes.len() as u32;
        let id = *self.terminals.entry(terminal_key(c)).or_insert(next);
        if id == next {
            self.nodes.push(Node::Terminal(if c == 0.0 { 0.0 } else { c }));
        }
        id
    }

    fn mk(&mut self, level: usize, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        let next = self.nodes.len() as u32;
        let id = *self.unique.entry((level, lo, hi)).or_insert(next);
        if id == next {
            self.nodes.push(Node::Decision { level, lo, hi });
        }
        id
    }

    fn top_level(&self, n: u32) -> usize {
        match self.nodes[n as usize] {
            Node::Terminal(_) => usize::MAX,
            Node::Decision { level, .. } => level,
        }
    }

    fn cofactors(&self, n: u32, level: usize) -> (u32, u32) {
        match self.nodes[n as usize] {
            Node::Decision { level: l, lo, hi } if l == level => (lo, hi),
            _ => (n, n),
        }
    }

    pub fn constant(&mut self, c: f64) -> Add {
        let n = self.term(c);
        self.handle(n)
    }

    /// The single-variable diagram with branches `lo` (false) and `hi`.
    pub fn decision(&mut self, x: Var, lo: f64, hi: f64) -> Result<Add, AddError> {
        let level = self.level_of(x)?;
        let (l, h) = (self.term(lo), self.term(hi));
        let n = self.mk(level, l, h);
        Ok(self.handle(n))
    }

    /// Indicator of the assignments satisfying `c`.
    pub fn from_clause(&mut self, c: &Clause) -> Result<Add, AddError> {
        if c.is_tautology() {
            return Ok(self.constant(1.0));
        }
        let mut lits = Vec::with_capacity(c.literals.len());
        for l in &c.literals {
            lits.push((self.level_of(l.var)?, l.positive));
        }
        lits.sort_unstable();
        let one = self.term(1.0);
        let mut acc = self.term(0.0);
        for &(level, positive) in lits.iter().rev() {
            acc = if positive {
                self.mk(level, acc, one)
            } else {
                self.mk(level, one, acc)
            };
        }
        Ok(self.handle(acc))
    }

    /// Shannon expansion of a dense table.
    pub fn from_dense(&mut self, f: &DenseFunction) -> Result<Add, AddError> {
        let mut by_level: Vec<(usize, usize)> = Vec::with_capacity(f.arity());
        for (bit, &x) in f.vars().iter().enumerate() {
            by_level.push((self.level_of(x)?, bit));
        }
        by_level.sort_unstable();
        let n = self.expand(f.table(), &by_level, 0);
        Ok(self.handle(n))
    }

    fn expand(&mut self, table: &[f64], by_level: &[(usize, usize)], index: usize) -> u32 {
        match by_level.split_first() {
            None => self.term(table[index]),
            Some((&(level, bit), rest)) => {
                let lo = self.expand(table, rest, index);
                let hi = self.expand(table, rest, index | (1 << bit));
                self.mk(level, lo, hi)
            }
        }
    }

    pub fn product(&mut self, f: Add, g: Add) -> Result<Add, AddError> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let n = self.apply(a, b, true);
        Ok(self.handle(n))
    }

    pub fn sum(&mut self, f: Add, g: Add) -> Result<Add, AddError> {
        let (a, b) = (self.check(f)?, self.check(g)?);
        let n = self.apply(a, b, false);
        Ok(self.handle(n))
    }

    fn apply(&mut self, a: u32, b: u32, multiply: bool) -> u32 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if let (Node::Terminal(x), Node::Terminal(y)) = (self.nodes[a as usize], self.nodes[b as usize]) {
            return self.term(if multiply { x * y } else { x + y });
        }
        if multiply {
            for (p, q) in [(a, b), (b, a)] {
                match self.nodes[p as usize] {
                    Node::Terminal(1.0) => return q,
                    Node::Terminal(0.0) => return p,
                    _ => {}
                }
            }
        } else {
            for (p, q) in [(a, b), (b, a)] {
                if matches!(self.nodes[p as usize], Node::Terminal(c) if c == 0.0) {
                    return q;
                }
            }
        }
        let cache = if multiply { &self.products } else { &self.sums };
        if let Some(&r) = cache.get(&(a, b)) {
            return r;
        }
        let level = self.top_level(a).min(self.top_level(b));
        let (alo, ahi) = self.cofactors(a, level);
        let (blo, bhi) = self.cofactors(b, level);
        let lo = self.apply(alo, blo, multiply);
        let hi = self.apply(ahi, bhi, multiply);
        let r = self.mk(level, lo, hi);
        let cache = if multiply { &mut self.products } else { &mut self.sums };
        cache.insert((a, b), r);
        r
    }

    /// `f · c`.
    pub fn scale(&mut self, f: Add, c: f64) -> Result<Add, AddError> {
        let k = self.constant(c);
        self.product(f, k)
    }

    /// `∑_x (f · W_x)`: `f|x=0 · w.neg + f|x=1 · w.pos`. When `f` does not
    /// depend on `x` this is `f · (w.neg + w.pos)`.
    pub fn project_weighted(&mut self, f: Add, x: Var, w: LiteralWeight) -> Result<Add, AddError> {
        let a = self.check(f)?;
        let level = self.level_of(x)?;
        let neg = self.term(w.neg);
        let pos = self.term(w.pos);
        let both = self.term(w.total());
        let mut memo = HashMap::new();
        let n = self.project_rec(a, level, neg, pos, both, &mut memo);
        Ok(self.handle(n))
    }

    fn project_rec(
        &mut self,
        n: u32,
        level: usize,
        neg: u32,
        pos: u32,
        both: u32,
        memo: &mut HashMap<u32, u32>,
    ) -> u32 {
        if let Some(&r) = memo.get(&n) {
            return r;
        }
        let r = match self.nodes[n as usize] {
            Node::Decision { level: l, lo, hi } if l < level => {
                let lo = self.project_rec(lo, level, neg, pos, both, memo);
                let hi = self.project_rec(hi, level, neg, pos, both, memo);
                self.mk(l, lo, hi)
            }
            Node::Decision { level: l, lo, hi } if l == level => {
                let lo = self.apply(lo, neg, true);
                let hi = self.apply(hi, pos, true);
                self.apply(lo, hi, false)
            }
            _ => self.apply(n, both, true),
        };
        memo.insert(n, r);
        r
    }

    /// Plain projection `∑_x f`.
    pub fn project(&mut self, f: Add, x: Var) -> Result<Add, AddError> {
        self.project_weighted(f, x, LiteralWeight::UNIT)
    }

    /// Terminal value, if `f` is constant.
    pub fn value(&self, f: Add) -> Result<Option<f64>, AddError> {
        Ok(match self.nodes[self.check(f)? as usize] {
            Node::Terminal(c) => Some(c),
            Node::Decision { .. } => None,
        })
    }

    /// Value at the assignment `is_true`.
    pub fn eval(&self, f: Add, mut is_true: impl FnMut(Var) -> bool) -> Result<f64, AddError> {
        let mut n = self.check(f)?;
        loop {
            match self.nodes[n as usize] {
                Node::Terminal(c) => return Ok(c),
                Node::Decision { level, lo, hi } => {
                    n = if is_true(self.order.var_at(level)) { hi } else { lo };
                }
            }
        }
    }

    fn reachable(&self, root: u32) -> Vec<u32> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                if let Node::Decision { lo, hi, .. } = self.nodes[n as usize] {
                    stack.push(lo);
                    stack.push(hi);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Distinct nodes reachable from `f`, terminals included.
    pub fn node_count(&self, f: Add) -> Result<usize, AddError> {
        Ok(self.reachable(self.check(f)?).len())
    }

    /// Decision nodes reachable from `f`.
    pub fn decision_count(&self, f: Add) -> Result<usize, AddError> {
        let root = self.check(f)?;
        Ok(self
            .reachable(root)
            .into_iter()
            .filter(|&n| matches!(self.nodes[n as usize], Node::Decision { .. }))
            .count())
    }

    /// Variables labeling some reachable decision node.
    pub fn support(&self, f: Add) -> Result<BTreeSet<Var>, AddError> {
        let root = self.check(f)?;
        Ok(self
            .reachable(root)
            .into_iter()
            .filter_map(|n| match self.nodes[n as usize] {
                Node::Decision { level, .. } => Some(self.order.var_at(level)),
                Node::Terminal(_) => None,
            })
            .collect())
    }

    /// Checks that each decision node's children sit strictly lower.
    pub fn is_ordered(&self, f: Add) -> Result<bool, AddError> {
        let root = self.check(f)?;
        Ok(self.reachable(root).into_iter().all(|n| match self.nodes[n as usize] {
            Node::Decision { level, lo, hi } => {
                lo != hi && self.top_level(lo) > level && self.top_level(hi) > level
            }
            Node::Terminal(_) => true,
        }))
    }

    /// The table of `f` over `vars`, which must include its support.
    pub fn to_dense(&self, f: Add, vars: &[Var]) -> Result<DenseFunction, AddError> {
        let domain: BTreeSet<Var> = vars.iter().copied().collect();
        if let Some(&x) = self.support(f)?.difference(&domain).next() {
            return Err(AddError::InsufficientVars { var: x });
        }
        let domain: Vec<Var> = domain.into_iter().collect();
        let mut err = None;
        let out = DenseFunction::from_fn(domain.iter().copied(), |index| {
            self.eval(f, |x| {
                let k = domain.binary_search(&x).expect("support within domain");
                (index >> k) & 1 == 1
            })
            .unwrap_or_else(|e| {
                err = Some(e);
                0.0
            })
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// Valuations of every reachable node of `tree`, all stored in the returned
/// manager. Leaves are clause indicators; an internal node multiplies its
/// children in ascending id order, then projects its label with weights in
/// ascending level order.
pub fn valuate_nodes(
    tree: &ProjectJoinTree,
    formula: &CnfFormula,
    order: &DiagramOrder,
) -> Result<(AddManager, BTreeMap<NodeId, Add>), AddError> {
    validate(tree, formula).map_err(AddError::InvalidTree)?;
    let mut mgr = AddManager::new(order.clone());
    let mut val: BTreeMap<NodeId, Add> = BTreeMap::new();
    for id in tree.postorder() {
        let node = tree.node(id).expect("postorder yields known nodes");
        let f = match &node.kind {
            NodeKind::Leaf { clause } => mgr.from_clause(formula.clause(*clause))?,
            NodeKind::Internal { children, projected } => {
                let mut acc = mgr.constant(1.0);
                for c in children {
                    acc = mgr.product(acc, val[c])?;
                }
                let mut xs = Vec::with_capacity(projected.len());
                for &x in projected {
                    xs.push((mgr.level_of(x)?, x));
                }
                xs.sort_unstable();
                for (_, x) in xs {
                    acc = mgr.project_weighted(acc, x, formula.weights.get(x))?;
                }
                acc
            }
        };
        val.insert(id, f);
    }
    Ok((mgr, val))
}

/// The weighted model count: the root valuation's single terminal.
pub fn valuate(tree: &ProjectJoinTree, formula: &CnfFormula, order: &DiagramOrder) -> Result<f64, AddError> {
    let (mgr, val) = valuate_nodes(tree, formula, order)?;
    let root = val[&tree.root()];
    match mgr.value(root)? {
        Some(c) => Ok(c),
        None => {
            let var = *mgr.support(root)?.iter().next().expect("non-terminal has support");
            Err(AddError::NonTerminalRoot { var })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_cnf, Literal, WeightFunction};
    use crate::jointree::read_jt;
    use crate::pbf::clause_function;
    use proptest::prelude::*;

    fn sample() -> (CnfFormula, ProjectJoinTree) {
        (
            parse_cnf(include_str!("../tests/data/sample.cnf")).unwrap(),
            read_jt(include_str!("../tests/data/sample.jt")).unwrap(),
        )
    }

    #[test]
    fn default_order_is_mcs() {
        let (f, _) = sample();
        assert_eq!(default_order(&f).sequence(), &[1, 3, 4, 2, 5]);
        let one = CnfFormula::from_dimacs_clauses(1, &[vec![1]]);
        assert_eq!(default_order(&one), DiagramOrder::identity(1));
    }

    #[test]
    fn clause_diagrams() {
        let mut mgr = AddManager::new(DiagramOrder::identity(3));
        let unit = mgr.from_clause(&Clause::new(1, [Literal::new(2, true)])).unwrap();
        assert_eq!(unit, mgr.decision(2, 0.0, 1.0).unwrap());
        let c = Clause::new(1, [Literal::new(1, true), Literal::new(3, true)]);
        let f = mgr.from_clause(&c).unwrap();
        assert_eq!(mgr.decision_count(f).unwrap(), 2);
        let taut = Clause::new(1, [Literal::new(1, true), Literal::new(1, false)]);
        let t = mgr.from_clause(&taut).unwrap();
        assert_eq!(mgr.value(t).unwrap(), Some(1.0));
        let empty = mgr.from_clause(&Clause::new(1, [])).unwrap();
        assert_eq!(mgr.value(empty).unwrap(), Some(0.0));
    }

    #[test]
    fn arithmetic_identities() {
        let mut mgr = AddManager::new(DiagramOrder::identity(3));
        let f = mgr.decision(1, 1.0, 2.0).unwrap();
        let one = mgr.constant(1.0);
        assert_eq!(mgr.product(f, one).unwrap(), f);
        let (two, three) = (mgr.constant(2.0), mgr.constant(3.0));
        let six = mgr.product(two, three).unwrap();
        assert_eq!(six, mgr.constant(6.0));
        assert_eq!(mgr.to_dense(f, &[1]).unwrap().table(), &[1.0, 2.0]);
        assert_eq!(mgr.to_dense(two, &[]).unwrap().table(), &[2.0]);
        assert_eq!(mgr.to_dense(f, &[2]), Err(AddError::InsufficientVars { var: 1 }));
    }

    #[test]
    fn weighted_projection_examples() {
        let mut mgr = AddManager::new(DiagramOrder::identity(2));
        let f = mgr.decision(1, 0.0, 1.0).unwrap();
        let p = mgr.project_weighted(f, 1, LiteralWeight::new(1.5, 0.5)).unwrap();
        assert_eq!(mgr.value(p).unwrap(), Some(0.5));
        let q = mgr.project(f, 2).unwrap();
        assert_eq!(mgr.to_dense(q, &[1]).unwrap().table(), &[0.0, 2.0]);
        assert_eq!(mgr.project(f, 7), Err(AddError::UnknownVariable { var: 7 }));
    }

    #[test]
    fn foreign_handles_are_rejected() {
        let mut a = AddManager::new(DiagramOrder::identity(1));
        let mut b = AddManager::new(DiagramOrder::identity(1));
        let fa = a.constant(1.0);
        let fb = b.constant(1.0);
        assert_eq!(a.product(fa, fb), Err(AddError::ForeignHandle));
    }

    #[test]
    fn sample_counts() {
        let (f, t) = sample();
        let order = default_order(&f);
        assert_eq!(valuate(&t, &f, &order).unwrap(), 1.0);
        let mut w = WeightFunction::unit(5);
        for x in 1..=5 {
            w.set(x, LiteralWeight::new(1.5, 0.5));
        }
        let f = f.with_weights(w);
        assert!((valuate(&t, &f, &order).unwrap() - 0.28125).abs() <= 1e-12);
    }

    #[test]
    fn clause_free_formula() {
        let f = CnfFormula::from_dimacs_clauses(1, &[]);
        let mut t = ProjectJoinTree::with_leaves(1, 0);
        let r = t.add_internal([], [1]);
        t.set_root(r);
        assert_eq!(valuate(&t, &f, &DiagramOrder::identity(1)).unwrap(), 2.0);
    }

    fn dense_strategy(max_vars: usize) -> impl Strategy<Value = DenseFunction> {
        proptest::sample::subsequence((1..=6).collect::<Vec<Var>>(), 0..=max_vars).prop_flat_map(|vars| {
            let len = 1usize << vars.len();
            proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(2.0), -3.0..3.0f64], len)
                .prop_map(move |table| DenseFunction::new(vars.clone(), table).unwrap())
        })
    }

    proptest! {
        #[test]
        fn dense_round_trip_and_operations(f in dense_strategy(4), g in dense_strategy(4), seed in 0u64..1000) {
            let order = DiagramOrder::from_sequence(&crate::order::random_order(6, seed));
            let mut mgr = AddManager::new(order);
            let (a, b) = (mgr.from_dense(&f).unwrap(), mgr.from_dense(&g).unwrap());
            prop_assert!(mgr.is_ordered(a).unwrap());
            prop_assert!(mgr.to_dense(a, f.vars()).unwrap().approx_eq(&f));

            let p = mgr.product(a, b).unwrap();
            let dense = f.product(&g).unwrap();
            prop_assert!(mgr.to_dense(p, dense.vars()).unwrap().approx_eq(&dense));
            prop_assert_eq!(mgr.from_dense(&dense).unwrap(), p);

            let w = LiteralWeight::new(0.5, 1.5);
            for &x in f.vars() {
                let q = mgr.project_weighted(a, x, w).unwrap();
                let expect = f.project_weighted(x, w).unwrap();
                prop_assert!(mgr.to_dense(q, expect.vars()).unwrap().approx_eq(&expect));
            }
        }

        #[test]
        fn clause_diagrams_match_tables(lits in proptest::collection::vec((1usize..=5, any::<bool>()), 0..5)) {
            let c = Clause::new(1, lits.into_iter().map(|(v, p)| Literal::new(v, p)));
            let mut mgr = AddManager::new(DiagramOrder::from_sequence(&[4, 2, 5, 1, 3]));
            let a = mgr.from_clause(&c).unwrap();
            let dense = clause_function(&c).unwrap();
            let vars: Vec<Var> = (1..=5).collect();
            prop_assert_eq!(
                mgr.to_dense(a, &vars).unwrap(),
                dense.expand_to(&vars).unwrap()
            );
        }
    }
}
