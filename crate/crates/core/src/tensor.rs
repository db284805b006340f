//! Dense tensor execution: contraction, copy tensors, the fused
//! project-product kernel, tree valuation with operation counting, and an
//! exact operation-count estimator that never touches a table.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::formula::{CnfFormula, LiteralWeight, Var};
use crate::jointree::{validate, NodeId, NodeKind, ProjectJoinTree, Violation};
use crate::pbf::{clause_function, positions_in, union_sorted, DenseFunction, PbfError, MAX_DENSE_VARS};

/// Tensors share the dense table layout.
pub type Tensor = DenseFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("result would have {arity} indices, above the cap of {MAX_DENSE_VARS}")]
    TooLarge { arity: usize },
    #[error("node {node}: intermediate tensor of rank {arity} exceeds the cap of {MAX_DENSE_VARS}")]
    CapExceeded { node: NodeId, arity: usize },
    #[error("variable {var} is not shared by both tensors")]
    NotShared { var: Var },
    #[error("copy tensor needs at least one index")]
    EmptyCopy,
    #[error("tree is not a project-join tree of the formula: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<Violation>),
    #[error(transparent)]
    Dense(#[from] PbfError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContractionStats {
    /// Largest index count of any tensor built.
    pub max_rank: usize,
    /// Multiplications plus additions.
    pub flops: u64,
}

impl ContractionStats {
    fn saw(&mut self, rank: usize) {
        self.max_rank = self.max_rank.max(rank);
    }
}

/// Kernel cost of `∑_Z f·g` with `out` output entries.
fn fused_flops(out_rank: usize, z: usize) -> u64 {
    (1u64 << out_rank).saturating_mul((1u64 << (z + 1)) - 1)
}

/// Bit offset of each bit of a table over `sub` when `sub ⊆ sup`, as seen
/// from a table over `sup`: entry `k` is the `sub` bit for `sup` bit `k`, or
/// 0 when `sup[k] ∉ sub`.
fn offsets(sup: &[Var], sub: &[Var]) -> Vec<usize> {
    sup.iter()
        .map(|v| sub.binary_search(v).map_or(0, |k| 1 << k))
        .collect()
}

fn offset_of(index: usize, offsets: &[usize]) -> usize {
    let mut acc = 0;
    let mut rest = index;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        acc |= offsets[k];
        rest &= rest - 1;
    }
    acc
}

/// `∑_Z (f · g)` without building `f · g`. `Z` must be shared by both.
pub fn project_product(f: &Tensor, g: &Tensor, z: &BTreeSet<Var>) -> Result<Tensor, TensorError> {
    let mut stats = ContractionStats::default();
    project_product_counted(f, g, z, &mut stats)
}

pub fn project_product_counted(
    f: &Tensor,
    g: &Tensor,
    z: &BTreeSet<Var>,
    stats: &mut ContractionStats,
) -> Result<Tensor, TensorError> {
    if let Some(&x) = z.iter().find(|&&x| !f.contains(x) || !g.contains(x)) {
        return Err(TensorError::NotShared { var: x });
    }
    let all = union_sorted(f.vars(), g.vars());
    let out: Vec<Var> = all.iter().copied().filter(|v| !z.contains(v)).collect();
    if out.len() > MAX_DENSE_VARS {
        return Err(TensorError::TooLarge { arity: out.len() });
    }
    let zs: Vec<Var> = z.iter().copied().collect();
    let (f_out, g_out) = (offsets(&out, f.vars()), offsets(&out, g.vars()));
    let (f_z, g_z) = (offsets(&zs, f.vars()), offsets(&zs, g.vars()));
    let zf: Vec<usize> = (0..1usize << zs.len()).map(|q| offset_of(q, &f_z)).collect();
    let zg: Vec<usize> = (0..1usize << zs.len()).map(|q| offset_of(q, &g_z)).collect();
    let (ft, gt) = (f.table(), g.table());
    let table: Vec<f64> = (0..1usize << out.len())
        .map(|o| {
            let (fo, go) = (offset_of(o, &f_out), offset_of(o, &g_out));
            let mut acc = ft[fo | zf[0]] * gt[go | zg[0]];
            for q in 1..zf.len() {
                acc += ft[fo | zf[q]] * gt[go | zg[q]];
            }
            acc
        })
        .collect();
    stats.flops = stats.flops.saturating_add(fused_flops(out.len(), zs.len()));
    stats.saw(out.len());
    Ok(DenseFunction::from_parts_unchecked(out, table))
}

/// `f ⊗ g = ∑_{vars(f) ∩ vars(g)} f·g`.
pub fn contract(f: &Tensor, g: &Tensor) -> Result<Tensor, TensorError> {
    let shared: BTreeSet<Var> = f.vars().iter().copied().filter(|&v| g.contains(v)).collect();
    project_product(f, g, &shared)
}

/// `■_X`: 1 on the all-false and all-true assignments, 0 elsewhere.
pub fn copy_tensor(vars: &BTreeSet<Var>) -> Result<Tensor, TensorError> {
    if vars.is_empty() {
        return Err(TensorError::EmptyCopy);
    }
    let full = (1usize << vars.len()) - 1;
    Ok(DenseFunction::from_fn(vars.iter().copied(), |i| {
        if i == 0 || i == full {
            1.0
        } else {
            0.0
        }
    })?)
}

/// `f` with variables renamed by `map` (unmapped ones kept).
fn rename(f: &Tensor, map: &BTreeMap<Var, Var>) -> Result<Tensor, TensorError> {
    let renamed: Vec<Var> = f.vars().iter().map(|v| *map.get(v).unwrap_or(v)).collect();
    let mut sorted = renamed.clone();
    sorted.sort_unstable();
    // Bit k of the old index moves to the position of renamed[k].
    let pos = positions_in(&renamed, &sorted);
    let mut table = vec![0.0; f.table().len()];
    for (i, &value) in f.table().iter().enumerate() {
        let j = pos
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &p)| acc | (((i >> k) & 1) << p));
        table[j] = value;
    }
    Ok(DenseFunction::new(sorted, table)?)
}

/// `f · g` computed only through contractions: each shared `z` is renamed
/// to `z′` in `f` and `z″` in `g`, the renamed tensors are contracted (an
/// outer product), and each `■_{z,z′,z″}` is contracted in.
pub fn product_via_copy(f: &Tensor, g: &Tensor) -> Result<Tensor, TensorError> {
    let shared: Vec<Var> = f.vars().iter().copied().filter(|&v| g.contains(v)).collect();
    let base = f.vars().iter().chain(g.vars()).max().copied().unwrap_or(0) + 1;
    let mut f_map = BTreeMap::new();
    let mut g_map = BTreeMap::new();
    for (k, &z) in shared.iter().enumerate() {
        f_map.insert(z, base + 2 * k);
        g_map.insert(z, base + 2 * k + 1);
    }
    let f2 = rename(f, &f_map)?;
    let g2 = rename(g, &g_map)?;
    let arity = f2.arity() + g2.arity();
    if arity > MAX_DENSE_VARS {
        return Err(TensorError::TooLarge { arity });
    }
    let mut acc = contract(&f2, &g2)?;
    for (k, &z) in shared.iter().enumerate() {
        let copy = copy_tensor(&BTreeSet::from([z, base + 2 * k, base + 2 * k + 1]))?;
        acc = contract(&acc, &copy)?;
    }
    Ok(acc)
}

/// One binary step of the per-node schedule.
enum Step {
    /// `g ← g ⊗ W_x`, eliminating `x` from the incoming child alone.
    EliminateInChild(Var),
    /// `g ← g · W_x`, before a fused step that eliminates `x`.
    WeighChild(Var),
    /// `acc ← ∑_Z acc · g` (or `acc ← g` for the first child).
    Absorb(BTreeSet<Var>),
    /// `acc ← acc · (w.neg + w.pos)` for a label variable in no child.
    ScaleFree(Var),
}

/// The fixed schedule for an internal node: children are absorbed in
/// ascending id order; each label variable is eliminated in the step that
/// absorbs the last child holding it, right after its weight is multiplied
/// in. Returns, per child, the steps to run after loading that child, then
/// the trailing free-variable steps.
fn schedule(
    children: &[NodeId],
    projected: &BTreeSet<Var>,
    child_vars: &BTreeMap<NodeId, BTreeSet<Var>>,
) -> (Vec<Vec<Step>>, Vec<Step>) {
    let mut last: BTreeMap<Var, usize> = BTreeMap::new();
    for (j, c) in children.iter().enumerate() {
        for &x in child_vars[c].intersection(projected) {
            last.insert(x, j);
        }
    }
    let mut acc_vars: BTreeSet<Var> = BTreeSet::new();
    let mut per_child = Vec::with_capacity(children.len());
    for (j, c) in children.iter().enumerate() {
        let mut steps = Vec::new();
        let mut fused = BTreeSet::new();
        for (&x, _) in last.iter().filter(|(_, &l)| l == j) {
            if acc_vars.contains(&x) {
                steps.push(Step::WeighChild(x));
                fused.insert(x);
            } else {
                steps.push(Step::EliminateInChild(x));
            }
        }
        // Eliminations in the child come first, then weights, then the fold.
        steps.sort_by_key(|s| matches!(s, Step::WeighChild(_)));
        let child_rest: BTreeSet<Var> = child_vars[c]
            .iter()
            .copied()
            .filter(|x| last.get(x) != Some(&j) || acc_vars.contains(x))
            .collect();
        acc_vars = acc_vars.union(&child_rest).copied().filter(|x| !fused.contains(x)).collect();
        steps.push(Step::Absorb(fused));
        per_child.push(steps);
    }
    let trailing = projected
        .iter()
        .copied()
        .filter(|x| !last.contains_key(x))
        .map(Step::ScaleFree)
        .collect();
    (per_child, trailing)
}

fn check_cap(node: NodeId, rank: usize) -> Result<(), TensorError> {
    if rank > MAX_DENSE_VARS {
        Err(TensorError::CapExceeded { node, arity: rank })
    } else {
        Ok(())
    }
}

fn weight(formula: &CnfFormula, x: Var) -> LiteralWeight {
    formula.weights.get(x)
}

/// Weighted model count by dense contraction, with operation statistics.
pub fn valuate_tensor(
    tree: &ProjectJoinTree,
    formula: &CnfFormula,
) -> Result<(f64, ContractionStats), TensorError> {
    validate(tree, formula).map_err(TensorError::InvalidTree)?;
    let mut stats = ContractionStats::default();
    let mut val: BTreeMap<NodeId, Tensor> = BTreeMap::new();
    let mut vars: BTreeMap<NodeId, BTreeSet<Var>> = BTreeMap::new();
    for id in tree.postorder() {
        let node = tree.node(id).expect("known node");
        let t = match &node.kind {
            NodeKind::Leaf { clause } => {
                let c = formula.clause(*clause);
                check_cap(id, c.vars().len())?;
                let t = clause_function(c)?;
                stats.saw(t.arity());
                t
            }
            NodeKind::Internal { children, projected } => {
                let (per_child, trailing) = schedule(children, projected, &vars);
                let mut acc: Option<Tensor> = None;
                for (c, steps) in children.iter().zip(per_child) {
                    let mut g = val.remove(c).expect("child valuated");
                    for step in steps {
                        match step {
                            Step::EliminateInChild(x) => {
                                let w = Tensor::literal_weight(x, weight(formula, x));
                                g = project_product_counted(&g, &w, &BTreeSet::from([x]), &mut stats)
                                    .map_err(|e| at_node(e, id))?;
                            }
                            Step::WeighChild(x) => {
                                let w = Tensor::literal_weight(x, weight(formula, x));
                                g = project_product_counted(&g, &w, &BTreeSet::new(), &mut stats)
                                    .map_err(|e| at_node(e, id))?;
                            }
                            Step::Absorb(z) => {
                                acc = Some(match acc.take() {
                                    None => g.clone(),
                                    Some(a) => project_product_counted(&a, &g, &z, &mut stats)
                                        .map_err(|e| at_node(e, id))?,
                                });
                            }
                            Step::ScaleFree(_) => unreachable!("free steps trail the children"),
                        }
                    }
                }
                let mut acc = acc.unwrap_or_else(|| Tensor::constant(1.0));
                for step in trailing {
                    if let Step::ScaleFree(x) = step {
                        let s = weight(formula, x).total();
                        let table = acc.table().iter().map(|v| v * s).collect();
                        stats.flops = stats.flops.saturating_add(1 + acc.table().len() as u64);
                        acc = Tensor::new(acc.vars().to_vec(), table)?;
                    }
                }
                acc
            }
        };
        vars.insert(id, t.vars().iter().copied().collect());
        val.insert(id, t);
    }
    let root = val.remove(&tree.root()).expect("root valuated");
    let value = root
        .scalar()
        .expect("a valid tree leaves nothing unprojected at the root");
    Ok((value, stats))
}

fn at_node(e: TensorError, node: NodeId) -> TensorError {
    match e {
        TensorError::TooLarge { arity } => TensorError::CapExceeded { node, arity },
        other => other,
    }
}

/// Exactly the `flops` that [`valuate_tensor`] reports for a valid tree,
/// computed from variable sets alone.
pub fn estimate_flops(tree: &ProjectJoinTree, formula: &CnfFormula) -> u64 {
    estimate(tree, formula).flops
}

/// Both statistics of [`valuate_tensor`], without running it.
pub fn estimate(tree: &ProjectJoinTree, formula: &CnfFormula) -> ContractionStats {
    let mut stats = ContractionStats::default();
    let mut vars: BTreeMap<NodeId, BTreeSet<Var>> = BTreeMap::new();
    for id in tree.postorder() {
        let node = tree.node(id).expect("known node");
        let v = match &node.kind {
            NodeKind::Leaf { clause } => {
                let v = formula.clause(*clause).vars();
                stats.saw(v.len());
                v
            }
            NodeKind::Internal { children, projected } => {
                let (per_child, trailing) = schedule(children, projected, &vars);
                let mut acc: Option<BTreeSet<Var>> = None;
                for (c, steps) in children.iter().zip(per_child) {
                    let mut g = vars[c].clone();
                    for step in steps {
                        match step {
                            Step::EliminateInChild(x) => {
                                g.remove(&x);
                                stats.flops = stats.flops.saturating_add(fused_flops(g.len(), 1));
                                stats.saw(g.len());
                            }
                            Step::WeighChild(_) => {
                                stats.flops = stats.flops.saturating_add(fused_flops(g.len(), 0));
                                stats.saw(g.len());
                            }
                            Step::Absorb(z) => {
                                acc = Some(match acc.take() {
                                    None => g.clone(),
                                    Some(a) => {
                                        let out: BTreeSet<Var> =
                                            a.union(&g).copied().filter(|x| !z.contains(x)).collect();
                                        stats.flops =
                                            stats.flops.saturating_add(fused_flops(out.len(), z.len()));
                                        stats.saw(out.len());
                                        out
                                    }
                                });
                            }
                            Step::ScaleFree(_) => unreachable!("free steps trail the children"),
                        }
                    }
                }
                let acc = acc.unwrap_or_default();
                for _ in trailing {
                    stats.flops = stats.flops.saturating_add(1 + (1u64 << acc.len()));
                }
                acc
            }
        };
        vars.insert(id, v);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_cnf;
    use crate::jointree::read_jt;
    use proptest::prelude::*;

    fn t(vars: &[Var], table: &[f64]) -> Tensor {
        DenseFunction::new(vars.to_vec(), table.to_vec()).unwrap()
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(contract(&t(&[1], &[1.0, 2.0]), &t(&[1], &[3.0, 4.0])).unwrap(), t(&[], &[11.0]));
        let f = t(&[1], &[1.0, 2.0]);
        let g = t(&[2], &[3.0, 4.0]);
        assert_eq!(contract(&f, &g).unwrap(), f.product(&g).unwrap());
    }

    #[test]
    fn copy_tensors() {
        let c = copy_tensor(&BTreeSet::from([4, 5, 6])).unwrap();
        let mut expect = vec![0.0; 8];
        expect[0] = 1.0;
        expect[7] = 1.0;
        assert_eq!(c.table(), expect.as_slice());
        assert_eq!(copy_tensor(&BTreeSet::from([1])).unwrap().table(), &[1.0, 1.0]);
        assert_eq!(copy_tensor(&BTreeSet::from([1, 2])).unwrap().table(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(copy_tensor(&BTreeSet::new()), Err(TensorError::EmptyCopy));
    }

    #[test]
    fn product_via_copy_examples() {
        let f = t(&[1], &[1.0, 2.0]);
        let g = t(&[1], &[3.0, 4.0]);
        assert_eq!(product_via_copy(&f, &g).unwrap(), t(&[1], &[3.0, 8.0]));
        let h = t(&[2], &[5.0, 6.0]);
        assert_eq!(product_via_copy(&f, &h).unwrap(), contract(&f, &h).unwrap());
    }

    #[test]
    fn project_product_checks_sharing() {
        let f = t(&[1], &[1.0, 2.0]);
        let g = t(&[2], &[1.0, 2.0]);
        assert_eq!(
            project_product(&f, &g, &BTreeSet::from([1])),
            Err(TensorError::NotShared { var: 1 })
        );
    }

    #[test]
    fn sample_valuation() {
        let f = parse_cnf(include_str!("../tests/data/sample.cnf")).unwrap();
        let tree = read_jt(include_str!("../tests/data/sample.jt")).unwrap();
        let (value, stats) = valuate_tensor(&tree, &f).unwrap();
        assert_eq!(value, 1.0);
        assert!(stats.max_rank <= 3);
        assert_eq!(estimate(&tree, &f), stats);
    }

    #[test]
    fn unit_clause_costs_three_operations() {
        let f = CnfFormula::from_dimacs_clauses(1, &[vec![1]]);
        let mut tree = ProjectJoinTree::with_leaves(1, 1);
        let r = tree.add_internal([1], [1]);
        tree.set_root(r);
        let (value, stats) = valuate_tensor(&tree, &f).unwrap();
        assert_eq!(value, 1.0);
        assert_eq!(stats.flops, 3);
        assert_eq!(estimate_flops(&tree, &f), 3);
    }

    #[test]
    fn single_clause_rank_is_its_length() {
        let f = CnfFormula::from_dimacs_clauses(3, &[vec![1, -2, 3]]);
        let mut tree = ProjectJoinTree::with_leaves(3, 1);
        let r = tree.add_internal([1], [1, 2, 3]);
        tree.set_root(r);
        let (value, stats) = valuate_tensor(&tree, &f).unwrap();
        assert_eq!(value, 7.0);
        assert_eq!(stats.max_rank, 3);
    }

    #[test]
    fn free_variables_scale() {
        let f = CnfFormula::from_dimacs_clauses(2, &[]);
        let mut tree = ProjectJoinTree::with_leaves(2, 0);
        let r = tree.add_internal([], [1, 2]);
        tree.set_root(r);
        let (value, stats) = valuate_tensor(&tree, &f).unwrap();
        assert_eq!(value, 4.0);
        assert_eq!(stats.flops, 4);
        assert_eq!(estimate_flops(&tree, &f), 4);
    }

    fn tensor_strategy(max_vars: usize) -> impl Strategy<Value = Tensor> {
        proptest::sample::subsequence((1..=5).collect::<Vec<Var>>(), 0..=max_vars).prop_flat_map(|vars| {
            let len = 1usize << vars.len();
            proptest::collection::vec(-4.0..4.0f64, len)
                .prop_map(move |table| DenseFunction::new(vars.clone(), table).unwrap())
        })
    }

    proptest! {
        #[test]
        fn contraction_commutes_and_preserves_totals(f in tensor_strategy(4), g in tensor_strategy(4)) {
            let a = contract(&f, &g).unwrap();
            let b = contract(&g, &f).unwrap();
            prop_assert!(a.approx_eq(&b));
            let whole = f.product(&g).unwrap();
            prop_assert!(crate::pbf::approx_eq(a.total(), whole.total()));
        }

        #[test]
        fn fused_kernel_is_projected_product(f in tensor_strategy(5), g in tensor_strategy(5), pick in any::<u8>()) {
            let shared: Vec<Var> = f.vars().iter().copied().filter(|&v| g.contains(v)).collect();
            let z: BTreeSet<Var> = shared.iter().enumerate().filter(|(k, _)| pick >> k & 1 == 1).map(|(_, &v)| v).collect();
            let fused = project_product(&f, &g, &z).unwrap();
            let slow = f.product(&g).unwrap().project_all(z.iter().copied()).unwrap();
            prop_assert!(fused.approx_eq(&slow));
            prop_assert!(product_via_copy(&f, &g).unwrap().approx_eq(&f.product(&g).unwrap()));
        }
    }
}
