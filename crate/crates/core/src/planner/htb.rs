//! Heuristic tree builder: clusters clauses by a variable order, then chains
//! the clusters into a project-join tree.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::formula::{gaifman_graph, Clause, CnfFormula, Var};
use crate::jointree::{NodeId, ProjectJoinTree};
use crate::order::{OrderHeuristic, VarOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseRank {
    /// Smallest rank among the clause's variables (bucket elimination).
    Be,
    /// Largest rank (Bouquet's method).
    Bm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clustering {
    List,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HtbConfig {
    pub order: OrderHeuristic,
    pub rank: ClauseRank,
    pub cluster: Clustering,
}

impl HtbConfig {
    pub fn new(order: OrderHeuristic, rank: ClauseRank, cluster: Clustering) -> Self {
        HtbConfig { order, rank, cluster }
    }

    /// The 36 combinations of order, rank and clustering.
    pub fn all(seed: u64) -> Vec<HtbConfig> {
        let mut out = Vec::with_capacity(36);
        for order in OrderHeuristic::all(seed) {
            for rank in [ClauseRank::Be, ClauseRank::Bm] {
                for cluster in [Clustering::List, Clustering::Tree] {
                    out.push(HtbConfig::new(order, rank, cluster));
                }
            }
        }
        out
    }
}

impl Default for HtbConfig {
    fn default() -> Self {
        HtbConfig::new(OrderHeuristic::InvLexP, ClauseRank::Be, Clustering::Tree)
    }
}

impl fmt::Display for HtbConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.order, self.rank, self.cluster)
    }
}

impl fmt::Display for ClauseRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseRank::Be => "be",
            ClauseRank::Bm => "bm",
        })
    }
}

impl fmt::Display for Clustering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clustering::List => "list",
            Clustering::Tree => "tree",
        })
    }
}

impl FromStr for ClauseRank {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "be" => Ok(ClauseRank::Be),
            "bm" => Ok(ClauseRank::Bm),
            _ => Err(format!("unknown clause rank `{s}`")),
        }
    }
}

impl FromStr for Clustering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "list" => Ok(Clustering::List),
            "tree" => Ok(Clustering::Tree),
            _ => Err(format!("unknown clustering `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HtbError {
    #[error("formula has no variables")]
    NoVariables,
}

/// Rank of `c` in `1..=m`. The empty clause ranks `m`.
pub fn clause_rank(c: &Clause, rho: &VarOrder, method: ClauseRank) -> usize {
    let ranks = c.literals.iter().map(|l| rho.rank(l.var));
    let rank = match method {
        ClauseRank::Be => ranks.min(),
        ClauseRank::Bm => ranks.max(),
    };
    rank.unwrap_or(rho.len())
}

/// Parent cluster for the node built at cluster `i` whose variables are
/// `node_vars`. `partition[j - 1]` is `X_j`. Requires `i < m`.
pub fn chosen_cluster(
    node_vars: &BTreeSet<Var>,
    i: usize,
    method: Clustering,
    partition: &[BTreeSet<Var>],
) -> usize {
    let m = partition.len();
    match method {
        Clustering::List => i + 1,
        Clustering::Tree => (i + 1..=m)
            .find(|&j| !partition[j - 1].is_disjoint(node_vars))
            .unwrap_or(m),
    }
}

/// What the builder did, for instrumentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtbTrace {
    pub order: VarOrder,
    /// `clause_ranks[c - 1]` is the cluster of clause `c`.
    pub clause_ranks: Vec<usize>,
    /// `partition[i - 1]` is `X_i`.
    pub partition: Vec<BTreeSet<Var>>,
    /// Cluster index of each internal node, `(node, i)`, in creation order.
    pub node_clusters: Vec<(NodeId, usize)>,
    /// `projected_at[x - 1]` is the cluster whose node projects `x`.
    pub projected_at: Vec<usize>,
}

pub fn build_tree(formula: &CnfFormula, cfg: &HtbConfig) -> Result<ProjectJoinTree, HtbError> {
    build_tree_traced(formula, cfg).map(|(t, _)| t)
}

pub fn build_tree_traced(
    formula: &CnfFormula,
    cfg: &HtbConfig,
) -> Result<(ProjectJoinTree, HtbTrace), HtbError> {
    let m = formula.var_count;
    if m == 0 {
        return Err(HtbError::NoVariables);
    }
    let rho = cfg.order.order(&gaifman_graph(formula));
    build_tree_with_order(formula, rho, cfg.rank, cfg.cluster)
}

/// The builder with an explicit variable order.
pub fn build_tree_with_order(
    formula: &CnfFormula,
    rho: VarOrder,
    rank: ClauseRank,
    cluster: Clustering,
) -> Result<(ProjectJoinTree, HtbTrace), HtbError> {
    let m = formula.var_count;
    if m == 0 {
        return Err(HtbError::NoVariables);
    }
    let l = formula.clause_count();
    let mut tree = ProjectJoinTree::with_leaves(m, l);

    let clause_ranks: Vec<usize> = formula.clauses.iter().map(|c| clause_rank(c, &rho, rank)).collect();
    let mut kappa: Vec<Vec<NodeId>> = vec![Vec::new(); m + 1];
    let mut gamma_vars: Vec<BTreeSet<Var>> = vec![BTreeSet::new(); m + 1];
    for (c, &i) in formula.clauses.iter().zip(&clause_ranks) {
        kappa[i].push(c.id);
        gamma_vars[i].extend(c.literals.iter().map(|l| l.var));
    }
    // X_i = vars(Γ_i) minus the variables of later clusters.
    let mut partition = vec![BTreeSet::new(); m];
    let mut later: BTreeSet<Var> = BTreeSet::new();
    for i in (1..=m).rev() {
        partition[i - 1] = gamma_vars[i].difference(&later).copied().collect();
        later.extend(gamma_vars[i].iter().copied());
    }

    let mut node_vars: Vec<BTreeSet<Var>> = Vec::with_capacity(l);
    for c in &formula.clauses {
        node_vars.push(c.vars());
    }
    let mut node_clusters = Vec::new();
    let mut projected_at = vec![0usize; m];
    let mut last = None;
    for i in 1..=m {
        if kappa[i].is_empty() {
            continue;
        }
        let children = std::mem::take(&mut kappa[i]);
        let mut vars: BTreeSet<Var> = BTreeSet::new();
        for &ch in &children {
            vars.extend(node_vars[ch - 1].iter().copied());
        }
        let x_i = &partition[i - 1];
        for &x in x_i {
            projected_at[x - 1] = i;
        }
        let n = tree.add_internal(children, x_i.iter().copied());
        let vars: BTreeSet<Var> = vars.difference(x_i).copied().collect();
        node_clusters.push((n, i));
        if i < m {
            let j = chosen_cluster(&vars, i, cluster, &partition);
            kappa[j].push(n);
        }
        node_vars.push(vars);
        last = Some((n, i));
    }

    let free = formula.free_vars();
    let root = match last {
        Some((n, m_)) if m_ == m => {
            tree.extend_projected(n, free.iter().copied());
            n
        }
        // Only reachable without clauses: every node built before `m` is
        // handed to a later cluster, so `κ_m` fills whenever any clause exists.
        _ => tree.add_internal(std::iter::empty(), free.iter().copied()),
    };
    for &x in &free {
        projected_at[x - 1] = m;
    }
    tree.set_root(root);
    Ok((
        tree,
        HtbTrace {
            order: rho,
            clause_ranks,
            partition,
            node_clusters,
            projected_at,
        },
    ))
}
