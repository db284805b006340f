//! Variable orders on the Gaifman graph: maximum-cardinality search,
//! lexicographic searches for perfect and minimal orders, greedy min-fill,
//! seeded random, and their inverses.
//!
//! Every search starts from the lowest-index vertex and breaks ties toward
//! the lowest index.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formula::{Graph, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderHeuristic {
    Random { seed: u64 },
    Mcs,
    InvMcs,
    LexP,
    InvLexP,
    LexM,
    InvLexM,
    MinFill,
    InvMinFill,
}

impl OrderHeuristic {
    /// All nine heuristics; `Random` uses `seed`.
    pub fn all(seed: u64) -> [OrderHeuristic; 9] {
        use OrderHeuristic::*;
        [
            Random { seed },
            Mcs,
            InvMcs,
            LexP,
            InvLexP,
            LexM,
            InvLexM,
            MinFill,
            InvMinFill,
        ]
    }

    pub fn name(self) -> &'static str {
        use OrderHeuristic::*;
        match self {
            Random { .. } => "random",
            Mcs => "mcs",
            InvMcs => "invmcs",
            LexP => "lexp",
            InvLexP => "invlexp",
            LexM => "lexm",
            InvLexM => "invlexm",
            MinFill => "minfill",
            InvMinFill => "invminfill",
        }
    }

    /// Parses a CLI name; `random` takes `seed`.
    pub fn parse(name: &str, seed: u64) -> Option<OrderHeuristic> {
        Self::all(seed).into_iter().find(|h| h.name() == name)
    }

    /// The order on `g`, one rank per vertex.
    pub fn order(self, g: &Graph) -> VarOrder {
        use OrderHeuristic::*;
        let seq = match self {
            Random { seed } => random_order(g.vertex_count(), seed),
            Mcs | InvMcs => mcs_order(g),
            LexP | InvLexP => lexp_order(g),
            LexM | InvLexM => lexm_order(g),
            MinFill | InvMinFill => min_fill_order(g),
        };
        let order = VarOrder::from_sequence(&seq, self);
        match self {
            InvMcs | InvLexP | InvLexM | InvMinFill => order.inverted(self),
            _ => order,
        }
    }
}

impl fmt::Display for OrderHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderHeuristic {
    type Err = String;

    /// Names without a seed; `random` gets seed 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, 0).ok_or_else(|| format!("unknown variable order `{s}`"))
    }
}

/// An injection from variables `1..=m` onto ranks `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarOrder {
    /// `rank[x - 1]` is the rank of `x`.
    rank: Vec<usize>,
    heuristic: OrderHeuristic,
}

impl VarOrder {
    /// Rank `i + 1` for `seq[i]`. `seq` must be a permutation of `1..=m`.
    pub fn from_sequence(seq: &[Var], heuristic: OrderHeuristic) -> Self {
        let mut rank = vec![0; seq.len()];
        for (i, &v) in seq.iter().enumerate() {
            assert!(v >= 1 && v <= seq.len() && rank[v - 1] == 0, "not a permutation");
            rank[v - 1] = i + 1;
        }
        VarOrder { rank, heuristic }
    }

    /// The identity order `x ↦ x`.
    pub fn identity(m: usize) -> Self {
        VarOrder {
            rank: (1..=m).collect(),
            heuristic: OrderHeuristic::Mcs,
        }
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    pub fn heuristic(&self) -> OrderHeuristic {
        self.heuristic
    }

    /// `ρ(x)`.
    pub fn rank(&self, x: Var) -> usize {
        self.rank[x - 1]
    }

    /// Variables by ascending rank.
    pub fn sequence(&self) -> Vec<Var> {
        let mut seq = vec![0; self.rank.len()];
        for (i, &r) in self.rank.iter().enumerate() {
            seq[r - 1] = i + 1;
        }
        seq
    }

    /// `ρ'(x) = m + 1 − ρ(x)`.
    pub fn inverted(&self, heuristic: OrderHeuristic) -> Self {
        let m = self.rank.len();
        VarOrder {
            rank: self.rank.iter().map(|&r| m + 1 - r).collect(),
            heuristic,
        }
    }
}

pub fn random_order(m: usize, seed: u64) -> Vec<Var> {
    let mut seq: Vec<Var> = (1..=m).collect();
    seq.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    seq
}

fn argmax_unchosen<K: Ord>(chosen: &[bool], mut key: impl FnMut(Var) -> K) -> Var {
    let mut best: Option<(K, Var)> = None;
    for v in (1..chosen.len()).filter(|&v| !chosen[v]) {
        let k = key(v);
        if best.as_ref().is_none_or(|(b, _)| k > *b) {
            best = Some((k, v));
        }
    }
    best.expect("an unchosen vertex").1
}

/// Repeatedly picks the vertex with the most already-chosen neighbors.
pub fn mcs_order(g: &Graph) -> Vec<Var> {
    let n = g.vertex_count();
    let mut chosen = vec![false; n + 1];
    let mut count = vec![0usize; n + 1];
    let mut seq = Vec::with_capacity(n);
    for _ in 0..n {
        let v = argmax_unchosen(&chosen, |v| count[v]);
        chosen[v] = true;
        seq.push(v);
        for &u in g.neighbors(v) {
            count[u] += 1;
        }
    }
    seq
}

/// Labels are the steps at which a vertex was labeled, ascending. A label
/// ranks higher when it holds the earlier step at the first difference, or
/// extends the other; the empty label ranks lowest. Mapping step `s` to
/// `n + 1 − s` turns that into plain `Vec` ordering, larger is better.
fn label_key(label: &[usize], n: usize) -> Vec<usize> {
    label.iter().map(|&s| n + 1 - s).collect()
}

/// Lexicographic search for perfect orders: the chosen vertex is added to
/// the labels of its unchosen neighbors.
pub fn lexp_order(g: &Graph) -> Vec<Var> {
    let n = g.vertex_count();
    let mut chosen = vec![false; n + 1];
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut seq = Vec::with_capacity(n);
    for step in 1..=n {
        let v = argmax_unchosen(&chosen, |v| label_key(&labels[v], n));
        chosen[v] = true;
        seq.push(v);
        for &u in g.neighbors(v) {
            if !chosen[u] {
                labels[u].push(step);
            }
        }
    }
    seq
}

/// Lexicographic search for minimal orders: the chosen vertex `v` is added to
/// the label of every unchosen `y` reachable from `v` through unchosen
/// vertices whose labels all rank strictly below the label of `y`.
pub fn lexm_order(g: &Graph) -> Vec<Var> {
    let n = g.vertex_count();
    let mut chosen = vec![false; n + 1];
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut seq = Vec::with_capacity(n);
    for step in 1..=n {
        let v = argmax_unchosen(&chosen, |v| label_key(&labels[v], n));
        chosen[v] = true;
        seq.push(v);

        // Dense rank of each unchosen label (equal labels share a class).
        let classes: BTreeSet<Vec<usize>> = (1..=n)
            .filter(|&u| !chosen[u])
            .map(|u| label_key(&labels[u], n))
            .collect();
        let class_of = |u: Var| {
            classes
                .iter()
                .position(|k| *k == label_key(&labels[u], n))
                .expect("label class") as isize
        };
        let class: Vec<isize> = (0..=n)
            .map(|u| if u == 0 || chosen[u] { -1 } else { class_of(u) })
            .collect();

        // Bottleneck search: reach[u] is the least possible maximum class
        // over the intermediates of a path v, …, u (−1 for neighbors of v).
        let mut reach = vec![isize::MAX; n + 1];
        let mut heap = BinaryHeap::new();
        for &u in g.neighbors(v) {
            if !chosen[u] {
                reach[u] = -1;
                heap.push(Reverse((-1isize, u)));
            }
        }
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > reach[u] {
                continue;
            }
            let through = d.max(class[u]);
            for &w in g.neighbors(u) {
                if !chosen[w] && through < reach[w] {
                    reach[w] = through;
                    heap.push(Reverse((through, w)));
                }
            }
        }
        for u in 1..=n {
            if !chosen[u] && reach[u] < class[u] {
                labels[u].push(step);
            }
        }
    }
    seq
}

/// Fill edges that eliminating `v` would add to `adj`.
fn fill_in(adj: &[BTreeSet<Var>], v: Var) -> usize {
    let nbrs: Vec<Var> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        fill += nbrs[i + 1..].iter().filter(|&&b| !adj[a].contains(&b)).count();
    }
    fill
}

/// Greedy min-fill elimination order, recomputing fill counts after every
/// elimination.
pub fn min_fill_order(g: &Graph) -> Vec<Var> {
    let n = g.vertex_count();
    let mut adj: Vec<BTreeSet<Var>> = (0..=n)
        .map(|v| if v == 0 { BTreeSet::new() } else { g.neighbors(v).clone() })
        .collect();
    let mut chosen = vec![false; n + 1];
    let mut seq = Vec::with_capacity(n);
    for _ in 0..n {
        let v = argmax_unchosen(&chosen, |v| Reverse(fill_in(&adj, v)));
        chosen[v] = true;
        seq.push(v);
        let nbrs: Vec<Var> = adj[v].iter().copied().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            adj[a].remove(&v);
            for &b in &nbrs[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj[v].clear();
    }
    seq
}
