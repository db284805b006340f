//! Dense pseudo-Boolean functions.
//!
//! A [`DenseFunction`] over variables `v_0 < v_1 < … < v_{k-1}` stores
//! `2^k` reals. Entry `i` is the value at the assignment where `v_j` is true
//! iff bit `j` of `i` is set.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::{Clause, LiteralWeight, Var};

/// Largest domain a dense table may have.
pub const MAX_DENSE_VARS: usize = 30;

pub const REL_TOLERANCE: f64 = 1e-9;
pub const ABS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PbfError {
    #[error("dense table over {arity} variables exceeds the {MAX_DENSE_VARS}-variable cap")]
    TooLarge { arity: usize },
    #[error("variable {var} is not in the function's domain")]
    NotInDomain { var: Var },
    #[error("variable {var} must not be in the second function's domain")]
    InSecondDomain { var: Var },
    #[error("domain variables must be strictly ascending and nonzero")]
    UnsortedDomain,
    #[error("table has {found} entries, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Relative comparison with an absolute floor near zero.
pub fn approx_eq(a: f64, b: f64) -> bool {
    approx_eq_with(a, b, REL_TOLERANCE)
}

pub fn approx_eq_with(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    let diff = (a - b).abs();
    diff <= ABS_TOLERANCE || diff <= rel * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFunction {
    vars: Vec<Var>,
    table: Vec<f64>,
}

fn check_arity(arity: usize) -> Result<(), PbfError> {
    if arity > MAX_DENSE_VARS {
        Err(PbfError::TooLarge { arity })
    } else {
        Ok(())
    }
}

/// For each variable of `sub` (a subset of `sup`), its bit position in `sup`.
pub(crate) fn positions_in(sub: &[Var], sup: &[Var]) -> Vec<usize> {
    sub.iter()
        .map(|v| sup.binary_search(v).expect("subset variable"))
        .collect()
}

/// Index into a table over `sub` for the assignment `index` over the superset.
#[inline]
pub(crate) fn gather(index: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &p)| acc | (((index >> p) & 1) << k))
}

pub(crate) fn union_sorted(a: &[Var], b: &[Var]) -> Vec<Var> {
    let set: BTreeSet<Var> = a.iter().chain(b).copied().collect();
    set.into_iter().collect()
}

impl DenseFunction {
    pub fn new(vars: Vec<Var>, table: Vec<f64>) -> Result<Self, PbfError> {
        if vars.contains(&0) || vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PbfError::UnsortedDomain);
        }
        check_arity(vars.len())?;
        let expected = 1usize << vars.len();
        if table.len() != expected {
            return Err(PbfError::LengthMismatch {
                expected,
                found: table.len(),
            });
        }
        Ok(DenseFunction { vars, table })
    }

    pub fn constant(c: f64) -> Self {
        DenseFunction {
            vars: Vec::new(),
            table: vec![c],
        }
    }

    /// Tabulates `f` over `vars`; `f` receives the assignment's bit index.
    pub fn from_fn(
        vars: impl IntoIterator<Item = Var>,
        f: impl FnMut(usize) -> f64,
    ) -> Result<Self, PbfError> {
        let vars: Vec<Var> = vars.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        check_arity(vars.len())?;
        let table = (0..1usize << vars.len()).map(f).collect();
        Ok(DenseFunction { vars, table })
    }

    pub(crate) fn from_parts_unchecked(vars: Vec<Var>, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), 1 << vars.len());
        DenseFunction { vars, table }
    }

    /// `W_x` as a function over `{x}`: `[neg, pos]`.
    pub fn literal_weight(x: Var, w: LiteralWeight) -> Self {
        DenseFunction {
            vars: vec![x],
            table: vec![w.neg, w.pos],
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn contains(&self, x: Var) -> bool {
        self.vars.binary_search(&x).is_ok()
    }

    /// Value at the assignment setting exactly `true_vars` (restricted to the
    /// domain) to true.
    pub fn value(&self, mut is_true: impl FnMut(Var) -> bool) -> f64 {
        let index = self
            .vars
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &v)| if is_true(v) { acc | (1 << k) } else { acc });
        self.table[index]
    }

    /// The only entry of a function over the empty domain.
    pub fn scalar(&self) -> Option<f64> {
        self.vars.is_empty().then(|| self.table[0])
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Same function viewed over a larger domain.
    pub fn expand_to(&self, vars: &[Var]) -> Result<DenseFunction, PbfError> {
        let target: Vec<Var> = vars.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if let Some(&v) = self.vars.iter().find(|v| target.binary_search(v).is_err()) {
            return Err(PbfError::NotInDomain { var: v });
        }
        check_arity(target.len())?;
        let pos = positions_in(&self.vars, &target);
        let table = (0..1usize << target.len())
            .map(|i| self.table[gather(i, &pos)])
            .collect();
        Ok(DenseFunction {
            vars: target,
            table,
        })
    }

    /// Same domain and every entry within tolerance.
    pub fn approx_eq(&self, other: &DenseFunction) -> bool {
        self.vars == other.vars
            && self
                .table
                .iter()
                .zip(&other.table)
                .all(|(a, b)| approx_eq(*a, *b))
    }

    /// `f · g` over `vars(f) ∪ vars(g)`.
    pub fn product(&self, other: &DenseFunction) -> Result<DenseFunction, PbfError> {
        let vars = union_sorted(&self.vars, &other.vars);
        check_arity(vars.len())?;
        let pf = positions_in(&self.vars, &vars);
        let pg = positions_in(&other.vars, &vars);
        let table = (0..1usize << vars.len())
            .map(|i| self.table[gather(i, &pf)] * other.table[gather(i, &pg)])
            .collect();
        Ok(DenseFunction { vars, table })
    }

    /// `∑_x f`.
    pub fn project(&self, x: Var) -> Result<DenseFunction, PbfError> {
        self.split(x, |lo, hi| lo + hi)
    }

    /// `∑_x (f · W_x)`.
    pub fn project_weighted(&self, x: Var, w: LiteralWeight) -> Result<DenseFunction, PbfError> {
        self.split(x, |lo, hi| lo * w.neg + hi * w.pos)
    }

    /// Projects every variable of `xs` in ascending order.
    pub fn project_all(&self, xs: impl IntoIterator<Item = Var>) -> Result<DenseFunction, PbfError> {
        let mut f = self.clone();
        for x in xs.into_iter().collect::<BTreeSet<_>>() {
            f = f.project(x)?;
        }
        Ok(f)
    }

    fn split(&self, x: Var, combine: impl Fn(f64, f64) -> f64) -> Result<DenseFunction, PbfError> {
        let k = self
            .vars
            .binary_search(&x)
            .map_err(|_| PbfError::NotInDomain { var: x })?;
        let low_mask = (1usize << k) - 1;
        let vars: Vec<Var> = self.vars.iter().copied().filter(|&v| v != x).collect();
        let table = (0..1usize << vars.len())
            .map(|i| {
                let lo = (i & low_mask) | ((i & !low_mask) << 1);
                combine(self.table[lo], self.table[lo | (1 << k)])
            })
            .collect();
        Ok(DenseFunction { vars, table })
    }
}

/// Indicator of the assignments satisfying `c`, over `vars(c)`.
pub fn clause_function(c: &Clause) -> Result<DenseFunction, PbfError> {
    let vars: Vec<Var> = c.vars().into_iter().collect();
    check_arity(vars.len())?;
    let table = (0..1usize << vars.len())
        .map(|i| {
            let sat = c.satisfied_by(|v| {
                let k = vars.binary_search(&v).unwrap();
                (i >> k) & 1 == 1
            });
            if sat {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(DenseFunction { vars, table })
}

/// Checks `∑_x (f·g) = (∑_x f)·g` entrywise. Requires `x ∈ vars(f) \ vars(g)`.
pub fn early_projection_check(
    f: &DenseFunction,
    g: &DenseFunction,
    x: Var,
) -> Result<bool, PbfError> {
    if !f.contains(x) {
        return Err(PbfError::NotInDomain { var: x });
    }
    if g.contains(x) {
        return Err(PbfError::InSecondDomain { var: x });
    }
    let late = f.product(g)?.project(x)?;
    let early = f.project(x)?.product(g)?;
    Ok(late.approx_eq(&early))
}
