//! CNF formulas with literal weights.
//!
//! Input is DIMACS CNF extended with `w <lit> <weight> [0]` lines. A positive
//! `lit` sets the weight of the positive literal, a negative one sets the
//! weight of the negative literal. Unmentioned literals weigh `1.0`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Variables are 1-based indices.
pub type Var = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("no problem line found")]
    NoProblemLine,
    #[error("line {line}: clause or weight data before the problem line")]
    MissingProblemLine { line: usize },
    #[error("line {line}: duplicate problem line")]
    DuplicateProblemLine { line: usize },
    #[error("line {line}: malformed problem line")]
    MalformedProblemLine { line: usize },
    #[error("line {line}: literal {literal} exceeds variable count {var_count}")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        var_count: usize,
    },
    #[error("line {line}: expected {expected} clauses, found {found}")]
    ClauseCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: clause not terminated by 0")]
    UnterminatedClause { line: usize },
    #[error("line {line}: malformed weight line: {reason}")]
    MalformedWeight { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: Var,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: Var, positive: bool) -> Self {
        debug_assert!(var >= 1);
        Literal { var, positive }
    }

    /// Builds a literal from its signed DIMACS form.
    pub fn from_dimacs(lit: i64) -> Self {
        Literal::new(lit.unsigned_abs() as Var, lit > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.positive {
            v
        } else {
            -v
        }
    }

    /// Whether `value` assigned to this literal's variable makes it true.
    pub fn satisfied_by(self, value: bool) -> bool {
        value == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "x{}", self.var)
        } else {
            write!(f, "¬x{}", self.var)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    /// Position in the formula, starting at 1.
    pub id: usize,
    pub literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals but keeping the first
    /// occurrence order.
    pub fn new(id: usize, literals: impl IntoIterator<Item = Literal>) -> Self {
        let mut seen = BTreeSet::new();
        let literals = literals.into_iter().filter(|l| seen.insert(*l)).collect();
        Clause { id, literals }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        clause_vars(self)
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// A clause holding some variable in both polarities.
    pub fn is_tautology(&self) -> bool {
        self.literals
            .iter()
            .any(|l| self.literals.contains(&Literal::new(l.var, !l.positive)))
    }

    /// Evaluates the clause under `value(var)`.
    pub fn satisfied_by(&self, mut value: impl FnMut(Var) -> bool) -> bool {
        self.literals.iter().any(|l| l.satisfied_by(value(l.var)))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "⊥");
        }
        for (i, l) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// The set of variables mentioned by a clause.
pub fn clause_vars(c: &Clause) -> BTreeSet<Var> {
    c.literals.iter().map(|l| l.var).collect()
}

/// Weights of the two literals of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiteralWeight {
    /// Weight of the negative literal, `W_x(∅)`.
    pub neg: f64,
    /// Weight of the positive literal, `W_x({x})`.
    pub pos: f64,
}

impl LiteralWeight {
    pub const UNIT: LiteralWeight = LiteralWeight { neg: 1.0, pos: 1.0 };

    pub fn new(neg: f64, pos: f64) -> Self {
        LiteralWeight { neg, pos }
    }

    pub fn of(self, value: bool) -> f64 {
        if value {
            self.pos
        } else {
            self.neg
        }
    }

    pub fn total(self) -> f64 {
        self.neg + self.pos
    }
}

impl Default for LiteralWeight {
    fn default() -> Self {
        LiteralWeight::UNIT
    }
}

/// A literal-weight function: one [`LiteralWeight`] per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    weights: Vec<LiteralWeight>,
}

impl WeightFunction {
    pub fn unit(var_count: usize) -> Self {
        WeightFunction {
            weights: vec![LiteralWeight::UNIT; var_count],
        }
    }

    pub fn var_count(&self) -> usize {
        self.weights.len()
    }

    pub fn get(&self, x: Var) -> LiteralWeight {
        self.weights[x - 1]
    }

    pub fn set(&mut self, x: Var, w: LiteralWeight) {
        self.weights[x - 1] = w;
    }

    pub fn set_literal(&mut self, lit: Literal, weight: f64) {
        let w = &mut self.weights[lit.var - 1];
        if lit.positive {
            w.pos = weight;
        } else {
            w.neg = weight;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, LiteralWeight)> + '_ {
        self.weights.iter().enumerate().map(|(i, w)| (i + 1, *w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnfFormula {
    pub var_count: usize,
    pub clauses: Vec<Clause>,
    pub weights: WeightFunction,
}

impl CnfFormula {
    /// Builds a formula with unit weights from signed DIMACS clauses.
    ///
    /// Panics if a literal is 0 or exceeds `var_count`.
    pub fn from_dimacs_clauses(var_count: usize, clauses: &[Vec<i64>]) -> Self {
        let clauses = clauses
            .iter()
            .enumerate()
            .map(|(i, lits)| {
                assert!(lits
                    .iter()
                    .all(|&l| l != 0 && l.unsigned_abs() as usize <= var_count));
                Clause::new(i + 1, lits.iter().map(|&l| Literal::from_dimacs(l)))
            })
            .collect();
        CnfFormula {
            var_count,
            clauses,
            weights: WeightFunction::unit(var_count),
        }
    }

    pub fn with_weights(mut self, weights: WeightFunction) -> Self {
        assert_eq!(weights.var_count(), self.var_count);
        self.weights = weights;
        self
    }

    pub fn clause(&self, id: usize) -> &Clause {
        &self.clauses[id - 1]
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    /// `vars(φ)`: variables occurring in at least one clause.
    pub fn occurring_vars(&self) -> BTreeSet<Var> {
        self.clauses.iter().flat_map(|c| c.literals.iter().map(|l| l.var)).collect()
    }

    /// Variables of `1..=m` that occur in no clause.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let occurring = self.occurring_vars();
        (1..=self.var_count).filter(|x| !occurring.contains(x)).collect()
    }

    pub fn max_clause_len(&self) -> usize {
        self.clauses.iter().map(|c| c.vars().len()).max().unwrap_or(0)
    }

    /// Canonical DIMACS text. Only weights differing from `1.0` are written.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.var_count, self.clauses.len());
        for (x, w) in self.weights.iter() {
            if w.pos != 1.0 {
                out.push_str(&format!("w {} {} 0\n", x, w.pos));
            }
            if w.neg != 1.0 {
                out.push_str(&format!("w -{} {} 0\n", x, w.neg));
            }
        }
        for c in &self.clauses {
            for l in &c.literals {
                out.push_str(&l.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

impl std::str::FromStr for CnfFormula {
    type Err = CnfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cnf(s)
    }
}

fn parse_problem_line(line_no: usize, line: &str) -> Result<(usize, usize), CnfError> {
    let bad = || CnfError::MalformedProblemLine { line: line_no };
    let mut toks = line.split_whitespace();
    if toks.next() != Some("p") || toks.next() != Some("cnf") {
        return Err(bad());
    }
    let m = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let l = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    if toks.next().is_some() {
        return Err(bad());
    }
    Ok((m, l))
}

fn parse_weight_line(
    line_no: usize,
    line: &str,
    var_count: usize,
) -> Result<(Literal, f64), CnfError> {
    let bad = |reason: &str| CnfError::MalformedWeight {
        line: line_no,
        reason: reason.to_string(),
    };
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.first() != Some(&"w") {
        return Err(bad("expected `w`"));
    }
    if toks.len() < 3 || toks.len() > 4 {
        return Err(bad("expected `w <lit> <weight> [0]`"));
    }
    let lit: i64 = toks[1]
        .parse()
        .map_err(|_| CnfError::MalformedToken {
            line: line_no,
            token: toks[1].to_string(),
        })?;
    if lit == 0 {
        return Err(bad("literal 0"));
    }
    if lit.unsigned_abs() as usize > var_count {
        return Err(CnfError::LiteralOutOfRange {
            line: line_no,
            literal: lit,
            var_count,
        });
    }
    let weight: f64 = toks[2]
        .parse()
        .map_err(|_| bad(&format!("non-numeric weight `{}`", toks[2])))?;
    if toks.len() == 4 && toks[3] != "0" {
        return Err(bad("trailing token other than 0"));
    }
    Ok((Literal::from_dimacs(lit), weight))
}

/// Collects the `w` lines of a document into a weight function over `var_count`
/// variables. Other lines are ignored; later lines override earlier ones.
pub fn parse_weights(text: &str, var_count: usize) -> Result<WeightFunction, CnfError> {
    let mut weights = WeightFunction::unit(var_count);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('w') {
            let (lit, w) = parse_weight_line(i + 1, line, var_count)?;
            weights.set_literal(lit, w);
        }
    }
    Ok(weights)
}

/// Parses a DIMACS CNF document with optional `w` lines.
pub fn parse_cnf(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(usize, usize)> = None;
    let mut weights = WeightFunction::unit(0);
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::DuplicateProblemLine { line: line_no });
            }
            let (m, l) = parse_problem_line(line_no, line)?;
            header = Some((m, l));
            weights = WeightFunction::unit(m);
            continue;
        }
        let Some((m, _)) = header else {
            return Err(CnfError::MissingProblemLine { line: line_no });
        };
        if line.starts_with('w') {
            let (lit, w) = parse_weight_line(line_no, line, m)?;
            weights.set_literal(lit, w);
            continue;
        }
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| CnfError::MalformedToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if lit == 0 {
                let id = clauses.len() + 1;
                clauses.push(Clause::new(id, pending.drain(..)));
            } else if lit.unsigned_abs() as usize > m {
                return Err(CnfError::LiteralOutOfRange {
                    line: line_no,
                    literal: lit,
                    var_count: m,
                });
            } else {
                pending.push(Literal::from_dimacs(lit));
            }
        }
    }

    let (var_count, expected) = header.ok_or(CnfError::NoProblemLine)?;
    if !pending.is_empty() {
        return Err(CnfError::UnterminatedClause { line: last_line });
    }
    if clauses.len() != expected {
        return Err(CnfError::ClauseCountMismatch {
            line: last_line,
            expected,
            found: clauses.len(),
        });
    }
    Ok(CnfFormula {
        var_count,
        clauses,
        weights,
    })
}

/// A simple undirected graph on vertices `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<BTreeSet<Var>>,
}

impl Graph {
    pub fn new(vertex_count: usize) -> Self {
        Graph {
            adjacency: vec![BTreeSet::new(); vertex_count],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Var> {
        1..=self.adjacency.len()
    }

    /// Adds `{u, v}`; self-loops and repeated edges are ignored.
    pub fn add_edge(&mut self, u: Var, v: Var) {
        if u != v {
            self.adjacency[u - 1].insert(v);
            self.adjacency[v - 1].insert(u);
        }
    }

    pub fn has_edge(&self, u: Var, v: Var) -> bool {
        self.adjacency[u - 1].contains(&v)
    }

    pub fn neighbors(&self, v: Var) -> &BTreeSet<Var> {
        &self.adjacency[v - 1]
    }

    pub fn degree(&self, v: Var) -> usize {
        self.adjacency[v - 1].len()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Var, Var)> + '_ {
        self.vertices()
            .flat_map(move |u| self.neighbors(u).range(u + 1..).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

/// Graph with one vertex per variable and an edge between any two variables
/// sharing a clause.
pub fn gaifman_graph(formula: &CnfFormula) -> Graph {
    let mut g = Graph::new(formula.var_count);
    for c in &formula.clauses {
        let vars: Vec<Var> = clause_vars(c).into_iter().collect();
        for (i, &u) in vars.iter().enumerate() {
            for &v in &vars[i + 1..] {
                g.add_edge(u, v);
            }
        }
    }
    g
}
