//! Tree decompositions: the data type, PACE 2017 `.td` text format (single
//! documents and streams of improving decompositions), the three-property
//! checker, and a greedy min-fill decomposer.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::formula::{Graph, Var};
use crate::order::min_fill_order;

/// Bags are numbered `1..=bags.len()`; `edges` connect bag ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    vertex_count: usize,
    bags: Vec<BTreeSet<Var>>,
    edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    pub fn new(vertex_count: usize, bags: Vec<BTreeSet<Var>>, edges: Vec<(usize, usize)>) -> Self {
        TreeDecomposition {
            vertex_count,
            bags,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn bags(&self) -> &[BTreeSet<Var>] {
        &self.bags
    }

    pub fn bag(&self, id: usize) -> &BTreeSet<Var> {
        &self.bags[id - 1]
    }

    pub fn bag_count(&self) -> usize {
        self.bags.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Largest bag size minus one (0 when every bag is empty).
    pub fn width(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).max().unwrap_or(0).saturating_sub(1)
    }

    /// Neighbor lists per bag, ascending. Out-of-range endpoints are skipped.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.bags.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            if (1..=n).contains(&a) && (1..=n).contains(&b) {
                adj[a - 1].push(b);
                adj[b - 1].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Whether the edges form a single tree spanning all bags.
    pub fn is_tree(&self) -> bool {
        self.tree_problem().is_none()
    }

    fn tree_problem(&self) -> Option<String> {
        let n = self.bags.len();
        if let Some(&(a, b)) = self
            .edges
            .iter()
            .find(|&&(a, b)| a == 0 || b == 0 || a > n || b > n || a == b)
        {
            return Some(format!("edge {a}-{b} is not between two distinct bags"));
        }
        if n == 0 {
            return (!self.edges.is_empty()).then(|| "edges without bags".to_string());
        }
        if self.edges.len() != n - 1 {
            return Some(format!("{} edges for {} bags", self.edges.len(), n));
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([1usize]);
        seen[0] = true;
        while let Some(b) = queue.pop_front() {
            for &c in &adj[b - 1] {
                if !seen[c - 1] {
                    seen[c - 1] = true;
                    queue.push_back(c);
                }
            }
        }
        seen.iter()
            .position(|s| !s)
            .map(|i| format!("bag {} is disconnected", i + 1))
    }

    /// Parent of every bag when rooted at `root` (`0` for the root itself),
    /// plus the bags in breadth-first order. Requires a tree.
    pub fn rooted(&self, root: usize) -> (Vec<usize>, Vec<usize>) {
        let adj = self.adjacency();
        let mut parent = vec![0; self.bags.len()];
        let mut order = Vec::with_capacity(self.bags.len());
        let mut seen = vec![false; self.bags.len()];
        let mut queue = VecDeque::from([root]);
        seen[root - 1] = true;
        while let Some(b) = queue.pop_front() {
            order.push(b);
            for &c in &adj[b - 1] {
                if !seen[c - 1] {
                    seen[c - 1] = true;
                    parent[c - 1] = b;
                    queue.push_back(c);
                }
            }
        }
        (parent, order)
    }

    /// PACE `.td` text.
    pub fn to_pace(&self) -> String {
        let max_bag = self.bags.iter().map(BTreeSet::len).max().unwrap_or(0);
        let mut out = format!("s td {} {} {}\n", self.bags.len(), max_bag, self.vertex_count);
        for (i, bag) in self.bags.iter().enumerate() {
            out.push_str(&format!("b {}", i + 1));
            for v in bag {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TdError {
    #[error("no `s td` solution line found")]
    NoSolutionLine,
    #[error("line {line}: data before the solution line")]
    MissingSolutionLine { line: usize },
    #[error("line {line}: second solution line in a single decomposition")]
    DuplicateSolutionLine { line: usize },
    #[error("line {line}: malformed solution line")]
    MalformedSolutionLine { line: usize },
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: bag {bag} is outside 1..={bag_count}")]
    BagOutOfRange {
        line: usize,
        bag: usize,
        bag_count: usize,
    },
    #[error("line {line}: bag {bag} defined twice")]
    DuplicateBag { line: usize, bag: usize },
    #[error("bag {bag} is never defined")]
    MissingBag { bag: usize },
    #[error("line {line}: vertex {vertex} is outside 1..={vertex_count}")]
    VertexOutOfRange {
        line: usize,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("bags do not form a tree: {0}")]
    NotATree(String),
    #[error("read error: {0}")]
    Io(String),
}

struct PaceBuilder {
    line: usize,
    bag_count: usize,
    vertex_count: usize,
    bags: Vec<Option<BTreeSet<Var>>>,
    edges: Vec<(usize, usize)>,
    bag_lines: usize,
}

impl PaceBuilder {
    fn start(line_no: usize, line: &str) -> Result<Self, TdError> {
        let bad = || TdError::MalformedSolutionLine { line: line_no };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "s" || toks[1] != "td" {
            return Err(bad());
        }
        let nums: Vec<usize> = toks[2..]
            .iter()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        // nums[1] is the declared width + 1; it is recomputed from the bags.
        Ok(PaceBuilder {
            line: line_no,
            bag_count: nums[0],
            vertex_count: nums[2],
            bags: vec![None; nums[0]],
            edges: Vec::new(),
            bag_lines: 0,
        })
    }

    fn complete(&self) -> bool {
        self.bag_lines == self.bag_count && self.edges.len() + 1 >= self.bag_count
    }

    fn feed(&mut self, line_no: usize, line: &str) -> Result<(), TdError> {
        let parse = |tok: &str| -> Result<usize, TdError> {
            tok.parse().map_err(|_| TdError::MalformedToken {
                line: line_no,
                token: tok.to_string(),
            })
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let check_bag = |bag: usize| {
            if bag == 0 || bag > self.bag_count {
                Err(TdError::BagOutOfRange {
                    line: line_no,
                    bag,
                    bag_count: self.bag_count,
                })
            } else {
                Ok(bag)
            }
        };
        if toks[0] == "b" {
            let id = check_bag(parse(toks.get(1).copied().unwrap_or(""))?)?;
            let mut bag = BTreeSet::new();
            for t in &toks[2..] {
                let v = parse(t)?;
                if v == 0 || v > self.vertex_count {
                    return Err(TdError::VertexOutOfRange {
                        line: line_no,
                        vertex: v,
                        vertex_count: self.vertex_count,
                    });
                }
                bag.insert(v);
            }
            if self.bags[id - 1].replace(bag).is_some() {
                return Err(TdError::DuplicateBag { line: line_no, bag: id });
            }
            self.bag_lines += 1;
        } else {
            if toks.len() != 2 {
                return Err(TdError::MalformedToken {
                    line: line_no,
                    token: line.to_string(),
                });
            }
            let a = check_bag(parse(toks[0])?)?;
            let b = check_bag(parse(toks[1])?)?;
            self.edges.push((a, b));
        }
        Ok(())
    }

    fn finish(self) -> Result<TreeDecomposition, TdError> {
        let _ = self.line;
        let mut bags = Vec::with_capacity(self.bag_count);
        for (i, bag) in self.bags.into_iter().enumerate() {
            bags.push(bag.ok_or(TdError::MissingBag { bag: i + 1 })?);
        }
        let td = TreeDecomposition::new(self.vertex_count, bags, self.edges);
        if let Some(problem) = td.tree_problem() {
            return Err(TdError::NotATree(problem));
        }
        Ok(td)
    }
}

fn is_skippable(line: &str) -> bool {
    line.is_empty() || line.starts_with('c')
}

/// Parses one PACE decomposition.
pub fn parse_td(text: &str) -> Result<TreeDecomposition, TdError> {
    let mut builder: Option<PaceBuilder> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if is_skippable(line) {
            continue;
        }
        if line.starts_with('s') {
            if builder.is_some() {
                return Err(TdError::DuplicateSolutionLine { line: line_no });
            }
            builder = Some(PaceBuilder::start(line_no, line)?);
            continue;
        }
        match builder.as_mut() {
            Some(b) => b.feed(line_no, line)?,
            None => return Err(TdError::MissingSolutionLine { line: line_no }),
        }
    }
    builder.ok_or(TdError::NoSolutionLine)?.finish()
}

/// Reads successive decompositions from a stream. Each `s td` line starts a
/// new decomposition; one is yielded as soon as all its bags and edges have
/// arrived, so a live producer is consumed in arrival order.
pub struct TdStreamReader<R> {
    reader: R,
    line_no: usize,
    current: Option<PaceBuilder>,
    done: bool,
}

impl<R: BufRead> TdStreamReader<R> {
    pub fn new(reader: R) -> Self {
        TdStreamReader {
            reader,
            line_no: 0,
            current: None,
            done: false,
        }
    }
}

impl<R: BufRead> Iterator for TdStreamReader<R> {
    type Item = Result<TreeDecomposition, TdError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = String::new();
        loop {
            buf.clear();
            let read = match self.reader.read_line(&mut buf) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(TdError::Io(e.to_string())));
                }
            };
            if read == 0 {
                self.done = true;
                return self.current.take().map(PaceBuilder::finish);
            }
            self.line_no += 1;
            let line = buf.trim();
            if is_skippable(line) {
                continue;
            }
            if line.starts_with('s') {
                let next = match PaceBuilder::start(self.line_no, line) {
                    Ok(b) => b,
                    Err(e) => return Some(Err(e)),
                };
                let previous = self.current.replace(next);
                if let Some(prev) = previous {
                    // superseded before completing
                    return Some(prev.finish());
                }
                if self.current.as_ref().is_some_and(PaceBuilder::complete) {
                    return self.current.take().map(PaceBuilder::finish);
                }
                continue;
            }
            let Some(builder) = self.current.as_mut() else {
                return Some(Err(TdError::MissingSolutionLine { line: self.line_no }));
            };
            if let Err(e) = builder.feed(self.line_no, line) {
                self.current = None;
                return Some(Err(e));
            }
            if builder.complete() {
                return self.current.take().map(PaceBuilder::finish);
            }
        }
    }
}

/// All decompositions in a stream document.
pub fn parse_td_stream(text: &str) -> Vec<Result<TreeDecomposition, TdError>> {
    TdStreamReader::new(text.as_bytes()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TdViolation {
    NotATree(String),
    VertexOutOfRange { bag: usize, vertex: Var },
    UncoveredVertex { vertex: Var },
    UncoveredEdge { u: Var, v: Var },
    DisconnectedOccurrences { vertex: Var },
}

impl fmt::Display for TdViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TdViolation::NotATree(why) => write!(f, "bags do not form a tree: {why}"),
            TdViolation::VertexOutOfRange { bag, vertex } => {
                write!(f, "bag {bag} holds vertex {vertex}, which is not in the graph")
            }
            TdViolation::UncoveredVertex { vertex } => {
                write!(f, "vertex coverage violated: vertex {vertex} is in no bag")
            }
            TdViolation::UncoveredEdge { u, v } => {
                write!(f, "edge coverage violated: edge {u}-{v} is in no bag")
            }
            TdViolation::DisconnectedOccurrences { vertex } => write!(
                f,
                "running intersection violated: bags holding vertex {vertex} are not connected"
            ),
        }
    }
}

/// Checks vertex coverage, edge coverage and running intersection against `g`.
pub fn td_validate(td: &TreeDecomposition, g: &Graph) -> Result<(), Vec<TdViolation>> {
    let mut violations = Vec::new();
    let n = g.vertex_count();
    if let Some(problem) = td.tree_problem() {
        violations.push(TdViolation::NotATree(problem));
    }
    for (i, bag) in td.bags.iter().enumerate() {
        for &v in bag {
            if v == 0 || v > n {
                violations.push(TdViolation::VertexOutOfRange { bag: i + 1, vertex: v });
            }
        }
    }
    let mut count = vec![0usize; n + 1];
    for bag in &td.bags {
        for &v in bag.iter().filter(|&&v| v >= 1 && v <= n) {
            count[v] += 1;
        }
    }
    for (v, _) in count.iter().enumerate().skip(1).filter(|(_, &c)| c == 0) {
        violations.push(TdViolation::UncoveredVertex { vertex: v });
    }
    for (u, v) in g.edges() {
        if !td.bags.iter().any(|b| b.contains(&u) && b.contains(&v)) {
            violations.push(TdViolation::UncoveredEdge { u, v });
        }
    }
    if td.is_tree() {
        // In a tree, the bags holding v induce a forest; it is connected iff
        // it has exactly (#bags − 1) edges.
        let mut inner_edges = vec![0usize; n + 1];
        for &(a, b) in &td.edges {
            for &v in td.bag(a).intersection(td.bag(b)) {
                if v >= 1 && v <= n {
                    inner_edges[v] += 1;
                }
            }
        }
        for v in 1..=n {
            if count[v] > 0 && inner_edges[v] + 1 != count[v] {
                violations.push(TdViolation::DisconnectedOccurrences { vertex: v });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Decomposition from a greedy min-fill elimination order. Eliminating `v`
/// yields the bag `{v} ∪ N(v)`; that bag hangs below the bag of the
/// earliest-eliminated remaining neighbor, or the next bag when `v` has none.
pub fn build_td_minfill(g: &Graph) -> TreeDecomposition {
    let order = min_fill_order(g);
    td_from_elimination_order(g, &order)
}

/// Decomposition induced by eliminating vertices in `order`.
pub fn td_from_elimination_order(g: &Graph, order: &[Var]) -> TreeDecomposition {
    let n = g.vertex_count();
    let mut position = vec![0usize; n + 1];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut adj: Vec<BTreeSet<Var>> = (0..=n)
        .map(|v| if v == 0 { BTreeSet::new() } else { g.neighbors(v).clone() })
        .collect();
    let mut bags = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        let nbrs: Vec<Var> = adj[v].iter().copied().collect();
        let mut bag: BTreeSet<Var> = nbrs.iter().copied().collect();
        bag.insert(v);
        bags.push(bag);
        for (k, &a) in nbrs.iter().enumerate() {
            adj[a].remove(&v);
            for &b in &nbrs[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj[v].clear();
        let parent = nbrs.iter().map(|&u| position[u]).min();
        match parent {
            Some(p) => edges.push((i + 1, p + 1)),
            None if i + 1 < order.len() => edges.push((i + 1, i + 2)),
            None => {}
        }
    }
    TreeDecomposition::new(n, bags, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{gaifman_graph, parse_cnf};

    fn bags(sets: &[&[Var]]) -> Vec<BTreeSet<Var>> {
        sets.iter().map(|s| s.iter().copied().collect()).collect()
    }

    fn triangle() -> Graph {
        let mut g = Graph::new(3);
        g.add_edge(1, 2);
        g.add_edge(2, 3);
        g.add_edge(1, 3);
        g
    }

    #[test]
    fn parses_single_bag() {
        let td = parse_td("s td 1 2 2\nb 1 1 2").unwrap();
        assert_eq!(td.bags(), bags(&[&[1, 2]]).as_slice());
        assert_eq!(td.width(), 1);
    }

    #[test]
    fn parses_path() {
        let text = "c path\ns td 4 2 5\nb 1 1 3\nb 2 3 4\nb 3 2\nb 4 5\n1 2\n2 3\n3 4\n";
        let td = parse_td(text).unwrap();
        assert_eq!(td.width(), 1);
        assert_eq!(parse_td(&td.to_pace()).unwrap(), td);
    }

    #[test]
    fn declared_width_is_ignored() {
        let td = parse_td("s td 1 9 2\nb 1 1 2").unwrap();
        assert_eq!(td.width(), 1);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_td("s td 1 1 1\nb 0 1"),
            Err(TdError::BagOutOfRange { bag: 0, .. })
        ));
        assert!(matches!(
            parse_td("s td 2 1 2\nb 1 1\nb 1 2\n1 2"),
            Err(TdError::DuplicateBag { bag: 1, .. })
        ));
        assert!(matches!(
            parse_td("s td 3 1 3\nb 1 1\nb 2 2\nb 3 3\n1 2"),
            Err(TdError::NotATree(_))
        ));
        assert!(matches!(
            parse_td("s td 3 1 3\nb 1 1\nb 2 2\nb 3 3\n1 2\n2 1"),
            Err(TdError::NotATree(_))
        ));
        assert!(matches!(parse_td("s td 2 1 2\nb 1 1\n"), Err(TdError::MissingBag { bag: 2 })));
        assert!(matches!(
            parse_td("s td 1 1 2\nb 1 3"),
            Err(TdError::VertexOutOfRange { vertex: 3, .. })
        ));
        assert!(matches!(parse_td("b 1 1"), Err(TdError::MissingSolutionLine { line: 1 })));
        assert!(matches!(parse_td(""), Err(TdError::NoSolutionLine)));
    }

    #[test]
    fn stream_yields_in_order() {
        let text = "s td 1 3 3\nb 1 1 2 3\nc better\ns td 2 2 3\nb 1 1 2\nb 2 2 3\n1 2\n";
        let tds: Vec<_> = parse_td_stream(text).into_iter().map(Result::unwrap).collect();
        assert_eq!(tds.len(), 2);
        assert_eq!(tds[0].width(), 2);
        assert_eq!(tds[1].width(), 1);
    }

    #[test]
    fn stream_reports_incomplete_decomposition() {
        let text = "s td 2 2 3\nb 1 1 2\ns td 1 3 3\nb 1 1 2 3\n";
        let items = parse_td_stream(text);
        assert!(matches!(items[0], Err(TdError::MissingBag { bag: 2 })));
        assert!(items[1].is_ok());
    }

    #[test]
    fn validator_examples() {
        let f = parse_cnf(include_str!("../tests/data/sample.cnf")).unwrap();
        let g = gaifman_graph(&f);
        let path = parse_td("s td 4 2 5\nb 1 1 3\nb 2 3 4\nb 3 2\nb 4 5\n1 2\n2 3\n3 4\n").unwrap();
        assert_eq!(td_validate(&path, &g), Ok(()));

        let no5 = parse_td("s td 3 2 5\nb 1 1 3\nb 2 3 4\nb 3 2\n1 2\n2 3\n").unwrap();
        assert_eq!(td_validate(&no5, &g), Err(vec![TdViolation::UncoveredVertex { vertex: 5 }]));

        let td = TreeDecomposition::new(3, bags(&[&[1, 2], &[2, 3]]), vec![(1, 2)]);
        assert_eq!(td_validate(&td, &triangle()), Err(vec![TdViolation::UncoveredEdge { u: 1, v: 3 }]));

        let split = TreeDecomposition::new(3, bags(&[&[1, 2], &[3], &[1, 3]]), vec![(1, 2), (2, 3)]);
        let errs = td_validate(&split, &{
            let mut g = Graph::new(3);
            g.add_edge(1, 2);
            g
        })
        .unwrap_err();
        assert_eq!(errs, vec![TdViolation::DisconnectedOccurrences { vertex: 1 }]);
    }

    #[test]
    fn minfill_widths() {
        let f = parse_cnf(include_str!("../tests/data/sample.cnf")).unwrap();
        let g = gaifman_graph(&f);
        let td = build_td_minfill(&g);
        assert_eq!(td.width(), 1);
        assert_eq!(td_validate(&td, &g), Ok(()));

        let td = build_td_minfill(&triangle());
        assert_eq!(td.width(), 2);
        assert_eq!(td_validate(&td, &triangle()), Ok(()));

        let empty = Graph::new(3);
        let td = build_td_minfill(&empty);
        assert_eq!(td.width(), 0);
        assert_eq!(td_validate(&td, &empty), Ok(()));

        let mut k5 = Graph::new(5);
        for u in 1..=5 {
            for v in u + 1..=5 {
                k5.add_edge(u, v);
            }
        }
        assert_eq!(build_td_minfill(&k5).width(), 4);
    }
}
