//! Exact literal-weighted model counting with project-join trees.
//!
//! Planning builds a [`jointree::ProjectJoinTree`] either from variable-order
//! heuristics ([`planner::htb`]) or from a tree decomposition
//! ([`planner::td`]). Execution valuates the tree with algebraic decision
//! diagrams ([`add`]) or dense tensors ([`tensor`]). [`oracle`] holds two
//! independent reference counters.

pub mod add;
pub mod cli;
pub mod decomposition;
pub mod formula;
pub mod jointree;
pub mod oracle;
pub mod order;
pub mod pbf;
pub mod planner;
pub mod tensor;
