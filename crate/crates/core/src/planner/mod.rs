//! Planning: building project-join trees.

pub mod htb;
pub mod td;

pub use htb::{build_tree, build_tree_traced, ClauseRank, Clustering, HtbConfig, HtbError, HtbTrace};
pub use td::{best_of_stream, td_to_pjt, td_to_pjt_traced, CostModel, StreamOutcome, TdPlanError};
