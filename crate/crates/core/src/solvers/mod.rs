//! Exact and budgeted solvers for the offloading MINLP.
//!
//! For a fixed binary decision the continuous subproblem has a closed-form
//! optimum ([`optimal_allocation`]), so every solver here searches over
//! decision vectors only and scores each one with that closed form. Ties are
//! broken toward the lexicographically smallest decision vector, which is
//! the smallest [`decision_index`](crate::system::decision_index).

mod alloc;
mod exhaustive;
mod grid;
mod sbb;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::OffloadSolution;

pub use alloc::{evaluate_decision, optimal_allocation};
pub use exhaustive::solve_exhaustive;
pub use grid::{solve_grid, GRID_POINT_LIMIT};
pub use sbb::{solve_sbb, solve_sbb_observed, SbbEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchingRule {
    /// Branch on the free vehicle whose local and optimistic offload costs are
    /// closest, i.e. the one the bound is least sure about.
    MostFractionalFirst,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbbConfig {
    pub max_nodes: usize,
    pub gap_tolerance: f64,
    pub branching_rule: BranchingRule,
}

impl Default for SbbConfig {
    fn default() -> Self {
        SbbConfig {
            max_nodes: 16,
            gap_tolerance: 0.0,
            branching_rule: BranchingRule::MostFractionalFirst,
        }
    }
}

impl SbbConfig {
    /// A node budget that can never bind for `n` vehicles (the full tree has
    /// `2^(n+1) - 1` nodes).
    pub fn unbudgeted(n: usize) -> Self {
        SbbConfig {
            max_nodes: 1usize << (n + 1),
            ..SbbConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::Config("sbb max_nodes must be at least 1".into()));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "sbb gap_tolerance must be non-negative, got {}",
                self.gap_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: OffloadSolution,
    pub nodes_explored: usize,
    pub proven_optimal: bool,
    /// Seconds.
    pub wall_time: f64,
}
