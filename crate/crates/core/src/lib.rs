//! Joint offloading and edge-compute allocation for connected vehicles:
//! system cost model, exact and budgeted solvers, a multi-task network that
//! predicts solutions in one forward pass, split-inference cost analysis and
//! the experiment harness.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod instance_gen;
pub mod mtl;
pub mod solvers;
pub mod split;
pub mod system;

pub use error::{Error, Result};
pub use system::{
    decision_index, decisions_from_index, local_cost, offload_cost, total_cost, uplink_rate,
    CostWeights, EdgeParams, OffloadInstance, OffloadSolution, VehicleParams,
};
