//! Domain propagation for systems of linear constraints over bounded,
//! possibly integral variables.
//!
//! Two engines compute the same limit point:
//!
//! * [`propagate_sequential`] scans constraints in order, applies every
//!   tightening immediately and re-marks affected constraints.
//! * [`propagate_parallel`] runs round-synchronous rounds over row blocks of
//!   the CSR matrix, merging bound candidates with monotone atomic updates.
//!   With the `parallel` feature (on by default) rounds run on a rayon pool;
//!   without it, or with one worker, blocks are processed in a plain loop.

pub mod error;
pub mod extended;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod par_engine;
pub mod propcore;
pub mod scalar;
pub mod seq_engine;
mod working;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use model::{
    ActivityRecord, BlockKind, ColumnMajorMatrix, EngineConfig, ProblemInstance, PropagationResult,
    RowBlockPartition, ScalarMode, SparseMatrix, Status, VariableBounds,
};
pub use par_engine::{partition_row_blocks, propagate_parallel};
pub use seq_engine::propagate_sequential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[serde(rename = "seq")]
    Sequential,
    #[serde(rename = "par")]
    Parallel,
}

impl Engine {
    pub fn run(&self, instance: &ProblemInstance, cfg: &EngineConfig) -> Result<PropagationResult> {
        match self {
            Engine::Sequential => propagate_sequential(instance, cfg),
            Engine::Parallel => propagate_parallel(instance, cfg),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Engine::Sequential => "seq",
            Engine::Parallel => "par",
        }
    }
}
