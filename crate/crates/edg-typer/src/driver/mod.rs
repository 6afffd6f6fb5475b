//! The iterative pipeline: reorganize, refine, validate — repeated until
//! every slot is resolved, with checkpointing and run reporting.

mod checkpoint;
mod pipeline;
mod report;
mod state;

pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use pipeline::{run_iteration, run_pipeline, run_pipeline_from};
pub use report::{ProgressPoint, RunReport};
pub use state::{IterationTrace, PipelineState, STATE_SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Frontend(#[from] crate::frontend::FrontendError),
    #[error(transparent)]
    Validation(#[from] crate::validation::ValidationError),
    #[error(transparent)]
    Inference(#[from] crate::inference::InferenceError),
    #[error("checkpoint is corrupt: {0}")]
    CorruptCheckpoint(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
