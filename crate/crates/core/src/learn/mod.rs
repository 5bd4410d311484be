//! Learning the per-iteration thresholds and step sizes.
//!
//! Training has two phases: layer-wise SGD over the first `K` unrolled
//! iterations, then a grid search over the recurrent tail factors `(β, φ)`
//! that extend the schedule past `K`.

mod schedule;
mod train;

pub use schedule::ParamSchedule;
pub use train::{
    grid_search_tail, layerwise_train, stage_gradient, stage_loss, train_frmnn, FrmnnOutcome, GridOutcome,
    GridPoint, GridSpec, StepLog, TrainConfig, Trained, WarmStart,
};
