//! Learned robust PCA.
//!
//! Recovers `Y = X⋆ + S⋆` with `X⋆` low rank and `S⋆` sparse by
//! soft-thresholded scaled gradient descent on the factors of `X⋆`, with
//! per-iteration thresholds and step sizes either learned from synthetic
//! examples, taken from the ground-truth oracle, or fixed.
//!
//! ```
//! use lrpca::solver::{solve, ScheduleSource, StopRule};
//! use lrpca::synth::gen_instance;
//!
//! let inst = gen_instance(60, 60, 2, 0.05, 7).unwrap();
//! let out = solve(
//!     &inst.y,
//!     2,
//!     &ScheduleSource::Oracle { eta: 0.5 },
//!     &StopRule::residual(1e-8, 100),
//!     Some(&inst.x_star),
//!     0,
//! )
//! .unwrap();
//! assert!(out.trace.last().unwrap().rel_err.unwrap() < 1e-6);
//! ```

pub mod error;
pub mod learn;
pub mod mat;
pub mod media;
pub mod ops;
pub mod par;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use learn::ParamSchedule;
pub use mat::DenseMatrix;
