//! Experiment drivers, output bookkeeping and run manifests for the `pmp`
//! command-line tool.

pub mod dataset;
pub mod experiments;
pub mod manifest;
pub mod output;

pub use experiments::Experiment;
pub use manifest::{replay, run_recorded, Manifest};
pub use output::Output;

use pmp_core::Error;

/// Process exit code for an error: 2 for capacity, 3 for validation, 1
/// otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Capacity { .. } => 2,
        Error::Validation { .. } => 3,
        _ => 1,
    }
}
