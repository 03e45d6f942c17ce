//! Config files, CSV/VTK/MatrixMarket writers and the run drivers behind
//! the `divdg` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Mode, RunConfig};
pub use run::{RunError, WallClock};
