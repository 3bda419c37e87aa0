//! Library side of the `embeval` command: experiment files, the grid
//! runner and logging.

pub mod config;
pub mod logging;
pub mod pipeline;
