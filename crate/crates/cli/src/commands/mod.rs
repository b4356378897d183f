//! One module per subcommand; each loads its config, runs the workload,
//! writes artifacts, and finishes the directory with a manifest.

pub mod audit;
pub mod chaos;
pub mod compile;
pub mod grape_scan;
pub mod moments;
pub mod verify;
