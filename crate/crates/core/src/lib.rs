//! Cycle-driven simulator of a directory-coherent multiprocessor whose
//! interconnect can prioritize messages issued inside critical sections.

pub mod coherence;
pub mod error;
pub mod explore;
pub mod harness;
pub mod memhier;
pub mod network;
pub mod topology;
pub mod workload;

pub use error::{Result, SimError};
pub use harness::{compute_speedup, emit_csv, run_simulation, run_sweep, Config, RunStats};
