//! Configuration, the simulation loop, statistics and sweeps.

pub mod config;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use config::Config;
pub use sim::{run_simulation, Simulation};
pub use stats::{crit_ratio, RunStats, Violations};
pub use sweep::{compute_speedup, emit_csv, paper_preset, preset, run_sweep, write_csv, SweepRow};
