//! Seeded ensembles and parameter sweeps.
//!
//! Realization `r` of an experiment uses the seed `split_seed(master_seed, r)`
//! at every sweep point, so neighbouring points share layouts and fading
//! wherever the swept parameter allows. Realizations run on the rayon pool
//! and are reduced in order, which keeps the CSV byte-identical across runs
//! and thread counts.

mod config;
mod instance;
mod sweep;

pub use config::{Beamformer, ExperimentConfig, RtdConfig, Sweep, SweepParameter};
pub use instance::{build_instance, generate_instance_topology, instance_on, schedule, Instance, Scheduler, SystemConfig};
pub use sweep::{run_mse_sweep, run_se_sweep, run_tightness, solve_one, SeSweep, Summary, SweepRow, SweepTable, TraceRow};
