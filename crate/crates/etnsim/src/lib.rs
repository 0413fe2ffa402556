//! Ensemble runner, file formats and command line for the `etn-core`
//! kernels.
//!
//! A run is described by an [`ExperimentConfig`] (strict JSON). Trajectory
//! `i` draws from a ChaCha8 stream seeded with
//! `trajectory_seed(master_seed, i)`, so outputs do not depend on the number
//! of workers. Each run directory holds `aggregate.csv`
//! (`t,observable,mean,stderr,n`), optional `trajectories.csv` and
//! `spacetime/*.pgm`, and one line of `manifest.jsonl`.

pub mod analysis;
pub mod config;
pub mod formats;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig, Model, Observable, Protocol};
pub use runner::{aggregate, run_experiment, run_one, simulate, RunError, RunManifest, Trajectory};
