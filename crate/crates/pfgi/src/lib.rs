//! File formats and the experiment runner for `pfgi-core`.
//!
//! * [`pgm`]: 8-bit binary greymap IO and image quantization.
//! * [`config`]: the JSON experiment schema and its validation.
//! * [`output`]: atomic, checksummed output files.
//! * [`experiment`]: the `run` and `compare` pipelines and mask export.

pub mod config;
pub mod experiment;
pub mod output;
pub mod pgm;

pub use config::{ConfigError, Experiment, ExperimentConfig, OUTPUT_DIR_ENV};
pub use experiment::{compare_modes, export_mask, run_experiment, RunError, RunManifest};
