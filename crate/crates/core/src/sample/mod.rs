//! Constraint-checked sampling, capture, dataset files and their checks.

pub mod checks;
pub mod config;
pub mod dataset;
pub mod generate;
pub mod pose;
pub mod stats;
pub mod verify;

pub use checks::{CheckRegistry, RejectionReason, SampleCheck};
pub use config::GenerationConfig;
pub use dataset::{generate_dataset, generate_dataset_with_progress, recheck_dataset, Dataset, Manifest};
pub use generate::{Attempt, CameraImages, Generator, RejectionStats, SampleLabel, SampleRecord};
pub use stats::{compute_stats, StatsReport};
pub use verify::{verify_dataset, VerifyOptions, VerifyReport};
