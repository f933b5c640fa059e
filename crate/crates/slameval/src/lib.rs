//! Trajectory evaluation and robustness benchmarking for SLAM systems.
//!
//! The toolkit aligns estimated trajectories to ground truth (Umeyama),
//! computes ATE / RPE / CRT both in batch and continuously as poses arrive,
//! drives systems under test through lockstep frame delivery (single-sequence,
//! repeated, and lifelong multi-sequence experiments), and serializes
//! length-normalized robustness reports.

pub mod alignment;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod report;

pub use error::{Error, Result};
