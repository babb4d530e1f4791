//! Schedulability analysis and simulation for real-time task sets on a
//! partitioned multicore platform.
//!
//! - [`model`]: tasks, jobs, task sets, partitions.
//! - [`analysis`]: utilization, Liu–Layland bound, EDF bound, time-demand
//!   analysis, per-core reports.
//! - [`partition`]: manual assignment checks and first-fit decreasing.
//! - [`engine`]: tick-driven EDF / RM simulator with traces and statistics.

pub mod analysis;
pub mod engine;
pub mod model;
pub mod partition;

pub use analysis::{AnalysisReport, Policy, ResponseTime, Utilization, Verdict};
pub use engine::{SimConfig, SimStats, Trace, TraceEvent};
pub use model::{Job, Partition, TaskDef, TaskKind, TaskSet, TaskSpec};
