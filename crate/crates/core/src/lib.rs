//! Online busy-time scheduling of unit-length jobs with release times and deadlines on
//! machine types of different capacity and cost.
//!
//! Jobs are revealed over time by an [`engine::InstanceSource`]; an
//! [`engine::OnlineAlgorithm`] decides which machines to open whenever a waiting job reaches
//! its deadline, and the engine fills them earliest deadline first. [`oracle`] computes exact
//! optima for small instances and [`analysis`] checks the lower-bound certificates produced
//! by the main algorithm.

pub mod algorithms;
pub mod analysis;
pub mod engine;
pub mod generators;
pub mod instance;
pub mod oracle;
pub mod rational;
pub mod schedule;

/// Job identifier, unique within an instance.
pub type JobId = u64;

/// Integer time slot.
pub type Time = i64;

pub use algorithms::{get_optimal_batches, AlgorithmKind, BatchPlanner, Greedy, MainAlgorithm};
pub use analysis::{check_valid_assignment, credit_audit, overlap_depth, sigma, IntervalAssignment};
pub use engine::{run_online, DispatchTrace, OnlineAlgorithm, RunOutcome, StaticSource};
pub use instance::{Instance, JobSpec, MachineType, NormalizedLadder, TypeMenu};
pub use oracle::{exact_opt, OracleLimits};
pub use rational::Rational;
pub use schedule::{validate_schedule, Batch, Schedule, TypeSystem};
