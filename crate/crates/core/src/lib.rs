//! Slotted-time queueing analysis of a two-VNF service chain spread over
//! two edge servers and one core server.
//!
//! The analytical side ([`pipeline`]) decomposes the six-queue network into
//! two tandem QBD subsystems, a birth-death queue and an unbounded core queue
//! solved by z-transform. [`simulator`] runs the full network slot by slot
//! and [`optimizer`] sweeps the routing probability.

pub mod birth_death;
pub mod dtmc;
pub mod infinite_chain;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod pipeline;
pub mod qbd;
pub mod simulator;

pub use model::{ConfigError, ParamError, QueueId, QueueRole, SystemMetrics, SystemParams, NUM_FINITE, NUM_QUEUES};
pub use optimizer::{Objective, OptimizeError, SweepResult};
pub use pipeline::{analyze, evaluate, Analysis, AnalysisError};
pub use simulator::{replicate, simulate, Replication, SimConfig, SimError, SimResult, RNG_ID};
