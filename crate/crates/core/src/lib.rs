//! Joint parallelism selection, GPU allocation and scheduling for
//! multi-model training workloads.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the workload
//! generator and the command line live in the `jointplan` crate.
//!
//! The pipeline is:
//!
//! 1. [`workload`]: validate jobs, cluster and registered techniques.
//! 2. [`profile`]: build a [`ProfileTable`] of per-batch latencies through an
//!    [`Executor`] (the analytic [`SyntheticExecutor`] or ingested measurements).
//! 3. [`planners`]: turn the table into a [`Plan`], either through the
//!    time-indexed program in [`milp`] or one of the baseline heuristics.
//! 4. [`sim`]: execute a plan on the modeled cluster, optionally re-planning
//!    on a fixed interval with checkpoint costs.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod milp;
pub mod plan;
pub mod planners;
pub mod problem;
pub mod profile;
pub mod rng;
pub mod sim;
#[cfg(test)]
mod test_support;
pub mod timeline;
pub mod workload;

pub use plan::{Plan, PlanEntry, PlanError};
pub use planners::{PlannerKind, PlannerOptions};
pub use problem::{JobWork, Placement, Problem};
pub use profile::{
    build_profile_table, synthetic_latency, Executor, Latency, LatencyGrid, ProfileError, ProfileTable, Provenance,
    SyntheticExecutor,
};
pub use sim::{simulate, SimError, SimOptions, SimReport};
pub use workload::{
    feasible_configs, memory_feasible, validate_workload, Archetype, ClusterSpec, Config, JobSpec, NodeSpec,
    TechniqueSpec, Workload, WorkloadError,
};

/// Absolute slack, in seconds, used when comparing simulated instants.
pub const TIME_EPS: f64 = 1e-6;
