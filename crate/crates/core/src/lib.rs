//! Deadline-aware model selection and scheduling for inference serving.
//!
//! Requests for several applications arrive during a scheduling window.
//! Each application registers model variants that trade accuracy for
//! latency, and every request carries a deadline. The schedulers pick an
//! execution order and a model per request to maximize expected accuracy
//! discounted by a deadline penalty. A cheap neighbor-based estimator looks
//! at each request's data to sharpen the accuracy estimates, and can answer
//! a request outright when that is the better use of the time budget.
//!
//! - [`domain`], [`schedule`]: problem types, start times, validation and
//!   planned utility.
//! - [`scoring`]: penalties, utility, θ-weighted accuracy and scoring rules.
//! - [`sneakpeek`]: Dirichlet priors, neighbor evidence, posterior estimates.
//! - [`scheduling`]: FCFS/EDF/priority, locally-optimal and grouped
//!   schedulers, short-circuit variants, multiple workers.
//! - [`oracle`]: exhaustive solvers.
//! - [`sim`], [`workload`]: simulator and synthetic scenarios.
//! - [`cli`]: the experiment runner behind the `peeksched` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod error;
pub mod oracle;
pub mod schedule;
pub mod scheduling;
pub mod scoring;
pub mod sim;
pub mod sneakpeek;
pub mod workload;

pub use domain::{
    AppId, AppSet, Application, ClassLabel, LatencyMode, ModelProfile, ModelRef, Problem, Request, RequestId,
    Schedule, ScheduleEntry, ThetaMap, WorkerPool,
};
pub use error::{Error, Result, Violation};
pub use scheduling::{SchedulerSpec, SchedulingContext};
pub use scoring::{PenaltyKind, PenaltySpec, ThetaVector};
