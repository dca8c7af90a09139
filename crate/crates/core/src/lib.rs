//! Distributed dictionary learning over time-varying directed networks.
//!
//! Each agent holds a column block of the data and its own copy of the
//! dictionary. Rounds alternate a local successive-convex-approximation step
//! with one consensus exchange of dictionaries and one exchange of
//! gradient-tracking variables.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the positivity checks

pub mod agent;
pub mod error;
pub mod exec;
pub mod graph;
pub mod image;
pub mod metrics;
pub mod problem;
pub mod protocol;
pub mod prox;
pub mod synthetic;

pub use agent::{DictionarySurrogate, Schedules, Variant};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{GraphSchedule, ScheduleKind, ScheduleSpec, WeightMatrix};
pub use metrics::{MetricsRow, MetricsTrace};
pub use problem::ProblemData;
pub use protocol::{run, RunConfig, Simulation};
pub use synthetic::{make_synthetic, SyntheticInstance, SyntheticSpec};
