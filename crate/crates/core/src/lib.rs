//! Simulation and numerics for three-party detectable broadcast built on
//! continuous-variable Gaussian entanglement.
//!
//! - [`gauss`]: Gaussian states, the tripartite family and exact outcome tables.
//! - [`primitive`]: W-flip sampling, trit extraction and feasibility.
//! - [`proto`]: the three-phase protocol over simulated channels.
//! - [`adversary`]: traitor strategies.
//! - [`experiment`]: seeded batches for power and safety.
//! - [`stats`]: the hypothesis tests behind every flag.
//! - [`validation`]: oracle checks of the tables and samplers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod experiment;
pub mod gauss;
pub mod primitive;
pub mod proto;
pub mod stats;
pub mod validation;

pub use adversary::{Adversary, FabricationPolicy, ShiftTiming, Strategy};
pub use error::{Error, Result};
pub use gauss::{GaussianState, MeasurementModel, OutcomeTriple, ProbabilityTable, TripartiteParams};
pub use primitive::{Bit, Trit};
pub use proto::{check_detectable_broadcast, full_run, Consistency, Decision, PlayerId, RunConfig, RunVerdict, SamplingMode};
