//! Structured message passing for discrete graphical models.
//!
//! The crate implements cluster-graph belief propagation and expectation
//! propagation where cluster potentials and messages are held in one of three
//! interchangeable representations: dense tables, zero-suppressed hash tables,
//! or reduced ordered algebraic decision diagrams. Determinism is injected
//! into the messages by restricting them to the support of a Monte Carlo
//! sample set, and context-specific independence by quantizing message values
//! into epsilon-bins. An exact bucket-tree oracle and a sweep harness close
//! the loop for accuracy measurements.

pub mod add;
pub mod cluster;
pub mod counters;
pub mod engine;
pub mod eval;
pub mod exact;
pub mod model;
pub mod quant;
pub mod sample;
pub mod sparse;

pub use add::{Add, AddManager, VarOrder};
pub use cluster::{ClusterGraph, JoinGraphParams};
pub use engine::{EngineConfig, ReprKind, Schedule};
pub use eval::{RunRecord, SweepAxis, SweepSpec};
pub use exact::ExactResult;
pub use model::{Assignment, DenseFactor, GraphicalModel, Variable};
pub use sample::{SampleSet, SamplerConfig};
pub use sparse::{SparseTable, SupportRelation};
