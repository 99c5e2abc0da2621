//! Product-perspective fault diagnosis for rotary indexing machines.
//!
//! A rotary indexing machine rotates products past fixed tool stations; from
//! the product's point of view the path is a linear sequence of production
//! steps. This crate models that process, checks measured sensor traces
//! against expected values by interval satisfiability, identifies root
//! causes of Not-OK products with a step-wise and a multi-step algorithm,
//! and ships a deterministic fault-injecting simulator of the reference
//! 8-station machine to generate traces.
//!
//! - [`process`]: the process description (steps, timings, sensor mappings)
//! - [`config`]: the JSON document format, loading and validation
//! - [`constraint`]: per-step interval formulas and `check_sat`
//! - [`diagnosis`]: the step-wise and multi-step diagnosis algorithms
//! - [`sim`]: the two machine models and fault injection
//! - [`trace`]: per-product traces and their JSON-lines files
//! - [`batch`]: data-parallel runs over products, seeds and scenarios

pub mod batch;
pub mod config;
pub mod constraint;
pub mod diagnosis;
pub mod process;
pub mod reference;
pub mod sim;
pub mod trace;
pub mod validate;

pub use config::{load_machine_definition, load_process_description, MachineDefinition};
pub use diagnosis::{diagnose_multistep, diagnose_stepwise, render_report, Algorithm, DiagnosisReport};
pub use sim::{simulate_machine, simulate_product_run, FaultKind, FaultSpec, MachineConfig};
pub use trace::{read_trace, write_trace, Trace, Verdict};
