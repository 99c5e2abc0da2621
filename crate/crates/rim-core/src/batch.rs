//! Batch runs over independent products, seeds and scenarios.
//!
//! Every diagnosis run is a pure per-product computation and every simulated
//! run is a pure function of (config, fault, seed), so batches parallelize
//! trivially. With the `parallel` feature (on by default) the batch entry
//! points fan out over rayon; without it they fall back to the sequential
//! versions. Output order matches input order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::MachineDefinition;
use crate::diagnosis::{diagnose_multistep, diagnose_stepwise, Algorithm, DiagnosisError, DiagnosisReport};
use crate::process::StationIndex;
use crate::sim::{simulate_product_run, FaultSpec, MachineConfig, SimError};
use crate::trace::Trace;

fn diagnose_one(
    definition: &MachineDefinition,
    trace: &Trace,
    trigger: StationIndex,
    algorithm: Algorithm,
) -> Result<DiagnosisReport, DiagnosisError> {
    match algorithm {
        Algorithm::StepWise => {
            diagnose_stepwise(&definition.process, &definition.expected, trace, trigger)
        }
        Algorithm::MultiStep => {
            diagnose_multistep(&definition.process, &definition.expected, trace, trigger)
        }
    }
}

pub fn diagnose_batch_sequential(
    definition: &MachineDefinition,
    traces: &[Trace],
    trigger: StationIndex,
    algorithm: Algorithm,
) -> Result<Vec<DiagnosisReport>, DiagnosisError> {
    traces
        .iter()
        .map(|trace| diagnose_one(definition, trace, trigger, algorithm))
        .collect()
}

/// Diagnoses every trace; parallel when the `parallel` feature is enabled.
pub fn diagnose_batch(
    definition: &MachineDefinition,
    traces: &[Trace],
    trigger: StationIndex,
    algorithm: Algorithm,
) -> Result<Vec<DiagnosisReport>, DiagnosisError> {
    #[cfg(feature = "parallel")]
    {
        traces
            .par_iter()
            .map(|trace| diagnose_one(definition, trace, trigger, algorithm))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        diagnose_batch_sequential(definition, traces, trigger, algorithm)
    }
}

pub fn simulate_batch_sequential(
    cfg: &MachineConfig,
    runs: &[(FaultSpec, u64)],
) -> Result<Vec<Trace>, SimError> {
    runs.iter()
        .map(|(spec, seed)| simulate_product_run(cfg, spec, *seed))
        .collect()
}

/// Simulates every (fault, seed) run; parallel when the `parallel` feature
/// is enabled.
pub fn simulate_batch(cfg: &MachineConfig, runs: &[(FaultSpec, u64)]) -> Result<Vec<Trace>, SimError> {
    #[cfg(feature = "parallel")]
    {
        runs.par_iter()
            .map(|(spec, seed)| simulate_product_run(cfg, spec, *seed))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_batch_sequential(cfg, runs)
    }
}
