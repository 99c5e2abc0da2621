//! The evaluation harness: all five fault scenarios through both algorithms,
//! each diagnosis judged against the injected fault's ground-truth cause.

use anyhow::{anyhow, Result};
use serde::Serialize;

use rim_core::batch::{diagnose_batch, simulate_batch};
use rim_core::diagnosis::{Algorithm, CandidateCause, FinalDiagnosis};
use rim_core::process::SensorId;
use rim_core::sim::fault::{JACK_SENSOR, SEAT_SENSOR};
use rim_core::sim::{FaultKind, FaultSpec, MachineConfig};
use rim_core::MachineDefinition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    Correct,
    Incorrect,
}

impl Correctness {
    pub fn mark(self) -> &'static str {
        match self {
            Correctness::Correct => "\u{2713}",
            Correctness::Incorrect => "\u{00d7}",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub fault: FaultKind,
    pub label: &'static str,
    pub stepwise: Correctness,
    pub multistep: Correctness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationMatrix {
    pub rows: Vec<MatrixRow>,
    pub matches_expected: bool,
}

/// The expected outcome pattern: which algorithm identifies which fault
/// class, in evaluation row order.
pub fn expected_pattern() -> Vec<(FaultKind, Correctness, Correctness)> {
    use Correctness::{Correct, Incorrect};
    vec![
        (FaultKind::TimingJackCylinder, Correct, Correct),
        (FaultKind::PartWrongPosition, Incorrect, Correct),
        (FaultKind::PressureSensorBroken, Incorrect, Incorrect),
        (FaultKind::JackCylinderBroken, Correct, Correct),
        (FaultKind::PartBroken, Incorrect, Incorrect),
    ]
}

/// Ground truth per fault kind. `None` marks faults whose true cause no
/// installed sensor can name (broken sensor, damaged part), so no diagnosis
/// can be judged correct.
fn ground_truth(kind: FaultKind, definition: &MachineDefinition) -> Result<Option<CandidateCause>> {
    let process = &definition.process;
    let tool_cause = |sensor: &str| -> Result<CandidateCause> {
        let id = SensorId(sensor.to_string());
        let tool = process
            .sensor_to_tool
            .get(&id)
            .ok_or_else(|| anyhow!("config maps no tool for {sensor}"))?;
        Ok(CandidateCause::tool_fault(tool.clone(), process.step_of_sensor(&id)?))
    };
    Ok(match kind {
        FaultKind::None => None,
        FaultKind::TimingJackCylinder | FaultKind::JackCylinderBroken => {
            Some(tool_cause(JACK_SENSOR)?)
        }
        FaultKind::PartWrongPosition => Some(CandidateCause::upstream(
            "part in the wrong position",
            process.step_of_sensor(&SensorId(SEAT_SENSOR.to_string()))?,
        )),
        FaultKind::PressureSensorBroken | FaultKind::PartBroken => None,
    })
}

fn judge(final_diagnosis: &FinalDiagnosis, truth: &Option<CandidateCause>) -> Correctness {
    match (final_diagnosis, truth) {
        (FinalDiagnosis::Resolved { cause }, Some(expected)) if cause == expected => {
            Correctness::Correct
        }
        _ => Correctness::Incorrect,
    }
}

/// Runs every scenario through both algorithms. Scenarios simulate and
/// diagnose in parallel when the core's `parallel` feature is on; row order
/// is fixed either way.
pub fn run_evaluation(definition: &MachineDefinition, seed: u64) -> Result<EvaluationMatrix> {
    let cfg = MachineConfig::new(definition.clone())?;
    let trigger = definition
        .process
        .eject_not_ok_station()
        .ok_or_else(|| anyhow!("config has no eject-not-ok station"))?;

    let runs: Vec<(FaultSpec, u64)> = FaultKind::EVALUATED
        .iter()
        .map(|kind| (FaultSpec::new(*kind), seed))
        .collect();
    let traces = simulate_batch(&cfg, &runs)?;
    let stepwise = diagnose_batch(definition, &traces, trigger, Algorithm::StepWise)?;
    let multistep = diagnose_batch(definition, &traces, trigger, Algorithm::MultiStep)?;

    let mut rows = Vec::new();
    for (i, kind) in FaultKind::EVALUATED.iter().enumerate() {
        let truth = ground_truth(*kind, definition)?;
        rows.push(MatrixRow {
            fault: *kind,
            label: kind.label(),
            stepwise: judge(&stepwise[i].final_diagnosis, &truth),
            multistep: judge(&multistep[i].final_diagnosis, &truth),
        });
    }

    let matches_expected = rows
        .iter()
        .zip(expected_pattern())
        .all(|(row, (kind, alg1, alg2))| {
            row.fault == kind && row.stepwise == alg1 && row.multistep == alg2
        });

    Ok(EvaluationMatrix { rows, matches_expected })
}

pub fn render_matrix(matrix: &EvaluationMatrix) -> String {
    let mut out = String::new();
    let header = format!("{:<24} {:<12} {:<12}", "Fault", "Step-wise", "Multi-step");
    out.push_str(header.trim_end());
    out.push('\n');
    for row in &matrix.rows {
        let line = format!(
            "{:<24} {:<12} {:<12}",
            row.label,
            row.stepwise.mark(),
            row.multistep.mark()
        );
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Cell-by-cell differences against the expected pattern; empty when equal.
pub fn diff_against_expected(matrix: &EvaluationMatrix) -> Vec<String> {
    let mut diffs = Vec::new();
    for (row, (kind, alg1, alg2)) in matrix.rows.iter().zip(expected_pattern()) {
        if row.fault != kind {
            diffs.push(format!("row order: expected {}, got {}", kind.label(), row.label));
            continue;
        }
        if row.stepwise != alg1 {
            diffs.push(format!(
                "{}: step-wise expected {}, got {}",
                row.label,
                alg1.mark(),
                row.stepwise.mark()
            ));
        }
        if row.multistep != alg2 {
            diffs.push(format!(
                "{}: multi-step expected {}, got {}",
                row.label,
                alg2.mark(),
                row.multistep.mark()
            ));
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rim_core::reference;

    #[test]
    fn matrix_is_a_pure_function_of_config_and_seed() {
        let definition = reference::machine_definition();
        let a = run_evaluation(&definition, 3).unwrap();
        let b = run_evaluation(&definition, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.matches_expected);
    }

    #[test]
    fn expected_pattern_covers_the_five_fault_classes() {
        let pattern = expected_pattern();
        assert_eq!(pattern.len(), 5);
        let kinds: Vec<FaultKind> = pattern.iter().map(|(k, _, _)| *k).collect();
        assert_eq!(kinds, FaultKind::EVALUATED.to_vec());
    }
}
