//! Step-wise and multi-step root-cause diagnosis.
//!
//! Diagnosis activates once a product is flagged Not-OK. Starting from the
//! step before the reporting station, the algorithm walks the production
//! process backwards, checking every step's measured values against the
//! expected ones. The step-wise algorithm reports conflicts where it finds
//! them; the multi-step variant additionally keeps a memory of ambiguous
//! candidate sets and collapses them when an earlier step's observations
//! confirm exactly one candidate.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{
    build_step_formula, check_sat, check_sat_with_memory, ConflictSubject, Interval,
    MemoryResolution, Observed, TraceEvent, Violation, ViolationKind,
};
use crate::constraint::ExpectedValueSet;
use crate::process::{ProcessDescription, ProcessError, SensorId, StationIndex, ToolId};
use crate::trace::{Trace, Verdict};

/// Direction of an observed deviation from the admissible interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationDirection {
    Below,
    Above,
    Missing,
    Any,
}

impl DeviationDirection {
    pub fn of_violation(violation: &Violation) -> DeviationDirection {
        match violation.observed {
            Observed::Missing => DeviationDirection::Missing,
            Observed::Value(v) if v < violation.admissible.lo => DeviationDirection::Below,
            Observed::Value(_) => DeviationDirection::Above,
        }
    }

    fn matches(self, observed: DeviationDirection) -> bool {
        self == DeviationDirection::Any || self == observed
    }
}

/// What a candidate cause blames: a tool of the machine, or a product-side
/// problem introduced upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateKind {
    ToolFault { tool: ToolId },
    UpstreamProductFault { description: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCause {
    #[serde(flatten)]
    pub kind: CandidateKind,
    pub step: StationIndex,
}

impl CandidateCause {
    pub fn tool_fault(tool: ToolId, step: StationIndex) -> Self {
        CandidateCause { kind: CandidateKind::ToolFault { tool }, step }
    }

    pub fn upstream(description: impl Into<String>, step: StationIndex) -> Self {
        CandidateCause {
            kind: CandidateKind::UpstreamProductFault { description: description.into() },
            step,
        }
    }

    pub fn tool(&self) -> Option<&ToolId> {
        match &self.kind {
            CandidateKind::ToolFault { tool } => Some(tool),
            CandidateKind::UpstreamProductFault { .. } => None,
        }
    }

    /// Short name used in "Most likely cause:" messages.
    pub fn name(&self) -> &str {
        match &self.kind {
            CandidateKind::ToolFault { tool } => tool.as_str(),
            CandidateKind::UpstreamProductFault { description } => description,
        }
    }
}

impl fmt::Display for CandidateCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CandidateKind::ToolFault { tool } => {
                write!(f, "{} (tool fault, step {})", tool, self.step)
            }
            CandidateKind::UpstreamProductFault { description } => {
                write!(f, "{} (upstream product fault, step {})", description, self.step)
            }
        }
    }
}

/// A discriminator names an earlier-step sensor and a tell-tale interval
/// whose violation confirms one candidate of the rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    /// Index into the rule's candidate list.
    pub candidate: usize,
    pub sensor: SensorId,
    #[serde(flatten)]
    pub interval: Interval,
}

/// Encodes machine knowledge the sensor mappings alone cannot express: which
/// causes can explain a given deviation, and which earlier observations
/// decide between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalRule {
    pub trigger_sensor: SensorId,
    pub deviation: DeviationDirection,
    pub candidates: Vec<CandidateCause>,
    #[serde(default)]
    pub discriminators: Vec<Discriminator>,
}

impl CausalRule {
    pub fn matches_violation(&self, violation: &Violation) -> bool {
        violation.kind == ViolationKind::Value
            && violation.subject == ConflictSubject::Sensor(self.trigger_sensor.clone())
            && self.deviation.matches(DeviationDirection::of_violation(violation))
    }

    pub fn discriminators_for(&self, candidate: usize) -> impl Iterator<Item = &Discriminator> {
        self.discriminators.iter().filter(move |d| d.candidate == candidate)
    }
}

/// One remembered ambiguity: the violation that triggered it and the
/// candidates that survive so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub origin_step: StationIndex,
    pub trigger: Violation,
    pub candidates: Vec<CandidateCause>,
}

/// Z: the vector in which possible diagnoses are saved across steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMemory {
    pub entries: Vec<MemoryEntry>,
}

impl ExplanationMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: MemoryEntry) {
        self.entries.push(entry);
    }

    pub fn remove(&mut self, index: usize) -> MemoryEntry {
        self.entries.remove(index)
    }
}

/// A collapsed memory entry: which candidate was confirmed and by which step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub entry_index: usize,
    pub origin_step: StationIndex,
    pub cause: CandidateCause,
    pub evidence_step: Option<StationIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultClass {
    TimingFault,
    ValueFault,
}

/// Per-step diagnosis outcome, in visit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    /// Quality-control symptom: the anomaly detection itself, not a cause.
    QcDetection { violations: Vec<Violation> },
    TimingFault { violation: Violation, cause: Option<CandidateCause> },
    DefiniteCause { violations: Vec<Violation>, cause: CandidateCause },
    Ambiguous { violations: Vec<Violation>, candidates: Vec<CandidateCause> },
    /// An ambiguity collapsed by evidence from an earlier step (multi-step).
    ResolvedFromMemory {
        violations: Vec<Violation>,
        candidates: Vec<CandidateCause>,
        cause: CandidateCause,
        evidence_step: StationIndex,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: StationIndex,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    StepWise,
    MultiStep,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::StepWise => write!(f, "step-wise"),
            Algorithm::MultiStep => write!(f, "multi-step"),
        }
    }
}

/// Where and how the Not-OK detection happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerInfo {
    pub product: u64,
    pub reported_at: StationIndex,
    pub verdict: Verdict,
    pub qc_sensor: Option<SensorId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FinalDiagnosis {
    Resolved { cause: CandidateCause },
    MultipleCandidates { candidates: Vec<CandidateCause> },
    NoCauseFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub algorithm: Algorithm,
    pub trigger: TriggerInfo,
    pub steps: Vec<StepReport>,
    #[serde(rename = "final")]
    pub final_diagnosis: FinalDiagnosis,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosisError {
    #[error("trace carries unknown sensor {0}")]
    UnknownSensorInTrace(SensorId),
    #[error("trace lacks events for the detecting station {0}")]
    TraceIncomplete(StationIndex),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

/// Assigns every event to the step owning its sensor (via V); every station
/// gets a slice, empty ones included, events time-ordered within each.
pub fn slice_trace_by_step(
    process: &ProcessDescription,
    events: &[TraceEvent],
) -> Result<BTreeMap<StationIndex, Vec<TraceEvent>>, DiagnosisError> {
    let mut slices: BTreeMap<StationIndex, Vec<TraceEvent>> = process
        .order
        .iter()
        .map(|step| (step.index, Vec::new()))
        .collect();
    for event in events {
        let step = process
            .step_of_sensor(&event.sensor)
            .map_err(|_| DiagnosisError::UnknownSensorInTrace(event.sensor.clone()))?;
        slices.entry(step).or_default().push(event.clone());
    }
    for slice in slices.values_mut() {
        slice.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.sensor.cmp(&b.sensor)));
    }
    Ok(slices)
}

pub fn classify_violation(violation: &Violation) -> FaultClass {
    match violation.kind {
        ViolationKind::Timing => FaultClass::TimingFault,
        ViolationKind::Value => FaultClass::ValueFault,
    }
}

/// Candidate causes for a value violation: the first matching causal rule's
/// candidates; otherwise the tool reported by the sensor; otherwise an
/// upstream product fault named after the sensor.
pub fn candidate_causes(violation: &Violation, process: &ProcessDescription) -> Vec<CandidateCause> {
    let ConflictSubject::Sensor(sensor) = &violation.subject else {
        return Vec::new();
    };
    if violation.kind != ViolationKind::Value {
        return Vec::new();
    }
    if let Some(rule) = process.causal_rules.iter().find(|r| r.matches_violation(violation)) {
        return rule.candidates.clone();
    }
    let step = match process.step_of_sensor(sensor) {
        Ok(step) => step,
        Err(_) => return Vec::new(),
    };
    match process.sensor_to_tool.get(sensor) {
        Some(tool) => vec![CandidateCause::tool_fault(tool.clone(), step)],
        None => vec![CandidateCause::upstream(sensor.as_str(), step)],
    }
}

/// Attributes a timing violation to the tool reported by the violated
/// transition's sensors, when one exists.
fn timing_cause(violation: &Violation, process: &ProcessDescription) -> Option<CandidateCause> {
    let ConflictSubject::Timing(subject) = &violation.subject else { return None };
    match subject {
        crate::process::TimingSubject::Transition(id) => {
            let transition = process.transition(*id)?;
            let mut sensors: Vec<&SensorId> = process
                .sensor_to_transition
                .iter()
                .filter(|(_, t)| *t == id)
                .map(|(s, _)| s)
                .collect();
            sensors.sort();
            for sensor in sensors {
                if let Some(tool) = process.sensor_to_tool.get(sensor) {
                    return Some(CandidateCause::tool_fault(tool.clone(), transition.station));
                }
            }
            Some(CandidateCause::upstream(
                format!("unattributed timing at transition {id}"),
                transition.station,
            ))
        }
        crate::process::TimingSubject::Rotation(id) => {
            let rotation = process.rotations.iter().find(|r| &r.id == id)?;
            Some(CandidateCause::upstream(
                format!("table rotation {id} timing"),
                rotation.from_position,
            ))
        }
    }
}

/// Per-step combination of several violations' candidate sets under the
/// single-shared-cause assumption: intersection when it is non-empty, the
/// deduplicated union otherwise.
fn combine_candidates(sets: &[Vec<CandidateCause>]) -> Vec<CandidateCause> {
    match sets {
        [] => Vec::new(),
        [only] => dedup_causes(only.clone()),
        [first, rest @ ..] => {
            let intersection: Vec<CandidateCause> = first
                .iter()
                .filter(|c| rest.iter().all(|s| s.contains(c)))
                .cloned()
                .collect();
            if !intersection.is_empty() {
                return dedup_causes(intersection);
            }
            let mut union = first.clone();
            for set in rest {
                union.extend(set.iter().cloned());
            }
            dedup_causes(union)
        }
    }
}

fn dedup_causes(causes: Vec<CandidateCause>) -> Vec<CandidateCause> {
    let mut out: Vec<CandidateCause> = Vec::new();
    for cause in causes {
        if !out.contains(&cause) {
            out.push(cause);
        }
    }
    out
}

/// Algorithm that reports conflicts where it finds them, step by step.
pub fn diagnose_stepwise(
    process: &ProcessDescription,
    expected: &ExpectedValueSet,
    trace: &Trace,
    trigger: StationIndex,
) -> Result<DiagnosisReport, DiagnosisError> {
    run_diagnosis(process, expected, trace, trigger, Algorithm::StepWise)
}

/// Step-wise diagnosis extended with the ambiguity memory Z, resolved using
/// evidence from strictly earlier production steps.
pub fn diagnose_multistep(
    process: &ProcessDescription,
    expected: &ExpectedValueSet,
    trace: &Trace,
    trigger: StationIndex,
) -> Result<DiagnosisReport, DiagnosisError> {
    run_diagnosis(process, expected, trace, trigger, Algorithm::MultiStep)
}

fn run_diagnosis(
    process: &ProcessDescription,
    expected: &ExpectedValueSet,
    trace: &Trace,
    trigger: StationIndex,
    algorithm: Algorithm,
) -> Result<DiagnosisReport, DiagnosisError> {
    if process.station(trigger).is_none() {
        return Err(ProcessError::UnknownStep(trigger).into());
    }
    let slices = slice_trace_by_step(process, &trace.events)?;

    let mut qc_sensor = None;
    if let Verdict::NotOk { detected_by } = trace.verdict {
        let detecting_sensors = process.sensors_for_step(detected_by)?;
        if !detecting_sensors.is_empty()
            && slices.get(&detected_by).map(Vec::is_empty).unwrap_or(true)
        {
            return Err(DiagnosisError::TraceIncomplete(detected_by));
        }
        qc_sensor = detecting_sensors.into_iter().next();
    }

    let trigger_info = TriggerInfo {
        product: trace.product_id,
        reported_at: trigger,
        verdict: trace.verdict,
        qc_sensor,
    };

    let mut memory = ExplanationMemory::new();
    let mut steps: Vec<StepReport> = Vec::new();
    let mut causes: Vec<CandidateCause> = Vec::new();
    let empty_slice: Vec<TraceEvent> = Vec::new();

    for station in (1..trigger.get()).rev() {
        let step = StationIndex::new(station).expect("station >= 1");
        let formula = build_step_formula(expected, process, step)?;
        let events = slices.get(&step).unwrap_or(&empty_slice);
        let sat = check_sat(&formula, events);

        let outcome = if sat.is_sat() {
            StepOutcome::Ok
        } else {
            let timing: Vec<Violation> = sat
                .violations
                .iter()
                .filter(|v| v.kind == ViolationKind::Timing)
                .cloned()
                .collect();
            let (qc, causal): (Vec<Violation>, Vec<Violation>) = sat
                .violations
                .iter()
                .filter(|v| v.kind == ViolationKind::Value)
                .cloned()
                .partition(|v| match &v.subject {
                    ConflictSubject::Sensor(s) => process.is_quality_sensor(s),
                    ConflictSubject::Timing(_) => false,
                });

            if let Some(first_timing) = timing.first() {
                // Timing precedence: the timing check comes before conflict naming.
                let cause = timing_cause(first_timing, process);
                if let Some(c) = &cause {
                    causes.push(c.clone());
                }
                StepOutcome::TimingFault { violation: first_timing.clone(), cause }
            } else if !causal.is_empty() {
                let sets: Vec<Vec<CandidateCause>> =
                    causal.iter().map(|v| candidate_causes(v, process)).collect();
                let combined = combine_candidates(&sets);
                match combined.len() {
                    0 | 1 => {
                        let cause = combined.into_iter().next().unwrap_or_else(|| {
                            CandidateCause::upstream("unexplained deviation", step)
                        });
                        causes.push(cause.clone());
                        StepOutcome::DefiniteCause { violations: causal, cause }
                    }
                    _ => {
                        if algorithm == Algorithm::MultiStep {
                            let trigger_violation = causal
                                .iter()
                                .find(|v| candidate_causes(v, process).len() >= 2)
                                .unwrap_or(&causal[0])
                                .clone();
                            memory.push(MemoryEntry {
                                origin_step: step,
                                trigger: trigger_violation,
                                candidates: combined.clone(),
                            });
                        }
                        StepOutcome::Ambiguous { violations: causal, candidates: combined }
                    }
                }
            } else {
                StepOutcome::QcDetection { violations: qc }
            }
        };
        steps.push(StepReport { step, outcome });

        if algorithm == Algorithm::MultiStep && !memory.is_empty() {
            if let MemoryResolution::Confirmed(confirmations) =
                check_sat_with_memory(expected, process, events, &memory)
            {
                let mut collapsed: Vec<usize> = Vec::new();
                for confirmation in confirmations {
                    collapsed.push(confirmation.entry_index);
                    causes.push(confirmation.cause.clone());
                    if let Some(report) =
                        steps.iter_mut().find(|r| r.step == confirmation.origin_step)
                    {
                        if let StepOutcome::Ambiguous { violations, candidates } = &report.outcome {
                            report.outcome = StepOutcome::ResolvedFromMemory {
                                violations: violations.clone(),
                                candidates: candidates.clone(),
                                cause: confirmation.cause.clone(),
                                evidence_step: confirmation.evidence_step.unwrap_or(step),
                            };
                        }
                    }
                }
                collapsed.sort_unstable();
                for index in collapsed.into_iter().rev() {
                    memory.remove(index);
                }
            }
        }
    }

    let unresolved: Vec<CandidateCause> = steps
        .iter()
        .filter_map(|r| match &r.outcome {
            StepOutcome::Ambiguous { candidates, .. } => Some(candidates.clone()),
            _ => None,
        })
        .flatten()
        .collect();

    let final_diagnosis = if !unresolved.is_empty() {
        let mut all = unresolved;
        all.extend(causes);
        FinalDiagnosis::MultipleCandidates { candidates: dedup_causes(all) }
    } else {
        let causes = dedup_causes(causes);
        match causes.len() {
            0 => FinalDiagnosis::NoCauseFound,
            1 => FinalDiagnosis::Resolved { cause: causes.into_iter().next().expect("one") },
            _ => FinalDiagnosis::MultipleCandidates { candidates: causes },
        }
    };

    Ok(DiagnosisReport {
        algorithm,
        trigger: trigger_info,
        steps,
        final_diagnosis,
    })
}

fn violation_line(violation: &Violation) -> String {
    match violation.kind {
        ViolationKind::Timing => format!(
            "{} took {} s, admissible {}",
            violation.subject, violation.observed, violation.admissible
        ),
        ViolationKind::Value => format!(
            "{} observed {} outside {}",
            violation.subject, violation.observed, violation.admissible
        ),
    }
}

/// Deterministic human-readable rendering. The timing, cause and ambiguity
/// messages are fixed strings downstream tooling may match on.
pub fn render_report(report: &DiagnosisReport) -> String {
    let mut out = String::new();
    out.push_str("RIM diagnosis report\n");
    out.push_str(&format!("Algorithm: {}\n", report.algorithm));
    match report.trigger.verdict {
        Verdict::Ok => out.push_str(&format!(
            "Trigger: product {} verdict OK (nothing to diagnose)\n",
            report.trigger.product
        )),
        Verdict::NotOk { detected_by } => {
            let qc = report
                .trigger
                .qc_sensor
                .as_ref()
                .map(|s| format!("quality control: {s}, station {detected_by}"))
                .unwrap_or_else(|| format!("detected at station {detected_by}"));
            out.push_str(&format!(
                "Trigger: product {} reported Not-OK at station {} ({})\n",
                report.trigger.product, report.trigger.reported_at, qc
            ));
        }
    }

    // Memory resolutions render at the step that supplied the evidence.
    let mut resolutions: BTreeMap<StationIndex, Vec<&CandidateCause>> = BTreeMap::new();
    for step_report in &report.steps {
        if let StepOutcome::ResolvedFromMemory { cause, evidence_step, .. } = &step_report.outcome {
            resolutions.entry(*evidence_step).or_default().push(cause);
        }
    }

    for step_report in &report.steps {
        let step = step_report.step;
        match &step_report.outcome {
            StepOutcome::Ok => out.push_str(&format!("Step {step}: OK\n")),
            StepOutcome::QcDetection { violations } => {
                let first = violations.first();
                match first {
                    Some(v) => out.push_str(&format!(
                        "Step {step}: quality control detection: {}\n",
                        violation_line(v)
                    )),
                    None => out.push_str(&format!("Step {step}: quality control detection\n")),
                }
                for v in violations.iter().skip(1) {
                    out.push_str(&format!("  also: {}\n", violation_line(v)));
                }
            }
            StepOutcome::TimingFault { violation, .. } => {
                out.push_str(&format!("Error in step {step}: Timing fault\n"));
                out.push_str(&format!("  {}\n", violation_line(violation)));
            }
            StepOutcome::DefiniteCause { violations, cause } => {
                out.push_str(&format!("Error in step {step}: Fault found\n"));
                out.push_str(&format!("Most likely cause: {}\n", cause.name()));
                for v in violations {
                    out.push_str(&format!("  {}\n", violation_line(v)));
                }
            }
            StepOutcome::Ambiguous { violations, candidates }
            | StepOutcome::ResolvedFromMemory { violations, candidates, .. } => {
                out.push_str(&format!("Fault found in step {step}\n"));
                out.push_str("More than one explanation possible\n");
                for v in violations {
                    out.push_str(&format!("  {}\n", violation_line(v)));
                }
                for candidate in candidates {
                    out.push_str(&format!("  candidate: {candidate}\n"));
                }
            }
        }
        if let Some(causes) = resolutions.get(&step) {
            for cause in causes {
                out.push_str("Explanation for fault in earlier step found!\n");
                out.push_str(&format!("Most likely cause: {}\n", cause.name()));
            }
        }
    }

    match &report.final_diagnosis {
        FinalDiagnosis::Resolved { cause } => {
            out.push_str(&format!("Final diagnosis: {cause}\n"));
        }
        FinalDiagnosis::MultipleCandidates { candidates } => {
            out.push_str("Final diagnosis: more than one explanation possible\n");
            for candidate in candidates {
                out.push_str(&format!("  candidate: {candidate}\n"));
            }
        }
        FinalDiagnosis::NoCauseFound => {
            out.push_str("Final diagnosis: no cause found\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{Observed, ViolationKind};
    use crate::process::{RotationId, TimingSubject};

    fn violation(kind: ViolationKind, subject: ConflictSubject, observed: Observed) -> Violation {
        Violation {
            kind,
            subject,
            observed,
            admissible: Interval::new(0.0, 1.0),
        }
    }

    #[test]
    fn classify_timing_and_value() {
        let t = violation(
            ViolationKind::Timing,
            ConflictSubject::Timing(TimingSubject::Rotation(RotationId(3))),
            Observed::Value(1.4),
        );
        assert_eq!(classify_violation(&t), FaultClass::TimingFault);
        let v = violation(
            ViolationKind::Value,
            ConflictSubject::Sensor("st4.pressure".into()),
            Observed::Value(3.9),
        );
        assert_eq!(classify_violation(&v), FaultClass::ValueFault);
        let missing = violation(
            ViolationKind::Value,
            ConflictSubject::Sensor("st2.pneumatic_cylinder.position".into()),
            Observed::Missing,
        );
        assert_eq!(classify_violation(&missing), FaultClass::ValueFault);
    }

    #[test]
    fn deviation_direction_from_observed() {
        let below = violation(
            ViolationKind::Value,
            ConflictSubject::Sensor("s".into()),
            Observed::Value(-0.5),
        );
        assert_eq!(DeviationDirection::of_violation(&below), DeviationDirection::Below);
        let above = violation(
            ViolationKind::Value,
            ConflictSubject::Sensor("s".into()),
            Observed::Value(2.0),
        );
        assert_eq!(DeviationDirection::of_violation(&above), DeviationDirection::Above);
        let missing = violation(
            ViolationKind::Value,
            ConflictSubject::Sensor("s".into()),
            Observed::Missing,
        );
        assert_eq!(DeviationDirection::of_violation(&missing), DeviationDirection::Missing);
    }

    #[test]
    fn combine_prefers_intersection_then_union() {
        let jack = CandidateCause::tool_fault("st4.jack_cylinder".into(), StationIndex::new(4).unwrap());
        let part = CandidateCause::upstream("part in the wrong position", StationIndex::new(3).unwrap());
        let feeder = CandidateCause::tool_fault("st3.feeder".into(), StationIndex::new(3).unwrap());

        let sets = vec![vec![jack.clone()], vec![jack.clone(), part.clone()]];
        assert_eq!(combine_candidates(&sets), vec![jack.clone()]);

        let disjoint = vec![vec![jack.clone()], vec![feeder.clone()]];
        assert_eq!(combine_candidates(&disjoint), vec![jack, feeder]);
    }
}
