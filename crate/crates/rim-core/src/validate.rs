//! Invariant checking over process-description documents. Issues are
//! returned, not raised; an empty list means every invariant holds.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::config::{
    definition_to_document, timing_subject, CandidateDoc, MachineDefinition, MachineDocument,
};
use crate::process::{StationRole, TimingSubject};

/// Coarse class used to map issues onto load-error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueClass {
    Order,
    Reference,
    Other,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    #[error("station indices are not an ascending 1..n permutation: {details}")]
    OrderError { details: String },
    #[error("duplicate station index {index}")]
    DuplicateStation { index: u32 },
    #[error("duplicate transition id {id}")]
    DuplicateTransition { id: u32 },
    #[error("duplicate sensor {sensor} in {within}")]
    DuplicateSensor { sensor: String, within: String },
    #[error("timings cover {actual} subjects, expected {expected}")]
    TimingArity { expected: usize, actual: usize },
    #[error("timing entry {index} must name exactly one of transition/rotation")]
    MalformedTiming { index: usize },
    #[error("timing declared for unknown subject {subject}")]
    UnknownTimingSubject { subject: String },
    #[error("duplicate timing for {subject}")]
    DuplicateTiming { subject: String },
    #[error("missing timing for {subject}")]
    MissingTiming { subject: String },
    #[error("negative nominal duration for {subject}")]
    NegativeTiming { subject: String },
    #[error("sensor {sensor} mapped to unknown transition {transition}")]
    UnknownTransitionRef { sensor: String, transition: u32 },
    #[error("sensor {sensor} mapped to a tool but not to any transition")]
    ToolSensorNotMapped { sensor: String },
    #[error("transition {transition} placed at unknown station {station}")]
    UnknownStationRef { transition: u32, station: u32 },
    #[error("transition {transition} keeps the state but is not declared a check")]
    TransitionStateChange { transition: u32 },
    #[error("transition {transition} references state {state} outside 1..={state_count}")]
    StateOutOfRange { transition: u32, state: u32, state_count: u32 },
    #[error("state_count must be at least 1")]
    StateCountZero,
    #[error("station {station} is not an eject station but has no transitions")]
    EmptyStep { station: u32 },
    #[error("more than one station has role {role}")]
    DuplicateRole { role: String },
    #[error("expected value for unknown sensor {sensor}")]
    ExpectedValueUnknownSensor { sensor: String },
    #[error("negative tolerance on {subject}")]
    NegativeTolerance { subject: String },
    #[error("empty admissible interval on {subject}")]
    EmptyInterval { subject: String },
    #[error("causal rule {rule} triggers on unknown sensor {sensor}")]
    CausalRuleUnknownSensor { rule: usize, sensor: String },
    #[error("causal rule {rule} names tool {tool} absent from the tool mapping")]
    CausalRuleUnknownTool { rule: usize, tool: String },
    #[error("causal rule {rule} has no candidates")]
    CausalRuleNoCandidates { rule: usize },
    #[error("causal rule {rule} candidate step {step} is not a station")]
    CausalRuleBadStep { rule: usize, step: u32 },
    #[error("causal rule {rule} tool {tool} declared at step {declared} but its sensors sit at step {actual}")]
    CausalRuleToolStepMismatch { rule: usize, tool: String, declared: u32, actual: u32 },
    #[error("causal rule {rule} discriminator references candidate index {index} out of range")]
    CausalRuleBadDiscriminatorIndex { rule: usize, index: usize },
    #[error("causal rule {rule} discriminator sensor {sensor} is not at a strictly earlier step")]
    CausalRuleDiscriminatorNotEarlier { rule: usize, sensor: String },
    #[error("transition {transition} duration derived from unknown sensor {sensor}")]
    DurationSpecUnknownSensor { transition: u32, sensor: String },
    #[error("transition {transition} duration derived from sensor {sensor} of another step")]
    DurationSpecForeignSensor { transition: u32, sensor: String },
    #[error("transition {transition} duration occurrences must satisfy 1 <= start < end")]
    DurationSpecBadOccurrences { transition: u32 },
}

impl ValidationIssue {
    pub fn class(&self) -> IssueClass {
        use ValidationIssue::*;
        match self {
            OrderError { .. } | DuplicateStation { .. } => IssueClass::Order,
            UnknownTransitionRef { .. }
            | ToolSensorNotMapped { .. }
            | UnknownStationRef { .. }
            | ExpectedValueUnknownSensor { .. }
            | CausalRuleUnknownSensor { .. }
            | CausalRuleUnknownTool { .. }
            | CausalRuleBadStep { .. }
            | DurationSpecUnknownSensor { .. } => IssueClass::Reference,
            _ => IssueClass::Other,
        }
    }
}

/// Validates a built definition by checking its lossless document view.
pub fn validate(definition: &MachineDefinition) -> Vec<ValidationIssue> {
    validate_document(&definition_to_document(definition))
}

pub fn validate_document(document: &MachineDocument) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    // Stations: ascending 1..n permutation, unique roles where required.
    let n = document.stations.len() as u32;
    let indices: Vec<u32> = document.stations.iter().map(|s| s.index).collect();
    let expected_indices: Vec<u32> = (1..=n).collect();
    if indices != expected_indices {
        issues.push(ValidationIssue::OrderError {
            details: format!("got {indices:?}, expected {expected_indices:?}"),
        });
        let mut seen = BTreeSet::new();
        for index in &indices {
            if !seen.insert(*index) {
                issues.push(ValidationIssue::DuplicateStation { index: *index });
            }
        }
    }
    let station_set: BTreeSet<u32> = indices.iter().copied().collect();
    for (role, name) in [
        (StationRole::Input, "input"),
        (StationRole::EjectOk, "eject_ok"),
        (StationRole::EjectNotOk, "eject_not_ok"),
    ] {
        if document.stations.iter().filter(|s| s.role == role).count() > 1 {
            issues.push(ValidationIssue::DuplicateRole { role: name.to_string() });
        }
    }

    // Transitions.
    if document.transitions.state_count == 0 {
        issues.push(ValidationIssue::StateCountZero);
    }
    let mut transition_ids = BTreeSet::new();
    let mut transitions_by_station: BTreeMap<u32, usize> = BTreeMap::new();
    for item in &document.transitions.items {
        if !transition_ids.insert(item.id) {
            issues.push(ValidationIssue::DuplicateTransition { id: item.id });
        }
        if !station_set.contains(&item.station) {
            issues.push(ValidationIssue::UnknownStationRef {
                transition: item.id,
                station: item.station,
            });
        } else {
            *transitions_by_station.entry(item.station).or_default() += 1;
        }
        if item.from_state == item.to_state && !item.check {
            issues.push(ValidationIssue::TransitionStateChange { transition: item.id });
        }
        for state in [item.from_state, item.to_state] {
            if state == 0 || state > document.transitions.state_count {
                issues.push(ValidationIssue::StateOutOfRange {
                    transition: item.id,
                    state,
                    state_count: document.transitions.state_count,
                });
            }
        }
    }
    for station in &document.stations {
        let has_transitions = transitions_by_station.get(&station.index).copied().unwrap_or(0) > 0;
        if !has_transitions && !station.role.is_eject() {
            issues.push(ValidationIssue::EmptyStep { station: station.index });
        }
    }

    // Sensor -> transition mapping (V).
    let mut v_sensors: BTreeMap<String, u32> = BTreeMap::new();
    for entry in &document.sensor_to_transition {
        if v_sensors.insert(entry.sensor.clone(), entry.transition).is_some() {
            issues.push(ValidationIssue::DuplicateSensor {
                sensor: entry.sensor.clone(),
                within: "sensor_to_transition".to_string(),
            });
        }
        if !transition_ids.contains(&entry.transition) {
            issues.push(ValidationIssue::UnknownTransitionRef {
                sensor: entry.sensor.clone(),
                transition: entry.transition,
            });
        }
    }

    // Sensor -> tool mapping (W): W ⊆ dom(V).
    let mut w_sensors: BTreeSet<String> = BTreeSet::new();
    let mut tools: BTreeSet<String> = BTreeSet::new();
    for entry in &document.sensor_to_tool {
        if !w_sensors.insert(entry.sensor.clone()) {
            issues.push(ValidationIssue::DuplicateSensor {
                sensor: entry.sensor.clone(),
                within: "sensor_to_tool".to_string(),
            });
        }
        if !v_sensors.contains_key(&entry.sensor) {
            issues.push(ValidationIssue::ToolSensorNotMapped { sensor: entry.sensor.clone() });
        }
        tools.insert(entry.tool.clone());
    }

    // Step of a sensor, where resolvable.
    let station_of_transition: BTreeMap<u32, u32> = document
        .transitions
        .items
        .iter()
        .map(|t| (t.id, t.station))
        .collect();
    let step_of_sensor = |sensor: &str| -> Option<u32> {
        v_sensors
            .get(sensor)
            .and_then(|t| station_of_transition.get(t))
            .copied()
    };

    // Duration derivation tags.
    for item in &document.transitions.items {
        if let Some(spec) = &item.duration_events {
            match step_of_sensor(&spec.sensor) {
                None => issues.push(ValidationIssue::DurationSpecUnknownSensor {
                    transition: item.id,
                    sensor: spec.sensor.clone(),
                }),
                Some(step) if step != item.station => {
                    issues.push(ValidationIssue::DurationSpecForeignSensor {
                        transition: item.id,
                        sensor: spec.sensor.clone(),
                    })
                }
                Some(_) => {}
            }
            if spec.start_occurrence == 0 || spec.start_occurrence >= spec.end_occurrence {
                issues.push(ValidationIssue::DurationSpecBadOccurrences { transition: item.id });
            }
        }
    }

    // Timings (U): exactly one entry per transition and per rotation.
    let mut expected_subjects: BTreeSet<TimingSubject> = transition_ids
        .iter()
        .map(|id| TimingSubject::Transition(crate::process::TransitionId(*id)))
        .collect();
    for i in 1..=n {
        expected_subjects.insert(TimingSubject::Rotation(crate::process::RotationId(i)));
    }
    let mut seen_subjects: BTreeSet<TimingSubject> = BTreeSet::new();
    for (index, entry) in document.timings.iter().enumerate() {
        let Some(subject) = timing_subject(entry.transition, entry.rotation) else {
            issues.push(ValidationIssue::MalformedTiming { index });
            continue;
        };
        if !expected_subjects.contains(&subject) {
            issues.push(ValidationIssue::UnknownTimingSubject { subject: subject.to_string() });
            continue;
        }
        if !seen_subjects.insert(subject) {
            issues.push(ValidationIssue::DuplicateTiming { subject: subject.to_string() });
        }
        if entry.nominal < 0.0 || !entry.nominal.is_finite() {
            issues.push(ValidationIssue::NegativeTiming { subject: subject.to_string() });
        }
    }
    for subject in expected_subjects.difference(&seen_subjects) {
        issues.push(ValidationIssue::MissingTiming { subject: subject.to_string() });
    }
    if document.timings.len() != expected_subjects.len() {
        issues.push(ValidationIssue::TimingArity {
            expected: expected_subjects.len(),
            actual: document.timings.len(),
        });
    }

    // Expected sensor values: dom(values) ⊆ dom(V), non-empty intervals.
    let mut expected_seen: BTreeSet<String> = BTreeSet::new();
    for entry in &document.expected_values.sensors {
        if !expected_seen.insert(entry.sensor.clone()) {
            issues.push(ValidationIssue::DuplicateSensor {
                sensor: entry.sensor.clone(),
                within: "expected_values".to_string(),
            });
        }
        if !v_sensors.contains_key(&entry.sensor) {
            issues.push(ValidationIssue::ExpectedValueUnknownSensor { sensor: entry.sensor.clone() });
        }
        if entry.tol_below < 0.0 || entry.tol_above < 0.0 {
            issues.push(ValidationIssue::NegativeTolerance { subject: entry.sensor.clone() });
        }
    }

    // Timing tolerances.
    let mut tolerance_seen: BTreeSet<TimingSubject> = BTreeSet::new();
    for (index, entry) in document.expected_values.timing_tolerances.iter().enumerate() {
        let Some(subject) = timing_subject(entry.transition, entry.rotation) else {
            issues.push(ValidationIssue::MalformedTiming { index });
            continue;
        };
        if !expected_subjects.contains(&subject) {
            issues.push(ValidationIssue::UnknownTimingSubject { subject: subject.to_string() });
            continue;
        }
        if !tolerance_seen.insert(subject) {
            issues.push(ValidationIssue::DuplicateTiming {
                subject: format!("tolerance for {subject}"),
            });
        }
        if entry.tol_below < 0.0 || entry.tol_above < 0.0 {
            issues.push(ValidationIssue::NegativeTolerance { subject: subject.to_string() });
        }
    }

    // Causal rules.
    for (rule_index, rule) in document.causal_rules.iter().enumerate() {
        if !v_sensors.contains_key(&rule.trigger_sensor) {
            issues.push(ValidationIssue::CausalRuleUnknownSensor {
                rule: rule_index,
                sensor: rule.trigger_sensor.clone(),
            });
        }
        if rule.candidates.is_empty() {
            issues.push(ValidationIssue::CausalRuleNoCandidates { rule: rule_index });
        }
        for candidate in &rule.candidates {
            let step = match candidate {
                CandidateDoc::ToolFault { step, .. } => *step,
                CandidateDoc::UpstreamProductFault { step, .. } => *step,
            };
            if !station_set.contains(&step) {
                issues.push(ValidationIssue::CausalRuleBadStep { rule: rule_index, step });
            }
            if let CandidateDoc::ToolFault { tool, step } = candidate {
                if !tools.contains(tool) {
                    issues.push(ValidationIssue::CausalRuleUnknownTool {
                        rule: rule_index,
                        tool: tool.clone(),
                    });
                } else {
                    for entry in &document.sensor_to_tool {
                        if &entry.tool == tool {
                            if let Some(actual) = step_of_sensor(&entry.sensor) {
                                if actual != *step {
                                    issues.push(ValidationIssue::CausalRuleToolStepMismatch {
                                        rule: rule_index,
                                        tool: tool.clone(),
                                        declared: *step,
                                        actual,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        let trigger_step = step_of_sensor(&rule.trigger_sensor);
        for discriminator in &rule.discriminators {
            if discriminator.candidate >= rule.candidates.len() {
                issues.push(ValidationIssue::CausalRuleBadDiscriminatorIndex {
                    rule: rule_index,
                    index: discriminator.candidate,
                });
            }
            if discriminator.lower > discriminator.upper {
                issues.push(ValidationIssue::EmptyInterval {
                    subject: format!("rule {rule_index} discriminator on {}", discriminator.sensor),
                });
            }
            match (step_of_sensor(&discriminator.sensor), trigger_step) {
                (Some(disc_step), Some(trigger_step)) if disc_step < trigger_step => {}
                (Some(_), Some(_)) => {
                    issues.push(ValidationIssue::CausalRuleDiscriminatorNotEarlier {
                        rule: rule_index,
                        sensor: discriminator.sensor.clone(),
                    })
                }
                (None, _) => issues.push(ValidationIssue::CausalRuleUnknownSensor {
                    rule: rule_index,
                    sensor: discriminator.sensor.clone(),
                }),
                _ => {}
            }
        }
    }

    issues
}
