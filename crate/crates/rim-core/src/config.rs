//! Process-description document: a single JSON file with the top-level keys
//! `stations`, `transitions`, `timings`, `sensor_to_transition`,
//! `sensor_to_tool`, `causal_rules`, `expected_values` and `schema_version`.
//! Unknown keys are rejected. Sensor mappings are entry arrays so duplicate
//! ids are representable and caught by validation rather than silently
//! collapsed. Rotations are not declared: rotation i always moves position i
//! to i+1 (wrapping), so only their nominal durations appear under `timings`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{ExpectedValue, ExpectedValueSet, Interval};
use crate::diagnosis::{CandidateCause, CausalRule, DeviationDirection, Discriminator};
use crate::process::{
    DurationSpec, InternalTime, ProcessDescription, ProductState, ProductionStep, Rotation,
    RotationId, SensorId, StateTransition, StationIndex, StationInfo, StationRole, TimingSubject,
    ToolId, TransitionId,
};
use crate::validate::{validate_document, IssueClass, ValidationIssue};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDocument {
    pub schema_version: u32,
    pub stations: Vec<StationDoc>,
    pub transitions: TransitionsDoc,
    pub timings: Vec<TimingDoc>,
    pub sensor_to_transition: Vec<SensorTransitionDoc>,
    pub sensor_to_tool: Vec<SensorToolDoc>,
    pub expected_values: ExpectedValuesDoc,
    pub causal_rules: Vec<CausalRuleDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDoc {
    pub index: u32,
    pub role: StationRole,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsDoc {
    pub state_count: u32,
    pub items: Vec<TransitionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDoc {
    pub id: u32,
    pub station: u32,
    pub from_state: u32,
    pub to_state: u32,
    #[serde(default, skip_serializing_if = "is_false")]
    pub check: bool,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_events: Option<DurationSpecDoc>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationSpecDoc {
    pub sensor: String,
    pub start_occurrence: u32,
    pub end_occurrence: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<u32>,
    pub nominal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorTransitionDoc {
    pub sensor: String,
    pub transition: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorToolDoc {
    pub sensor: String,
    pub tool: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValuesDoc {
    pub sensors: Vec<ExpectedSensorDoc>,
    pub timing_tolerances: Vec<TimingToleranceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSensorDoc {
    pub sensor: String,
    pub nominal: f64,
    pub tol_below: f64,
    pub tol_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingToleranceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<u32>,
    pub tol_below: f64,
    pub tol_above: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalRuleDoc {
    pub trigger_sensor: String,
    pub deviation: DeviationDirection,
    pub candidates: Vec<CandidateDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discriminators: Vec<DiscriminatorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateDoc {
    ToolFault { tool: String, step: u32 },
    UpstreamProductFault { description: String, step: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorDoc {
    pub candidate: usize,
    pub sensor: String,
    pub lower: f64,
    pub upper: f64,
}

/// A validated process description plus its expected-value set, as loaded
/// from one configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDefinition {
    pub process: ProcessDescription,
    pub expected: ExpectedValueSet,
}

#[derive(Debug, Error)]
pub enum LoadError {
    /// Malformed document: bad JSON, unknown keys, wrong types, or an
    /// unsupported schema version.
    #[error("schema error: {0}")]
    Schema(String),
    /// Station indices are not an ascending 1..n permutation.
    #[error("order error: {}", render_issues(.0))]
    Order(Vec<ValidationIssue>),
    /// A sensor is mapped to an unknown transition or tool, or a mapping
    /// references an undeclared identifier.
    #[error("reference error: {}", render_issues(.0))]
    Reference(Vec<ValidationIssue>),
    /// Any other invariant violation.
    #[error("invalid configuration: {}", render_issues(.0))]
    Invalid(Vec<ValidationIssue>),
}

impl LoadError {
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            LoadError::Schema(_) => &[],
            LoadError::Order(issues) | LoadError::Reference(issues) | LoadError::Invalid(issues) => {
                issues
            }
        }
    }
}

fn render_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ValidationIssue::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn parse_document(source: &str) -> Result<MachineDocument, LoadError> {
    let document: MachineDocument =
        serde_json::from_str(source).map_err(|e| LoadError::Schema(e.to_string()))?;
    if document.schema_version != SCHEMA_VERSION {
        return Err(LoadError::Schema(format!(
            "unsupported schema_version {} (expected {})",
            document.schema_version, SCHEMA_VERSION
        )));
    }
    Ok(document)
}

/// Loads and validates a machine definition from JSON text.
pub fn load_machine_definition(source: &str) -> Result<MachineDefinition, LoadError> {
    let document = parse_document(source)?;
    let issues = validate_document(&document);
    if !issues.is_empty() {
        let classify = |class: IssueClass| issues.iter().any(|i| i.class() == class);
        return Err(if classify(IssueClass::Order) {
            LoadError::Order(issues)
        } else if classify(IssueClass::Reference) {
            LoadError::Reference(issues)
        } else {
            LoadError::Invalid(issues)
        });
    }
    Ok(build_definition(&document))
}

/// Loads just the process description (the tuple O, U, V, W plus rules).
pub fn load_process_description(source: &str) -> Result<ProcessDescription, LoadError> {
    load_machine_definition(source).map(|def| def.process)
}

/// Builds the domain model from a document that already passed validation.
fn build_definition(document: &MachineDocument) -> MachineDefinition {
    let stations: Vec<StationInfo> = document
        .stations
        .iter()
        .map(|s| StationInfo {
            index: StationIndex::new(s.index).expect("validated station index"),
            role: s.role,
            name: s.name.clone(),
        })
        .collect();
    let station_count = stations.len() as u32;

    let mut transitions = BTreeMap::new();
    for item in &document.transitions.items {
        let transition = StateTransition {
            id: TransitionId(item.id),
            station: StationIndex::new(item.station).expect("validated station ref"),
            from_state: ProductState(item.from_state),
            to_state: ProductState(item.to_state),
            check: item.check,
            label: item.label.clone(),
            duration_events: item.duration_events.as_ref().map(|d| DurationSpec {
                sensor: SensorId(d.sensor.clone()),
                start_occurrence: d.start_occurrence,
                end_occurrence: d.end_occurrence,
            }),
        };
        transitions.insert(transition.id, transition);
    }

    let order: Vec<ProductionStep> = stations
        .iter()
        .map(|station| ProductionStep {
            index: station.index,
            transitions: transitions
                .values()
                .filter(|t| t.station == station.index)
                .map(|t| t.id)
                .collect(),
        })
        .collect();

    let mut timings = BTreeMap::new();
    for entry in &document.timings {
        let subject = timing_subject(entry.transition, entry.rotation).expect("validated timing");
        timings.insert(subject, InternalTime::new(entry.nominal).expect("validated nominal"));
    }

    let rotations: Vec<Rotation> = (1..=station_count)
        .map(|i| {
            let to = if i == station_count { 1 } else { i + 1 };
            Rotation {
                id: RotationId(i),
                from_position: StationIndex::new(i).expect("i >= 1"),
                to_position: StationIndex::new(to).expect("to >= 1"),
                expected_duration: timings
                    .get(&TimingSubject::Rotation(RotationId(i)))
                    .copied()
                    .expect("validated rotation timing"),
            }
        })
        .collect();

    let sensor_to_transition: BTreeMap<SensorId, TransitionId> = document
        .sensor_to_transition
        .iter()
        .map(|e| (SensorId(e.sensor.clone()), TransitionId(e.transition)))
        .collect();
    let sensor_to_tool: BTreeMap<SensorId, ToolId> = document
        .sensor_to_tool
        .iter()
        .map(|e| (SensorId(e.sensor.clone()), ToolId(e.tool.clone())))
        .collect();

    let causal_rules: Vec<CausalRule> = document
        .causal_rules
        .iter()
        .map(|rule| CausalRule {
            trigger_sensor: SensorId(rule.trigger_sensor.clone()),
            deviation: rule.deviation,
            candidates: rule.candidates.iter().map(candidate_from_doc).collect(),
            discriminators: rule
                .discriminators
                .iter()
                .map(|d| Discriminator {
                    candidate: d.candidate,
                    sensor: SensorId(d.sensor.clone()),
                    interval: Interval::new(d.lower, d.upper),
                })
                .collect(),
        })
        .collect();

    let values: BTreeMap<SensorId, ExpectedValue> = document
        .expected_values
        .sensors
        .iter()
        .map(|e| {
            (
                SensorId(e.sensor.clone()),
                ExpectedValue {
                    sensor: SensorId(e.sensor.clone()),
                    nominal: e.nominal,
                    tol_below: e.tol_below,
                    tol_above: e.tol_above,
                },
            )
        })
        .collect();

    let mut timing_windows = BTreeMap::new();
    for tolerance in &document.expected_values.timing_tolerances {
        let subject =
            timing_subject(tolerance.transition, tolerance.rotation).expect("validated tolerance");
        if let Some(nominal) = timings.get(&subject) {
            timing_windows.insert(
                subject,
                Interval::new(
                    nominal.seconds() - tolerance.tol_below,
                    nominal.seconds() + tolerance.tol_above,
                ),
            );
        }
    }

    MachineDefinition {
        process: ProcessDescription {
            stations,
            order,
            transitions,
            rotations,
            timings,
            sensor_to_transition,
            sensor_to_tool,
            causal_rules,
            state_count: document.transitions.state_count,
        },
        expected: ExpectedValueSet { values, timing_windows },
    }
}

pub(crate) fn timing_subject(transition: Option<u32>, rotation: Option<u32>) -> Option<TimingSubject> {
    match (transition, rotation) {
        (Some(t), None) => Some(TimingSubject::Transition(TransitionId(t))),
        (None, Some(r)) => Some(TimingSubject::Rotation(RotationId(r))),
        _ => None,
    }
}

fn candidate_from_doc(candidate: &CandidateDoc) -> CandidateCause {
    match candidate {
        CandidateDoc::ToolFault { tool, step } => CandidateCause::tool_fault(
            ToolId(tool.clone()),
            StationIndex::new(*step).expect("validated candidate step"),
        ),
        CandidateDoc::UpstreamProductFault { description, step } => CandidateCause::upstream(
            description.clone(),
            StationIndex::new(*step).expect("validated candidate step"),
        ),
    }
}

/// Lossless document view of a definition; `load(serialize(m))` returns an
/// equal definition.
pub fn definition_to_document(definition: &MachineDefinition) -> MachineDocument {
    let process = &definition.process;
    let expected = &definition.expected;

    let subject_doc = |subject: &TimingSubject| match subject {
        TimingSubject::Transition(id) => (Some(id.0), None),
        TimingSubject::Rotation(id) => (None, Some(id.0)),
    };

    let mut timing_docs: Vec<TimingDoc> = Vec::new();
    let mut subjects: Vec<&TimingSubject> = process.timings.keys().collect();
    subjects.sort();
    for subject in subjects {
        let (transition, rotation) = subject_doc(subject);
        timing_docs.push(TimingDoc {
            transition,
            rotation,
            nominal: process.timings[subject].seconds(),
        });
    }

    let mut tolerance_docs: Vec<TimingToleranceDoc> = Vec::new();
    for (subject, window) in &expected.timing_windows {
        let (transition, rotation) = subject_doc(subject);
        let nominal = process.timings.get(subject).map(|t| t.seconds()).unwrap_or(0.0);
        tolerance_docs.push(TimingToleranceDoc {
            transition,
            rotation,
            tol_below: nominal - window.lo,
            tol_above: window.hi - nominal,
        });
    }

    MachineDocument {
        schema_version: SCHEMA_VERSION,
        stations: process
            .stations
            .iter()
            .map(|s| StationDoc { index: s.index.get(), role: s.role, name: s.name.clone() })
            .collect(),
        transitions: TransitionsDoc {
            state_count: process.state_count,
            items: process
                .transitions
                .values()
                .map(|t| TransitionDoc {
                    id: t.id.0,
                    station: t.station.get(),
                    from_state: t.from_state.0,
                    to_state: t.to_state.0,
                    check: t.check,
                    label: t.label.clone(),
                    duration_events: t.duration_events.as_ref().map(|d| DurationSpecDoc {
                        sensor: d.sensor.0.clone(),
                        start_occurrence: d.start_occurrence,
                        end_occurrence: d.end_occurrence,
                    }),
                })
                .collect(),
        },
        timings: timing_docs,
        sensor_to_transition: process
            .sensor_to_transition
            .iter()
            .map(|(s, t)| SensorTransitionDoc { sensor: s.0.clone(), transition: t.0 })
            .collect(),
        sensor_to_tool: process
            .sensor_to_tool
            .iter()
            .map(|(s, t)| SensorToolDoc { sensor: s.0.clone(), tool: t.0.clone() })
            .collect(),
        expected_values: ExpectedValuesDoc {
            sensors: expected
                .values
                .values()
                .map(|e| ExpectedSensorDoc {
                    sensor: e.sensor.0.clone(),
                    nominal: e.nominal,
                    tol_below: e.tol_below,
                    tol_above: e.tol_above,
                })
                .collect(),
            timing_tolerances: tolerance_docs,
        },
        causal_rules: process
            .causal_rules
            .iter()
            .map(|rule| CausalRuleDoc {
                trigger_sensor: rule.trigger_sensor.0.clone(),
                deviation: rule.deviation,
                candidates: rule
                    .candidates
                    .iter()
                    .map(|c| match &c.kind {
                        crate::diagnosis::CandidateKind::ToolFault { tool } => {
                            CandidateDoc::ToolFault { tool: tool.0.clone(), step: c.step.get() }
                        }
                        crate::diagnosis::CandidateKind::UpstreamProductFault { description } => {
                            CandidateDoc::UpstreamProductFault {
                                description: description.clone(),
                                step: c.step.get(),
                            }
                        }
                    })
                    .collect(),
                discriminators: rule
                    .discriminators
                    .iter()
                    .map(|d| DiscriminatorDoc {
                        candidate: d.candidate,
                        sensor: d.sensor.0.clone(),
                        lower: d.interval.lo,
                        upper: d.interval.hi,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn definition_to_json(definition: &MachineDefinition) -> String {
    serde_json::to_string_pretty(&definition_to_document(definition)).expect("document serializes")
}

impl fmt::Display for MachineDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} stations, {} transitions, {} sensors",
            self.process.stations.len(),
            self.process.transitions.len(),
            self.process.sensor_to_transition.len()
        )
    }
}
