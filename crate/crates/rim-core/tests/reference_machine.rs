//! The reference machine definition: loading, validation, lookups and the
//! step formulas built from it.

use rim_core::config::{
    definition_to_json, load_machine_definition, load_process_description, LoadError,
};
use rim_core::constraint::build_step_formula;
use rim_core::process::{RotationId, StationIndex, TimingSubject, TransitionId};
use rim_core::reference;
use rim_core::validate::{validate, ValidationIssue};

fn station(n: u32) -> StationIndex {
    StationIndex::new(n).unwrap()
}

fn reference_json_value() -> serde_json::Value {
    serde_json::from_str(reference::MACHINE_JSON).unwrap()
}

#[test]
fn reference_machine_loads_with_eight_steps() {
    let process = load_process_description(reference::MACHINE_JSON).unwrap();
    assert_eq!(process.station_count(), 8);
    assert_eq!(process.order.len(), 8);
    assert_eq!(process.transitions.len(), 8);
    assert_eq!(process.timings.len(), 16);
    // Quality control sits at 5 and 6, the ejects at 7 and 8.
    for (index, role_is_quality) in [(5, true), (6, true), (7, false), (8, false)] {
        assert_eq!(
            process.station(station(index)).unwrap().role == rim_core::process::StationRole::Quality,
            role_is_quality
        );
    }
    assert_eq!(process.eject_not_ok_station(), Some(station(8)));
}

#[test]
fn reference_machine_validates_clean() {
    let definition = reference::machine_definition();
    assert_eq!(validate(&definition), Vec::new());
}

#[test]
fn station_gap_is_an_order_error() {
    let mut doc = reference_json_value();
    let stations = doc["stations"].as_array_mut().unwrap();
    stations.remove(2); // drop station 3: leaves (1, 2, 4, ...)
    let text = serde_json::to_string(&doc).unwrap();
    match load_machine_definition(&text) {
        Err(LoadError::Order(issues)) => {
            assert!(issues.iter().any(|i| matches!(i, ValidationIssue::OrderError { .. })));
        }
        other => panic!("expected OrderError, got {other:?}"),
    }
}

#[test]
fn tool_mapping_without_transition_mapping_is_a_reference_error() {
    let mut doc = reference_json_value();
    doc["sensor_to_tool"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"sensor": "st9.x", "tool": "st9.tool"}));
    let text = serde_json::to_string(&doc).unwrap();
    match load_machine_definition(&text) {
        Err(LoadError::Reference(issues)) => {
            assert!(issues
                .iter()
                .any(|i| matches!(i, ValidationIssue::ToolSensorNotMapped { sensor } if sensor == "st9.x")));
        }
        other => panic!("expected ReferenceError, got {other:?}"),
    }
}

#[test]
fn duplicate_sensor_in_v_is_reported() {
    let mut doc = reference_json_value();
    doc["sensor_to_transition"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"sensor": "st4.pressure", "transition": 4}));
    let text = serde_json::to_string(&doc).unwrap();
    let err = load_machine_definition(&text).unwrap_err();
    assert!(err.issues().iter().any(
        |i| matches!(i, ValidationIssue::DuplicateSensor { sensor, within }
            if sensor == "st4.pressure" && within == "sensor_to_transition")
    ));
}

#[test]
fn short_timing_vector_reports_arity() {
    let mut doc = reference_json_value();
    doc["timings"].as_array_mut().unwrap().pop();
    let text = serde_json::to_string(&doc).unwrap();
    let err = load_machine_definition(&text).unwrap_err();
    assert!(err
        .issues()
        .iter()
        .any(|i| matches!(i, ValidationIssue::TimingArity { expected: 16, actual: 15 })));
    assert!(err
        .issues()
        .iter()
        .any(|i| matches!(i, ValidationIssue::MissingTiming { .. })));
}

#[test]
fn discriminator_must_sit_at_a_strictly_earlier_step() {
    let mut doc = reference_json_value();
    // Point the tell-tale at the trigger's own step.
    doc["causal_rules"][0]["discriminators"][0]["sensor"] =
        serde_json::json!("st4.jack_cylinder.position");
    let text = serde_json::to_string(&doc).unwrap();
    let err = load_machine_definition(&text).unwrap_err();
    assert!(err
        .issues()
        .iter()
        .any(|i| matches!(i, ValidationIssue::CausalRuleDiscriminatorNotEarlier { .. })));
}

#[test]
fn processing_station_without_transitions_is_an_empty_step() {
    let mut doc = reference_json_value();
    let items = doc["transitions"]["items"].as_array_mut().unwrap();
    items.retain(|t| t["station"] != 2);
    let text = serde_json::to_string(&doc).unwrap();
    let err = load_machine_definition(&text).unwrap_err();
    assert!(err
        .issues()
        .iter()
        .any(|i| matches!(i, ValidationIssue::EmptyStep { station: 2 })));
}

#[test]
fn state_keeping_transition_must_be_declared_a_check() {
    let mut doc = reference_json_value();
    doc["transitions"]["items"][1]["to_state"] = doc["transitions"]["items"][1]["from_state"].clone();
    let text = serde_json::to_string(&doc).unwrap();
    let err = load_machine_definition(&text).unwrap_err();
    assert!(err
        .issues()
        .iter()
        .any(|i| matches!(i, ValidationIssue::TransitionStateChange { transition: 2 })));
}

#[test]
fn unknown_top_level_key_is_a_schema_error() {
    let mut doc = reference_json_value();
    doc["surprise"] = serde_json::json!(1);
    let text = serde_json::to_string(&doc).unwrap();
    assert!(matches!(load_machine_definition(&text), Err(LoadError::Schema(_))));
}

#[test]
fn wrong_schema_version_is_a_schema_error() {
    let mut doc = reference_json_value();
    doc["schema_version"] = serde_json::json!(2);
    let text = serde_json::to_string(&doc).unwrap();
    assert!(matches!(load_machine_definition(&text), Err(LoadError::Schema(_))));
}

#[test]
fn sensors_for_step_examples() {
    let process = load_process_description(reference::MACHINE_JSON).unwrap();
    let step4: Vec<String> = process
        .sensors_for_step(station(4))
        .unwrap()
        .into_iter()
        .map(|s| s.0)
        .collect();
    assert_eq!(step4, vec!["st4.jack_cylinder.position", "st4.pressure"]);
    assert!(process.sensors_for_step(station(7)).unwrap().is_empty());
    assert!(process.sensors_for_step(station(99)).is_err());
}

#[test]
fn tool_for_sensor_examples() {
    let process = load_process_description(reference::MACHINE_JSON).unwrap();
    assert_eq!(
        process.tool_for_sensor(&"st4.jack_cylinder.position".into()).unwrap().unwrap().0,
        "st4.jack_cylinder"
    );
    assert_eq!(process.tool_for_sensor(&"st6.tightness_probe".into()).unwrap(), None);
    assert!(process.tool_for_sensor(&"nonexistent".into()).is_err());
}

#[test]
fn sensors_partition_across_steps() {
    let process = load_process_description(reference::MACHINE_JSON).unwrap();
    let mut seen = std::collections::BTreeMap::new();
    for step in &process.order {
        for sensor in process.sensors_for_step(step.index).unwrap() {
            *seen.entry(sensor).or_insert(0u32) += 1;
        }
    }
    assert_eq!(seen.len(), process.sensor_to_transition.len());
    assert!(seen.values().all(|count| *count == 1));
}

#[test]
fn rotation_path_visits_every_station_once() {
    let process = load_process_description(reference::MACHINE_JSON).unwrap();
    let path = process.rotation_path_from_start();
    let expected: Vec<StationIndex> = (1..=8).map(station).collect();
    assert_eq!(path, expected);
}

#[test]
fn definition_round_trips_through_serialization() {
    let definition = reference::machine_definition();
    let serialized = definition_to_json(&definition);
    let reloaded = load_machine_definition(&serialized).unwrap();
    assert_eq!(reloaded, definition);
}

#[test]
fn step4_formula_carries_value_bands_and_timing_windows() {
    let definition = reference::machine_definition();
    let formula = build_step_formula(&definition.expected, &definition.process, station(4)).unwrap();
    assert_eq!(formula.value_constraints.len(), 2);
    let jack = &formula.value_constraints[0];
    assert_eq!(jack.sensor.0, "st4.jack_cylinder.position");
    assert_eq!((jack.admissible.lo, jack.admissible.hi), (1.0, 1.0));
    let pressure = &formula.value_constraints[1];
    assert_eq!(pressure.sensor.0, "st4.pressure");
    assert_eq!((pressure.admissible.lo, pressure.admissible.hi), (4.5, 5.5));

    let subjects: Vec<TimingSubject> =
        formula.timing_constraints.iter().map(|t| t.subject).collect();
    assert_eq!(
        subjects,
        vec![
            TimingSubject::Transition(TransitionId(4)),
            TimingSubject::Rotation(RotationId(4)),
        ]
    );
    let press = &formula.timing_constraints[0];
    assert_eq!((press.window.lo, press.window.hi), (0.4, 0.7));
    assert!(press.derive.is_some());
}

#[test]
fn step7_formula_has_only_the_eject_actuation_windows() {
    let definition = reference::machine_definition();
    let formula = build_step_formula(&definition.expected, &definition.process, station(7)).unwrap();
    assert!(formula.value_constraints.is_empty());
    let subjects: Vec<TimingSubject> =
        formula.timing_constraints.iter().map(|t| t.subject).collect();
    assert_eq!(
        subjects,
        vec![
            TimingSubject::Transition(TransitionId(7)),
            TimingSubject::Rotation(RotationId(7)),
        ]
    );
    // Sensorless actuation: the window exists but nothing derives it.
    assert!(formula.timing_constraints[0].derive.is_none());
}

#[test]
fn unknown_step_formula_is_rejected() {
    let definition = reference::machine_definition();
    assert!(build_step_formula(&definition.expected, &definition.process, station(9)).is_err());
}
