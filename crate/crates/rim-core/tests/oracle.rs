//! Differential tests: `check_sat` against a deliberately naive evaluator
//! that re-checks every constraint against every event, plus the
//! monotonicity properties of interval satisfaction.

use proptest::prelude::*;

use rim_core::constraint::{
    check_sat, ConflictSubject, Interval, SatStatus, StepFormula, TimingConstraint, TraceEvent,
    ValueConstraint,
};
use rim_core::process::{
    DurationSpec, InternalTime, RotationId, SensorId, StationIndex, TimingSubject, TransitionId,
};

const SENSOR_POOL: [&str; 6] = ["s0", "s1", "s2", "s3", "s4", "s5"];

/// Naive re-evaluation: a value constraint holds when some event of its
/// sensor is inside the interval; a timing constraint holds when its
/// duration is underivable or inside the window. Returns violated subjects.
fn brute_force(formula: &StepFormula, events: &[TraceEvent]) -> Vec<ConflictSubject> {
    let mut violated = Vec::new();
    for constraint in &formula.value_constraints {
        let satisfied = events.iter().any(|e| {
            e.sensor == constraint.sensor
                && e.value >= constraint.admissible.lo
                && e.value <= constraint.admissible.hi
        });
        if !satisfied {
            violated.push(ConflictSubject::Sensor(constraint.sensor.clone()));
        }
    }
    for constraint in &formula.timing_constraints {
        let Some(spec) = &constraint.derive else { continue };
        let mut stamps: Vec<f64> = events
            .iter()
            .filter(|e| e.sensor == spec.sensor)
            .map(|e| e.time.seconds())
            .collect();
        stamps.sort_by(f64::total_cmp);
        let start = stamps.get(spec.start_occurrence as usize - 1);
        let end = stamps.get(spec.end_occurrence as usize - 1);
        if let (Some(start), Some(end)) = (start, end) {
            let duration = end - start;
            if duration < constraint.window.lo || duration > constraint.window.hi {
                violated.push(ConflictSubject::Timing(constraint.subject));
            }
        }
    }
    violated
}

fn sensor_strategy() -> impl Strategy<Value = SensorId> {
    prop::sample::select(SENSOR_POOL.as_slice()).prop_map(SensorId::from)
}

fn interval_strategy() -> impl Strategy<Value = Interval> {
    (-5.0..5.0f64, 0.0..4.0f64).prop_map(|(lo, width)| Interval::new(lo, lo + width))
}

fn value_constraint_strategy() -> impl Strategy<Value = ValueConstraint> {
    (sensor_strategy(), interval_strategy())
        .prop_map(|(sensor, admissible)| ValueConstraint { sensor, admissible })
}

fn timing_constraint_strategy() -> impl Strategy<Value = TimingConstraint> {
    (
        0u32..8,
        prop::bool::ANY,
        (0.0..3.0f64, 0.0..2.0f64),
        sensor_strategy(),
        1u32..3,
        prop::option::of(Just(())),
    )
        .prop_map(|(id, is_rotation, (lo, width), sensor, start, derive)| {
            let subject = if is_rotation {
                TimingSubject::Rotation(RotationId(id))
            } else {
                TimingSubject::Transition(TransitionId(id))
            };
            TimingConstraint {
                subject,
                window: Interval::new(lo, lo + width),
                derive: derive.map(|_| DurationSpec {
                    sensor,
                    start_occurrence: start,
                    end_occurrence: start + 1,
                }),
            }
        })
}

fn formula_strategy() -> impl Strategy<Value = StepFormula> {
    (
        prop::collection::vec(value_constraint_strategy(), 0..5),
        prop::collection::vec(timing_constraint_strategy(), 0..3),
    )
        .prop_map(|(mut value_constraints, timing_constraints)| {
            // One constraint per sensor, as build_step_formula produces.
            value_constraints.sort_by(|a, b| a.sensor.cmp(&b.sensor));
            value_constraints.dedup_by(|a, b| a.sensor == b.sensor);
            StepFormula {
                step: StationIndex::new(1).unwrap(),
                value_constraints,
                timing_constraints,
            }
        })
}

fn events_strategy() -> impl Strategy<Value = Vec<TraceEvent>> {
    prop::collection::vec(
        (0.0..10.0f64, sensor_strategy(), -6.0..6.0f64),
        0..12,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .map(|(t, sensor, value)| TraceEvent {
                time: InternalTime::new(t).unwrap(),
                sensor,
                value,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn check_sat_matches_brute_force(formula in formula_strategy(), events in events_strategy()) {
        let result = check_sat(&formula, &events);
        let mut expected = brute_force(&formula, &events);
        prop_assert_eq!(
            result.status,
            if expected.is_empty() { SatStatus::Sat } else { SatStatus::Unsat }
        );
        let mut actual: Vec<ConflictSubject> =
            result.violations.iter().map(|v| v.subject.clone()).collect();
        actual.sort();
        expected.sort();
        prop_assert_eq!(actual, expected);
        prop_assert_eq!(result.status == SatStatus::Sat, result.violations.is_empty());
    }

    #[test]
    fn adding_an_in_band_event_never_breaks_sat(
        formula in formula_strategy(),
        events in events_strategy(),
        pick in 0usize..5,
        t in 0.0..10.0f64,
    ) {
        // Only value satisfaction is monotone; timing derivation shifts with
        // extra occurrences, so keep the new event off the derivation sensors.
        let derivation_sensors: Vec<&SensorId> = formula
            .timing_constraints
            .iter()
            .filter_map(|c| c.derive.as_ref().map(|d| &d.sensor))
            .collect();
        let candidates: Vec<&ValueConstraint> = formula
            .value_constraints
            .iter()
            .filter(|c| !derivation_sensors.contains(&&c.sensor))
            .collect();
        prop_assume!(!candidates.is_empty());
        let constraint = candidates[pick % candidates.len()];

        let before = check_sat(&formula, &events);
        let mut extended = events.clone();
        extended.push(TraceEvent {
            time: InternalTime::new(t).unwrap(),
            sensor: constraint.sensor.clone(),
            value: (constraint.admissible.lo + constraint.admissible.hi) / 2.0,
        });
        let after = check_sat(&formula, &extended);

        if before.status == SatStatus::Sat {
            prop_assert_eq!(after.status, SatStatus::Sat);
        }
        // The targeted subject can only improve.
        let subject = ConflictSubject::Sensor(constraint.sensor.clone());
        prop_assert!(!after.violations.iter().any(|v| v.subject == subject));
    }

    #[test]
    fn removing_a_sensors_events_leaves_other_subjects_alone(
        formula in formula_strategy(),
        events in events_strategy(),
        pick in 0usize..SENSOR_POOL.len(),
    ) {
        let removed = SensorId::from(SENSOR_POOL[pick]);
        let before = check_sat(&formula, &events);
        let reduced: Vec<TraceEvent> =
            events.iter().filter(|e| e.sensor != removed).cloned().collect();
        let after = check_sat(&formula, &reduced);

        let touches_removed = |subject: &ConflictSubject| match subject {
            ConflictSubject::Sensor(s) => s == &removed,
            ConflictSubject::Timing(t) => formula
                .timing_constraints
                .iter()
                .any(|c| c.subject == *t
                    && c.derive.as_ref().map(|d| d.sensor == removed).unwrap_or(false)),
        };
        let before_subjects: Vec<&ConflictSubject> = before
            .violations
            .iter()
            .map(|v| &v.subject)
            .filter(|s| !touches_removed(s))
            .collect();
        for subject in before_subjects {
            prop_assert!(
                after.violations.iter().any(|v| &v.subject == subject),
                "violation on {subject} vanished when removing {removed}"
            );
        }
    }
}
