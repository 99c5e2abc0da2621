//! Interval consistency checking over sensor traces.
//!
//! Expected values with asymmetric tolerance bands and expected timings with
//! duration windows form, per production step, a conjunction of interval
//! constraints. `check_sat` decides whether a step's measured events are
//! consistent with that conjunction and, when they are not, names every
//! violated constraint. The formulas never need more than conjunctions of
//! linear bounds, so the decision procedure is direct interval evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnosis::{CandidateCause, Confirmation, ExplanationMemory};
use crate::process::{
    DurationSpec, InternalTime, ProcessDescription, ProcessError, SensorId, StationIndex,
    TimingSubject,
};

use std::collections::BTreeMap;

/// Closed admissible interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Nominal sensor value with an asymmetric tolerance band. The admissible
/// interval is `[nominal - tol_below, nominal + tol_above]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValue {
    pub sensor: SensorId,
    pub nominal: f64,
    pub tol_below: f64,
    pub tol_above: f64,
}

impl ExpectedValue {
    pub fn interval(&self) -> Interval {
        Interval::new(self.nominal - self.tol_below, self.nominal + self.tol_above)
    }
}

/// The expected-value side of a diagnosis problem: nominal sensor bands plus
/// admissible duration windows per transition and rotation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectedValueSet {
    pub values: BTreeMap<SensorId, ExpectedValue>,
    pub timing_windows: BTreeMap<TimingSubject, Interval>,
}

/// One timestamped sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: InternalTime,
    pub sensor: SensorId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueConstraint {
    pub sensor: SensorId,
    pub admissible: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConstraint {
    pub subject: TimingSubject,
    pub window: Interval,
    /// How the duration is derived from event timestamps; a constraint
    /// without a derivation (rotations, sensorless actuations) is checked
    /// only when a duration can be computed, i.e. never from a single slice.
    pub derive: Option<DurationSpec>,
}

/// The per-step conjunction `E ∧ M` that measured values are checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFormula {
    pub step: StationIndex,
    pub value_constraints: Vec<ValueConstraint>,
    pub timing_constraints: Vec<TimingConstraint>,
}

/// Observed side of a violation; a constrained sensor with no event at all
/// reports `Missing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    Missing,
    Value(f64),
}

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observed::Missing => write!(f, "missing"),
            Observed::Value(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Value,
    Timing,
}

/// Identifier of a violated constraint: a sensor or a timing subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictSubject {
    Sensor(SensorId),
    Timing(TimingSubject),
}

impl fmt::Display for ConflictSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConflictSubject::Sensor(s) => s.fmt(f),
            ConflictSubject::Timing(t) => t.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: ConflictSubject,
    pub observed: Observed,
    pub admissible: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatStatus {
    Sat,
    Unsat,
}

/// Outcome of one `check_sat` call. `status == Sat` iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatResult {
    pub status: SatStatus,
    pub violations: Vec<Violation>,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        self.status == SatStatus::Sat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("result is not Unsat")]
pub struct NotUnsat;

/// Builds the step formula: one interval constraint per expected sensor of
/// the step, one duration window per transition of the step plus the
/// outbound rotation.
pub fn build_step_formula(
    expected: &ExpectedValueSet,
    process: &ProcessDescription,
    step: StationIndex,
) -> Result<StepFormula, ProcessError> {
    let sensors = process.sensors_for_step(step)?;
    let value_constraints = sensors
        .iter()
        .filter_map(|sensor| {
            expected.values.get(sensor).map(|ev| ValueConstraint {
                sensor: sensor.clone(),
                admissible: ev.interval(),
            })
        })
        .collect();

    let mut timing_constraints = Vec::new();
    for transition in process.transitions_of_step(step) {
        let subject = TimingSubject::Transition(transition.id);
        if let Some(window) = expected.timing_windows.get(&subject) {
            timing_constraints.push(TimingConstraint {
                subject,
                window: *window,
                derive: transition.duration_events.clone(),
            });
        }
    }
    if let Some(rotation) = process.outbound_rotation(step) {
        let subject = TimingSubject::Rotation(rotation.id);
        if let Some(window) = expected.timing_windows.get(&subject) {
            timing_constraints.push(TimingConstraint {
                subject,
                window: *window,
                derive: None,
            });
        }
    }

    Ok(StepFormula {
        step,
        value_constraints,
        timing_constraints,
    })
}

/// Derives a duration from the slice per the event-role tags: time of the
/// `end_occurrence`-th event of the sensor minus the `start_occurrence`-th,
/// counting occurrences in timestamp order. `None` when either is absent.
pub fn derive_duration(spec: &DurationSpec, events: &[TraceEvent]) -> Option<f64> {
    let mut times: Vec<f64> = events
        .iter()
        .filter(|e| e.sensor == spec.sensor)
        .map(|e| e.time.seconds())
        .collect();
    times.sort_by(f64::total_cmp);
    if spec.start_occurrence == 0 || spec.start_occurrence >= spec.end_occurrence {
        return None;
    }
    let start = *times.get(spec.start_occurrence as usize - 1)?;
    let end = *times.get(spec.end_occurrence as usize - 1)?;
    Some(end - start)
}

/// Decides consistency of a step's measured events against its formula.
///
/// A value constraint is satisfied when any event of its sensor lies inside
/// the admissible interval; a violated constraint reports the last observed
/// value, or `Missing` when the sensor produced no event at all. A timing
/// constraint is checked when its duration can be derived from the slice.
/// Every violated constraint is reported, not just the first.
pub fn check_sat(formula: &StepFormula, events: &[TraceEvent]) -> SatResult {
    let mut violations = Vec::new();

    for constraint in &formula.value_constraints {
        let mut last: Option<&TraceEvent> = None;
        let mut satisfied = false;
        for event in events.iter().filter(|e| e.sensor == constraint.sensor) {
            if constraint.admissible.contains(event.value) {
                satisfied = true;
            }
            match last {
                Some(prev) if prev.time.total_cmp(&event.time).is_gt() => {}
                _ => last = Some(event),
            }
        }
        if !satisfied {
            violations.push(Violation {
                kind: ViolationKind::Value,
                subject: ConflictSubject::Sensor(constraint.sensor.clone()),
                observed: last.map(|e| Observed::Value(e.value)).unwrap_or(Observed::Missing),
                admissible: constraint.admissible,
            });
        }
    }

    for constraint in &formula.timing_constraints {
        let Some(spec) = &constraint.derive else { continue };
        let Some(duration) = derive_duration(spec, events) else { continue };
        if !constraint.window.contains(duration) {
            violations.push(Violation {
                kind: ViolationKind::Timing,
                subject: ConflictSubject::Timing(constraint.subject),
                observed: Observed::Value(duration),
                admissible: constraint.window,
            });
        }
    }

    SatResult {
        status: if violations.is_empty() { SatStatus::Sat } else { SatStatus::Unsat },
        violations,
    }
}

/// The subjects of all violations: value conflicts before timing conflicts,
/// each group in ascending id order, duplicates removed.
pub fn extract_conflict_names(result: &SatResult) -> Result<Vec<ConflictSubject>, NotUnsat> {
    if result.is_sat() {
        return Err(NotUnsat);
    }
    let mut values: Vec<ConflictSubject> = Vec::new();
    let mut timings: Vec<ConflictSubject> = Vec::new();
    for violation in &result.violations {
        match violation.kind {
            ViolationKind::Value => values.push(violation.subject.clone()),
            ViolationKind::Timing => timings.push(violation.subject.clone()),
        }
    }
    values.sort();
    values.dedup();
    timings.sort();
    timings.dedup();
    values.extend(timings);
    Ok(values)
}

/// Outcome of replaying remembered ambiguities against an earlier step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MemoryResolution {
    Confirmed(Vec<Confirmation>),
    StillAmbiguous,
}

/// Checks every remembered ambiguous fault against the current (earlier in
/// product order) step slice. An entry is confirmed when exactly one of its
/// candidates has a discriminator whose tell-tale interval is violated by
/// the slice while every rival candidate's tool sensors check consistent.
/// Entries are never dropped here; the caller collapses confirmed ones.
pub fn check_sat_with_memory(
    expected: &ExpectedValueSet,
    process: &ProcessDescription,
    events: &[TraceEvent],
    memory: &ExplanationMemory,
) -> MemoryResolution {
    let mut confirmations = Vec::new();

    for (entry_index, entry) in memory.entries.iter().enumerate() {
        let rule = process
            .causal_rules
            .iter()
            .find(|r| r.matches_violation(&entry.trigger));
        let Some(rule) = rule else { continue };

        let mut fired: Vec<&CandidateCause> = Vec::new();
        for (candidate_index, candidate) in rule.candidates.iter().enumerate() {
            if !entry.candidates.contains(candidate) {
                continue;
            }
            for discriminator in rule.discriminators_for(candidate_index) {
                if discriminator_fires(&discriminator.sensor, discriminator.interval, events) {
                    fired.push(candidate);
                    break;
                }
            }
        }

        if fired.len() != 1 {
            continue;
        }
        let confirmed = fired[0];

        let rivals_consistent = entry
            .candidates
            .iter()
            .filter(|c| *c != confirmed)
            .all(|rival| rival_tool_consistent(rival, expected, process, events));
        if !rivals_consistent {
            continue;
        }

        let evidence_step = rule.discriminators.iter().find_map(|d| {
            (rule.candidates.get(d.candidate) == Some(confirmed))
                .then(|| process.step_of_sensor(&d.sensor).ok())
                .flatten()
        });

        confirmations.push(Confirmation {
            entry_index,
            origin_step: entry.origin_step,
            cause: confirmed.clone(),
            evidence_step,
        });
    }

    if confirmations.is_empty() {
        MemoryResolution::StillAmbiguous
    } else {
        MemoryResolution::Confirmed(confirmations)
    }
}

/// A tell-tale fires when the slice carries events for the sensor and none
/// of them lies inside the interval. A silent sensor cannot confirm.
fn discriminator_fires(sensor: &SensorId, interval: Interval, events: &[TraceEvent]) -> bool {
    let mut seen = false;
    for event in events.iter().filter(|e| &e.sensor == sensor) {
        seen = true;
        if interval.contains(event.value) {
            return false;
        }
    }
    seen
}

fn rival_tool_consistent(
    rival: &CandidateCause,
    expected: &ExpectedValueSet,
    process: &ProcessDescription,
    events: &[TraceEvent],
) -> bool {
    let Some(tool) = rival.tool() else { return true };
    for sensor in process.sensors_of_tool(tool) {
        let Some(ev) = expected.values.get(sensor) else { continue };
        let interval = ev.interval();
        let mut seen = false;
        let mut in_band = false;
        for event in events.iter().filter(|e| &e.sensor == sensor) {
            seen = true;
            if interval.contains(event.value) {
                in_band = true;
            }
        }
        if seen && !in_band {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::TransitionId;

    fn event(t: f64, sensor: &str, value: f64) -> TraceEvent {
        TraceEvent {
            time: InternalTime::new(t).unwrap(),
            sensor: sensor.into(),
            value,
        }
    }

    fn pressure_formula() -> StepFormula {
        StepFormula {
            step: StationIndex::new(4).unwrap(),
            value_constraints: vec![ValueConstraint {
                sensor: "st4.pressure".into(),
                admissible: Interval::new(4.5, 5.5),
            }],
            timing_constraints: vec![],
        }
    }

    #[test]
    fn in_band_event_is_sat() {
        let result = check_sat(&pressure_formula(), &[event(0.6, "st4.pressure", 5.2)]);
        assert!(result.is_sat());
        assert!(result.violations.is_empty());
    }

    #[test]
    fn out_of_band_event_is_unsat_with_observed_value() {
        let result = check_sat(&pressure_formula(), &[event(0.6, "st4.pressure", 3.9)]);
        assert_eq!(result.status, SatStatus::Unsat);
        assert_eq!(result.violations.len(), 1);
        let v = &result.violations[0];
        assert_eq!(v.kind, ViolationKind::Value);
        assert_eq!(v.subject, ConflictSubject::Sensor("st4.pressure".into()));
        assert_eq!(v.observed, Observed::Value(3.9));
        assert_eq!(v.admissible, Interval::new(4.5, 5.5));
    }

    #[test]
    fn timing_window_violation() {
        let formula = StepFormula {
            step: StationIndex::new(4).unwrap(),
            value_constraints: vec![],
            timing_constraints: vec![TimingConstraint {
                subject: TimingSubject::Transition(TransitionId(4)),
                window: Interval::new(0.4, 0.7),
                derive: Some(DurationSpec {
                    sensor: "st4.jack_cylinder.position".into(),
                    start_occurrence: 1,
                    end_occurrence: 2,
                }),
            }],
        };
        let events = [
            event(0.2, "st4.jack_cylinder.position", 1.0),
            event(1.05, "st4.jack_cylinder.position", 0.0),
        ];
        let result = check_sat(&formula, &events);
        assert_eq!(result.status, SatStatus::Unsat);
        assert_eq!(result.violations.len(), 1);
        let v = &result.violations[0];
        assert_eq!(v.kind, ViolationKind::Timing);
        assert!(matches!(v.observed, Observed::Value(d) if (d - 0.85).abs() < 1e-12));
    }

    #[test]
    fn missing_sensor_reports_missing_marker() {
        let result = check_sat(&pressure_formula(), &[]);
        assert_eq!(result.status, SatStatus::Unsat);
        assert_eq!(result.violations[0].observed, Observed::Missing);
    }

    #[test]
    fn any_in_band_event_satisfies_among_many() {
        let events = [
            event(0.1, "st4.pressure", 3.0),
            event(0.5, "st4.pressure", 5.0),
            event(0.9, "st4.pressure", 9.0),
        ];
        assert!(check_sat(&pressure_formula(), &events).is_sat());
    }

    #[test]
    fn violated_subject_reports_last_observed() {
        let events = [
            event(0.1, "st4.pressure", 3.0),
            event(0.9, "st4.pressure", 2.0),
        ];
        let result = check_sat(&pressure_formula(), &events);
        assert_eq!(result.violations[0].observed, Observed::Value(2.0));
    }

    #[test]
    fn asymmetric_tolerance_honored() {
        let ev = ExpectedValue {
            sensor: "s".into(),
            nominal: 5.0,
            tol_below: 0.5,
            tol_above: 0.2,
        };
        let formula = StepFormula {
            step: StationIndex::new(1).unwrap(),
            value_constraints: vec![ValueConstraint {
                sensor: "s".into(),
                admissible: ev.interval(),
            }],
            timing_constraints: vec![],
        };
        assert!(!check_sat(&formula, &[event(0.0, "s", 5.3)]).is_sat());
        assert!(check_sat(&formula, &[event(0.0, "s", 4.6)]).is_sat());
    }

    #[test]
    fn conflict_names_order_values_before_timings() {
        let result = SatResult {
            status: SatStatus::Unsat,
            violations: vec![
                Violation {
                    kind: ViolationKind::Timing,
                    subject: ConflictSubject::Timing(TimingSubject::Transition(TransitionId(4))),
                    observed: Observed::Value(0.85),
                    admissible: Interval::new(0.4, 0.7),
                },
                Violation {
                    kind: ViolationKind::Value,
                    subject: ConflictSubject::Sensor("st4.pressure".into()),
                    observed: Observed::Value(3.9),
                    admissible: Interval::new(4.5, 5.5),
                },
            ],
        };
        let names = extract_conflict_names(&result).unwrap();
        assert_eq!(
            names,
            vec![
                ConflictSubject::Sensor("st4.pressure".into()),
                ConflictSubject::Timing(TimingSubject::Transition(TransitionId(4))),
            ]
        );
    }

    #[test]
    fn conflict_names_on_sat_is_error() {
        let sat = SatResult { status: SatStatus::Sat, violations: vec![] };
        assert_eq!(extract_conflict_names(&sat), Err(NotUnsat));
    }

    #[test]
    fn duration_derivation_needs_both_occurrences() {
        let spec = DurationSpec {
            sensor: "s".into(),
            start_occurrence: 1,
            end_occurrence: 2,
        };
        assert_eq!(derive_duration(&spec, &[event(0.2, "s", 1.0)]), None);
        let both = [event(0.2, "s", 1.0), event(0.7, "s", 0.0)];
        assert!((derive_duration(&spec, &both).unwrap() - 0.5).abs() < 1e-12);
    }
}
