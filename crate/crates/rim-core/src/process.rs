//! Process model of a rotary indexing machine.
//!
//! A RIM carries products on an indexing table past fixed tool stations.
//! From the product's perspective the path is linear: the product enters at
//! station 1, sees every station exactly once and leaves the machine at the
//! last station before the one where it entered. The [`ProcessDescription`]
//! captures everything diagnosis needs to know about that path: the ordered
//! production steps, the expected timings of every state transition and
//! rotation, the mapping of sensors onto the state transition they report
//! (`V`) and the mapping of tool-position sensors onto their tool (`W`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnosis::CausalRule;

/// 1-based position on the indexing table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct StationIndex(u32);

impl StationIndex {
    pub fn new(value: u32) -> Option<Self> {
        (value >= 1).then_some(StationIndex(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for StationIndex {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        StationIndex::new(value).ok_or_else(|| "station index must be >= 1".to_string())
    }
}

impl From<StationIndex> for u32 {
    fn from(value: StationIndex) -> u32 {
        value.0
    }
}

impl fmt::Display for StationIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Opaque product state identifier (a natural number in 1..=state_count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductState(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionId(pub u32);

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotationId(pub u32);

impl fmt::Display for RotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Case-sensitive sensor identifier, e.g. `st4.jack_cylinder.position`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub String);

impl SensorId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for SensorId {
    fn from(s: &str) -> Self {
        SensorId(s.to_string())
    }
}

/// Case-sensitive tool identifier, e.g. `st4.jack_cylinder`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolId(pub String);

impl ToolId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for ToolId {
    fn from(s: &str) -> Self {
        ToolId(s.to_string())
    }
}

/// Seconds since the product entered production step 1. Non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct InternalTime(f64);

impl InternalTime {
    pub const ZERO: InternalTime = InternalTime(0.0);

    pub fn new(seconds: f64) -> Option<Self> {
        (seconds.is_finite() && seconds >= 0.0).then_some(InternalTime(seconds))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Total ordering for sorting event streams.
    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TryFrom<f64> for InternalTime {
    type Error = String;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        InternalTime::new(value).ok_or_else(|| "internal time must be finite and >= 0".to_string())
    }
}

impl From<InternalTime> for f64 {
    fn from(value: InternalTime) -> f64 {
        value.0
    }
}

impl fmt::Display for InternalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// What a station does to the product passing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationRole {
    Input,
    Process,
    Quality,
    EjectOk,
    EjectNotOk,
}

impl StationRole {
    pub fn is_eject(self) -> bool {
        matches!(self, StationRole::EjectOk | StationRole::EjectNotOk)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationInfo {
    pub index: StationIndex,
    pub role: StationRole,
    pub name: String,
}

/// Event-role tags declaring how a transition's duration is measured: the
/// time between the nth and mth event of one sensor within the step slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSpec {
    pub sensor: SensorId,
    pub start_occurrence: u32,
    pub end_occurrence: u32,
}

/// A change in the product's characteristics performed at one station.
///
/// Quality-control inspections are declared no-op checks (`check = true`,
/// `from_state == to_state`): they observe the product without changing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTransition {
    pub id: TransitionId,
    pub station: StationIndex,
    pub from_state: ProductState,
    pub to_state: ProductState,
    pub check: bool,
    pub label: String,
    pub duration_events: Option<DurationSpec>,
}

/// All state transitions between two rotations; coincides with one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionStep {
    pub index: StationIndex,
    pub transitions: Vec<TransitionId>,
}

/// One table index motion, moving every product to its next position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub id: RotationId,
    pub from_position: StationIndex,
    pub to_position: StationIndex,
    pub expected_duration: InternalTime,
}

/// A timed element of the process: one state transition or one rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingSubject {
    Transition(TransitionId),
    Rotation(RotationId),
}

impl fmt::Display for TimingSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingSubject::Transition(id) => write!(f, "transition {id}"),
            TimingSubject::Rotation(id) => write!(f, "rotation {id}"),
        }
    }
}

/// The tuple (O, U, V, W) describing the machine's production process,
/// extended with the causal rule base used by multi-step diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDescription {
    pub stations: Vec<StationInfo>,
    /// O: production steps in ascending station order.
    pub order: Vec<ProductionStep>,
    pub transitions: BTreeMap<TransitionId, StateTransition>,
    pub rotations: Vec<Rotation>,
    /// U: expected duration of every transition and rotation.
    pub timings: BTreeMap<TimingSubject, InternalTime>,
    /// V: sensor onto the state transition it reports.
    pub sensor_to_transition: BTreeMap<SensorId, TransitionId>,
    /// W: tool-position sensor onto its tool.
    pub sensor_to_tool: BTreeMap<SensorId, ToolId>,
    pub causal_rules: Vec<CausalRule>,
    pub state_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("unknown step {0}")]
    UnknownStep(StationIndex),
    #[error("unknown sensor {0}")]
    UnknownSensor(SensorId),
}

impl ProcessDescription {
    pub fn station_count(&self) -> u32 {
        self.stations.len() as u32
    }

    pub fn station(&self, index: StationIndex) -> Option<&StationInfo> {
        self.stations.iter().find(|s| s.index == index)
    }

    pub fn step(&self, index: StationIndex) -> Option<&ProductionStep> {
        self.order.iter().find(|s| s.index == index)
    }

    pub fn transition(&self, id: TransitionId) -> Option<&StateTransition> {
        self.transitions.get(&id)
    }

    pub fn transitions_of_step(&self, step: StationIndex) -> Vec<&StateTransition> {
        self.step(step)
            .map(|s| {
                s.transitions
                    .iter()
                    .filter_map(|id| self.transitions.get(id))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// The rotation leaving `step` towards the next position.
    pub fn outbound_rotation(&self, step: StationIndex) -> Option<&Rotation> {
        self.rotations.iter().find(|r| r.from_position == step)
    }

    /// Exactly the sensors whose V-image lies in a transition of `step`,
    /// in ascending sensor-id order.
    pub fn sensors_for_step(&self, step: StationIndex) -> Result<BTreeSet<SensorId>, ProcessError> {
        let production_step = self.step(step).ok_or(ProcessError::UnknownStep(step))?;
        let step_transitions: BTreeSet<TransitionId> =
            production_step.transitions.iter().copied().collect();
        Ok(self
            .sensor_to_transition
            .iter()
            .filter(|(_, t)| step_transitions.contains(t))
            .map(|(s, _)| s.clone())
            .collect())
    }

    /// W(sensor) when the sensor reports a tool position; `None` for pure
    /// measurement sensors (pressure, quality probes).
    pub fn tool_for_sensor(&self, sensor: &SensorId) -> Result<Option<&ToolId>, ProcessError> {
        if !self.sensor_to_transition.contains_key(sensor) {
            return Err(ProcessError::UnknownSensor(sensor.clone()));
        }
        Ok(self.sensor_to_tool.get(sensor))
    }

    /// The production step owning `sensor` (via V and the transition's station).
    pub fn step_of_sensor(&self, sensor: &SensorId) -> Result<StationIndex, ProcessError> {
        let transition_id = self
            .sensor_to_transition
            .get(sensor)
            .ok_or_else(|| ProcessError::UnknownSensor(sensor.clone()))?;
        let transition = self
            .transitions
            .get(transition_id)
            .ok_or_else(|| ProcessError::UnknownSensor(sensor.clone()))?;
        Ok(transition.station)
    }

    /// Sensors reporting a given tool, in ascending id order.
    pub fn sensors_of_tool(&self, tool: &ToolId) -> Vec<&SensorId> {
        self.sensor_to_tool
            .iter()
            .filter(|(_, t)| *t == tool)
            .map(|(s, _)| s)
            .collect()
    }

    /// True when the sensor belongs to a quality-control station, i.e. its
    /// violations are symptom observations rather than root causes.
    pub fn is_quality_sensor(&self, sensor: &SensorId) -> bool {
        self.step_of_sensor(sensor)
            .ok()
            .and_then(|step| self.station(step))
            .map(|info| info.role == StationRole::Quality)
            .unwrap_or(false)
    }

    pub fn station_with_role(&self, role: StationRole) -> Option<StationIndex> {
        self.stations.iter().find(|s| s.role == role).map(|s| s.index)
    }

    /// Station where Not-OK products are reported and ejected; this is the
    /// diagnosis trigger station.
    pub fn eject_not_ok_station(&self) -> Option<StationIndex> {
        self.station_with_role(StationRole::EjectNotOk)
    }

    /// Follow rotations starting at station 1; returns the visit sequence
    /// until the path returns to station 1 or breaks.
    pub fn rotation_path_from_start(&self) -> Vec<StationIndex> {
        let start = match StationIndex::new(1) {
            Some(s) => s,
            None => return Vec::new(),
        };
        let mut path = vec![start];
        let mut current = start;
        for _ in 0..self.stations.len() {
            match self.outbound_rotation(current) {
                Some(rotation) => {
                    current = rotation.to_position;
                    if current == start {
                        return path;
                    }
                    path.push(current);
                }
                None => return path,
            }
        }
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn station_index_rejects_zero() {
        assert!(StationIndex::new(0).is_none());
        assert_eq!(StationIndex::new(4).unwrap().get(), 4);
    }

    #[test]
    fn internal_time_rejects_negative_and_nan() {
        assert!(InternalTime::new(-0.1).is_none());
        assert!(InternalTime::new(f64::NAN).is_none());
        assert_eq!(InternalTime::new(0.0).unwrap().seconds(), 0.0);
    }

    #[test]
    fn timing_subject_display() {
        assert_eq!(TimingSubject::Transition(TransitionId(4)).to_string(), "transition 4");
        assert_eq!(TimingSubject::Rotation(RotationId(3)).to_string(), "rotation 3");
    }
}
