//! Fault injection descriptors for the five evaluated fault classes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::process::{SensorId, TimingSubject, TransitionId};

use super::{MachineConfig, SimError};

/// Canonical sensor roster the fault classes act on.
pub const SEAT_SENSOR: &str = "st3.feeder.position";
pub const JACK_SENSOR: &str = "st4.jack_cylinder.position";
pub const PRESSURE_SENSOR: &str = "st4.pressure";
pub const TIGHTNESS_SENSOR: &str = "st6.tightness_probe";

/// Reading a quality probe reports for a failed product.
pub const QC_FAIL_READING: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    None,
    TimingJackCylinder,
    PartWrongPosition,
    PressureSensorBroken,
    JackCylinderBroken,
    PartBroken,
}

impl FaultKind {
    /// The five evaluated fault classes, in evaluation row order.
    pub const EVALUATED: [FaultKind; 5] = [
        FaultKind::TimingJackCylinder,
        FaultKind::PartWrongPosition,
        FaultKind::PressureSensorBroken,
        FaultKind::JackCylinderBroken,
        FaultKind::PartBroken,
    ];

    pub const ALL: [FaultKind; 6] = [
        FaultKind::None,
        FaultKind::TimingJackCylinder,
        FaultKind::PartWrongPosition,
        FaultKind::PressureSensorBroken,
        FaultKind::JackCylinderBroken,
        FaultKind::PartBroken,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            FaultKind::None => "none",
            FaultKind::TimingJackCylinder => "timing-jack-cylinder",
            FaultKind::PartWrongPosition => "part-wrong-position",
            FaultKind::PressureSensorBroken => "pressure-sensor-broken",
            FaultKind::JackCylinderBroken => "jack-cylinder-broken",
            FaultKind::PartBroken => "part-broken",
        }
    }

    /// Human-readable row label.
    pub fn label(self) -> &'static str {
        match self {
            FaultKind::None => "None",
            FaultKind::TimingJackCylinder => "Timing Jack Cylinder",
            FaultKind::PartWrongPosition => "Part in Wrong Position",
            FaultKind::PressureSensorBroken => "Pressure Sensor Broken",
            FaultKind::JackCylinderBroken => "Jack Cylinder Broken",
            FaultKind::PartBroken => "Part Broken",
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| format!("unknown fault kind {s:?}"))
    }
}

/// Which fault strikes which product, and how hard.
///
/// Magnitude meaning per kind: excess seconds over the nominal press
/// duration (timing-jack-cylinder), downward seat-position shift
/// (part-wrong-position), the stuck reading (pressure-sensor-broken), or
/// the depressed pressure reading (jack-cylinder-broken). `none` and
/// `part-broken` accept no magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub magnitude: Option<f64>,
    pub target_product: u64,
}

impl FaultSpec {
    pub fn none() -> Self {
        FaultSpec { kind: FaultKind::None, magnitude: None, target_product: 1 }
    }

    pub fn new(kind: FaultKind) -> Self {
        FaultSpec { kind, magnitude: None, target_product: 1 }
    }

    pub fn with_target(mut self, product: u64) -> Self {
        self.target_product = product;
        self
    }

    pub fn with_magnitude(mut self, magnitude: f64) -> Self {
        self.magnitude = Some(magnitude);
        self
    }
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec::none()
    }
}

/// Concrete effect of a fault on one product run: absolute overrides for
/// sensor emissions and transition durations, plus a forced verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedFault {
    pub duration_overrides: BTreeMap<TransitionId, f64>,
    pub value_overrides: BTreeMap<SensorId, f64>,
    pub force_not_ok: bool,
}

impl ResolvedFault {
    pub fn is_nominal(&self) -> bool {
        self.duration_overrides.is_empty() && self.value_overrides.is_empty() && !self.force_not_ok
    }
}

fn sensor_nominal(cfg: &MachineConfig, sensor: &str) -> Result<(SensorId, f64, f64, f64), SimError> {
    let id = SensorId(sensor.to_string());
    let expected = cfg
        .definition()
        .expected
        .values
        .get(&id)
        .ok_or_else(|| SimError::InvalidConfig(format!("fault injection needs sensor {sensor}")))?;
    Ok((id, expected.nominal, expected.interval().lo, expected.interval().hi))
}

/// Validates a fault spec against the machine and pins its concrete effect.
pub fn resolve_fault(spec: &FaultSpec, cfg: &MachineConfig) -> Result<ResolvedFault, SimError> {
    let mut resolved = ResolvedFault::default();
    let magnitude = spec.magnitude;
    let reject = |message: String| Err(SimError::InvalidFault(message));

    match spec.kind {
        FaultKind::None | FaultKind::PartBroken => {
            if magnitude.is_some() {
                return reject(format!("{} takes no magnitude", spec.kind));
            }
            if spec.kind == FaultKind::PartBroken {
                resolved.force_not_ok = true;
            }
        }
        FaultKind::TimingJackCylinder => {
            let (jack, ..) = sensor_nominal(cfg, JACK_SENSOR)?;
            let transition = *cfg
                .definition()
                .process
                .sensor_to_transition
                .get(&jack)
                .ok_or_else(|| SimError::InvalidConfig(format!("{JACK_SENSOR} not in V")))?;
            let subject = TimingSubject::Transition(transition);
            let nominal = cfg
                .definition()
                .process
                .timings
                .get(&subject)
                .map(|t| t.seconds())
                .unwrap_or(0.0);
            let window_hi = cfg
                .definition()
                .expected
                .timing_windows
                .get(&subject)
                .map(|w| w.hi)
                .unwrap_or(nominal);
            let excess = magnitude.unwrap_or(0.35);
            let duration = nominal + excess;
            if !(excess > 0.0 && excess.is_finite()) || duration <= window_hi {
                return reject(format!(
                    "timing magnitude {excess} does not push duration {duration} past the window top {window_hi}"
                ));
            }
            let step = cfg.definition().process.step_of_sensor(&jack).expect("validated");
            if cfg.lead(step) + duration > cfg.dwell() {
                return reject(format!(
                    "timing magnitude {excess} does not fit the {} s dwell",
                    cfg.dwell()
                ));
            }
            resolved.duration_overrides.insert(transition, duration);
            fail_quality(cfg, &mut resolved)?;
        }
        FaultKind::PartWrongPosition => {
            let (seat, nominal, band_lo, _) = sensor_nominal(cfg, SEAT_SENSOR)?;
            let shift = magnitude.unwrap_or(0.45);
            let value = nominal - shift;
            if !(shift > 0.0 && shift.is_finite()) || value < band_lo {
                return reject(format!(
                    "position shift {shift} leaves the seat reading {value} outside its nominal band"
                ));
            }
            // The shift must clear the tell-tale interval, or no machine
            // could ever observe the difference.
            if let Some(disc_lo) = discriminator_floor(cfg, &seat) {
                if value >= disc_lo {
                    return reject(format!(
                        "position shift {shift} does not pass the discriminator floor {disc_lo}"
                    ));
                }
            }
            resolved.value_overrides.insert(seat, value);
            let (pressure, _, pressure_lo, _) = sensor_nominal(cfg, PRESSURE_SENSOR)?;
            resolved.value_overrides.insert(pressure, pressure_lo - 0.3);
            fail_quality(cfg, &mut resolved)?;
        }
        FaultKind::PressureSensorBroken => {
            let (pressure, nominal, ..) = sensor_nominal(cfg, PRESSURE_SENSOR)?;
            let stuck = magnitude.unwrap_or(nominal);
            if !stuck.is_finite() {
                return reject("stuck value must be finite".to_string());
            }
            resolved.value_overrides.insert(pressure, stuck);
            resolved.force_not_ok = true;
        }
        FaultKind::JackCylinderBroken => {
            let (jack, ..) = sensor_nominal(cfg, JACK_SENSOR)?;
            resolved.value_overrides.insert(jack, super::HOME_READING);
            let (pressure, _, pressure_lo, _) = sensor_nominal(cfg, PRESSURE_SENSOR)?;
            let depressed = magnitude.unwrap_or(pressure_lo - 0.6);
            if !depressed.is_finite() || depressed >= pressure_lo {
                return reject(format!(
                    "pressure reading {depressed} is not below the tolerance floor {pressure_lo}"
                ));
            }
            resolved.value_overrides.insert(pressure, depressed);
            fail_quality(cfg, &mut resolved)?;
        }
    }
    Ok(resolved)
}

fn fail_quality(cfg: &MachineConfig, resolved: &mut ResolvedFault) -> Result<(), SimError> {
    let (tightness, ..) = sensor_nominal(cfg, TIGHTNESS_SENSOR)?;
    resolved.value_overrides.insert(tightness, QC_FAIL_READING);
    Ok(())
}

/// Lower bound of the tell-tale interval any causal rule pins on `sensor`.
fn discriminator_floor(cfg: &MachineConfig, sensor: &SensorId) -> Option<f64> {
    cfg.definition()
        .process
        .causal_rules
        .iter()
        .flat_map(|rule| rule.discriminators.iter())
        .find(|d| &d.sensor == sensor)
        .map(|d| d.interval.lo)
}
