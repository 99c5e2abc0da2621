//! Deterministic simulator of the reference 8-station machine.
//!
//! Two models, as used for developing the diagnosis algorithms. Model 1
//! takes the product perspective and simulates one run through the machine;
//! Model 2 runs the whole machine on a global clock with every station
//! active simultaneously, emitting one merged log stream. Neither model
//! carries physics (no vibration, no friction): they reproduce what the
//! machine's sensors would report, nothing else.
//!
//! Every random quantity is a keyed draw from the run seed: sensor values
//! and transition durations are keyed per product and subject, the table
//! rotation per cycle (shared by every product on the table that cycle).
//! Jitter stays inside half the tolerance band, so seeded randomness never
//! produces a spurious violation, and fixed seeds reproduce traces byte for
//! byte.

pub mod fault;
pub mod log;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::MachineDefinition;
use crate::constraint::TraceEvent;
use crate::process::{InternalTime, SensorId, StationIndex, StationRole, TimingSubject, TransitionId};
use crate::trace::{Trace, Verdict};
use crate::validate::validate;

pub use fault::{resolve_fault, FaultKind, FaultSpec, ResolvedFault};

const LEAD_BASE: f64 = 0.2;
const LEAD_STEP: f64 = 0.01;
const READING_OFFSET_PROCESS: f64 = 0.4;
const READING_OFFSET_QUALITY: f64 = 0.1;
const SETTLE_MARGIN: f64 = 1.0;
/// Resting reading of a tool-position sensor.
pub const HOME_READING: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid machine config: {0}")]
    InvalidConfig(String),
    #[error("invalid fault: {0}")]
    InvalidFault(String),
    #[error("need at least one product")]
    InvalidProductCount,
    #[error("malformed machine log: {0}")]
    MalformedLog(String),
}

/// Nominal emission schedule of one sensor within its station's dwell.
#[derive(Debug, Clone, PartialEq)]
pub enum NominalBehavior {
    /// Tool-position pair: the actuation reading at `offset`, the home
    /// reading when the transition completes.
    ToolPair { transition: TransitionId, offset: f64, nominal: f64 },
    /// Single measurement (pressure, quality probes).
    Reading { offset: f64, nominal: f64 },
}

/// A machine definition plus the derived simulation schedule: per-station
/// lead offsets, the uniform dwell, and one nominal behavior per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineConfig {
    definition: MachineDefinition,
    dwell: f64,
    behaviors: BTreeMap<SensorId, NominalBehavior>,
}

impl MachineConfig {
    pub fn new(definition: MachineDefinition) -> Result<Self, SimError> {
        let issues = validate(&definition);
        if !issues.is_empty() {
            return Err(SimError::InvalidConfig(format!(
                "definition fails validation: {}",
                issues[0]
            )));
        }
        let process = &definition.process;
        for role in [StationRole::EjectOk, StationRole::EjectNotOk] {
            if process.station_with_role(role).is_none() {
                return Err(SimError::InvalidConfig(format!("no station with role {role:?}")));
            }
        }

        let mut behaviors = BTreeMap::new();
        for sensor in process.sensor_to_transition.keys() {
            let expected = definition.expected.values.get(sensor).ok_or_else(|| {
                SimError::InvalidConfig(format!("sensor {sensor} has no expected value"))
            })?;
            let step = process.step_of_sensor(sensor).expect("validated sensor");
            let lead = lead_offset(step);
            let tool_transition = process.transitions_of_step(step).into_iter().find(|t| {
                t.duration_events
                    .as_ref()
                    .map(|d| &d.sensor == sensor)
                    .unwrap_or(false)
            });
            let behavior = match tool_transition {
                Some(transition) => NominalBehavior::ToolPair {
                    transition: transition.id,
                    offset: lead,
                    nominal: expected.nominal,
                },
                None => {
                    let role = process.station(step).map(|s| s.role);
                    let extra = if role == Some(StationRole::Quality) {
                        READING_OFFSET_QUALITY
                    } else {
                        READING_OFFSET_PROCESS
                    };
                    NominalBehavior::Reading { offset: lead + extra, nominal: expected.nominal }
                }
            };
            behaviors.insert(sensor.clone(), behavior);
        }

        let mut span: f64 = 0.0;
        for station in &process.stations {
            let lead = lead_offset(station.index);
            span = span.max(lead + READING_OFFSET_PROCESS);
            for transition in process.transitions_of_step(station.index) {
                let subject = TimingSubject::Transition(transition.id);
                let nominal = process.timings.get(&subject).map(|t| t.seconds()).unwrap_or(0.0);
                let top = definition
                    .expected
                    .timing_windows
                    .get(&subject)
                    .map(|w| w.hi)
                    .unwrap_or(nominal);
                span = span.max(lead + nominal.max(top));
            }
        }
        let dwell = span + SETTLE_MARGIN;

        Ok(MachineConfig { definition, dwell, behaviors })
    }

    pub fn definition(&self) -> &MachineDefinition {
        &self.definition
    }

    /// Seconds every station dwells per index cycle.
    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn lead(&self, station: StationIndex) -> f64 {
        lead_offset(station)
    }

    pub fn behavior(&self, sensor: &SensorId) -> Option<&NominalBehavior> {
        self.behaviors.get(sensor)
    }

    fn station_count(&self) -> u32 {
        self.definition.process.station_count()
    }
}

fn lead_offset(station: StationIndex) -> f64 {
    LEAD_BASE + LEAD_STEP * (station.get() - 1) as f64
}

// --- keyed jitter -----------------------------------------------------------

fn keyed_unit(seed: u64, domain: &str, index: u64, key: &str) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(domain.as_bytes());
    eat(&index.to_le_bytes());
    eat(key.as_bytes());
    ChaCha8Rng::seed_from_u64(h).gen::<f64>()
}

/// Uniform draw inside half the asymmetric tolerance band.
fn jitter(unit: f64, tol_below: f64, tol_above: f64) -> f64 {
    let lo = -0.5 * tol_below;
    let hi = 0.5 * tol_above;
    lo + unit * (hi - lo)
}

fn value_jitter(cfg: &MachineConfig, seed: u64, product: u64, sensor: &SensorId) -> f64 {
    let expected = &cfg.definition.expected.values[sensor];
    jitter(
        keyed_unit(seed, "value", product, sensor.as_str()),
        expected.tol_below,
        expected.tol_above,
    )
}

fn transition_duration(cfg: &MachineConfig, seed: u64, product: u64, id: TransitionId) -> f64 {
    let subject = TimingSubject::Transition(id);
    let nominal = cfg
        .definition
        .process
        .timings
        .get(&subject)
        .map(|t| t.seconds())
        .unwrap_or(0.0);
    match cfg.definition.expected.timing_windows.get(&subject) {
        Some(window) => nominal + jitter(
            keyed_unit(seed, "duration", product, &format!("t{}", id.0)),
            nominal - window.lo,
            window.hi - nominal,
        ),
        None => nominal,
    }
}

/// Table rotation duration for one cycle: the per-position nominal plus a
/// jitter draw shared by everything on the table that cycle.
fn rotation_duration(cfg: &MachineConfig, seed: u64, cycle: u64, position: StationIndex) -> f64 {
    let rotation = cfg
        .definition
        .process
        .outbound_rotation(position)
        .expect("validated rotation coverage");
    let subject = TimingSubject::Rotation(rotation.id);
    let nominal = rotation.expected_duration.seconds();
    match cfg.definition.expected.timing_windows.get(&subject) {
        Some(window) => nominal + jitter(
            keyed_unit(seed, "rotation", cycle, ""),
            nominal - window.lo,
            window.hi - nominal,
        ),
        None => nominal,
    }
}

/// Identical float operation order in both models keeps traces bitwise equal.
fn advance(base: f64, dwell: f64, rotation: f64) -> f64 {
    base + dwell + rotation
}

// --- emission ---------------------------------------------------------------

/// Events of one product at one station, as offsets within the dwell.
fn station_offset_events(
    cfg: &MachineConfig,
    seed: u64,
    product: u64,
    station: StationIndex,
    fault: &ResolvedFault,
) -> Vec<(f64, SensorId, f64)> {
    let process = &cfg.definition.process;
    let mut events: Vec<(f64, SensorId, f64)> = Vec::new();
    let sensors = process.sensors_for_step(station).expect("validated station");
    for sensor in sensors {
        match cfg.behaviors.get(&sensor) {
            Some(NominalBehavior::ToolPair { transition, offset, nominal }) => {
                let value = fault
                    .value_overrides
                    .get(&sensor)
                    .copied()
                    .unwrap_or_else(|| nominal + value_jitter(cfg, seed, product, &sensor));
                let duration = fault
                    .duration_overrides
                    .get(transition)
                    .copied()
                    .unwrap_or_else(|| transition_duration(cfg, seed, product, *transition));
                events.push((*offset, sensor.clone(), value));
                events.push((offset + duration, sensor.clone(), HOME_READING));
            }
            Some(NominalBehavior::Reading { offset, nominal }) => {
                let value = fault
                    .value_overrides
                    .get(&sensor)
                    .copied()
                    .unwrap_or_else(|| nominal + value_jitter(cfg, seed, product, &sensor));
                events.push((*offset, sensor.clone(), value));
            }
            None => {}
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    events
}

/// Quality verdict of one product: the first quality station whose emitted
/// reading leaves its band detects the fault; a forced Not-OK without any
/// reading deviation is attributed to the last quality station.
fn product_verdict(cfg: &MachineConfig, seed: u64, product: u64, fault: &ResolvedFault) -> Verdict {
    let process = &cfg.definition.process;
    let mut last_quality: Option<StationIndex> = None;
    for station in &process.stations {
        if station.role != StationRole::Quality {
            continue;
        }
        last_quality = Some(station.index);
        for sensor in process.sensors_for_step(station.index).expect("validated station") {
            let Some(expected) = cfg.definition.expected.values.get(&sensor) else { continue };
            let value = fault
                .value_overrides
                .get(&sensor)
                .copied()
                .unwrap_or_else(|| expected.nominal + value_jitter(cfg, seed, product, &sensor));
            if !expected.interval().contains(value) {
                return Verdict::NotOk { detected_by: station.index };
            }
        }
    }
    if fault.force_not_ok {
        let detected_by = last_quality
            .or_else(|| process.eject_not_ok_station())
            .expect("machine has an eject station");
        return Verdict::NotOk { detected_by };
    }
    Verdict::Ok
}

fn active_fault(spec: &FaultSpec, product: u64) -> bool {
    spec.kind != FaultKind::None && spec.target_product == product
}

/// Station at which a product with this verdict leaves the machine.
fn exit_station(cfg: &MachineConfig, verdict: Verdict) -> StationIndex {
    let process = &cfg.definition.process;
    if verdict.is_ok() {
        process
            .station_with_role(StationRole::EjectOk)
            .expect("checked at construction")
    } else {
        process.eject_not_ok_station().expect("checked at construction")
    }
}

/// Model 1: one run of a product through the machine, internal time starting
/// at zero when it enters step 1. Deterministic for a fixed seed.
pub fn simulate_product_run(
    cfg: &MachineConfig,
    spec: &FaultSpec,
    seed: u64,
) -> Result<Trace, SimError> {
    let resolved = resolve_fault(spec, cfg)?;
    let nominal = ResolvedFault::default();
    let product: u64 = 1;
    let effective = if active_fault(spec, product) { &resolved } else { &nominal };
    let verdict = product_verdict(cfg, seed, product, effective);
    let exit = exit_station(cfg, verdict);

    let mut events: Vec<TraceEvent> = Vec::new();
    let mut base: f64 = 0.0;
    for station_no in 1..=exit.get() {
        let station = StationIndex::new(station_no).expect("station >= 1");
        for (offset, sensor, value) in station_offset_events(cfg, seed, product, station, effective)
        {
            events.push(TraceEvent {
                time: InternalTime::new(base + offset).expect("non-negative time"),
                sensor,
                value,
            });
        }
        if station_no < exit.get() {
            let cycle = product + u64::from(station_no) - 1;
            base = advance(base, cfg.dwell, rotation_duration(cfg, seed, cycle, station));
        }
    }

    Ok(Trace { product_id: product, events, verdict })
}

// --- whole-machine model ------------------------------------------------------

/// One sensor report in the merged machine stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineEvent {
    pub global: f64,
    /// Product-relative clock (zero at the product's entry).
    pub internal: f64,
    pub cycle: u64,
    pub station: StationIndex,
    /// Product context; absent only in malformed logs.
    pub product: Option<u64>,
    pub sensor: SensorId,
    pub value: f64,
}

/// A sorting decision reported at an eject station.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineVerdict {
    pub global: f64,
    pub cycle: u64,
    pub station: StationIndex,
    pub product: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Event(MachineEvent),
    Verdict(MachineVerdict),
}

impl LogEntry {
    pub fn global(&self) -> f64 {
        match self {
            LogEntry::Event(e) => e.global,
            LogEntry::Verdict(v) => v.global,
        }
    }
}

/// The single merged data stream of the whole machine.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MachineLog {
    pub entries: Vec<LogEntry>,
}

/// Model 2: the whole machine, all stations active simultaneously, one
/// product fed per cycle. The per-product traces are recovered from the log
/// by [`demux_log`].
pub fn simulate_machine(
    cfg: &MachineConfig,
    n_products: u64,
    faults: &[FaultSpec],
) -> Result<(Vec<Trace>, MachineLog), SimError> {
    if n_products < 1 {
        return Err(SimError::InvalidProductCount);
    }
    simulate_machine_seeded(cfg, n_products, faults, 0)
}

/// [`simulate_machine`] with an explicit seed for the benign jitter.
pub fn simulate_machine_seeded(
    cfg: &MachineConfig,
    n_products: u64,
    faults: &[FaultSpec],
    seed: u64,
) -> Result<(Vec<Trace>, MachineLog), SimError> {
    if n_products < 1 {
        return Err(SimError::InvalidProductCount);
    }
    let nominal = ResolvedFault::default();
    let mut per_product: BTreeMap<u64, ResolvedFault> = BTreeMap::new();
    for spec in faults {
        let resolved = resolve_fault(spec, cfg)?;
        if spec.kind == FaultKind::None {
            continue;
        }
        if spec.target_product < 1 || spec.target_product > n_products {
            return Err(SimError::InvalidFault(format!(
                "target product {} outside 1..={n_products}",
                spec.target_product
            )));
        }
        if per_product.insert(spec.target_product, resolved).is_some() {
            return Err(SimError::InvalidFault(format!(
                "more than one fault targets product {}",
                spec.target_product
            )));
        }
    }

    let n_stations = cfg.station_count();

    let verdicts: BTreeMap<u64, Verdict> = (1..=n_products)
        .map(|p| {
            let fault = per_product.get(&p).unwrap_or(&nominal);
            (p, product_verdict(cfg, seed, p, fault))
        })
        .collect();
    let exits: BTreeMap<u64, StationIndex> = verdicts
        .iter()
        .map(|(p, v)| (*p, exit_station(cfg, *v)))
        .collect();
    let occupies = |cycle: u64, station_no: u32| -> Option<u64> {
        let product = cycle as i64 - i64::from(station_no) + 1;
        if product < 1 || product as u64 > n_products {
            return None;
        }
        let product = product as u64;
        (station_no <= exits[&product].get()).then_some(product)
    };

    let mut entries: Vec<LogEntry> = Vec::new();
    let mut internal_base: BTreeMap<u64, f64> = BTreeMap::new();
    let mut global_base: f64 = 0.0;
    let total_cycles = n_products + u64::from(n_stations) - 1;

    for cycle in 1..=total_cycles {
        for station_no in 1..=n_stations {
            let station = StationIndex::new(station_no).expect("station >= 1");
            let Some(product) = occupies(cycle, station_no) else { continue };
            let base = *internal_base.entry(product).or_insert(0.0);
            let fault = per_product.get(&product).unwrap_or(&nominal);
            for (offset, sensor, value) in
                station_offset_events(cfg, seed, product, station, fault)
            {
                entries.push(LogEntry::Event(MachineEvent {
                    global: global_base + offset,
                    internal: base + offset,
                    cycle,
                    station,
                    product: Some(product),
                    sensor,
                    value,
                }));
            }
            if station == exits[&product] {
                // Slightly before dwell end, staggered by station, so the
                // merged stream stays strictly increasing.
                let stagger = 0.01 * f64::from(n_stations - station_no + 1);
                entries.push(LogEntry::Verdict(MachineVerdict {
                    global: global_base + cfg.dwell - stagger,
                    cycle,
                    station,
                    product,
                    verdict: verdicts[&product],
                }));
            }
        }

        // Index: every product still on the table advances by the shared
        // table motion; each experiences its own position's rotation timing.
        for station_no in 1..=n_stations {
            let station = StationIndex::new(station_no).expect("station >= 1");
            let Some(product) = occupies(cycle, station_no) else { continue };
            if station_no < exits[&product].get() {
                if let Some(base) = internal_base.get_mut(&product) {
                    *base = advance(*base, cfg.dwell, rotation_duration(cfg, seed, cycle, station));
                }
            }
        }
        let max_rotation = (1..=n_stations)
            .map(|s| rotation_duration(cfg, seed, cycle, StationIndex::new(s).expect("s >= 1")))
            .fold(0.0_f64, f64::max);
        global_base = advance(global_base, cfg.dwell, max_rotation);
    }

    entries.sort_by(|a, b| {
        a.global().total_cmp(&b.global()).then_with(|| match (a, b) {
            (LogEntry::Event(x), LogEntry::Event(y)) => {
                (x.product, &x.sensor).cmp(&(y.product, &y.sensor))
            }
            (LogEntry::Event(_), LogEntry::Verdict(_)) => std::cmp::Ordering::Less,
            (LogEntry::Verdict(_), LogEntry::Event(_)) => std::cmp::Ordering::Greater,
            (LogEntry::Verdict(x), LogEntry::Verdict(y)) => x.product.cmp(&y.product),
        })
    });

    let log = MachineLog { entries };
    let traces = demux_log(&log, cfg)?;
    Ok((traces, log))
}

/// Recovers per-product traces from a machine log: events grouped by
/// product, ordered on the product-relative clock (zero at entry), verdict
/// taken from the product's eject entry.
pub fn demux_log(log: &MachineLog, cfg: &MachineConfig) -> Result<Vec<Trace>, SimError> {
    let process = &cfg.definition.process;
    let mut events: BTreeMap<u64, Vec<TraceEvent>> = BTreeMap::new();
    let mut verdicts: BTreeMap<u64, Verdict> = BTreeMap::new();

    for entry in &log.entries {
        match entry {
            LogEntry::Event(event) => {
                let product = event.product.ok_or_else(|| {
                    SimError::MalformedLog(format!(
                        "event on {} at {} has no product context",
                        event.sensor, event.global
                    ))
                })?;
                if !process.sensor_to_transition.contains_key(&event.sensor) {
                    return Err(SimError::MalformedLog(format!(
                        "unknown sensor {} in log",
                        event.sensor
                    )));
                }
                let time = InternalTime::new(event.internal).ok_or_else(|| {
                    SimError::MalformedLog(format!("negative internal time {}", event.internal))
                })?;
                events.entry(product).or_default().push(TraceEvent {
                    time,
                    sensor: event.sensor.clone(),
                    value: event.value,
                });
            }
            LogEntry::Verdict(verdict) => {
                verdicts.insert(verdict.product, verdict.verdict);
            }
        }
    }

    let mut products: Vec<u64> = events.keys().copied().collect();
    for product in verdicts.keys() {
        if !products.contains(product) {
            products.push(*product);
        }
    }
    products.sort_unstable();

    let mut traces = Vec::new();
    for product in products {
        let mut product_events = events.remove(&product).unwrap_or_default();
        product_events
            .sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.sensor.cmp(&b.sensor)));
        let verdict = verdicts.get(&product).copied().ok_or_else(|| {
            SimError::MalformedLog(format!("product {product} has no verdict entry"))
        })?;
        traces.push(Trace { product_id: product, events: product_events, verdict });
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_unit_is_stable_and_keyed() {
        let a = keyed_unit(7, "value", 1, "st4.pressure");
        let b = keyed_unit(7, "value", 1, "st4.pressure");
        assert_eq!(a, b);
        assert_ne!(a, keyed_unit(8, "value", 1, "st4.pressure"));
        assert_ne!(a, keyed_unit(7, "value", 2, "st4.pressure"));
        assert_ne!(a, keyed_unit(7, "duration", 1, "st4.pressure"));
    }

    #[test]
    fn jitter_stays_inside_half_band() {
        for unit in [0.0, 0.25, 0.5, 0.9999] {
            let j = jitter(unit, 0.5, 0.2);
            assert!((-0.25..0.1 + 1e-12).contains(&j));
        }
    }
}
