//! Machine log rendering: the human-readable line shape the machine prints
//! (`Thu Apr 27 11:18:58 2023   pneumatic cylinder in position 0`) next to a
//! structured JSON-lines twin that keeps full precision and the product
//! context needed for demultiplexing.

use std::io::{self, BufRead, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::constraint::TraceEvent;
use crate::process::{SensorId, StationIndex};
use crate::trace::Verdict;

use super::{LogEntry, MachineEvent, MachineLog, MachineVerdict, SimError};

/// Wall-clock origin used when rendering global seconds as timestamps.
pub fn default_log_base() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2023, 4, 27)
        .expect("valid date")
        .and_hms_opt(11, 18, 58)
        .expect("valid time")
}

fn wall_clock(base: NaiveDateTime, global_seconds: f64) -> NaiveDateTime {
    base + Duration::milliseconds((global_seconds * 1000.0).round() as i64)
}

fn integral(value: f64) -> bool {
    value.fract() == 0.0 && value.abs() < 1e15
}

fn reading_text(value: f64) -> String {
    if integral(value) {
        format!("{value:.0}")
    } else {
        format!("{value}")
    }
}

/// Human phrase for one sensor report, derived from the sensor id: position
/// sensors read `<tool> in position <v>`, pressure `pressure at <v>`,
/// probes `<probe> reading <v>`.
pub fn sensor_phrase(sensor: &SensorId, value: f64) -> String {
    let segments: Vec<&str> = sensor.as_str().split('.').collect();
    let last = segments.last().copied().unwrap_or_default();
    let middle = if segments.len() > 2 {
        segments[1..segments.len() - 1].join(" ").replace('_', " ")
    } else {
        String::new()
    };
    if last == "position" && !middle.is_empty() {
        format!("{middle} in position {}", reading_text(value))
    } else if last == "pressure" {
        format!("pressure at {value:.1}")
    } else if last.ends_with("probe") {
        format!("{} reading {}", last.replace('_', " "), reading_text(value))
    } else {
        let name = segments.get(1..).unwrap_or_default().join(" ").replace('_', " ");
        format!("{name} = {value}")
    }
}

/// One line of the human-readable machine log.
pub fn render_log_line(event: &TraceEvent, wall: NaiveDateTime) -> String {
    format!(
        "{}   {}",
        wall.format("%a %b %e %H:%M:%S %Y"),
        sensor_phrase(&event.sensor, event.value)
    )
}

fn render_machine_event(event: &MachineEvent, base: NaiveDateTime) -> String {
    let wall = wall_clock(base, event.global);
    format!(
        "{}   {}",
        wall.format("%a %b %e %H:%M:%S %Y"),
        sensor_phrase(&event.sensor, event.value)
    )
}

fn render_machine_verdict(verdict: &MachineVerdict, base: NaiveDateTime) -> String {
    let wall = wall_clock(base, verdict.global);
    let text = match verdict.verdict {
        Verdict::Ok => format!("product {} sorted OK", verdict.product),
        Verdict::NotOk { .. } => format!("product {} sorted Not-OK", verdict.product),
    };
    format!("{}   {}", wall.format("%a %b %e %H:%M:%S %Y"), text)
}

/// The full human-readable log, one line per entry.
pub fn machine_log_human(log: &MachineLog, base: NaiveDateTime) -> String {
    let mut out = String::new();
    for entry in &log.entries {
        match entry {
            LogEntry::Event(event) => out.push_str(&render_machine_event(event, base)),
            LogEntry::Verdict(verdict) => out.push_str(&render_machine_verdict(verdict, base)),
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    t: f64,
    g: f64,
    cycle: u64,
    station: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    product: Option<u64>,
    sensor: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictLine {
    g: f64,
    cycle: u64,
    station: u32,
    product: u64,
    verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detected_by: Option<u32>,
}

pub fn write_machine_log(log: &MachineLog, mut out: impl Write) -> io::Result<()> {
    for entry in &log.entries {
        let line = match entry {
            LogEntry::Event(e) => serde_json::to_string(&EventLine {
                t: e.internal,
                g: e.global,
                cycle: e.cycle,
                station: e.station.get(),
                product: e.product,
                sensor: e.sensor.0.clone(),
                value: e.value,
            }),
            LogEntry::Verdict(v) => serde_json::to_string(&VerdictLine {
                g: v.global,
                cycle: v.cycle,
                station: v.station.get(),
                product: v.product,
                verdict: if v.verdict.is_ok() { "ok" } else { "not_ok" }.to_string(),
                detected_by: match v.verdict {
                    Verdict::Ok => None,
                    Verdict::NotOk { detected_by } => Some(detected_by.get()),
                },
            }),
        };
        writeln!(out, "{}", line.expect("log entry serializes"))?;
    }
    Ok(())
}

pub fn machine_log_jsonl(log: &MachineLog) -> String {
    let mut buf = Vec::new();
    write_machine_log(log, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_machine_log(input: impl BufRead) -> Result<MachineLog, SimError> {
    let mut entries = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| SimError::MalformedLog(format!("line {line_no}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| SimError::MalformedLog(format!("line {line_no}: {e}")))?;
        if value.get("verdict").is_some() {
            let parsed: VerdictLine = serde_json::from_value(value)
                .map_err(|e| SimError::MalformedLog(format!("line {line_no}: {e}")))?;
            let verdict = match parsed.verdict.as_str() {
                "ok" => Verdict::Ok,
                "not_ok" => Verdict::NotOk {
                    detected_by: parsed
                        .detected_by
                        .and_then(StationIndex::new)
                        .ok_or_else(|| {
                            SimError::MalformedLog(format!(
                                "line {line_no}: not_ok verdict needs detected_by"
                            ))
                        })?,
                },
                other => {
                    return Err(SimError::MalformedLog(format!(
                        "line {line_no}: unknown verdict {other:?}"
                    )))
                }
            };
            entries.push(LogEntry::Verdict(MachineVerdict {
                global: parsed.g,
                cycle: parsed.cycle,
                station: StationIndex::new(parsed.station).ok_or_else(|| {
                    SimError::MalformedLog(format!("line {line_no}: bad station"))
                })?,
                product: parsed.product,
                verdict,
            }));
        } else {
            let parsed: EventLine = serde_json::from_value(value)
                .map_err(|e| SimError::MalformedLog(format!("line {line_no}: {e}")))?;
            entries.push(LogEntry::Event(MachineEvent {
                global: parsed.g,
                internal: parsed.t,
                cycle: parsed.cycle,
                station: StationIndex::new(parsed.station).ok_or_else(|| {
                    SimError::MalformedLog(format!("line {line_no}: bad station"))
                })?,
                product: parsed.product,
                sensor: SensorId(parsed.sensor),
                value: parsed.value,
            }));
        }
    }
    Ok(MachineLog { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::InternalTime;

    fn event(sensor: &str, value: f64) -> TraceEvent {
        TraceEvent {
            time: InternalTime::new(0.2).unwrap(),
            sensor: sensor.into(),
            value,
        }
    }

    #[test]
    fn renders_the_machine_line_shape() {
        let line = render_log_line(&event("st2.pneumatic_cylinder.position", 0.0), default_log_base());
        assert_eq!(line, "Thu Apr 27 11:18:58 2023   pneumatic cylinder in position 0");
    }

    #[test]
    fn renders_pressure_and_probe_phrases() {
        assert_eq!(sensor_phrase(&"st4.pressure".into(), 5.0), "pressure at 5.0");
        assert_eq!(
            sensor_phrase(&"st6.tightness_probe".into(), 1.0),
            "tightness probe reading 1"
        );
        assert_eq!(
            sensor_phrase(&"st5.dimension_probe".into(), 10.07),
            "dimension probe reading 10.07"
        );
    }

    #[test]
    fn wall_clock_advances_with_global_seconds() {
        let line = render_log_line(&event("st4.pressure", 5.0), wall_clock(default_log_base(), 61.2));
        assert!(line.starts_with("Thu Apr 27 11:19:59 2023"));
    }
}
