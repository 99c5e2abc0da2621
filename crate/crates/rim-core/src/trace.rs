//! Per-product trace: the timestamped sensor events of one run through the
//! machine plus the quality verdict, with JSON-lines persistence.
//!
//! File format: one event object per line (`t` internal seconds, `sensor`,
//! `value`), terminated by a trailer line carrying the verdict.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::TraceEvent;
use crate::process::{InternalTime, SensorId, StationIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    NotOk { detected_by: StationIndex },
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub product_id: u64,
    pub events: Vec<TraceEvent>,
    pub verdict: Verdict,
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace has no verdict trailer")]
    MissingVerdict,
    #[error("line {line}: event after verdict trailer")]
    EventAfterVerdict { line: usize },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    t: f64,
    sensor: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrailerLine {
    verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detected_by: Option<u32>,
    product: u64,
}

pub fn write_trace(trace: &Trace, mut out: impl Write) -> io::Result<()> {
    for event in &trace.events {
        let line = EventLine {
            t: event.time.seconds(),
            sensor: event.sensor.0.clone(),
            value: event.value,
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("event serializes"))?;
    }
    let trailer = match trace.verdict {
        Verdict::Ok => TrailerLine {
            verdict: "ok".to_string(),
            detected_by: None,
            product: trace.product_id,
        },
        Verdict::NotOk { detected_by } => TrailerLine {
            verdict: "not_ok".to_string(),
            detected_by: Some(detected_by.get()),
            product: trace.product_id,
        },
    };
    writeln!(out, "{}", serde_json::to_string(&trailer).expect("trailer serializes"))
}

pub fn trace_to_jsonl(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_trace(input: impl BufRead) -> Result<Trace, TraceIoError> {
    let mut events = Vec::new();
    let mut trailer: Option<(Verdict, u64)> = None;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if trailer.is_some() {
            return Err(TraceIoError::EventAfterVerdict { line: line_no });
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| TraceIoError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if value.get("verdict").is_some() {
            let parsed: TrailerLine =
                serde_json::from_value(value).map_err(|e| TraceIoError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let verdict = match parsed.verdict.as_str() {
                "ok" => Verdict::Ok,
                "not_ok" => {
                    let station = parsed
                        .detected_by
                        .and_then(StationIndex::new)
                        .ok_or_else(|| TraceIoError::Parse {
                            line: line_no,
                            message: "not_ok verdict needs detected_by".to_string(),
                        })?;
                    Verdict::NotOk { detected_by: station }
                }
                other => {
                    return Err(TraceIoError::Parse {
                        line: line_no,
                        message: format!("unknown verdict {other:?}"),
                    })
                }
            };
            trailer = Some((verdict, parsed.product));
        } else {
            let parsed: EventLine =
                serde_json::from_value(value).map_err(|e| TraceIoError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let time = InternalTime::new(parsed.t).ok_or_else(|| TraceIoError::Parse {
                line: line_no,
                message: format!("bad timestamp {}", parsed.t),
            })?;
            events.push(TraceEvent {
                time,
                sensor: SensorId(parsed.sensor),
                value: parsed.value,
            });
        }
    }

    let (verdict, product_id) = trailer.ok_or(TraceIoError::MissingVerdict)?;
    Ok(Trace { product_id, events, verdict })
}
