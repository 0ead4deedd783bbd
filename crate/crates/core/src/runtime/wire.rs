//! Length-prefixed JSON frames.
//!
//! Each frame is a 4-byte big-endian payload length followed by UTF-8 JSON of the form
//! `{"kind": ..., "from": ..., "to": ..., "sent_at_s": ..., "payload": {...}}`.

use super::node::Role;
use super::RunReport;
use crate::agents::{AgentMessage, MessageKind, Reply};
use crate::jobshop::Seconds;
use crate::resched::RescheduleOrder;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    /// The buffer holds only part of a frame; nothing was consumed.
    #[error("incomplete frame: need {needed} bytes, have {available}")]
    NeedMoreBytes { needed: usize, available: usize },
    #[error("frame of {0} bytes exceeds the size limit")]
    TooLarge(usize),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("invalid message: {0}")]
    Invalid(String),
}

/// Anything that travels on a connection: agent traffic or run control.
#[derive(Debug, Clone, PartialEq)]
pub enum Wire {
    Agent(AgentMessage),
    Hello {
        from: String,
        role: Role,
    },
    StartPredictive {
        to: String,
    },
    /// A factory finished negotiating.
    Online {
        from: String,
        failed: bool,
    },
    StartOnline {
        to: String,
    },
    Shutdown {
        to: String,
    },
    Report {
        from: String,
        report: Box<RunReport>,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    kind: String,
    from: String,
    to: String,
    sent_at_s: Seconds,
    #[serde(default)]
    payload: Value,
}

fn field<T: for<'de> Deserialize<'de>>(payload: &Value, name: &str) -> Result<T, FrameError> {
    let v = payload
        .get(name)
        .ok_or_else(|| FrameError::Malformed(format!("payload lacks {name:?}")))?;
    serde_json::from_value(v.clone()).map_err(|e| FrameError::Malformed(format!("{name}: {e}")))
}

fn envelope(wire: &Wire) -> Result<Envelope, FrameError> {
    let control = |kind: &str, from: &str, to: &str, payload: Value| Envelope {
        kind: kind.into(),
        from: from.into(),
        to: to.into(),
        sent_at_s: 0,
        payload,
    };
    Ok(match wire {
        Wire::Agent(msg) => {
            msg.validate().map_err(FrameError::Invalid)?;
            let payload = match &msg.kind {
                MessageKind::EnergyRequest { energy_wh } => json!({ "energy_wh": energy_wh }),
                MessageKind::EnergyReply { reply } => json!({
                    "reply": match reply { Reply::Oui => "oui", Reply::Non => "non" }
                }),
                MessageKind::ControlNoPerturbation => json!({}),
                MessageKind::ControlReschedule { order } => json!({
                    "time_resch_s": order.time_resch_s,
                    "taux_energy_pct": order.taux_energy_pct,
                }),
                MessageKind::ConsumptionReport { cumulative_wh } => {
                    json!({ "cumulative_wh": cumulative_wh })
                }
            };
            Envelope {
                kind: msg.kind.name().into(),
                from: msg.from.clone(),
                to: msg.to.clone(),
                sent_at_s: msg.sent_at_s,
                payload,
            }
        }
        Wire::Hello { from, role } => control("hello", from, "", json!({ "role": role })),
        Wire::StartPredictive { to } => control("start_predictive", "", to, json!({})),
        Wire::Online { from, failed } => control("online", from, "", json!({ "failed": failed })),
        Wire::StartOnline { to } => control("start_online", "", to, json!({})),
        Wire::Shutdown { to } => control("shutdown", "", to, json!({})),
        Wire::Report { from, report } => control(
            "report",
            from,
            "",
            serde_json::to_value(report).map_err(|e| FrameError::Malformed(e.to_string()))?,
        ),
    })
}

fn from_envelope(env: Envelope) -> Result<Wire, FrameError> {
    let Envelope {
        kind,
        from,
        to,
        sent_at_s,
        payload,
    } = env;
    let agent = |kind: MessageKind| -> Result<Wire, FrameError> {
        let msg = AgentMessage {
            kind,
            from: from.clone(),
            to: to.clone(),
            sent_at_s,
        };
        msg.validate().map_err(FrameError::Invalid)?;
        Ok(Wire::Agent(msg))
    };
    match kind.as_str() {
        "energy_request" => agent(MessageKind::EnergyRequest {
            energy_wh: field(&payload, "energy_wh")?,
        }),
        "energy_reply" => {
            let reply = match field::<String>(&payload, "reply")?.as_str() {
                "oui" => Reply::Oui,
                "non" => Reply::Non,
                other => return Err(FrameError::Malformed(format!("reply {other:?}"))),
            };
            agent(MessageKind::EnergyReply { reply })
        }
        "control_no_perturbation" => agent(MessageKind::ControlNoPerturbation),
        "control_reschedule" => agent(MessageKind::ControlReschedule {
            order: RescheduleOrder {
                time_resch_s: field(&payload, "time_resch_s")?,
                taux_energy_pct: field(&payload, "taux_energy_pct")?,
            },
        }),
        "consumption_report" => agent(MessageKind::ConsumptionReport {
            cumulative_wh: field(&payload, "cumulative_wh")?,
        }),
        "hello" => Ok(Wire::Hello {
            from,
            role: field(&payload, "role")?,
        }),
        "start_predictive" => Ok(Wire::StartPredictive { to }),
        "online" => Ok(Wire::Online {
            from,
            failed: field(&payload, "failed")?,
        }),
        "start_online" => Ok(Wire::StartOnline { to }),
        "shutdown" => Ok(Wire::Shutdown { to }),
        "report" => Ok(Wire::Report {
            from,
            report: Box::new(
                serde_json::from_value(payload)
                    .map_err(|e| FrameError::Malformed(e.to_string()))?,
            ),
        }),
        _ => Err(FrameError::UnknownKind(kind)),
    }
}

pub fn encode_wire(wire: &Wire) -> Result<Vec<u8>, FrameError> {
    let body =
        serde_json::to_vec(&envelope(wire)?).map_err(|e| FrameError::Malformed(e.to_string()))?;
    if body.len() > MAX_FRAME_BYTES {
        return Err(FrameError::TooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

fn decode_envelope(buf: &[u8]) -> Result<(Envelope, usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::NeedMoreBytes {
            needed: 4,
            available: buf.len(),
        });
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(FrameError::TooLarge(len));
    }
    if buf.len() < 4 + len {
        return Err(FrameError::NeedMoreBytes {
            needed: 4 + len,
            available: buf.len(),
        });
    }
    let env = serde_json::from_slice(&buf[4..4 + len])
        .map_err(|e| FrameError::Malformed(e.to_string()))?;
    Ok((env, 4 + len))
}

/// Decodes the first frame in `buf`, returning it and the number of bytes it occupied.
pub fn decode_wire(buf: &[u8]) -> Result<(Wire, usize), FrameError> {
    let (env, used) = decode_envelope(buf)?;
    Ok((from_envelope(env)?, used))
}

pub fn encode_frame(msg: &AgentMessage) -> Result<Vec<u8>, FrameError> {
    encode_wire(&Wire::Agent(msg.clone()))
}

const AGENT_KINDS: [&str; 5] = [
    "energy_request",
    "energy_reply",
    "control_no_perturbation",
    "control_reschedule",
    "consumption_report",
];

/// Like [`decode_wire`] but accepts only agent messages.
pub fn decode_frame(buf: &[u8]) -> Result<(AgentMessage, usize), FrameError> {
    let (env, used) = decode_envelope(buf)?;
    if !AGENT_KINDS.contains(&env.kind.as_str()) {
        return Err(FrameError::UnknownKind(env.kind));
    }
    match from_envelope(env)? {
        Wire::Agent(msg) => Ok((msg, used)),
        _ => unreachable!("agent kinds decode to agent messages"),
    }
}
