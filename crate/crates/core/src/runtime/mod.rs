//! Execution: a deterministic simulated-clock event loop, the wire codec, and a TCP mode
//! that runs each agent in its own process or thread.

mod net;
mod node;
mod sim;
mod wire;

pub use net::{run_agent, run_orchestrator, AgentEndpoint, DistributedConfig};
pub use node::{build_nodes, factory_seed, Node, Role, TimerKind};
pub use sim::{run_simulation, SimClock, SimEvent};
pub use wire::{
    decode_frame, decode_wire, encode_frame, encode_wire, FrameError, Wire, MAX_FRAME_BYTES,
};

use crate::agents::{AgentId, NegotiationRow, ReactiveRow};
use crate::jobshop::{Schedule, Seconds};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("agent {0}: {1}")]
    Agent(AgentId, String),
    #[error("cannot reach {peer} at {addr}: {message}")]
    Unreachable {
        peer: AgentId,
        addr: String,
        message: String,
    },
    #[error("{0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoryOutcome {
    pub failed: bool,
    pub accepted_gamma: Option<f64>,
    pub accepted: Option<Schedule>,
    pub final_schedule: Option<Schedule>,
    pub heartbeats: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderOutcome {
    pub committed_wh: f64,
    pub orders_emitted: usize,
    pub final_p2_s: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_s: Seconds,
    pub agent: AgentId,
    pub event: String,
}

/// Everything a run produced. Maps are ordered so the JSON form is stable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub horizon_s: Seconds,
    pub negotiation: Vec<NegotiationRow>,
    pub reactive: Vec<ReactiveRow>,
    pub factories: BTreeMap<AgentId, FactoryOutcome>,
    pub providers: BTreeMap<AgentId, ProviderOutcome>,
    pub ace_ledger: BTreeMap<AgentId, Vec<(Seconds, f64)>>,
    pub failures: Vec<String>,
    pub events: Vec<EventRecord>,
}

impl RunReport {
    /// Appends another agent's fragment.
    pub fn merge(&mut self, other: RunReport) {
        self.negotiation.extend(other.negotiation);
        self.reactive.extend(other.reactive);
        self.factories.extend(other.factories);
        self.providers.extend(other.providers);
        self.ace_ledger.extend(other.ace_ledger);
        self.failures.extend(other.failures);
        self.events.extend(other.events);
    }

    pub fn negotiation_csv(&self) -> String {
        let mut out = format!("{}\n", NegotiationRow::CSV_HEADER);
        for row in &self.negotiation {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn reactive_csv(&self) -> String {
        let mut out = format!("{}\n", ReactiveRow::CSV_HEADER);
        for row in &self.reactive {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run report serializes")
    }
}
