//! Factory (AOU), energy-provider (AOE) and auditor (ACE) agents.
//!
//! Every agent is a pure `(state, event) -> (state, actions)` function. A runtime owns the
//! states, delivers timer ticks and messages, and carries out the returned actions.

mod ace;
mod aoe;
mod aou;

pub use ace::{ace_record, AceError, AceState, ConsumptionReport};
pub use aoe::{aoe_online_step, aoe_validate_request, AoeEvent, AoeState, EnergySource};
pub use aou::{
    aou_online_step, aou_predictive_step, aou_tick_p3, AouEvent, AouPhase, AouState,
    NegotiationRow, PredictiveSolver, PsoSolver, ReactiveRow,
};

use crate::jobshop::Seconds;
use crate::resched::RescheduleOrder;
use serde::{Deserialize, Serialize};

pub type AgentId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reply {
    Oui,
    Non,
}

impl std::fmt::Display for Reply {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reply::Oui => "Oui",
            Reply::Non => "Non",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MessageKind {
    /// Factory asks its provider to commit this much energy for a predictive schedule.
    EnergyRequest {
        energy_wh: f64,
    },
    EnergyReply {
        reply: Reply,
    },
    /// Provider heartbeat: no shortfall this verification window.
    ControlNoPerturbation,
    ControlReschedule {
        order: RescheduleOrder,
    },
    /// Factory tells the auditor how much energy it has used so far.
    ConsumptionReport {
        cumulative_wh: f64,
    },
}

impl MessageKind {
    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::EnergyRequest { .. } => "energy_request",
            MessageKind::EnergyReply { .. } => "energy_reply",
            MessageKind::ControlNoPerturbation => "control_no_perturbation",
            MessageKind::ControlReschedule { .. } => "control_reschedule",
            MessageKind::ConsumptionReport { .. } => "consumption_report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub kind: MessageKind,
    pub from: AgentId,
    pub to: AgentId,
    pub sent_at_s: Seconds,
}

impl AgentMessage {
    pub fn new(
        kind: MessageKind,
        from: impl Into<AgentId>,
        to: impl Into<AgentId>,
        sent_at_s: Seconds,
    ) -> Self {
        AgentMessage {
            kind,
            from: from.into(),
            to: to.into(),
            sent_at_s,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.kind {
            MessageKind::EnergyRequest { energy_wh }
                if !(energy_wh.is_finite() && *energy_wh > 0.0) =>
            {
                Err(format!("energy request must be positive, got {energy_wh}"))
            }
            MessageKind::ControlReschedule { order } => order.validate().map_err(|e| e.to_string()),
            MessageKind::ConsumptionReport { cumulative_wh }
                if !(cumulative_wh.is_finite() && *cumulative_wh >= 0.0) =>
            {
                Err(format!(
                    "consumption must be non-negative, got {cumulative_wh}"
                ))
            }
            _ => Ok(()),
        }
    }
}

/// What a step function asks its runtime to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Send(AgentMessage),
    /// The factory accepted a schedule and is executing it.
    WentOnline,
    /// The factory ran out of weighting steps without an accepted schedule.
    NegotiationFailed,
    ProtocolError(String),
    Fault(String),
    Note(String),
}
