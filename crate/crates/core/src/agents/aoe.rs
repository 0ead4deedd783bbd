use super::{Action, AgentId, AgentMessage, MessageKind, Reply};
use crate::energy::{
    detect, filter_alarm, pv_source_poll, EnergyAlarm, FilterAction, FilterState, PvSourceConfig,
    SensorSample, WindSourceConfig,
};
use crate::jobshop::{Energy, Seconds};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    Wind(WindSourceConfig),
    Pv(PvSourceConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AoeEvent {
    TickP1(SensorSample),
    TickP2,
    Message(AgentMessage),
}

/// Energy provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoeState {
    pub id: AgentId,
    pub source: EnergySource,
    pub capacity_wh: f64,
    pub committed: Energy,
    pub p1_s: Seconds,
    pub filter: FilterState,
    pub alarm: EnergyAlarm,
    /// Factories that receive control messages.
    pub subscribers: Vec<AgentId>,
    pub pv_announced: bool,
    pub orders_emitted: usize,
}

impl AoeState {
    pub fn new(id: impl Into<AgentId>, source: EnergySource, capacity_wh: f64) -> Self {
        AoeState {
            id: id.into(),
            source,
            capacity_wh,
            committed: Energy::ZERO,
            p1_s: 3,
            filter: FilterState::new(6),
            alarm: EnergyAlarm::quiet(),
            subscribers: Vec::new(),
            pv_announced: false,
            orders_emitted: 0,
        }
    }

    pub fn with_periods(mut self, p1_s: Seconds, p2_s: Seconds) -> Self {
        self.p1_s = p1_s;
        self.filter = FilterState {
            p2_s,
            p2_initial_s: p2_s,
            ..self.filter
        };
        self
    }

    /// Current verification period; grows while alarms persist.
    pub fn p2_s(&self) -> Seconds {
        self.filter.p2_s
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.capacity_wh.is_finite() && self.capacity_wh >= 0.0) {
            return Err(format!(
                "capacity must be non-negative, got {}",
                self.capacity_wh
            ));
        }
        if self.p1_s == 0 || self.p1_s >= self.filter.p2_initial_s {
            return Err(format!(
                "periods must satisfy 0 < p1 < p2, got p1={} p2={}",
                self.p1_s, self.filter.p2_initial_s
            ));
        }
        if let EnergySource::Wind(cfg) = &self.source {
            cfg.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Accepts a predictive request iff it fits in the remaining capacity (compared in tenths of Wh).
pub fn aoe_validate_request(state: AoeState, energy_wh: f64) -> (AoeState, Reply) {
    let request = Energy::from_wh(energy_wh);
    if request == Energy::ZERO {
        return (state, Reply::Non);
    }
    let total = state.committed + request;
    if total <= Energy::from_wh(state.capacity_wh) {
        let mut state = state;
        state.committed = total;
        (state, Reply::Oui)
    } else {
        (state, Reply::Non)
    }
}

/// Handles acquisition ticks, verification ticks and incoming requests.
pub fn aoe_online_step(
    state: AoeState,
    event: AoeEvent,
    now_s: Seconds,
) -> (AoeState, Vec<Action>) {
    let mut state = state;
    match event {
        AoeEvent::TickP1(sample) => match &state.source {
            EnergySource::Wind(cfg) => match detect(&sample, cfg) {
                Ok(alarm) => {
                    state.alarm = alarm;
                    (state, Vec::new())
                }
                Err(e) => {
                    let fault = Action::Fault(format!("{}: {e}", state.id));
                    (state, vec![fault])
                }
            },
            EnergySource::Pv(_) => (state, Vec::new()),
        },
        AoeEvent::TickP2 => {
            let alarm = match &state.source {
                EnergySource::Wind(_) => state.alarm,
                EnergySource::Pv(cfg) if !state.pv_announced => {
                    state.pv_announced = true;
                    pv_source_poll(cfg)
                }
                EnergySource::Pv(_) => EnergyAlarm::quiet(),
            };
            let (filter, action) = filter_alarm(state.filter, &alarm, now_s);
            state.filter = filter;
            let kind = match action {
                FilterAction::NoPerturbation => MessageKind::ControlNoPerturbation,
                FilterAction::Reschedule(order) => {
                    state.orders_emitted += 1;
                    MessageKind::ControlReschedule { order }
                }
            };
            let actions = state
                .subscribers
                .iter()
                .map(|to| {
                    Action::Send(AgentMessage::new(
                        kind.clone(),
                        state.id.clone(),
                        to.clone(),
                        now_s,
                    ))
                })
                .collect();
            (state, actions)
        }
        AoeEvent::Message(msg) => match msg.kind {
            MessageKind::EnergyRequest { energy_wh } => {
                let (next, reply) = aoe_validate_request(state, energy_wh);
                let answer = AgentMessage::new(
                    MessageKind::EnergyReply { reply },
                    next.id.clone(),
                    msg.from,
                    now_s,
                );
                (next, vec![Action::Send(answer)])
            }
            other => {
                let note = format!(
                    "{} from {} not handled by a provider",
                    other.name(),
                    msg.from
                );
                (state, vec![Action::ProtocolError(note)])
            }
        },
    }
}
