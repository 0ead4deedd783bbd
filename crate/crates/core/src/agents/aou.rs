use super::{Action, AgentId, AgentMessage, MessageKind, Reply};
use crate::jobshop::{Instance, Schedule, Seconds};
use crate::pso::{pso_run, PsoParams};
use crate::resched::{reschedule_with, RescheduleConfig, RescheduleOrder, Technique};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Produces a predictive schedule for one negotiation round.
pub trait PredictiveSolver {
    fn solve(&self, instance: &Instance, gamma: f64, round: usize) -> Result<Schedule, String>;
}

/// Swarm solver; round `k` uses seed `params.seed + k` so every round is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoSolver {
    pub params: PsoParams,
}

impl PredictiveSolver for PsoSolver {
    fn solve(&self, instance: &Instance, gamma: f64, round: usize) -> Result<Schedule, String> {
        let params = self
            .params
            .clone()
            .with_seed(self.params.seed.wrapping_add(round as u64));
        pso_run(instance, gamma, &params)
            .map(|o| o.schedule)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AouPhase {
    Predictive,
    AwaitingReply,
    Online,
    Done,
}

/// One round of the predictive handshake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationRow {
    pub agent: AgentId,
    pub gamma: f64,
    pub makespan_s: Seconds,
    pub energy_wh: f64,
    /// Empty until the provider answers.
    pub reply: Option<Reply>,
}

impl NegotiationRow {
    pub const CSV_HEADER: &'static str = "agent,gamma,makespan_s,energy_wh,reply";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.1},{}",
            self.agent,
            self.gamma,
            self.makespan_s,
            self.energy_wh,
            self.reply.map(|r| r.to_string()).unwrap_or_default()
        )
    }
}

/// One applied reschedule order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactiveRow {
    pub agent: AgentId,
    pub source: AgentId,
    pub received_at_s: Seconds,
    pub time_resch_s: Seconds,
    pub taux: f64,
    pub budget_wh: f64,
    pub old_mk: Seconds,
    pub old_e: f64,
    pub new_mk: Seconds,
    pub new_e: f64,
    pub penalty: bool,
    pub technique: Technique,
}

impl ReactiveRow {
    pub const CSV_HEADER: &'static str = "agent,taux,old_mk,old_e,new_mk,new_e,penalty";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.4},{},{:.1},{},{:.1},{}",
            self.agent, self.taux, self.old_mk, self.old_e, self.new_mk, self.new_e, self.penalty
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AouEvent {
    Start,
    Message(AgentMessage),
}

/// Factory scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct AouState {
    pub id: AgentId,
    /// Provider that validates predictive requests.
    pub provider: AgentId,
    pub ace: Option<AgentId>,
    pub instance: Instance,
    pub gamma0: f64,
    pub alpha: f64,
    pub round: usize,
    pub phase: AouPhase,
    pub failed: bool,
    pub current: Option<Schedule>,
    /// Schedule the provider accepted, before any reschedule.
    pub accepted: Option<Schedule>,
    pub p3_s: Seconds,
    pub reschedule: RescheduleConfig,
    pub history: Vec<NegotiationRow>,
    pub reactive: Vec<ReactiveRow>,
    pub applied: BTreeSet<(AgentId, Seconds)>,
    /// Control messages received before going online.
    pub pending: Vec<AgentMessage>,
    pub heartbeats: u64,
}

impl AouState {
    pub fn new(
        id: impl Into<AgentId>,
        provider: impl Into<AgentId>,
        instance: Instance,
        gamma0: f64,
        alpha: f64,
    ) -> Self {
        AouState {
            id: id.into(),
            provider: provider.into(),
            ace: None,
            instance,
            gamma0,
            alpha,
            round: 0,
            phase: AouPhase::Predictive,
            failed: false,
            current: None,
            accepted: None,
            p3_s: 8,
            reschedule: RescheduleConfig::default(),
            history: Vec::new(),
            reactive: Vec::new(),
            applied: BTreeSet::new(),
            pending: Vec::new(),
            heartbeats: 0,
        }
    }

    /// `gamma0 - round * alpha`, snapped to 1e-9 so repeated steps print cleanly.
    pub fn gamma(&self) -> f64 {
        gamma_at(self.gamma0, self.alpha, self.round)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma0) {
            return Err(format!("gamma0 must lie in [0, 1], got {}", self.gamma0));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.p3_s == 0 {
            return Err("p3 must be positive".into());
        }
        Ok(())
    }
}

fn gamma_at(gamma0: f64, alpha: f64, round: usize) -> f64 {
    ((gamma0 - round as f64 * alpha) * 1e9).round() / 1e9
}

fn request_round(
    mut state: AouState,
    now_s: Seconds,
    solver: &dyn PredictiveSolver,
) -> (AouState, Vec<Action>) {
    let gamma = state.gamma();
    match solver.solve(&state.instance, gamma, state.round) {
        Ok(schedule) if schedule.total_energy.tenths() > 0 => {
            let energy_wh = schedule.total_energy.wh();
            state.history.push(NegotiationRow {
                agent: state.id.clone(),
                gamma,
                makespan_s: schedule.makespan_s,
                energy_wh,
                reply: None,
            });
            state.current = Some(schedule);
            state.phase = AouPhase::AwaitingReply;
            let msg = AgentMessage::new(
                MessageKind::EnergyRequest { energy_wh },
                state.id.clone(),
                state.provider.clone(),
                now_s,
            );
            (state, vec![Action::Send(msg)])
        }
        Ok(_) => {
            state.phase = AouPhase::Done;
            state.failed = true;
            (
                state,
                vec![Action::Fault(
                    "solver returned a schedule without energy".into(),
                )],
            )
        }
        Err(e) => {
            state.phase = AouPhase::Done;
            state.failed = true;
            (
                state,
                vec![Action::Fault(format!("predictive solver failed: {e}"))],
            )
        }
    }
}

/// Predictive handshake: solve, ask the provider, lower `gamma` by `alpha` on each refusal.
pub fn aou_predictive_step(
    state: AouState,
    event: AouEvent,
    now_s: Seconds,
    solver: &dyn PredictiveSolver,
) -> (AouState, Vec<Action>) {
    match (state.phase, event) {
        (AouPhase::Predictive, AouEvent::Start) => request_round(state, now_s, solver),
        (AouPhase::AwaitingReply, AouEvent::Message(msg)) => match msg.kind {
            MessageKind::EnergyReply { reply } if msg.from == state.provider => {
                let mut state = state;
                if let Some(row) = state.history.last_mut() {
                    row.reply = Some(reply);
                }
                match reply {
                    Reply::Oui => {
                        state.phase = AouPhase::Online;
                        state.accepted = state.current.clone();
                        let mut actions = vec![Action::WentOnline];
                        for queued in std::mem::take(&mut state.pending) {
                            let (next, more) = aou_online_step(state, &queued, now_s);
                            state = next;
                            actions.extend(more);
                        }
                        (state, actions)
                    }
                    Reply::Non => {
                        if state.gamma() - state.alpha < -1e-9 {
                            state.phase = AouPhase::Done;
                            state.failed = true;
                            (state, vec![Action::NegotiationFailed])
                        } else {
                            state.round += 1;
                            state.phase = AouPhase::Predictive;
                            request_round(state, now_s, solver)
                        }
                    }
                }
            }
            MessageKind::ControlNoPerturbation | MessageKind::ControlReschedule { .. } => {
                let mut state = state;
                state.pending.push(msg);
                (state, Vec::new())
            }
            _ => {
                let note = format!(
                    "unexpected {} from {} while awaiting a reply",
                    msg.kind.name(),
                    msg.from
                );
                (state, vec![Action::ProtocolError(note)])
            }
        },
        (AouPhase::Predictive, AouEvent::Message(msg)) if is_control(&msg) => {
            let mut state = state;
            state.pending.push(msg);
            (state, Vec::new())
        }
        (phase, AouEvent::Start) => {
            let note = format!("start received in phase {phase:?}");
            (state, vec![Action::ProtocolError(note)])
        }
        (phase, AouEvent::Message(msg)) => {
            let note = format!(
                "{} from {} received in phase {phase:?}",
                msg.kind.name(),
                msg.from
            );
            (state, vec![Action::ProtocolError(note)])
        }
    }
}

fn is_control(msg: &AgentMessage) -> bool {
    matches!(
        msg.kind,
        MessageKind::ControlNoPerturbation | MessageKind::ControlReschedule { .. }
    )
}

/// Reacts to a provider control message while executing.
///
/// Orders are applied on receipt and identified by `(sender, time_resch_s)`; repeats are
/// ignored. An order whose instant has already passed takes effect from `now_s`.
pub fn aou_online_step(
    state: AouState,
    msg: &AgentMessage,
    now_s: Seconds,
) -> (AouState, Vec<Action>) {
    let mut state = state;
    if state.phase != AouPhase::Online {
        if is_control(msg) && state.phase == AouPhase::Done {
            let note = format!(
                "{} from {} ignored: factory is not executing",
                msg.kind.name(),
                msg.from
            );
            return (state, vec![Action::Note(note)]);
        }
        if is_control(msg) {
            state.pending.push(msg.clone());
            return (state, Vec::new());
        }
        let note = format!(
            "{} from {} received in phase {:?}",
            msg.kind.name(),
            msg.from,
            state.phase
        );
        return (state, vec![Action::ProtocolError(note)]);
    }
    let order = match &msg.kind {
        MessageKind::ControlNoPerturbation => {
            state.heartbeats += 1;
            return (state, Vec::new());
        }
        MessageKind::ControlReschedule { order } => *order,
        other => {
            let note = format!("{} from {} received while online", other.name(), msg.from);
            return (state, vec![Action::ProtocolError(note)]);
        }
    };
    if !state.applied.insert((msg.from.clone(), order.time_resch_s)) {
        let note = format!(
            "duplicate order from {} at {}",
            msg.from, order.time_resch_s
        );
        return (state, vec![Action::Note(note)]);
    }
    let current = state
        .current
        .clone()
        .expect("online factory holds a schedule");
    let effective = RescheduleOrder {
        time_resch_s: order.time_resch_s.max(now_s),
        ..order
    };
    if effective.time_resch_s >= current.makespan_s {
        let note = format!(
            "order from {} at {} ignored: schedule ends at {}",
            msg.from, effective.time_resch_s, current.makespan_s
        );
        return (state, vec![Action::Note(note)]);
    }
    let result = reschedule_with(&current, &effective, &state.instance, &state.reschedule);
    state.reactive.push(ReactiveRow {
        agent: state.id.clone(),
        source: msg.from.clone(),
        received_at_s: now_s,
        time_resch_s: effective.time_resch_s,
        taux: order.taux_energy_pct,
        budget_wh: result.energy_budget_wh,
        old_mk: current.makespan_s,
        old_e: current.total_energy.wh(),
        new_mk: result.schedule.makespan_s,
        new_e: result.schedule.total_energy.wh(),
        penalty: result.penalty,
        technique: result.technique_used,
    });
    state.current = Some(result.schedule);
    let mut actions = Vec::new();
    if let Some(report) = consumption_report(&state, now_s) {
        actions.push(Action::Send(report));
    }
    (state, actions)
}

fn consumption_report(state: &AouState, now_s: Seconds) -> Option<AgentMessage> {
    let ace = state.ace.clone()?;
    let schedule = state.current.as_ref()?;
    let cumulative_wh = schedule.energy_consumed_by(now_s, &state.instance).wh();
    Some(AgentMessage::new(
        MessageKind::ConsumptionReport { cumulative_wh },
        state.id.clone(),
        ace,
        now_s,
    ))
}

/// Periodic control tick: reports consumption so far to the auditor.
pub fn aou_tick_p3(state: AouState, now_s: Seconds) -> (AouState, Vec<Action>) {
    if state.phase != AouPhase::Online {
        return (state, Vec::new());
    }
    let actions = consumption_report(&state, now_s)
        .map(Action::Send)
        .into_iter()
        .collect();
    (state, actions)
}
