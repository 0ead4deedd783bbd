use super::{FactoryOutcome, ProviderOutcome, RunReport, RuntimeError};
use crate::agents::{
    ace_record, aoe_online_step, aou_online_step, aou_predictive_step, aou_tick_p3, AceState,
    Action, AgentMessage, AoeEvent, AoeState, AouEvent, AouPhase, AouState, ConsumptionReport,
    MessageKind, PsoSolver,
};
use crate::energy::SensorTrace;
use crate::jobshop::Seconds;
use crate::scenario::LoadedScenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    /// Sensor acquisition.
    P1,
    /// False-alarm verification.
    P2,
    /// Factory control and consumption reporting.
    P3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Aou,
    Aoe,
    Ace,
}

/// One agent's state plus whatever it needs to run its step functions.
#[derive(Debug, Clone)]
pub enum Node {
    Factory {
        state: Box<AouState>,
        solver: PsoSolver,
    },
    Provider {
        state: Box<AoeState>,
        trace: Option<SensorTrace>,
    },
    Auditor {
        id: String,
        state: AceState,
        rejected: Vec<String>,
    },
}

fn take<T: Clone>(slot: &mut Box<T>) -> T {
    (**slot).clone()
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Factory { state, .. } => &state.id,
            Node::Provider { state, .. } => &state.id,
            Node::Auditor { id, .. } => id,
        }
    }

    pub fn role(&self) -> Role {
        match self {
            Node::Factory { .. } => Role::Aou,
            Node::Provider { .. } => Role::Aoe,
            Node::Auditor { .. } => Role::Ace,
        }
    }

    /// Starts the predictive handshake; only factories act on it.
    pub fn start(&mut self, now_s: Seconds) -> Vec<Action> {
        match self {
            Node::Factory { state, solver } => {
                let (next, actions) =
                    aou_predictive_step(take(state), AouEvent::Start, now_s, solver);
                **state = next;
                actions
            }
            _ => Vec::new(),
        }
    }

    pub fn deliver(&mut self, msg: AgentMessage, now_s: Seconds) -> Vec<Action> {
        match self {
            Node::Factory { state, solver } => {
                let current = take(state);
                let (next, actions) =
                    if current.phase == AouPhase::Online || current.phase == AouPhase::Done {
                        aou_online_step(current, &msg, now_s)
                    } else {
                        aou_predictive_step(current, AouEvent::Message(msg), now_s, solver)
                    };
                **state = next;
                actions
            }
            Node::Provider { state, .. } => {
                let (next, actions) = aoe_online_step(take(state), AoeEvent::Message(msg), now_s);
                **state = next;
                actions
            }
            Node::Auditor {
                state, rejected, ..
            } => match msg.kind {
                MessageKind::ConsumptionReport { cumulative_wh } => {
                    let report = ConsumptionReport {
                        factory: msg.from,
                        t_s: msg.sent_at_s,
                        cumulative_wh,
                    };
                    let (next, result) = ace_record(std::mem::take(state), report);
                    *state = next;
                    match result {
                        Ok(()) => Vec::new(),
                        Err(e) => {
                            rejected.push(e.to_string());
                            vec![Action::ProtocolError(e.to_string())]
                        }
                    }
                }
                other => vec![Action::ProtocolError(format!(
                    "{} from {} not handled by the auditor",
                    other.name(),
                    msg.from
                ))],
            },
        }
    }

    pub fn tick(&mut self, kind: TimerKind, now_s: Seconds) -> Vec<Action> {
        match (self, kind) {
            (
                Node::Provider {
                    state,
                    trace: Some(trace),
                },
                TimerKind::P1,
            ) => {
                let sample = trace.sample_at(now_s);
                let (next, actions) = aoe_online_step(take(state), AoeEvent::TickP1(sample), now_s);
                **state = next;
                actions
            }
            (Node::Provider { trace: None, .. }, TimerKind::P1) => Vec::new(),
            (Node::Provider { state, .. }, TimerKind::P2) => {
                let (next, actions) = aoe_online_step(take(state), AoeEvent::TickP2, now_s);
                **state = next;
                actions
            }
            (Node::Factory { state, .. }, TimerKind::P3) => {
                let (next, actions) = aou_tick_p3(take(state), now_s);
                **state = next;
                actions
            }
            _ => Vec::new(),
        }
    }

    /// Timers this node runs during the online phase, with their current periods.
    pub fn timers(&self) -> Vec<(TimerKind, Seconds)> {
        match self {
            Node::Factory { state, .. } if state.phase == AouPhase::Online => {
                vec![(TimerKind::P3, state.p3_s)]
            }
            Node::Provider { state, .. } => {
                vec![(TimerKind::P1, state.p1_s), (TimerKind::P2, state.p2_s())]
            }
            _ => Vec::new(),
        }
    }

    pub fn period(&self, kind: TimerKind) -> Option<Seconds> {
        self.timers()
            .into_iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, p)| p)
    }

    pub fn is_settled(&self) -> bool {
        match self {
            Node::Factory { state, .. } => matches!(state.phase, AouPhase::Online | AouPhase::Done),
            _ => true,
        }
    }

    /// This node's contribution to a run report.
    pub fn fragment(&self) -> RunReport {
        let mut report = RunReport::default();
        match self {
            Node::Factory { state, .. } => {
                report.negotiation = state.history.clone();
                report.reactive = state.reactive.clone();
                report.factories.insert(
                    state.id.clone(),
                    FactoryOutcome {
                        failed: state.failed,
                        accepted_gamma: state.accepted.as_ref().map(|_| state.gamma()),
                        accepted: state.accepted.clone(),
                        final_schedule: state.current.clone().filter(|_| state.accepted.is_some()),
                        heartbeats: state.heartbeats,
                    },
                );
            }
            Node::Provider { state, .. } => {
                report.providers.insert(
                    state.id.clone(),
                    ProviderOutcome {
                        committed_wh: state.committed.wh(),
                        orders_emitted: state.orders_emitted,
                        final_p2_s: state.p2_s(),
                    },
                );
            }
            Node::Auditor { state, .. } => {
                report.ace_ledger = state.ledger.clone();
            }
        }
        report
    }
}

/// Seed for factory `index` of a run seeded with `seed`.
pub fn factory_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64) << 32)
}

/// Builds every agent of a scenario, factories first, then providers, then the auditor.
pub fn build_nodes(scenario: &LoadedScenario, seed: u64) -> Result<Vec<Node>, RuntimeError> {
    let spec = &scenario.scenario;
    let mut nodes = Vec::new();
    for (i, f) in scenario.factories.iter().enumerate() {
        let mut state = AouState::new(
            f.spec.id.clone(),
            f.spec.provider.clone(),
            f.instance.clone(),
            spec.gamma0,
            spec.alpha,
        );
        state.ace = Some(spec.ace.id.clone());
        state.p3_s = spec.periods.p3_s;
        state.reschedule = spec.reschedule;
        state
            .validate()
            .map_err(|e| RuntimeError::Agent(f.spec.id.clone(), e))?;
        let solver = PsoSolver {
            params: spec.pso.clone().with_seed(factory_seed(seed, i)),
        };
        nodes.push(Node::Factory {
            state: Box::new(state),
            solver,
        });
    }
    for p in &scenario.providers {
        let mut state = AoeState::new(p.spec.id.clone(), p.source.clone(), p.spec.capacity_wh)
            .with_periods(spec.periods.p1_s, spec.periods.p2_s);
        state.filter.cap_factor = spec.filter.cap_factor;
        state.subscribers = scenario
            .factories
            .iter()
            .filter(|f| scenario.subscriptions(&f.spec).contains(&p.spec.id))
            .map(|f| f.spec.id.clone())
            .collect();
        state
            .validate()
            .map_err(|e| RuntimeError::Agent(p.spec.id.clone(), e))?;
        nodes.push(Node::Provider {
            state: Box::new(state),
            trace: p.trace.clone(),
        });
    }
    nodes.push(Node::Auditor {
        id: spec.ace.id.clone(),
        state: AceState::default(),
        rejected: Vec::new(),
    });
    Ok(nodes)
}
