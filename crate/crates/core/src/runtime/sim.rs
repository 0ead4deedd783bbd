use super::node::{build_nodes, Node, TimerKind};
use super::{EventRecord, RunReport, RuntimeError};
use crate::agents::{Action, AgentMessage};
use crate::jobshop::Seconds;
use crate::scenario::LoadedScenario;
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Timer(TimerKind),
    Deliver(AgentMessage),
}

/// Timers sort before messages due at the same instant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct EventKey {
    due_s: Seconds,
    class: u8,
    owner: String,
    timer: Option<TimerKind>,
    seq: u64,
}

/// Pending events ordered by `(due, timers before messages, owner id, timer kind, insertion)`.
#[derive(Debug, Default)]
pub struct SimClock {
    pub now_s: Seconds,
    seq: u64,
    queue: BTreeMap<EventKey, SimEvent>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule_timer(&mut self, due_s: Seconds, owner: &str, kind: TimerKind) {
        self.push(due_s, 0, owner, Some(kind), SimEvent::Timer(kind));
    }

    pub fn schedule_message(&mut self, due_s: Seconds, msg: AgentMessage) {
        let owner = msg.to.clone();
        self.push(due_s, 1, &owner, None, SimEvent::Deliver(msg));
    }

    fn push(
        &mut self,
        due_s: Seconds,
        class: u8,
        owner: &str,
        timer: Option<TimerKind>,
        event: SimEvent,
    ) {
        let key = EventKey {
            due_s: due_s.max(self.now_s),
            class,
            owner: owner.to_string(),
            timer,
            seq: self.seq,
        };
        self.seq += 1;
        self.queue.insert(key, event);
    }

    pub fn peek_due(&self) -> Option<Seconds> {
        self.queue.keys().next().map(|k| k.due_s)
    }

    /// Removes the earliest event and advances `now_s` to it.
    pub fn pop(&mut self) -> Option<(Seconds, String, SimEvent)> {
        let (key, event) = self.queue.pop_first()?;
        self.now_s = key.due_s;
        Some((key.due_s, key.owner, event))
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Next multiple of `period` strictly after `now_s`.
pub(crate) fn next_multiple(now_s: Seconds, period: Seconds) -> Seconds {
    (now_s / period + 1) * period
}

struct Run {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    report: RunReport,
}

impl Run {
    fn record(&mut self, t_s: Seconds, agent: &str, event: String) {
        self.report.events.push(EventRecord {
            t_s,
            agent: agent.to_string(),
            event,
        });
    }

    /// Logs non-message actions and returns the messages to send.
    fn absorb(&mut self, t_s: Seconds, agent: &str, actions: Vec<Action>) -> Vec<AgentMessage> {
        let mut out = Vec::new();
        for action in actions {
            match action {
                Action::Send(msg) => {
                    if self.index.contains_key(&msg.to) {
                        out.push(msg);
                    } else {
                        self.report.failures.push(format!(
                            "t={t_s}: {agent} sent {} to unknown agent {}",
                            msg.kind.name(),
                            msg.to
                        ));
                    }
                }
                Action::WentOnline => self.record(t_s, agent, "online".into()),
                Action::NegotiationFailed => {
                    self.record(t_s, agent, "negotiation failed".into());
                    self.report
                        .failures
                        .push(format!("t={t_s}: {agent}: negotiation failed"));
                }
                Action::ProtocolError(e) | Action::Fault(e) => {
                    self.record(t_s, agent, format!("error: {e}"));
                    self.report.failures.push(format!("t={t_s}: {agent}: {e}"));
                }
                Action::Note(n) => self.record(t_s, agent, format!("note: {n}")),
            }
        }
        out
    }

    fn deliver(&mut self, msg: AgentMessage, now_s: Seconds) -> Vec<AgentMessage> {
        let to = msg.to.clone();
        self.record(
            now_s,
            &to,
            format!("recv {} from {}", msg.kind.name(), msg.from),
        );
        let i = self.index[&to];
        let actions = self.nodes[i].deliver(msg, now_s);
        self.absorb(now_s, &to, actions)
    }
}

/// Runs a scenario on the simulated clock.
///
/// The predictive handshake completes at t = 0 with instant delivery. The online phase then
/// runs provider and factory timers up to `horizon_s`, delivering messages after the
/// scenario's fixed latency. Identical inputs give an identical report.
pub fn run_simulation(scenario: &LoadedScenario, seed: u64) -> Result<RunReport, RuntimeError> {
    let nodes = build_nodes(scenario, seed)?;
    let index = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id().to_string(), i))
        .collect();
    let mut run = Run {
        nodes,
        index,
        report: RunReport {
            seed,
            horizon_s: scenario.scenario.horizon_s,
            ..RunReport::default()
        },
    };

    let mut inbox = VecDeque::new();
    for i in 0..run.nodes.len() {
        let id = run.nodes[i].id().to_string();
        let actions = run.nodes[i].start(0);
        inbox.extend(run.absorb(0, &id, actions));
    }
    while let Some(msg) = inbox.pop_front() {
        let sent = run.deliver(msg, 0);
        inbox.extend(sent);
    }

    let horizon = scenario.scenario.horizon_s;
    let latency = scenario.scenario.network.latency_s;
    if horizon > 0 {
        let mut clock = SimClock::new();
        for node in &run.nodes {
            for (kind, period) in node.timers() {
                let first = if kind == TimerKind::P1 { 0 } else { period };
                clock.schedule_timer(first, node.id(), kind);
            }
        }
        while clock.peek_due().is_some_and(|t| t <= horizon) {
            let (now, owner, event) = clock.pop().expect("peeked");
            let sent = match event {
                SimEvent::Timer(kind) => {
                    let i = run.index[&owner];
                    let actions = run.nodes[i].tick(kind, now);
                    if let Some(period) = run.nodes[i].period(kind) {
                        clock.schedule_timer(next_multiple(now, period), &owner, kind);
                    }
                    run.absorb(now, &owner, actions)
                }
                SimEvent::Deliver(msg) => run.deliver(msg, now),
            };
            for msg in sent {
                clock.schedule_message(now + latency, msg);
            }
        }
    }

    let Run {
        nodes, mut report, ..
    } = run;
    for node in &nodes {
        report.merge(node.fragment());
    }
    Ok(report)
}
