//! Wall-clock mode over TCP.
//!
//! Every agent listens on its own address; the orchestrator connects to all of them and
//! forwards each agent message to its `to` peer. A run has two phases: the orchestrator
//! starts the predictive handshake, waits until every factory is online or has given up,
//! then starts the timers everywhere. After the horizon it asks each agent for its report
//! fragment and merges them.
//!
//! Simulated time advances by one second every `time_scale_ms` of wall time, counted
//! separately by each agent from the moment it is told to go online. Runs are not
//! reproducible event for event.

use super::node::{Node, TimerKind};
use super::sim::next_multiple;
use super::wire::{decode_wire, encode_wire, FrameError, Wire};
use super::{EventRecord, RunReport, RuntimeError};
use crate::agents::Action;
use crate::jobshop::Seconds;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedConfig {
    pub horizon_s: Seconds,
    pub time_scale_ms: u64,
    /// How long the orchestrator keeps retrying an agent that does not accept connections.
    pub connect_timeout: Duration,
    /// Upper bound on each of the predictive phase and the report collection.
    pub phase_timeout: Duration,
}

impl DistributedConfig {
    pub fn new(horizon_s: Seconds, time_scale_ms: u64) -> Self {
        DistributedConfig {
            horizon_s,
            time_scale_ms: time_scale_ms.max(1),
            connect_timeout: Duration::from_secs(10),
            phase_timeout: Duration::from_secs(120),
        }
    }

    fn online_duration(&self) -> Duration {
        Duration::from_millis(self.horizon_s.saturating_add(1) * self.time_scale_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentEndpoint {
    pub id: String,
    pub addr: String,
}

enum Inbound {
    Frame(usize, Wire),
    Closed(usize, String),
}

fn spawn_reader(mut stream: TcpStream, peer: usize, tx: Sender<Inbound>) {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match stream.read(&mut chunk) {
                Ok(0) => {
                    let _ = tx.send(Inbound::Closed(peer, "connection closed".into()));
                    return;
                }
                Ok(n) => buf.extend_from_slice(&chunk[..n]),
                Err(e) => {
                    let _ = tx.send(Inbound::Closed(peer, e.to_string()));
                    return;
                }
            }
            loop {
                match decode_wire(&buf) {
                    Ok((wire, used)) => {
                        buf.drain(..used);
                        if tx.send(Inbound::Frame(peer, wire)).is_err() {
                            return;
                        }
                    }
                    Err(FrameError::NeedMoreBytes { .. }) => break,
                    Err(e) => {
                        let _ = tx.send(Inbound::Closed(peer, e.to_string()));
                        return;
                    }
                }
            }
        }
    });
}

fn send(stream: &mut TcpStream, wire: &Wire) -> Result<(), RuntimeError> {
    let bytes = encode_wire(wire).map_err(|e| RuntimeError::Protocol(e.to_string()))?;
    stream.write_all(&bytes)?;
    Ok(())
}

struct AgentRun {
    node: Node,
    stream: TcpStream,
    failures: Vec<String>,
    events: Vec<EventRecord>,
}

impl AgentRun {
    fn absorb(&mut self, now_s: Seconds, actions: Vec<Action>) -> Result<(), RuntimeError> {
        let id = self.node.id().to_string();
        for action in actions {
            let mut note = |event: String| {
                self.events.push(EventRecord {
                    t_s: now_s,
                    agent: id.clone(),
                    event,
                })
            };
            match action {
                Action::Send(msg) => send(&mut self.stream, &Wire::Agent(msg))?,
                Action::WentOnline => note("online".into()),
                Action::NegotiationFailed => {
                    note("negotiation failed".into());
                    self.failures
                        .push(format!("t={now_s}: {id}: negotiation failed"));
                }
                Action::ProtocolError(e) | Action::Fault(e) => {
                    log::warn!("{id}: {e}");
                    note(format!("error: {e}"));
                    self.failures.push(format!("t={now_s}: {id}: {e}"));
                }
                Action::Note(n) => note(format!("note: {n}")),
            }
        }
        Ok(())
    }
}

/// Serves one agent: accepts the orchestrator's connection and runs until shut down.
pub fn run_agent(
    node: Node,
    listener: TcpListener,
    config: &DistributedConfig,
) -> Result<(), RuntimeError> {
    let (stream, peer) = listener.accept()?;
    log::info!("{}: orchestrator connected from {peer}", node.id());
    stream.set_nodelay(true)?;
    let (tx, rx) = mpsc::channel();
    spawn_reader(stream.try_clone()?, 0, tx);
    let mut run = AgentRun {
        stream,
        failures: Vec::new(),
        events: Vec::new(),
        node,
    };
    send(
        &mut run.stream,
        &Wire::Hello {
            from: run.node.id().to_string(),
            role: run.node.role(),
        },
    )?;

    let mut announced = false;
    let mut started: Option<Instant> = None;
    let mut timers: BTreeMap<(Seconds, TimerKind), ()> = BTreeMap::new();
    let tick_ms = config.time_scale_ms;
    let now = |started: &Option<Instant>| -> Seconds {
        started.map_or(0, |t0| t0.elapsed().as_millis() as u64 / tick_ms)
    };

    loop {
        let wait = match (started, timers.keys().next()) {
            (Some(t0), Some(&(due, _))) => {
                let due_at = t0 + Duration::from_millis(due * tick_ms);
                due_at.saturating_duration_since(Instant::now())
            }
            _ => Duration::from_millis(50),
        };
        match rx.recv_timeout(wait) {
            Ok(Inbound::Frame(_, wire)) => match wire {
                Wire::StartPredictive { .. } => {
                    let actions = run.node.start(0);
                    run.absorb(0, actions)?;
                }
                Wire::Agent(msg) => {
                    let t = now(&started);
                    run.events.push(EventRecord {
                        t_s: t,
                        agent: run.node.id().to_string(),
                        event: format!("recv {} from {}", msg.kind.name(), msg.from),
                    });
                    let actions = run.node.deliver(msg, t);
                    run.absorb(t, actions)?;
                }
                Wire::StartOnline { .. } => {
                    started = Some(Instant::now());
                    if config.horizon_s > 0 {
                        for (kind, period) in run.node.timers() {
                            let first = if kind == TimerKind::P1 { 0 } else { period };
                            timers.insert((first, kind), ());
                        }
                    }
                }
                Wire::Shutdown { .. } => {
                    let mut report = run.node.fragment();
                    report.failures = std::mem::take(&mut run.failures);
                    report.events = std::mem::take(&mut run.events);
                    send(
                        &mut run.stream,
                        &Wire::Report {
                            from: run.node.id().to_string(),
                            report: Box::new(report),
                        },
                    )?;
                    return Ok(());
                }
                other => log::warn!("{}: unexpected control frame {other:?}", run.node.id()),
            },
            Ok(Inbound::Closed(_, reason)) => {
                return Err(RuntimeError::Protocol(format!(
                    "{}: orchestrator connection lost: {reason}",
                    run.node.id()
                )));
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => {
                return Err(RuntimeError::Protocol("reader stopped".into()));
            }
        }

        if !announced
            && started.is_none()
            && run.node.is_settled()
            && run.node.role() == super::Role::Aou
        {
            announced = true;
            let failed = match run.node.fragment().factories.values().next() {
                Some(f) => f.failed,
                None => true,
            };
            send(
                &mut run.stream,
                &Wire::Online {
                    from: run.node.id().to_string(),
                    failed,
                },
            )?;
        }

        if started.is_some() {
            let t = now(&started);
            while let Some(&(due, kind)) = timers.keys().next() {
                if due > t {
                    break;
                }
                timers.remove(&(due, kind));
                if due > config.horizon_s {
                    continue;
                }
                let actions = run.node.tick(kind, due);
                run.absorb(due, actions)?;
                if let Some(period) = run.node.period(kind) {
                    timers.insert((next_multiple(due, period), kind), ());
                }
            }
        }
    }
}

fn connect_with_backoff(
    endpoint: &AgentEndpoint,
    timeout: Duration,
) -> Result<TcpStream, RuntimeError> {
    let deadline = Instant::now() + timeout;
    let mut delay = Duration::from_millis(20);
    loop {
        match TcpStream::connect(&endpoint.addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() + delay >= deadline => {
                return Err(RuntimeError::Unreachable {
                    peer: endpoint.id.clone(),
                    addr: endpoint.addr.clone(),
                    message: e.to_string(),
                })
            }
            Err(e) => {
                log::info!(
                    "{} at {} not ready ({e}), retrying in {delay:?}",
                    endpoint.id,
                    endpoint.addr
                );
                thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(1));
            }
        }
    }
}

struct Hub {
    ids: Vec<String>,
    streams: Vec<TcpStream>,
    rx: Receiver<Inbound>,
    failures: Vec<String>,
    lost: BTreeSet<usize>,
}

impl Hub {
    fn route(&mut self, from: usize, wire: Wire) -> Option<Wire> {
        match wire {
            Wire::Agent(msg) => {
                match self.ids.iter().position(|id| *id == msg.to) {
                    Some(to) if !self.lost.contains(&to) => {
                        if let Err(e) = send(&mut self.streams[to], &Wire::Agent(msg)) {
                            self.failures
                                .push(format!("forwarding to {}: {e}", self.ids[to]));
                        }
                    }
                    Some(to) => self
                        .failures
                        .push(format!("dropped message for lost peer {}", self.ids[to])),
                    None => self.failures.push(format!(
                        "{} sent {} to unknown agent {}",
                        self.ids[from],
                        msg.kind.name(),
                        msg.to
                    )),
                }
                None
            }
            other => Some(other),
        }
    }

    /// Routes agent traffic until `deadline`, handing control frames to `on_control`.
    /// Stops early once `on_control` returns true.
    fn pump(&mut self, deadline: Instant, mut on_control: impl FnMut(usize, Wire) -> bool) {
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            if wait.is_zero() {
                return;
            }
            match self.rx.recv_timeout(wait) {
                Ok(Inbound::Frame(from, wire)) => {
                    if let Some(control) = self.route(from, wire) {
                        if on_control(from, control) {
                            return;
                        }
                    }
                }
                Ok(Inbound::Closed(peer, reason)) => {
                    if self.lost.insert(peer) {
                        log::warn!("connection to {} lost: {reason}", self.ids[peer]);
                        self.failures
                            .push(format!("connection to {} lost: {reason}", self.ids[peer]));
                    }
                    if self.lost.len() == self.ids.len() {
                        return;
                    }
                }
                Err(_) => return,
            }
        }
    }

    fn broadcast(&mut self, make: impl Fn(&str) -> Wire, filter: impl Fn(usize) -> bool) {
        for i in 0..self.ids.len() {
            if filter(i) && !self.lost.contains(&i) {
                let wire = make(&self.ids[i]);
                if let Err(e) = send(&mut self.streams[i], &wire) {
                    self.failures
                        .push(format!("sending to {}: {e}", self.ids[i]));
                }
            }
        }
    }
}

/// Connects to every agent, drives both phases and merges the agents' report fragments in
/// `endpoints` order.
pub fn run_orchestrator(
    endpoints: &[AgentEndpoint],
    config: &DistributedConfig,
    seed: u64,
) -> Result<RunReport, RuntimeError> {
    let (tx, rx) = mpsc::channel();
    let mut streams = Vec::new();
    for (i, ep) in endpoints.iter().enumerate() {
        let stream = connect_with_backoff(ep, config.connect_timeout)?;
        stream.set_nodelay(true)?;
        spawn_reader(stream.try_clone()?, i, tx.clone());
        streams.push(stream);
    }
    drop(tx);
    let mut hub = Hub {
        ids: endpoints.iter().map(|e| e.id.clone()).collect(),
        streams,
        rx,
        failures: Vec::new(),
        lost: BTreeSet::new(),
    };

    let mut roles = BTreeMap::new();
    let deadline = Instant::now() + config.phase_timeout;
    let expected = endpoints.len();
    let mut hello_errors = Vec::new();
    hub.pump(deadline, |from, wire| {
        if let Wire::Hello { from: id, role } = wire {
            if id != endpoints[from].id {
                hello_errors.push(format!("{} answered as {id}", endpoints[from].addr));
            }
            roles.insert(from, role);
        }
        roles.len() == expected
    });
    if let Some(e) = hello_errors.into_iter().next() {
        return Err(RuntimeError::Protocol(e));
    }
    if roles.len() != expected {
        return Err(RuntimeError::Protocol(
            "not every agent introduced itself".into(),
        ));
    }

    let factories: BTreeSet<usize> = roles
        .iter()
        .filter(|(_, r)| **r == super::Role::Aou)
        .map(|(i, _)| *i)
        .collect();
    hub.broadcast(
        |id| Wire::StartPredictive { to: id.into() },
        |i| factories.contains(&i),
    );
    let mut settled = BTreeSet::new();
    let deadline = Instant::now() + config.phase_timeout;
    hub.pump(deadline, |from, wire| {
        if let Wire::Online { .. } = wire {
            settled.insert(from);
        }
        settled.len() == factories.len()
    });
    if settled.len() != factories.len() {
        hub.failures.push("predictive phase timed out".into());
    }

    hub.broadcast(|id| Wire::StartOnline { to: id.into() }, |_| true);
    let online_end = Instant::now() + config.online_duration();
    hub.pump(online_end, |_, _| false);

    hub.broadcast(|id| Wire::Shutdown { to: id.into() }, |_| true);
    let mut fragments: BTreeMap<usize, RunReport> = BTreeMap::new();
    let deadline = Instant::now() + config.phase_timeout;
    let waiting = expected - hub.lost.len();
    hub.pump(deadline, |from, wire| {
        if let Wire::Report { report, .. } = wire {
            fragments.insert(from, *report);
        }
        fragments.len() == waiting
    });

    let mut report = RunReport {
        seed,
        horizon_s: config.horizon_s,
        ..RunReport::default()
    };
    for (i, ep) in endpoints.iter().enumerate() {
        match fragments.remove(&i) {
            Some(f) => report.merge(f),
            None => hub.failures.push(format!("no report from {}", ep.id)),
        }
    }
    report.failures.extend(hub.failures);
    Ok(report)
}
