//! Brute-force oracles shared by the integration tests. Nothing here calls the decoder or
//! the rescheduling code it is used to check.
#![allow(dead_code)]

use easysched_core::agents::{AgentMessage, MessageKind, Reply};
use easysched_core::jobshop::{Energy, Instance, Placement, Schedule};
use easysched_core::resched::RescheduleOrder;
use easysched_core::runtime::{
    build_nodes, run_agent, AgentEndpoint, DistributedConfig, RunReport,
};
use easysched_core::scenario::LoadedScenario;
use proptest::prelude::*;
use std::net::TcpListener;
use std::thread;

/// Every interleaving of the jobs' routings, as a list of job indices.
pub fn interleavings(instance: &Instance) -> Vec<Vec<usize>> {
    fn rec(remaining: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(prefix.clone());
            return;
        }
        for j in 0..remaining.len() {
            if remaining[j] > 0 {
                remaining[j] -= 1;
                prefix.push(j);
                rec(remaining, prefix, out);
                prefix.pop();
                remaining[j] += 1;
            }
        }
    }
    let mut remaining: Vec<usize> = instance.jobs().iter().map(Vec::len).collect();
    let mut out = Vec::new();
    rec(&mut remaining, &mut Vec::new(), &mut out);
    out
}

/// Every speed vector in job-major operation order.
pub fn speed_vectors(n: usize, max_speed: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (1..=max_speed).map(move |s| {
                    let mut w = v.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    out
}

/// Appends operations in the given job order, each as early as its machine and job allow.
pub fn place_in_order(
    instance: &Instance,
    order: &[usize],
    speeds: &[usize],
) -> (Vec<Placement>, u64, Energy) {
    let offsets: Vec<usize> = instance
        .jobs()
        .iter()
        .scan(0, |acc, ops| {
            let o = *acc;
            *acc += ops.len();
            Some(o)
        })
        .collect();
    let mut next = vec![0; instance.num_jobs()];
    let mut job_free = vec![0u64; instance.num_jobs()];
    let mut machine_free = vec![0u64; instance.num_machines()];
    let mut placements = Vec::new();
    let mut energy = Energy::ZERO;
    for &j in order {
        let k = next[j];
        next[j] += 1;
        let op = &instance.jobs()[j][k];
        let v = speeds[offsets[j] + k];
        let start = job_free[j].max(machine_free[op.machine]);
        let end = start + op.profile[v - 1].duration_s;
        job_free[j] = end;
        machine_free[op.machine] = end;
        energy += op.profile[v - 1].energy;
        placements.push(Placement {
            job: j,
            rank: k,
            machine: op.machine,
            speed: v,
            start_s: start,
            end_s: end,
        });
    }
    let makespan = placements.iter().map(|p| p.end_s).max().unwrap_or(0);
    (placements, makespan, energy)
}

/// Weighted objective recomputed by hand from raw instance data.
pub fn oracle_objective(instance: &Instance, makespan: u64, energy: Energy, gamma: f64) -> f64 {
    let max_mk: u64 = instance
        .operations()
        .map(|o| o.profile.iter().map(|p| p.duration_s).max().unwrap())
        .sum();
    let max_e: u64 = instance
        .operations()
        .map(|o| o.profile.iter().map(|p| p.energy.tenths()).max().unwrap())
        .sum();
    gamma * makespan as f64 / max_mk as f64 + (1.0 - gamma) * energy.tenths() as f64 / max_e as f64
}

/// Smallest objective over all semi-active schedules.
pub fn exhaustive_optimum(instance: &Instance, gamma: f64) -> f64 {
    let speeds = speed_vectors(instance.num_operations(), instance.max_speed());
    let mut best = f64::INFINITY;
    for order in interleavings(instance) {
        for sv in &speeds {
            let (_, mk, e) = place_in_order(instance, &order, sv);
            best = best.min(oracle_objective(instance, mk, e, gamma));
        }
    }
    best
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn scenarios_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Writes `toml` plus a sensor trace next to it and loads the result.
pub fn scenario_with_trace(
    dir: &std::path::Path,
    toml: &str,
    trace_csv: &str,
) -> easysched_core::scenario::LoadedScenario {
    std::fs::write(dir.join("trace.csv"), trace_csv).unwrap();
    let instance = scenarios_dir().join("instances/f1_3x5x10.txt");
    let text = toml.replace("@INSTANCE@", &instance.display().to_string());
    std::fs::write(dir.join("scenario.toml"), text).unwrap();
    easysched_core::scenario::load_scenario(&dir.join("scenario.toml")).unwrap()
}

pub const CONSTANT_TRACE: &str = "t_s,temperature_c,humidity_pct\n0,19,36\n60,19,36\n";
pub const PULSE_TRACE: &str =
    "t_s,temperature_c,humidity_pct\n0,19,36\n22,28,33\n31,19,36\n60,19,36\n";

/// One factory on the bundled instance and one wind provider reading `trace.csv`.
pub const ONE_FACTORY: &str = r#"
seed = 19
horizon_s = 60

[pso]
swarm_size = 12
iterations = 40
neighborhood_size = 2

[network]
time_scale_ms = 20

[[factory]]
id = "AOU1"
provider = "AOE_wind"
instance = "@INSTANCE@"

[[provider]]
id = "AOE_wind"
capacity_wh = 1000.0

[provider.wind]
rotor_area_m2 = 10.0
wind_speed_ms = 8.0
baseline = { temperature_c = 19.0, humidity_pct = 36.0 }
trace = "trace.csv"
"#;

/// Fixed-sequence minimum energy by enumerating every speed vector of the open operations.
pub fn fixed_sequence_minimum(instance: &Instance, predictive: &Schedule, t_r: u64) -> Energy {
    let open: Vec<&Placement> = predictive
        .placements
        .iter()
        .filter(|p| p.start_s >= t_r)
        .collect();
    let frozen: Energy = predictive
        .placements
        .iter()
        .filter(|p| p.start_s < t_r)
        .map(|p| instance.jobs()[p.job][p.rank].profile[p.speed - 1].energy)
        .sum();
    speed_vectors(open.len(), instance.max_speed())
        .into_iter()
        .map(|sv| {
            open.iter()
                .zip(sv)
                .map(|(p, v)| instance.jobs()[p.job][p.rank].profile[v - 1].energy)
                .sum::<Energy>()
                + frozen
        })
        .min()
        .unwrap()
}

pub fn spawn_agents(
    s: &LoadedScenario,
    seed: u64,
    config: &DistributedConfig,
) -> Vec<AgentEndpoint> {
    let mut endpoints = Vec::new();
    for node in build_nodes(s, seed).unwrap() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        endpoints.push(AgentEndpoint {
            id: node.id().to_string(),
            addr: listener.local_addr().unwrap().to_string(),
        });
        let config = config.clone();
        thread::spawn(move || run_agent(node, listener, &config));
    }
    endpoints
}

/// Reactive rows without the receive instant, which depends on wall-clock scheduling.
pub fn timing_free(r: &RunReport) -> Vec<String> {
    r.reactive
        .iter()
        .map(|x| {
            format!(
                "{} {} {} {:.9} {:.9} {} {} {:.1} {} {:.1}",
                x.agent,
                x.source,
                x.time_resch_s,
                x.taux,
                x.budget_wh,
                x.penalty,
                x.old_mk,
                x.old_e,
                x.new_mk,
                x.new_e
            )
        })
        .collect()
}

/// Any valid agent message.
pub fn arb_message() -> impl Strategy<Value = AgentMessage> {
    let kind = prop_oneof![
        (1e-3f64..1e6).prop_map(|energy_wh| MessageKind::EnergyRequest { energy_wh }),
        any::<bool>().prop_map(|b| MessageKind::EnergyReply {
            reply: if b { Reply::Oui } else { Reply::Non }
        }),
        Just(MessageKind::ControlNoPerturbation),
        (0u64..1_000_000, 1e-6f64..=100.0).prop_map(|(t, taux)| MessageKind::ControlReschedule {
            order: RescheduleOrder::new(t, taux).unwrap()
        }),
        (0f64..1e7).prop_map(|cumulative_wh| MessageKind::ConsumptionReport { cumulative_wh }),
    ];
    (
        kind,
        "[A-Za-z0-9_é-]{1,12}",
        "[A-Za-z0-9_ ]{0,12}",
        any::<u64>(),
    )
        .prop_map(|(kind, from, to, t)| AgentMessage::new(kind, from, to, t))
}
