use crate::{input_error, CliError, Globals};
use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use easysched_core::jobshop::{evaluate, gantt_export, generate_instance, load_instance};
use easysched_core::runtime::{
    build_nodes, run_agent, run_orchestrator, run_simulation, AgentEndpoint, DistributedConfig,
    Node, Role, RunReport,
};
use easysched_core::scenario::{load_scenario, LoadedScenario};
use easysched_core::{pso_run, Instance, PsoParams, Schedule, Seconds};
use rayon::prelude::*;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

#[derive(Args, Debug, Clone, Default)]
pub struct PsoArgs {
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    inertia: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    neighborhood: Option<usize>,
}

impl PsoArgs {
    fn apply(&self, mut p: PsoParams) -> Result<PsoParams, CliError> {
        if let Some(v) = self.swarm {
            p.swarm_size = v;
            p.neighborhood_size = p.neighborhood_size.min(v.saturating_sub(1));
        }
        if let Some(v) = self.iterations {
            p.iterations = v;
        }
        if let Some(v) = self.inertia {
            p.inertia = v;
        }
        if let Some(v) = self.c1 {
            p.cognitive = v;
        }
        if let Some(v) = self.c2 {
            p.social = v;
        }
        if let Some(v) = self.neighborhood {
            p.neighborhood_size = v;
        }
        p.validate().map_err(input_error)?;
        Ok(p)
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_error(anyhow!("instance not found: {} ({e})", path.display())))?;
    load_instance(&text).map_err(|e| input_error(anyhow!("{}: {e}", path.display())))
}

fn check_gamma(gamma: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(input_error(anyhow!(
            "gamma must lie in [0, 1], got {gamma}"
        )))
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(short, long)]
    machines: usize,
    #[arg(short = 'n', long)]
    jobs: usize,
    #[arg(short = 'v', long, default_value_t = 5)]
    speeds: usize,
    /// Multiply every energy by this factor.
    #[arg(long, default_value_t = 1.0)]
    energy_scale: f64,
    /// Output file; defaults to a name derived from the dimensions inside --out-dir.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn gen(g: &Globals, a: GenArgs) -> Result<(), CliError> {
    if a.machines == 0 || a.jobs == 0 || a.speeds == 0 {
        return Err(input_error(anyhow!(
            "machines, jobs and speeds must be at least 1"
        )));
    }
    if !(a.energy_scale.is_finite() && a.energy_scale > 0.0) {
        return Err(input_error(anyhow!("energy scale must be positive")));
    }
    let seed = g.seed.unwrap_or(0);
    let mut inst = generate_instance(a.machines, a.jobs, a.speeds, seed);
    if a.energy_scale != 1.0 {
        inst = inst.scale_energy(a.energy_scale);
    }
    let path = match a.output {
        Some(p) => p,
        None => {
            ensure_out_dir(&g.out_dir)?;
            g.out_dir
                .join(format!("instance_{}_s{seed}.txt", inst.size_label()))
        }
    };
    write(&path, &inst.to_text())?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    instance: PathBuf,
    #[arg(short, long, default_value_t = 1.0)]
    gamma: f64,
    /// Number of consecutive seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[command(flatten)]
    pso: PsoArgs,
}

pub fn predict(g: &Globals, a: PredictArgs) -> Result<(), CliError> {
    check_gamma(a.gamma)?;
    if a.seeds == 0 {
        return Err(input_error(anyhow!("--seeds must be at least 1")));
    }
    let inst = read_instance(&a.instance)?;
    let params = a.pso.apply(PsoParams::default())?;
    let base = g.seed.unwrap_or(0);
    let outcomes = (0..a.seeds as u64)
        .into_par_iter()
        .map(|k| pso_run(&inst, a.gamma, &params.clone().with_seed(base + k)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_error)?;
    println!("gamma,makespan,energy,F");
    for o in &outcomes {
        println!(
            "{},{},{},{:.6}",
            a.gamma, o.schedule.makespan_s, o.schedule.total_energy, o.objective
        );
    }
    let best = outcomes
        .iter()
        .min_by(|x, y| x.objective.total_cmp(&y.objective))
        .expect("at least one seed");
    ensure_out_dir(&g.out_dir)?;
    write(
        &g.out_dir.join("schedule.json"),
        &serde_json::to_string_pretty(&best.schedule)?,
    )?;
    write(&g.out_dir.join("gantt.csv"), &gantt_export(&best.schedule))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct RunArgs {
    scenario: PathBuf,
    /// Overrides the scenario's repetition count.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Overrides the scenario's horizon.
    #[arg(long)]
    horizon: Option<Seconds>,
}

fn load(path: &Path) -> Result<LoadedScenario, CliError> {
    load_scenario(path).map_err(input_error)
}

fn write_report(dir: &Path, report: &RunReport) -> Result<(), CliError> {
    ensure_out_dir(dir)?;
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join("negotiation.csv"), &report.negotiation_csv())?;
    write(&dir.join("reactive.csv"), &report.reactive_csv())?;
    Ok(())
}

fn final_schedule(report: &RunReport, id: &str) -> Option<Schedule> {
    report
        .factories
        .get(id)
        .and_then(|f| f.final_schedule.clone())
}

/// Per-factory mean and best final makespan and energy across reports.
pub fn aggregate_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("agent,runs,mean_mk,best_mk,mean_e,best_e\n");
    let Some(first) = reports.first() else {
        return out;
    };
    for id in first.factories.keys() {
        let finals: Vec<Schedule> = reports
            .iter()
            .filter_map(|r| final_schedule(r, id))
            .collect();
        if finals.is_empty() {
            out.push_str(&format!("{id},0,,,,\n"));
            continue;
        }
        let n = finals.len() as f64;
        let mean_mk = finals.iter().map(|s| s.makespan_s as f64).sum::<f64>() / n;
        let mean_e = finals.iter().map(|s| s.total_energy.wh()).sum::<f64>() / n;
        let best_mk = finals.iter().map(|s| s.makespan_s).min().unwrap_or(0);
        let best_e = finals
            .iter()
            .map(|s| s.total_energy)
            .min()
            .unwrap_or_default();
        out.push_str(&format!(
            "{id},{},{mean_mk:.2},{best_mk},{mean_e:.2},{best_e}\n",
            finals.len()
        ));
    }
    out
}

fn summarize(report: &RunReport) {
    for (id, f) in &report.factories {
        match (&f.accepted, &f.final_schedule) {
            (Some(a), Some(fin)) => println!(
                "{id}: accepted gamma={} mk={} E={} -> final mk={} E={}",
                f.accepted_gamma.unwrap_or(f64::NAN),
                a.makespan_s,
                a.total_energy,
                fin.makespan_s,
                fin.total_energy
            ),
            _ => println!("{id}: no accepted schedule"),
        }
    }
    for row in &report.reactive {
        println!(
            "{} <- {}: taux={:.2}% budget={:.1} E {:.1} -> {:.1} mk {} -> {} penalty={}",
            row.agent,
            row.source,
            row.taux,
            row.budget_wh,
            row.old_e,
            row.new_e,
            row.old_mk,
            row.new_mk,
            row.penalty
        );
    }
    for f in &report.failures {
        eprintln!("warning: {f}");
    }
}

pub fn run(g: &Globals, a: RunArgs) -> Result<(), CliError> {
    let mut scenario = load(&a.scenario)?;
    if let Some(r) = a.repetitions {
        if r == 0 {
            return Err(input_error(anyhow!("--repetitions must be at least 1")));
        }
        scenario.scenario.repetitions = r;
    }
    if let Some(h) = a.horizon {
        scenario.scenario.horizon_s = h;
    }
    let base = g.seed.unwrap_or(scenario.scenario.seed);
    let reps = scenario.scenario.repetitions;
    let reports = (0..reps as u64)
        .into_par_iter()
        .map(|k| run_simulation(&scenario, base.wrapping_add(k)))
        .collect::<Result<Vec<_>, _>>()?;
    if reps == 1 {
        write_report(&g.out_dir, &reports[0])?;
        summarize(&reports[0]);
    } else {
        for (k, r) in reports.iter().enumerate() {
            write_report(&g.out_dir.join(format!("rep_{k}")), r)?;
        }
        let agg = aggregate_csv(&reports);
        write(&g.out_dir.join("aggregate.csv"), &agg)?;
        print!("{agg}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Instance file; a generated instance is used when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(short, long, default_value_t = 3)]
    machines: usize,
    #[arg(short = 'v', long, default_value_t = 5)]
    speeds: usize,
    #[arg(short = 'n', long, default_value_t = 10)]
    jobs: usize,
    /// Seed of the generated instance.
    #[arg(long, default_value_t = 42)]
    instance_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    energy_scale: f64,
    /// Comma-separated objective weights.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[command(flatten)]
    pso: PsoArgs,
}

pub fn bench(g: &Globals, a: BenchArgs) -> Result<(), CliError> {
    if a.gammas.is_empty() {
        return Err(input_error(anyhow!("--gammas needs at least one value")));
    }
    for &gamma in &a.gammas {
        check_gamma(gamma)?;
    }
    if a.seeds == 0 {
        return Err(input_error(anyhow!("--seeds must be at least 1")));
    }
    let inst = match &a.instance {
        Some(p) => read_instance(p)?,
        None => {
            if a.machines == 0 || a.jobs == 0 || a.speeds == 0 {
                return Err(input_error(anyhow!(
                    "machines, jobs and speeds must be at least 1"
                )));
            }
            generate_instance(a.machines, a.jobs, a.speeds, a.instance_seed)
        }
    };
    let inst = if a.energy_scale == 1.0 {
        inst
    } else {
        inst.scale_energy(a.energy_scale)
    };
    let params = a.pso.apply(PsoParams::default())?;
    let base = g.seed.unwrap_or(0);
    let jobs: Vec<(usize, u64)> = (0..a.gammas.len())
        .flat_map(|i| (0..a.seeds as u64).map(move |k| (i, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, k)| {
            pso_run(&inst, a.gammas[i], &params.clone().with_seed(base + k))
                .map(|o| (i, o.schedule))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_error)?;

    let mut out = String::from("gamma,seeds,mean_mk,best_mk,mean_e,best_e\n");
    for (i, gamma) in a.gammas.iter().enumerate() {
        let runs: Vec<&Schedule> = results
            .iter()
            .filter(|(j, _)| *j == i)
            .map(|(_, s)| s)
            .collect();
        let n = runs.len() as f64;
        let mean_mk = runs.iter().map(|s| s.makespan_s as f64).sum::<f64>() / n;
        let mean_e = runs.iter().map(|s| s.total_energy.wh()).sum::<f64>() / n;
        let best_mk = runs.iter().map(|s| s.makespan_s).min().unwrap_or(0);
        let best_e = runs
            .iter()
            .map(|s| s.total_energy)
            .min()
            .unwrap_or_default();
        out.push_str(&format!(
            "{gamma},{},{mean_mk:.2},{best_mk},{mean_e:.2},{best_e}\n",
            runs.len()
        ));
    }
    print!("{out}");
    ensure_out_dir(&g.out_dir)?;
    write(&g.out_dir.join("bench.csv"), &out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ServeRole {
    Aou,
    Aoe,
    Ace,
    Orchestrator,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    scenario: PathBuf,
    #[arg(long, value_enum)]
    role: ServeRole,
    /// Agent id from the scenario; not needed for the orchestrator or the auditor.
    #[arg(long)]
    id: Option<String>,
    /// Overrides the listen address from the scenario.
    #[arg(long)]
    listen: Option<String>,
}

fn listen_address(scenario: &LoadedScenario, id: &str) -> Option<String> {
    let s = &scenario.scenario;
    s.factories
        .iter()
        .find(|f| f.id == id)
        .and_then(|f| f.listen.clone())
        .or_else(|| {
            s.providers
                .iter()
                .find(|p| p.id == id)
                .and_then(|p| p.listen.clone())
        })
        .or_else(|| (s.ace.id == id).then(|| s.ace.listen.clone()).flatten())
}

pub fn serve(g: &Globals, a: ServeArgs) -> Result<(), CliError> {
    let scenario = load(&a.scenario)?;
    let seed = g.seed.unwrap_or(scenario.scenario.seed);
    let nodes = build_nodes(&scenario, seed)?;
    let config = DistributedConfig::new(
        scenario.scenario.horizon_s,
        scenario.scenario.network.time_scale_ms,
    );

    if a.role == ServeRole::Orchestrator {
        let mut endpoints = Vec::new();
        for node in &nodes {
            let addr = listen_address(&scenario, node.id()).ok_or_else(|| {
                input_error(anyhow!(
                    "agent {} has no listen address in the scenario",
                    node.id()
                ))
            })?;
            endpoints.push(AgentEndpoint {
                id: node.id().to_string(),
                addr,
            });
        }
        let report = run_orchestrator(&endpoints, &config, seed)?;
        write_report(&g.out_dir, &report)?;
        summarize(&report);
        return Ok(());
    }

    let want = match a.role {
        ServeRole::Aou => Role::Aou,
        ServeRole::Aoe => Role::Aoe,
        _ => Role::Ace,
    };
    let id = match (&a.id, want) {
        (Some(id), _) => id.clone(),
        (None, Role::Ace) => scenario.scenario.ace.id.clone(),
        (None, _) => return Err(input_error(anyhow!("--id is required for this role"))),
    };
    let node: Node = nodes
        .into_iter()
        .find(|n| n.id() == id)
        .ok_or_else(|| input_error(anyhow!("no agent {id:?} in the scenario")))?;
    if node.role() != want {
        return Err(input_error(anyhow!(
            "agent {id} is a {:?}, not a {want:?}",
            node.role()
        )));
    }
    let addr = a
        .listen
        .or_else(|| listen_address(&scenario, &id))
        .ok_or_else(|| input_error(anyhow!("no listen address for {id}")))?;
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    log::info!("{id} listening on {}", listener.local_addr()?);
    run_agent(node, listener, &config)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct GanttArgs {
    /// Schedule JSON as written by `predict`.
    schedule: PathBuf,
    /// Check the schedule against this instance first.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn gantt(_g: &Globals, a: GanttArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.schedule).map_err(|e| {
        input_error(anyhow!(
            "schedule not found: {} ({e})",
            a.schedule.display()
        ))
    })?;
    let schedule: Schedule = serde_json::from_str(&text)
        .map_err(|e| input_error(anyhow!("{}: {e}", a.schedule.display())))?;
    if let Some(path) = &a.instance {
        let inst = read_instance(path)?;
        evaluate(&schedule, &inst)
            .map_err(|e| input_error(anyhow!("schedule does not fit the instance: {e}")))?;
    }
    let csv = gantt_export(&schedule);
    match a.output {
        Some(p) => write(&p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
