use super::{Energy, Instance, OpRef, Seconds};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// One operation placed on its machine at a chosen speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub job: usize,
    pub rank: usize,
    pub machine: usize,
    pub speed: usize,
    pub start_s: Seconds,
    pub end_s: Seconds,
}

impl Placement {
    pub fn op_ref(&self) -> OpRef {
        OpRef::new(self.job, self.rank)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("placement {0} references an operation that is not in the instance")]
    UnknownOperation(OpRef),
    #[error("operation {0} is placed more than once")]
    Duplicate(OpRef),
    #[error("operation {op} runs on machine {found} but its routing requires machine {expected}")]
    WrongMachine {
        op: OpRef,
        expected: usize,
        found: usize,
    },
    #[error("operation {op} uses speed {speed}, outside 1..={max}")]
    SpeedOutOfRange { op: OpRef, speed: usize, max: usize },
    #[error("operation {op}: end {end_s} != start {start_s} + duration {duration_s}")]
    DurationMismatch {
        op: OpRef,
        start_s: Seconds,
        end_s: Seconds,
        duration_s: Seconds,
    },
    #[error("operations {first} and {second} overlap on machine {machine}")]
    MachineOverlap {
        machine: usize,
        first: OpRef,
        second: OpRef,
    },
    #[error("operation {later} starts before its predecessor {earlier} ends")]
    Precedence { earlier: OpRef, later: OpRef },
    #[error("operation {0} is missing from the schedule")]
    Missing(OpRef),
    #[error("cached {field} is {cached} but placements give {actual}")]
    CacheMismatch {
        field: &'static str,
        cached: u64,
        actual: u64,
    },
}

/// A decoded solution with its makespan and total energy cached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub placements: Vec<Placement>,
    pub makespan_s: Seconds,
    pub total_energy: Energy,
}

impl Schedule {
    pub fn empty() -> Self {
        Schedule {
            placements: Vec::new(),
            makespan_s: 0,
            total_energy: Energy::ZERO,
        }
    }

    /// Builds a schedule and fills the cached totals. Placements that do not exist in
    /// `instance` contribute no energy; run [`evaluate`] to reject them.
    pub fn from_placements(placements: Vec<Placement>, instance: &Instance) -> Self {
        let makespan_s = placements.iter().map(|p| p.end_s).max().unwrap_or(0);
        let total_energy = placements
            .iter()
            .filter_map(|p| placement_energy(p, instance))
            .sum();
        Schedule {
            placements,
            makespan_s,
            total_energy,
        }
    }

    pub fn find(&self, at: OpRef) -> Option<&Placement> {
        self.placements.iter().find(|p| p.op_ref() == at)
    }

    /// Operations on each machine, in start-time order.
    pub fn machine_sequences(&self, num_machines: usize) -> Vec<Vec<OpRef>> {
        let mut by_machine: Vec<Vec<&Placement>> = vec![Vec::new(); num_machines];
        for p in &self.placements {
            if p.machine < num_machines {
                by_machine[p.machine].push(p);
            }
        }
        by_machine
            .into_iter()
            .map(|mut ps| {
                ps.sort_by_key(|p| (p.start_s, p.end_s, p.job, p.rank));
                ps.into_iter().map(Placement::op_ref).collect()
            })
            .collect()
    }

    /// Energy spent up to time `t`, with running operations counted pro rata (floored to 0.1 Wh).
    pub fn energy_consumed_by(&self, t: Seconds, instance: &Instance) -> Energy {
        self.placements
            .iter()
            .filter_map(|p| {
                let e = placement_energy(p, instance)?;
                if p.end_s <= t {
                    Some(e)
                } else if p.start_s >= t {
                    None
                } else {
                    let done = t - p.start_s;
                    let len = p.end_s - p.start_s;
                    Some(Energy::from_tenths(e.tenths() * done / len))
                }
            })
            .sum()
    }

    pub fn ensure_complete(&self, instance: &Instance) -> Result<(), FeasibilityError> {
        let present: HashSet<OpRef> = self.placements.iter().map(Placement::op_ref).collect();
        for op in instance.operations() {
            if !present.contains(&op.op_ref()) {
                return Err(FeasibilityError::Missing(op.op_ref()));
            }
        }
        Ok(())
    }
}

fn placement_energy(p: &Placement, instance: &Instance) -> Option<Energy> {
    let op = instance.op(p.op_ref())?;
    op.profile.get(p.speed.checked_sub(1)?).map(|s| s.energy)
}

/// Recomputes makespan and total energy after checking feasibility.
///
/// Checks, in order: every placement names a real operation on its routed machine at a
/// valid speed with a consistent end time; no operation appears twice; no two placements
/// overlap on a machine; consecutive operations of a job do not overlap; and the cached
/// totals agree with the placements. Partial schedules are accepted.
pub fn evaluate(
    schedule: &Schedule,
    instance: &Instance,
) -> Result<(Seconds, Energy), FeasibilityError> {
    let mut seen = HashSet::new();
    let mut energy = Energy::ZERO;
    for p in &schedule.placements {
        let at = p.op_ref();
        let op = instance
            .op(at)
            .ok_or(FeasibilityError::UnknownOperation(at))?;
        if op.machine != p.machine {
            return Err(FeasibilityError::WrongMachine {
                op: at,
                expected: op.machine,
                found: p.machine,
            });
        }
        if p.speed == 0 || p.speed > instance.max_speed() {
            return Err(FeasibilityError::SpeedOutOfRange {
                op: at,
                speed: p.speed,
                max: instance.max_speed(),
            });
        }
        let duration_s = op.duration(p.speed);
        if p.end_s != p.start_s + duration_s {
            return Err(FeasibilityError::DurationMismatch {
                op: at,
                start_s: p.start_s,
                end_s: p.end_s,
                duration_s,
            });
        }
        if !seen.insert(at) {
            return Err(FeasibilityError::Duplicate(at));
        }
        energy += op.energy(p.speed);
    }

    let mut by_machine: Vec<Vec<&Placement>> = vec![Vec::new(); instance.num_machines()];
    for p in &schedule.placements {
        by_machine[p.machine].push(p);
    }
    for (machine, ps) in by_machine.iter_mut().enumerate() {
        ps.sort_by_key(|p| (p.start_s, p.end_s));
        for w in ps.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(FeasibilityError::MachineOverlap {
                    machine,
                    first: w[0].op_ref(),
                    second: w[1].op_ref(),
                });
            }
        }
    }

    let mut by_job: Vec<Vec<&Placement>> = vec![Vec::new(); instance.num_jobs()];
    for p in &schedule.placements {
        by_job[p.job].push(p);
    }
    for ps in &mut by_job {
        ps.sort_by_key(|p| p.rank);
        for w in ps.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(FeasibilityError::Precedence {
                    earlier: w[0].op_ref(),
                    later: w[1].op_ref(),
                });
            }
        }
    }

    let makespan = schedule
        .placements
        .iter()
        .map(|p| p.end_s)
        .max()
        .unwrap_or(0);
    if makespan != schedule.makespan_s {
        return Err(FeasibilityError::CacheMismatch {
            field: "makespan_s",
            cached: schedule.makespan_s,
            actual: makespan,
        });
    }
    if energy != schedule.total_energy {
        return Err(FeasibilityError::CacheMismatch {
            field: "total_energy",
            cached: schedule.total_energy.tenths(),
            actual: energy.tenths(),
        });
    }
    Ok((makespan, energy))
}

/// Indices of placements still running or not yet started at `time_resch_s`.
pub fn affected_operations(schedule: &Schedule, time_resch_s: Seconds) -> Vec<usize> {
    schedule
        .placements
        .iter()
        .enumerate()
        .filter(|(_, p)| p.end_s > time_resch_s)
        .map(|(i, _)| i)
        .collect()
}
