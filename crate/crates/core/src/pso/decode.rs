use super::Particle;
use crate::jobshop::{Instance, OpRef, Placement, Schedule};

/// Maps operations to flat positions in job-major order.
#[derive(Debug, Clone)]
pub struct OpIndex {
    offsets: Vec<usize>,
    total: usize,
}

impl OpIndex {
    pub fn new(instance: &Instance) -> Self {
        let mut offsets = Vec::with_capacity(instance.num_jobs());
        let mut total = 0;
        for ops in instance.jobs() {
            offsets.push(total);
            total += ops.len();
        }
        OpIndex { offsets, total }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn flat(&self, at: OpRef) -> usize {
        self.offsets[at.job] + at.rank
    }
}

pub fn decode(particle: &Particle, instance: &Instance) -> Schedule {
    decode_position(&particle.sequence_keys, &particle.speed_genes, instance)
}

/// List scheduling driven by random keys.
///
/// Repeatedly takes, among the next unscheduled operation of every job, the one with the
/// smallest key (ties by job, then rank) and appends it to its machine at the earliest time
/// both the machine and the job are free. `keys` and `speeds` are indexed by [`OpIndex`].
pub fn decode_position(keys: &[f64], speeds: &[usize], instance: &Instance) -> Schedule {
    let index = OpIndex::new(instance);
    assert_eq!(
        keys.len(),
        index.len(),
        "key vector does not match the instance"
    );
    assert_eq!(
        speeds.len(),
        index.len(),
        "speed vector does not match the instance"
    );

    let mut next_rank = vec![0usize; instance.num_jobs()];
    let mut job_ready = vec![0u64; instance.num_jobs()];
    let mut machine_ready = vec![0u64; instance.num_machines()];
    let mut placements = Vec::with_capacity(index.len());

    for _ in 0..index.len() {
        let mut pick: Option<(usize, f64)> = None;
        for (job, ops) in instance.jobs().iter().enumerate() {
            let rank = next_rank[job];
            if rank >= ops.len() {
                continue;
            }
            let key = keys[index.flat(OpRef::new(job, rank))];
            // Job order breaks ties because jobs are scanned in index order.
            if pick.is_none_or(|(_, best)| key < best) {
                pick = Some((job, key));
            }
        }
        let (job, _) = pick.expect("an unscheduled operation remains");
        let rank = next_rank[job];
        let op = &instance.job(job)[rank];
        let speed = speeds[index.flat(op.op_ref())];
        let start_s = job_ready[job].max(machine_ready[op.machine]);
        let end_s = start_s + op.duration(speed);
        job_ready[job] = end_s;
        machine_ready[op.machine] = end_s;
        next_rank[job] += 1;
        placements.push(Placement {
            job,
            rank,
            machine: op.machine,
            speed,
            start_s,
            end_s,
        });
    }
    Schedule::from_placements(placements, instance)
}
