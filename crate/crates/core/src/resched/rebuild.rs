use crate::jobshop::{Instance, Placement, Schedule, Seconds};

/// The predictive schedule split at the reschedule instant.
pub(crate) struct Split<'a> {
    pub instance: &'a Instance,
    pub predictive: &'a Schedule,
    pub time_resch_s: Seconds,
    /// Indices of placements that start at or after the instant, in predictive start order.
    pub open: Vec<usize>,
}

impl<'a> Split<'a> {
    pub fn new(instance: &'a Instance, predictive: &'a Schedule, time_resch_s: Seconds) -> Self {
        let mut open: Vec<usize> = predictive
            .placements
            .iter()
            .enumerate()
            .filter(|(_, p)| p.start_s >= time_resch_s)
            .map(|(i, _)| i)
            .collect();
        open.sort_by_key(|&i| {
            let p = &predictive.placements[i];
            (p.start_s, p.machine, p.job, p.rank)
        });
        Split {
            instance,
            predictive,
            time_resch_s,
            open,
        }
    }

    pub fn speeds(&self) -> Vec<usize> {
        self.predictive.placements.iter().map(|p| p.speed).collect()
    }

    /// Lays out the open operations by list scheduling over `priority`, keeping frozen
    /// placements untouched. An operation is taken once its job predecessor is placed; each
    /// starts at the earliest time its machine, its job and the instant allow.
    pub fn rebuild(&self, priority: &[usize], speeds: &[usize]) -> Schedule {
        let placements = &self.predictive.placements;
        let t0 = self.time_resch_s;
        let mut machine_ready = vec![t0; self.instance.num_machines()];
        let mut job_ready = vec![t0; self.instance.num_jobs()];
        let mut next_rank = vec![0usize; self.instance.num_jobs()];
        let mut out: Vec<Placement> = Vec::with_capacity(placements.len());

        let mut frozen: Vec<&Placement> = placements.iter().filter(|p| p.start_s < t0).collect();
        frozen.sort_by_key(|p| (p.job, p.rank));
        for p in frozen {
            machine_ready[p.machine] = machine_ready[p.machine].max(p.end_s);
            job_ready[p.job] = job_ready[p.job].max(p.end_s);
            next_rank[p.job] = next_rank[p.job].max(p.rank + 1);
        }
        out.extend(placements.iter().filter(|p| p.start_s < t0).copied());

        let mut pending: Vec<usize> = priority.to_vec();
        while !pending.is_empty() {
            let pos = pending
                .iter()
                .position(|&i| placements[i].rank == next_rank[placements[i].job])
                .expect("open operations always include the next one of some job");
            let i = pending.remove(pos);
            let p = &placements[i];
            let op = &self.instance.job(p.job)[p.rank];
            let speed = speeds[i];
            let start_s = machine_ready[p.machine].max(job_ready[p.job]);
            let end_s = start_s + op.duration(speed);
            machine_ready[p.machine] = end_s;
            job_ready[p.job] = end_s;
            next_rank[p.job] += 1;
            out.push(Placement {
                speed,
                start_s,
                end_s,
                ..*p
            });
        }
        Schedule::from_placements(out, self.instance)
    }
}
