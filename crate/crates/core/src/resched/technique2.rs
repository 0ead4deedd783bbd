use super::rebuild::Split;
use super::{
    energy_budget_with, within_budget, RescheduleConfig, RescheduleOrder, RescheduleResult,
    Technique,
};
use crate::jobshop::{Instance, Schedule};

pub fn technique2(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
) -> RescheduleResult {
    technique2_with(predictive, order, instance, &RescheduleConfig::default())
}

/// Budget overshoot, energy, makespan: smaller is better, compared in that order.
type Score = (u64, u64, u64);

fn score(schedule: &Schedule, budget_wh: f64) -> Score {
    let limit = (budget_wh * 10.0 + 1e-6).floor().max(0.0) as u64;
    let e = schedule.total_energy.tenths();
    (e.saturating_sub(limit), e, schedule.makespan_s)
}

/// Sequence-and-speed local search over the operations that have not started.
///
/// Starts from the predictive sequence with every open operation at its cheapest level.
/// Each round scores all neighbours (one open operation swapped with the next open operation
/// on its machine, or one open operation moved to another speed level) and moves to the best
/// strict improvement. Stops at a local optimum or after `max_evals` rebuilds. Swaps that break
/// routing order are repaired by the list-scheduling rebuild.
pub fn technique2_with(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
    config: &RescheduleConfig,
) -> RescheduleResult {
    let budget = energy_budget_with(predictive, order, instance, config.baseline);
    let split = Split::new(instance, predictive, order.time_resch_s);
    let placements = &predictive.placements;
    let n = split.open.len();
    let mut trace = vec![predictive.total_energy];

    if n == 0 {
        return RescheduleResult {
            schedule: predictive.clone(),
            penalty: !within_budget(predictive.total_energy, budget),
            technique_used: Technique::Permutation,
            energy_budget_wh: budget,
            energy_trace: trace,
        };
    }

    let max_evals = config.max_evals.unwrap_or(10 * n * n).max(1);
    let mut speeds = split.speeds();
    for &i in &split.open {
        speeds[i] = instance.job(placements[i].job)[placements[i].rank].min_energy_speed();
    }
    let mut priority = split.open.clone();
    let mut current = split.rebuild(&priority, &speeds);
    let mut current_score = score(&current, budget);
    trace.push(current.total_energy);
    let mut evals = 1;

    'search: loop {
        let mut best: Option<(Score, Vec<usize>, Vec<usize>, Schedule)> = None;
        let mut exhausted = false;

        'round: {
            let sequences = current.machine_sequences(instance.num_machines());
            for seq in &sequences {
                let open_on_machine: Vec<usize> = seq
                    .iter()
                    .filter_map(|at| {
                        priority
                            .iter()
                            .copied()
                            .find(|&i| placements[i].op_ref() == *at)
                    })
                    .collect();
                for pair in open_on_machine.windows(2) {
                    if evals >= max_evals {
                        exhausted = true;
                        break 'round;
                    }
                    let mut cand = priority.clone();
                    let a = cand.iter().position(|&i| i == pair[0]).unwrap();
                    let b = cand.iter().position(|&i| i == pair[1]).unwrap();
                    cand.swap(a, b);
                    let s = split.rebuild(&cand, &speeds);
                    evals += 1;
                    let sc = score(&s, budget);
                    if sc < current_score && best.as_ref().is_none_or(|(b, ..)| sc < *b) {
                        best = Some((sc, cand, speeds.clone(), s));
                    }
                }
            }

            for &i in &split.open {
                for v in 1..=instance.max_speed() {
                    if v == speeds[i] {
                        continue;
                    }
                    if evals >= max_evals {
                        exhausted = true;
                        break 'round;
                    }
                    let mut cand = speeds.clone();
                    cand[i] = v;
                    let s = split.rebuild(&priority, &cand);
                    evals += 1;
                    let sc = score(&s, budget);
                    if sc < current_score && best.as_ref().is_none_or(|(b, ..)| sc < *b) {
                        best = Some((sc, priority.clone(), cand, s));
                    }
                }
            }
        }

        match best {
            Some((sc, p, sp, s)) => {
                priority = p;
                speeds = sp;
                current = s;
                current_score = sc;
                trace.push(current.total_energy);
                if exhausted {
                    break 'search;
                }
            }
            None => break 'search,
        }
    }

    RescheduleResult {
        penalty: !within_budget(current.total_energy, budget),
        schedule: current,
        technique_used: Technique::Permutation,
        energy_budget_wh: budget,
        energy_trace: trace,
    }
}
