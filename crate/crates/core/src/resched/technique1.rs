use super::rebuild::Split;
use super::{
    energy_budget_with, within_budget, RescheduleConfig, RescheduleOrder, RescheduleResult,
    Technique,
};
use crate::jobshop::{Instance, Schedule};

pub fn technique1(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
) -> RescheduleResult {
    technique1_with(predictive, order, instance, &RescheduleConfig::default())
}

/// Speed-only rescheduling with machine and job sequences kept as predicted.
///
/// Open operations are visited once each, largest achievable saving first (ties by predictive
/// start, then job). A visited operation moves to the fastest level that brings the total
/// within budget and the search stops there; otherwise it drops to its cheapest level. If
/// every operation has been visited without meeting the budget, the cheapest assignment is
/// returned with a penalty.
pub fn technique1_with(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
    config: &RescheduleConfig,
) -> RescheduleResult {
    let budget = energy_budget_with(predictive, order, instance, config.baseline);
    let mut energy = predictive.total_energy;
    let mut trace = vec![energy];
    if within_budget(energy, budget) {
        return RescheduleResult {
            schedule: predictive.clone(),
            penalty: false,
            technique_used: Technique::SpeedOnly,
            energy_budget_wh: budget,
            energy_trace: trace,
        };
    }

    let split = Split::new(instance, predictive, order.time_resch_s);
    let placements = &predictive.placements;
    let mut speeds = split.speeds();
    let op_of = |i: usize| &instance.job(placements[i].job)[placements[i].rank];

    let mut remaining = split.open.clone();
    let mut met = false;
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .enumerate()
            .max_by_key(|&(_, &i)| {
                let op = op_of(i);
                let saving = op
                    .energy(speeds[i])
                    .saturating_sub(op.energy(op.min_energy_speed()));
                let p = &placements[i];
                (saving, std::cmp::Reverse((p.start_s, p.job)))
            })
            .map(|(pos, _)| pos)
            .expect("remaining is non-empty");
        let i = remaining.remove(pos);
        let op = op_of(i);
        let others = energy - op.energy(speeds[i]);

        let fitting = (1..=instance.max_speed())
            .filter(|&v| within_budget(others + op.energy(v), budget))
            .min_by_key(|&v| (op.duration(v), op.energy(v), v));
        let chosen = fitting.unwrap_or_else(|| op.min_energy_speed());
        let candidate = others + op.energy(chosen);
        if candidate < energy {
            speeds[i] = chosen;
            energy = candidate;
            trace.push(energy);
        }
        if fitting.is_some() {
            met = true;
            break;
        }
    }

    let schedule = split.rebuild(&split.open, &speeds);
    debug_assert_eq!(schedule.total_energy, energy);
    RescheduleResult {
        schedule,
        penalty: !met,
        technique_used: Technique::SpeedOnly,
        energy_budget_wh: budget,
        energy_trace: trace,
    }
}
