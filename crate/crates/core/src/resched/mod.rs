//! Reactive rescheduling under an announced energy reduction.
//!
//! Placements that started before the reschedule instant are frozen, including ones still
//! running. Technique 1 changes the speeds of the remaining operations and keeps every
//! machine and job sequence. Technique 2 is the fallback: it also swaps adjacent operations
//! on a machine.

mod rebuild;
mod technique1;
mod technique2;

pub use technique1::{technique1, technique1_with};
pub use technique2::{technique2, technique2_with};

use crate::jobshop::{Energy, Instance, Schedule, Seconds};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("energy reduction must lie in (0, 100] percent, got {0}")]
    Taux(f64),
}

/// Reschedule from `time_resch_s` while cutting energy by `taux_energy_pct` percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescheduleOrder {
    pub time_resch_s: Seconds,
    pub taux_energy_pct: f64,
}

impl RescheduleOrder {
    pub fn new(time_resch_s: Seconds, taux_energy_pct: f64) -> Result<Self, OrderError> {
        let o = RescheduleOrder {
            time_resch_s,
            taux_energy_pct,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), OrderError> {
        if self.taux_energy_pct > 0.0 && self.taux_energy_pct <= 100.0 {
            Ok(())
        } else {
            Err(OrderError::Taux(self.taux_energy_pct))
        }
    }
}

/// Which energy the reduction percentage applies to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetBaseline {
    /// `(1 - taux) * E_predictive`.
    #[default]
    TotalPredictive,
    /// Frozen-prefix energy plus `(1 - taux)` times the energy of operations not yet started.
    RemainingSuffix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    SpeedOnly,
    Permutation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RescheduleConfig {
    #[serde(default)]
    pub baseline: BudgetBaseline,
    /// Evaluation cap for technique 2; defaults to `10 * affected^2`.
    #[serde(default)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescheduleResult {
    pub schedule: Schedule,
    /// Set when the budget could not be met.
    pub penalty: bool,
    pub technique_used: Technique,
    pub energy_budget_wh: f64,
    /// Total energy after each accepted move, starting with the predictive total.
    pub energy_trace: Vec<Energy>,
}

/// `(1 - taux / 100) * E_predictive`, in watt-hours.
pub fn energy_budget(predictive: &Schedule, order: &RescheduleOrder) -> f64 {
    (1.0 - order.taux_energy_pct / 100.0) * predictive.total_energy.wh()
}

pub fn energy_budget_with(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
    baseline: BudgetBaseline,
) -> f64 {
    match baseline {
        BudgetBaseline::TotalPredictive => energy_budget(predictive, order),
        BudgetBaseline::RemainingSuffix => {
            let (frozen, open): (Vec<_>, Vec<_>) = predictive
                .placements
                .iter()
                .partition(|p| p.start_s < order.time_resch_s);
            let energy = |ps: Vec<&crate::jobshop::Placement>| -> f64 {
                ps.iter()
                    .filter_map(|p| instance.op(p.op_ref()).map(|o| o.energy(p.speed)))
                    .sum::<Energy>()
                    .wh()
            };
            energy(frozen) + (1.0 - order.taux_energy_pct / 100.0) * energy(open)
        }
    }
}

/// Budget comparison in tenths of a watt-hour with a small allowance for float rounding.
pub fn within_budget(energy: Energy, budget_wh: f64) -> bool {
    energy.tenths() as f64 <= budget_wh * 10.0 + 1e-6
}

/// Technique 1, then technique 2 if technique 1 ends with a penalty.
pub fn reschedule(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
) -> RescheduleResult {
    reschedule_with(predictive, order, instance, &RescheduleConfig::default())
}

pub fn reschedule_with(
    predictive: &Schedule,
    order: &RescheduleOrder,
    instance: &Instance,
    config: &RescheduleConfig,
) -> RescheduleResult {
    let first = technique1_with(predictive, order, instance, config);
    if !first.penalty {
        return first;
    }
    technique2_with(predictive, order, instance, config)
}
