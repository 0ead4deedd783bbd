use super::EnergyAlarm;
use crate::jobshop::Seconds;
use crate::resched::RescheduleOrder;
use serde::{Deserialize, Serialize};

/// False-alarm filter carried between verification ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterState {
    pub p2_s: Seconds,
    pub p2_initial_s: Seconds,
    /// `p2` never grows past `cap_factor * p2_initial_s`.
    pub cap_factor: u64,
    pub time_resch_s: Seconds,
}

impl FilterState {
    pub fn new(p2_s: Seconds) -> Self {
        FilterState {
            p2_s,
            p2_initial_s: p2_s,
            cap_factor: 100,
            time_resch_s: 0,
        }
    }

    pub fn p2_cap(&self) -> Seconds {
        self.p2_initial_s.saturating_mul(self.cap_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterAction {
    NoPerturbation,
    Reschedule(RescheduleOrder),
}

/// One verification tick.
///
/// While alarmed, the reschedule instant moves to one period past the later of the previous
/// instant and `now_s`, an order is emitted, and the period triples (up to the cap). A quiet
/// window emits a heartbeat and restores the initial period.
pub fn filter_alarm(
    state: FilterState,
    alarm: &EnergyAlarm,
    now_s: Seconds,
) -> (FilterState, FilterAction) {
    let mut next = state;
    if alarm.alarmed && alarm.taux_energy_pct > 0.0 {
        next.time_resch_s = state.time_resch_s.max(now_s) + state.p2_s;
        let order = RescheduleOrder {
            time_resch_s: next.time_resch_s,
            taux_energy_pct: alarm.taux_energy_pct.min(100.0),
        };
        next.p2_s = state.p2_s.saturating_mul(3).min(state.p2_cap());
        (next, FilterAction::Reschedule(order))
    } else {
        next.p2_s = state.p2_initial_s;
        (next, FilterAction::NoPerturbation)
    }
}
