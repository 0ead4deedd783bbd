use super::AgentId;
use crate::jobshop::Seconds;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionReport {
    pub factory: AgentId,
    pub t_s: Seconds,
    pub cumulative_wh: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AceError {
    #[error("{factory}: report at {t_s} s precedes the previous one at {last_t_s} s")]
    TimeWentBack {
        factory: AgentId,
        t_s: Seconds,
        last_t_s: Seconds,
    },
    #[error("{factory}: cumulative consumption fell from {last_wh} Wh to {wh} Wh")]
    Decreasing {
        factory: AgentId,
        wh: f64,
        last_wh: f64,
    },
    #[error("{factory}: consumption must be finite and non-negative, got {wh}")]
    Invalid { factory: AgentId, wh: f64 },
}

/// Auditor: per-factory ledger of `(t_s, cumulative_wh)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AceState {
    pub ledger: BTreeMap<AgentId, Vec<(Seconds, f64)>>,
}

/// Appends a report unless it would make a factory's ledger go backwards.
pub fn ace_record(state: AceState, report: ConsumptionReport) -> (AceState, Result<(), AceError>) {
    let ConsumptionReport {
        factory,
        t_s,
        cumulative_wh,
    } = report;
    if !(cumulative_wh.is_finite() && cumulative_wh >= 0.0) {
        return (
            state,
            Err(AceError::Invalid {
                factory,
                wh: cumulative_wh,
            }),
        );
    }
    if let Some(&(last_t_s, last_wh)) = state.ledger.get(&factory).and_then(|l| l.last()) {
        if t_s < last_t_s {
            return (
                state,
                Err(AceError::TimeWentBack {
                    factory,
                    t_s,
                    last_t_s,
                }),
            );
        }
        if cumulative_wh < last_wh - 1e-9 {
            return (
                state,
                Err(AceError::Decreasing {
                    factory,
                    wh: cumulative_wh,
                    last_wh,
                }),
            );
        }
    }
    let mut state = state;
    state
        .ledger
        .entry(factory)
        .or_default()
        .push((t_s, cumulative_wh));
    (state, Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(f: &str, t: Seconds, wh: f64) -> ConsumptionReport {
        ConsumptionReport {
            factory: f.into(),
            t_s: t,
            cumulative_wh: wh,
        }
    }

    #[test]
    fn first_report() {
        let (s, r) = ace_record(AceState::default(), rep("f1", 0, 0.0));
        assert!(r.is_ok());
        assert_eq!(s.ledger["f1"], vec![(0, 0.0)]);
    }

    #[test]
    fn decrease_rejected() {
        let (s, _) = ace_record(AceState::default(), rep("f1", 10, 50.0));
        let (s, r) = ace_record(s, rep("f1", 20, 40.0));
        assert!(matches!(r, Err(AceError::Decreasing { .. })));
        assert_eq!(s.ledger["f1"].len(), 1);
        let (_, r) = ace_record(s, rep("f1", 5, 60.0));
        assert!(matches!(r, Err(AceError::TimeWentBack { .. })));
    }

    #[test]
    fn factories_independent() {
        let mut s = AceState::default();
        for (f, t, wh) in [
            ("f1", 0, 0.0),
            ("f2", 0, 30.0),
            ("f1", 8, 12.0),
            ("f2", 8, 31.0),
        ] {
            let (next, r) = ace_record(s, rep(f, t, wh));
            assert!(r.is_ok());
            s = next;
        }
        assert_eq!(s.ledger["f1"], vec![(0, 0.0), (8, 12.0)]);
        assert_eq!(s.ledger["f2"], vec![(0, 30.0), (8, 31.0)]);
    }
}
