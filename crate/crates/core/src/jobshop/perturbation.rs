use super::Seconds;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Repairable,
    NonRepairable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Renewable,
    Consumable,
}

/// A disturbance on a production resource: what it hits, when, and for how long.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub resource: String,
    pub occurrence_s: Seconds,
    pub duration_s: Seconds,
    pub kind: PerturbationKind,
    pub resource_class: ResourceClass,
}

impl Perturbation {
    /// Returns `None` for a zero duration.
    pub fn new(
        resource: impl Into<String>,
        occurrence_s: Seconds,
        duration_s: Seconds,
        kind: PerturbationKind,
        resource_class: ResourceClass,
    ) -> Option<Self> {
        (duration_s > 0).then(|| Perturbation {
            resource: resource.into(),
            occurrence_s,
            duration_s,
            kind,
            resource_class,
        })
    }

    pub fn end_s(&self) -> Seconds {
        self.occurrence_s + self.duration_s
    }

    pub fn is_active_at(&self, t: Seconds) -> bool {
        t >= self.occurrence_s && t < self.end_s()
    }
}
