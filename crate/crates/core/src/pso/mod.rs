//! Predictive scheduler: a particle swarm over random keys and speed genes that minimizes
//! `gamma * C_max / max_makespan + (1 - gamma) * E_tot / max_energy`.

mod decode;
mod swarm;

pub use decode::{decode, decode_position, OpIndex};
pub use swarm::{pso_run, Particle, PersonalBest, PsoOutcome};

use crate::jobshop::{Energy, Instance, Seconds};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsoError {
    #[error("invalid swarm parameters: {0}")]
    Params(String),
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub neighborhood_size: usize,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            swarm_size: 30,
            iterations: 200,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            neighborhood_size: 4,
            seed: 0,
        }
    }
}

impl PsoParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// A one-particle swarm is accepted as a degenerate random search.
    pub fn validate(&self) -> Result<(), PsoError> {
        if self.swarm_size == 0 {
            return Err(PsoError::Params("swarm_size must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(PsoError::Params("iterations must be at least 1".into()));
        }
        if self.neighborhood_size >= self.swarm_size {
            return Err(PsoError::Params(format!(
                "neighborhood_size {} must be smaller than swarm_size {}",
                self.neighborhood_size, self.swarm_size
            )));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(PsoError::Params(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Denominators that put both objective terms on a `[0, 1]` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub max_makespan_s: f64,
    pub max_energy_wh: f64,
}

/// Fully serial execution at the slowest level bounds any makespan; the most expensive
/// level of every operation bounds the energy.
pub fn normalization_bounds(instance: &Instance) -> NormBounds {
    let mut makespan: Seconds = 0;
    let mut energy = Energy::ZERO;
    for op in instance.operations() {
        makespan += op.profile.iter().map(|p| p.duration_s).max().unwrap_or(0);
        energy += op
            .profile
            .iter()
            .map(|p| p.energy)
            .max()
            .unwrap_or(Energy::ZERO);
    }
    NormBounds {
        max_makespan_s: makespan as f64,
        max_energy_wh: energy.wh(),
    }
}

pub fn objective(makespan_s: f64, energy_wh: f64, gamma: f64, bounds: NormBounds) -> f64 {
    gamma * makespan_s / bounds.max_makespan_s + (1.0 - gamma) * energy_wh / bounds.max_energy_wh
}
