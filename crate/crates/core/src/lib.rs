//! Energy-aware job-shop scheduling with cooperating factory and energy-provider agents.
//!
//! Factories compute predictive schedules with a particle swarm that weighs makespan against
//! energy, negotiate them with renewable-energy providers, and reschedule online when a
//! provider announces an energy shortfall.

pub mod agents;
pub mod energy;
pub mod jobshop;
pub mod pso;
pub mod resched;
pub mod runtime;
pub mod scenario;

pub use jobshop::{Energy, Instance, OpRef, Placement, Schedule, Seconds};
pub use pso::{pso_run, NormBounds, PsoParams};
