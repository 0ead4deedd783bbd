//! Job-shop model with speed-scalable machines.
//!
//! Times are integer seconds and energies are tenths of a watt-hour, so every
//! evaluation is exact and replays bit-for-bit on any platform.

mod gantt;
mod generate;
mod instance;
mod perturbation;
mod schedule;

pub use gantt::{gantt_export, parse_gantt, GANTT_HEADER};
pub use generate::generate_instance;
pub use instance::{load_instance, Instance, InstanceError, Operation, SpeedProfile};
pub use perturbation::{Perturbation, PerturbationKind, ResourceClass};
pub use schedule::{affected_operations, evaluate, FeasibilityError, Placement, Schedule};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

/// Whole seconds of simulated time.
pub type Seconds = u64;

/// Energy in tenths of a watt-hour.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Energy(u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub const fn from_tenths(tenths: u64) -> Self {
        Energy(tenths)
    }

    /// Rounds to the nearest tenth. Negative or non-finite input maps to zero.
    pub fn from_wh(wh: f64) -> Self {
        if wh.is_finite() && wh > 0.0 {
            Energy((wh * 10.0).round() as u64)
        } else {
            Energy(0)
        }
    }

    pub const fn tenths(self) -> u64 {
        self.0
    }

    pub fn wh(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn saturating_sub(self, other: Energy) -> Energy {
        Energy(self.0.saturating_sub(other.0))
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

/// Identifies one operation: job index and position in that job's routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpRef {
    pub job: usize,
    pub rank: usize,
}

impl OpRef {
    pub fn new(job: usize, rank: usize) -> Self {
        OpRef { job, rank }
    }
}

impl fmt::Display for OpRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{},{}", self.job, self.rank)
    }
}
