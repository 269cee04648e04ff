//! Baseline and reference strategies behind one decision interface.

mod avellaneda;
mod baseline;
mod linear_q;

pub use avellaneda::{as_quotes, as_reservation, as_spread, estimate_sigma, AsParams, AsStrategy, SigmaEstimate};
pub use baseline::{fixed_quotes, random_quotes, FixedStrategy, RandomDiscreteStrategy, RandomStrategy};
pub use linear_q::{LinearQ, LinearQParams, LINEAR_Q_INPUTS};

use crate::actions::Decision;
use crate::sim::{Observation, StepOutcome};

/// Observation in, decision out. Strategies never see or mutate the
/// simulator itself.
pub trait Strategy: Send {
    fn name(&self) -> String;

    /// Called before each episode's reset. Randomized strategies reseed here
    /// so that episodes are reproducible in any order.
    fn begin_episode(&mut self, _episode: u64) {}

    fn decide(&mut self, obs: &Observation) -> Decision;

    /// Transition feedback; only learners use it.
    fn learn(&mut self, _prev: &Observation, _decision: &Decision, _outcome: &StepOutcome) {}
}
