use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::actions::{round_outward, Decision, QuotePair};
use crate::sim::Observation;

use super::Strategy;

/// Prices, σ and the reservation price are in ticks; `q` is in trade units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsParams {
    pub gamma: f64,
    pub kappa: f64,
    /// Volatility over the whole (normalized) horizon.
    pub sigma: f64,
    /// `T − t` with `T = 1`.
    pub remaining: f64,
}

/// `r = s − q·γ·σ²·(T−t)`
pub fn as_reservation(p: &AsParams, s: f64, q: f64) -> f64 {
    s - q * p.gamma * p.sigma * p.sigma * p.remaining
}

/// `γ·σ²·(T−t) + (2/γ)·ln(1 + γ/κ)`
pub fn as_spread(p: &AsParams) -> f64 {
    p.gamma * p.sigma * p.sigma * p.remaining + (2.0 / p.gamma) * (p.gamma / p.kappa).ln_1p()
}

/// Quotes `r ± spread/2`, rounded outward to ticks.
pub fn as_quotes(p: &AsParams, s: f64, q: f64) -> QuotePair {
    let r = as_reservation(p, s, q);
    let half = as_spread(p) / 2.0;
    let (ask, bid) = round_outward(r + half, r - half);
    QuotePair::new(Some(ask), Some(bid))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// Fewer than `window + 1` mids were available.
    pub short_history: bool,
}

/// Population standard deviation of per-event mid changes over the trailing
/// `window` changes, scaled by `sqrt(horizon_events)`.
pub fn estimate_sigma(mids: &[f64], window: usize, horizon_events: usize) -> SigmaEstimate {
    let short_history = mids.len() < window + 1;
    if mids.len() < 2 || window == 0 {
        return SigmaEstimate { sigma: 0.0, short_history: true };
    }
    let tail = &mids[mids.len().saturating_sub(window + 1)..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    SigmaEstimate {
        sigma: var.sqrt() * (horizon_events as f64).sqrt(),
        short_history,
    }
}

/// Avellaneda–Stoikov quoting with σ estimated from the trailing observed
/// mids unless fixed.
#[derive(Debug, Clone)]
pub struct AsStrategy {
    pub gamma: f64,
    pub kappa: f64,
    pub sigma: Option<f64>,
    pub sigma_window: usize,
    pub horizon_events: usize,
    pub unit: f64,
    mids: VecDeque<f64>,
}

impl AsStrategy {
    pub fn new(gamma: f64, kappa: f64, sigma: Option<f64>, sigma_window: usize, horizon_events: usize) -> Self {
        Self {
            gamma,
            kappa,
            sigma,
            sigma_window,
            horizon_events,
            unit: crate::actions::MINIMUM_TRADE_UNIT as f64,
            mids: VecDeque::with_capacity(sigma_window + 1),
        }
    }
}

impl Strategy for AsStrategy {
    fn name(&self) -> String {
        "as".into()
    }

    fn begin_episode(&mut self, _episode: u64) {
        self.mids.clear();
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        let s = obs.snapshot.mid2().unwrap_or(0) as f64 / 2.0;
        if self.mids.len() == self.sigma_window + 1 {
            self.mids.pop_front();
        }
        self.mids.push_back(s);
        let sigma = self.sigma.unwrap_or_else(|| {
            let mids: Vec<f64> = self.mids.iter().copied().collect();
            estimate_sigma(&mids, self.sigma_window, self.horizon_events).sigma
        });
        let params = AsParams {
            gamma: self.gamma,
            kappa: self.kappa,
            sigma,
            remaining: obs.agent.remaining_fraction(),
        };
        Decision::Quotes(as_quotes(&params, s, obs.agent.inventory as f64 / self.unit))
    }
}
