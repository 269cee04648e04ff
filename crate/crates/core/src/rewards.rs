//! Per-step reward decomposition.
//!
//! The PnL terms are exact [`Money`]; the shaped terms (dampening, inventory
//! punishment, hybrid total) are floating point in currency units.

use serde::{Deserialize, Serialize};

use crate::book::{Price, Volume};
use crate::money::Money;

/// One execution from the agent's point of view. `volume` is positive for
/// buys and negative for sells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub price: Price,
    pub volume: i64,
    /// Forced or requested liquidation at counterparty prices.
    #[serde(default)]
    pub close_out: bool,
}

impl Fill {
    pub fn abs_volume(&self) -> Volume {
        self.volume.unsigned_abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub eta: f64,
    pub zeta: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { eta: 0.5, zeta: 0.01 }
    }
}

/// Six-field reward record, currency units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub delta_pnl: f64,
    pub dampened_pnl: f64,
    pub trading_pnl: f64,
    pub holding_pnl: f64,
    pub inventory_punishment: f64,
    pub total: f64,
}

/// Exact PnL terms of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PnlTerms {
    pub delta_pnl: Money,
    pub trading_pnl: Money,
    pub holding_pnl: Money,
}

pub fn delta_pnl(prev_value: Money, curr_value: Money) -> Money {
    curr_value - prev_value
}

pub fn dampened_pnl(delta: f64, eta: f64) -> f64 {
    delta - (eta * delta).max(0.0)
}

/// `Σ X_v · (p_m − X_p)` with the mid in half-ticks.
pub fn trading_pnl(fills: &[Fill], mid2: i64) -> Money {
    fills.iter().map(|f| Money(f.volume * (mid2 - 2 * f.price))).sum()
}

/// Revaluation of the inventory held at the start of the step.
pub fn holding_pnl(prev_inventory: i64, prev_mid2: i64, mid2: i64) -> Money {
    Money(prev_inventory * (mid2 - prev_mid2))
}

/// `ζ · inv²`, inventory in shares.
pub fn inventory_punishment(inventory: i64, zeta: f64) -> f64 {
    let inv = inventory as f64;
    zeta * inv * inv
}

pub fn hybrid_reward(dampened: f64, trading: f64, punishment: f64) -> f64 {
    dampened + trading - punishment
}

impl RewardBreakdown {
    pub fn from_terms(terms: &PnlTerms, inventory: i64, params: &RewardParams, tick_size: f64) -> Self {
        let delta = terms.delta_pnl.to_currency(tick_size);
        let trading = terms.trading_pnl.to_currency(tick_size);
        let dampened = dampened_pnl(delta, params.eta);
        let punishment = inventory_punishment(inventory, params.zeta);
        Self {
            delta_pnl: delta,
            dampened_pnl: dampened,
            trading_pnl: trading,
            holding_pnl: terms.holding_pnl.to_currency(tick_size),
            inventory_punishment: punishment,
            total: hybrid_reward(dampened, trading, punishment),
        }
    }
}
