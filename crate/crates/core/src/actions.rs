//! Mapping agent decisions to concrete quotes.

use serde::{Deserialize, Serialize};

use crate::book::{BookSnapshot, Price, Volume};
use crate::money::currency_to_ticks;

/// Shares per order on each side.
pub const MINIMUM_TRADE_UNIT: Volume = 100;

/// `(ask_offset, bid_offset)` in ticks outward from the best ask/bid for
/// discrete actions 0–6. Action 7 closes the position.
pub const DISCRETE_OFFSETS: [(i64, i64); 7] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 0), (0, 2), (2, 0)];
pub const DISCRETE_ACTIONS: usize = 8;
pub const CLOSE_OUT_ACTION: u8 = 7;

const ROUNDING_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DiscreteAction(u8);

impl TryFrom<u8> for DiscreteAction {
    type Error = String;

    fn try_from(index: u8) -> Result<Self, Self::Error> {
        Self::new(index).ok_or_else(|| format!("discrete action {index} out of range 0..{DISCRETE_ACTIONS}"))
    }
}

impl From<DiscreteAction> for u8 {
    fn from(a: DiscreteAction) -> u8 {
        a.0
    }
}

impl DiscreteAction {
    pub fn new(index: u8) -> Option<Self> {
        (index < DISCRETE_ACTIONS as u8).then_some(Self(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn is_close_out(self) -> bool {
        self.0 == CLOSE_OUT_ACTION
    }

    pub fn all() -> impl Iterator<Item = DiscreteAction> {
        (0..DISCRETE_ACTIONS as u8).map(DiscreteAction)
    }
}

/// Continuous `(a1, a2)` pair; both are clipped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAction {
    pub a1: f64,
    pub a2: f64,
}

impl ContinuousAction {
    pub fn new(a1: f64, a2: f64) -> Self {
        let clip = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        Self { a1: clip(a1), a2: clip(a2) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    #[default]
    Discrete,
    Continuous,
}

/// What a strategy hands to the simulator each step. `Quotes` is for
/// baselines that price directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Discrete(DiscreteAction),
    Continuous(ContinuousAction),
    Quotes(QuotePair),
}

/// One order per side at `volume` shares. A `None` side is not quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotePair {
    pub ask: Option<Price>,
    pub bid: Option<Price>,
    pub volume: Volume,
}

impl QuotePair {
    pub fn new(ask: Option<Price>, bid: Option<Price>) -> Self {
        Self {
            ask,
            bid,
            volume: MINIMUM_TRADE_UNIT,
        }
    }

    pub fn none() -> Self {
        Self::new(None, None)
    }

    pub fn is_valid(&self) -> bool {
        let positive = self.ask.map_or(true, |p| p > 0) && self.bid.map_or(true, |p| p > 0);
        let ordered = match (self.ask, self.bid) {
            (Some(a), Some(b)) => b < a,
            _ => true,
        };
        positive && ordered
    }
}

/// Resolved discrete decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolved {
    Quotes(QuotePair),
    /// Flatten the given signed inventory with market orders.
    CloseOut { inventory: i64 },
}

pub fn resolve_discrete(action: DiscreteAction, snap: &BookSnapshot, inventory: i64) -> Resolved {
    if action.is_close_out() {
        return Resolved::CloseOut { inventory };
    }
    let (ask_off, bid_off) = DISCRETE_OFFSETS[action.index() as usize];
    let ask = snap.best_ask().map(|p| p + ask_off);
    let bid = snap.best_bid().map(|p| p - bid_off).filter(|p| *p > 0);
    Resolved::Quotes(QuotePair::new(ask, bid))
}

/// Hyperparameters of the continuous action space, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParams {
    pub max_bias: f64,
    pub max_spread: f64,
    pub tick_size: f64,
}

impl Default for ContinuousParams {
    fn default() -> Self {
        Self {
            max_bias: 0.05,
            max_spread: 0.1,
            tick_size: 0.01,
        }
    }
}

fn sign(x: i64) -> f64 {
    match x.cmp(&0) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    }
}

/// Rounds a raw quote pair (in ticks) outward: ask up, bid down. A pair that
/// collapses onto one price widens to a one-tick spread above the bid.
pub fn round_outward(ask_ticks: f64, bid_ticks: f64) -> (Price, Price) {
    let mut bid = (bid_ticks + ROUNDING_EPS).floor() as Price;
    let mut ask = (ask_ticks - ROUNDING_EPS).ceil() as Price;
    bid = bid.max(1);
    if ask <= bid {
        ask = bid + 1;
    }
    (ask, bid)
}

/// Reservation price (ticks) `p_m − sign(inv)·a1·max_bias`.
pub fn reservation_ticks(action: ContinuousAction, mid2: i64, inventory: i64, params: &ContinuousParams) -> f64 {
    let mid = mid2 as f64 / 2.0;
    let bias = action.a1 * currency_to_ticks(params.max_bias, params.tick_size);
    mid - sign(inventory) * bias
}

pub fn resolve_continuous(
    action: ContinuousAction,
    mid2: i64,
    inventory: i64,
    params: &ContinuousParams,
) -> QuotePair {
    let action = ContinuousAction::new(action.a1, action.a2);
    let reservation = reservation_ticks(action, mid2, inventory, params);
    let half_spread = action.a2 * currency_to_ticks(params.max_spread, params.tick_size) / 2.0;
    let (ask, bid) = round_outward(reservation + half_spread, reservation - half_spread);
    QuotePair::new(Some(ask), Some(bid))
}

/// Disables the side that would grow a position already at `omega` units.
pub fn enforce_position_limit(quotes: QuotePair, inventory: i64, omega: u32, unit: Volume) -> QuotePair {
    let limit = omega as i64 * unit as i64;
    let mut q = quotes;
    if inventory >= limit {
        q.bid = None;
    }
    if inventory <= -limit {
        q.ask = None;
    }
    q
}
