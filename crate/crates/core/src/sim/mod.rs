//! Episodic market-making simulator.
//!
//! One decision per historical event. A step resolves the decision against
//! the observation, which lags the true book by `latency` events, replaces the
//! agent's quotes and applies the next event. The agent's bid then buys one
//! unit at the bid if it is at or above the lowest sell price on offer: the
//! best ask after the event, or the price of the arriving sell order (a
//! seller-initiated trade or a new ask). The ask side is symmetric. Agent
//! orders never touch the replayed book. The final step of an episode
//! liquidates whatever inventory is left at counterparty prices.

mod account;
mod runner;
mod source;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use account::AgentAccount;
pub use runner::{run_backtest, run_episode, run_latency_sweep, LatencyRow, StepRecord};
pub use source::{episode_seed, DataSource, EpisodePlan, DEFAULT_SYNTHETIC_PREFIX};

use crate::actions::{
    enforce_position_limit, resolve_continuous, resolve_discrete, ActionSpace, ContinuousParams, Decision, QuotePair,
    Resolved, MINIMUM_TRADE_UNIT,
};
use crate::book::{BookError, BookSnapshot, EventKind, LobWindow, MarketEvent, OrderBook, Price, Side, SnapshotHistory, Volume};
use crate::features::{AgentStateVec, DynamicState, FeatureTracker};
use crate::metrics::EpisodeReport;
use crate::money::Money;
use crate::rewards::{holding_pnl, trading_pnl, Fill, PnlTerms, RewardBreakdown, RewardParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("step before reset")]
    NotReset,
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("stream exhausted: need {needed} events, {available} available")]
    StreamExhausted { needed: usize, available: usize },
    #[error("book is one-sided at seq {seq}")]
    OneSidedBook { seq: u64 },
    #[error("invalid quotes {0:?}")]
    InvalidQuotes(QuotePair),
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error("data source: {0}")]
    Source(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Decision steps per episode.
    pub events_per_episode: usize,
    /// Position limit in trade units.
    pub omega: u32,
    /// LOB window length `T`; also the number of warm-up events.
    pub window: usize,
    /// Observation delay in events.
    pub latency: usize,
    /// Snapshot depth.
    pub levels: usize,
    pub unit: Volume,
    pub reward: RewardParams,
    pub continuous: ContinuousParams,
    pub action_space: ActionSpace,
    /// Fee per share traded, in half-ticks.
    pub fee: Money,
    /// Whether observations carry the flattened LOB window.
    pub lob_window: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            events_per_episode: 2000,
            omega: 10,
            window: 50,
            latency: 0,
            levels: 10,
            unit: MINIMUM_TRADE_UNIT,
            reward: RewardParams::default(),
            continuous: ContinuousParams::default(),
            action_space: ActionSpace::Discrete,
            fee: Money::ZERO,
            lob_window: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.events_per_episode <= self.window {
            return bad("events_per_episode must exceed the window");
        }
        if self.levels == 0 || self.unit == 0 || self.omega == 0 {
            return bad("levels, unit and omega must be positive");
        }
        if !(self.reward.eta >= 0.0 && self.reward.zeta >= 0.0) {
            return bad("eta and zeta must be non-negative");
        }
        if !(self.continuous.max_bias > 0.0 && self.continuous.max_spread > 0.0) {
            return bad("max_bias and max_spread must be positive");
        }
        Ok(())
    }

    /// Stream events one episode occupies: warm-up plus steps.
    pub fn span(&self) -> usize {
        self.window + self.events_per_episode
    }

    pub fn max_inventory(&self) -> i64 {
        self.omega as i64 * self.unit as i64
    }
}

/// What a decision is computed from. Market parts lag by the configured
/// latency; the agent part is always current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub snapshot: BookSnapshot,
    pub dynamic: DynamicState,
    pub agent: AgentStateVec,
    pub window: Option<LobWindow>,
    /// Stream index of the newest event reflected in `snapshot`.
    pub event_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub seq: u64,
    pub mid2: i64,
    /// Ticks.
    pub spread: i64,
    pub inventory: i64,
    pub cash: Money,
    pub value: Money,
    pub quotes: QuotePair,
    pub close_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub terms: PnlTerms,
    pub fills: Vec<Fill>,
    pub done: bool,
    pub info: StepInfo,
}

/// Lowest sell price and highest buy price on offer at an event: the
/// touch after the event, improved by the arriving order's own price.
pub fn market_prices(ev: &MarketEvent, ask_after: Price, bid_after: Price) -> (Price, Price) {
    let mut sell = ask_after;
    let mut buy = bid_after;
    match (ev.kind, ev.side) {
        (EventKind::Trade, Side::Ask) | (EventKind::AddLimit, Side::Ask) => sell = sell.min(ev.price),
        (EventKind::Trade, Side::Bid) | (EventKind::AddLimit, Side::Bid) => buy = buy.max(ev.price),
        (EventKind::Cancel, _) => {}
    }
    (sell, buy)
}

/// One unit per crossed side, at the agent's own price.
pub fn crossing_fills(quotes: &QuotePair, ev: &MarketEvent, ask_after: Price, bid_after: Price) -> Vec<Fill> {
    let (sell, buy) = market_prices(ev, ask_after, bid_after);
    let unit = quotes.volume as i64;
    let mut fills = Vec::new();
    if let Some(p) = quotes.bid.filter(|&p| p >= sell) {
        fills.push(Fill { price: p, volume: unit, close_out: false });
    }
    if let Some(p) = quotes.ask.filter(|&p| p <= buy) {
        fills.push(Fill { price: p, volume: -unit, close_out: false });
    }
    fills
}

#[derive(Debug, Clone, Copy, Default)]
struct EpisodeStats {
    steps: usize,
    abs_inventory: u64,
    traded_volume: u64,
    spread_ticks: i64,
    truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Active,
    Done,
}

pub struct Simulator {
    cfg: EpisodeConfig,
    events: Option<Arc<[MarketEvent]>>,
    tick_size: f64,
    book: OrderBook,
    tracker: FeatureTracker,
    history: SnapshotHistory,
    dynamic: VecDeque<DynamicState>,
    cursor: usize,
    step: usize,
    account: AgentAccount,
    mid2: i64,
    phase: Phase,
    stats: EpisodeStats,
}

impl Simulator {
    pub fn new(cfg: EpisodeConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            events: None,
            tick_size: cfg.continuous.tick_size,
            book: OrderBook::new(),
            tracker: FeatureTracker::new(),
            history: SnapshotHistory::new(cfg.window + cfg.latency),
            dynamic: VecDeque::with_capacity(cfg.latency + 1),
            cursor: 0,
            step: 0,
            account: AgentAccount::default(),
            mid2: 0,
            phase: Phase::Idle,
            stats: EpisodeStats::default(),
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn account(&self) -> &AgentAccount {
        &self.account
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    /// Index of the next stream event to be applied.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// True book after the most recent event.
    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    fn rebuild(&mut self, events: Arc<[MarketEvent]>) {
        self.events = Some(events);
        self.book = OrderBook::new();
        self.tracker.clear();
        self.history.clear();
        self.dynamic.clear();
        self.cursor = 0;
    }

    fn advance(&mut self, record: bool) -> Result<MarketEvent, SimError> {
        let events = self.events.as_ref().expect("stream set at reset");
        let ev = events[self.cursor];
        self.book.apply(&ev)?;
        self.tracker.observe(&ev, self.book.mid2());
        if record {
            self.history.push(self.book.snapshot(self.cfg.levels));
            if self.dynamic.len() == self.cfg.latency + 1 {
                self.dynamic.pop_front();
            }
            self.dynamic.push_back(self.tracker.state());
        }
        self.cursor += 1;
        Ok(ev)
    }

    fn true_touch(&self) -> Result<(i64, i64), SimError> {
        match (self.book.best_ask(), self.book.best_bid()) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(SimError::OneSidedBook {
                seq: self.book.last_seq().unwrap_or(0),
            }),
        }
    }

    /// Starts an episode: replays the stream up to `plan.start`, applies `T`
    /// warm-up events and zeroes the account.
    pub fn reset(&mut self, plan: &EpisodePlan) -> Result<StepOutcome, SimError> {
        let needed = plan.start + self.cfg.span();
        if needed > plan.events.len() {
            return Err(SimError::StreamExhausted {
                needed,
                available: plan.events.len(),
            });
        }
        let same = self.events.as_ref().is_some_and(|e| Arc::ptr_eq(e, &plan.events));
        if !same || self.cursor > plan.start {
            self.rebuild(plan.events.clone());
        }
        self.tick_size = plan.tick_size;
        let keep = self.cfg.window + self.cfg.latency;
        while self.cursor < plan.start {
            let record = plan.start - self.cursor <= keep;
            self.advance(record)?;
        }
        for _ in 0..self.cfg.window {
            self.advance(true)?;
        }
        let (ask, bid) = self.true_touch()?;
        self.account = AgentAccount::default();
        self.mid2 = ask + bid;
        self.step = 0;
        self.stats = EpisodeStats::default();
        self.phase = Phase::Active;
        Ok(StepOutcome {
            observation: self.observation()?,
            reward: RewardBreakdown::default(),
            terms: PnlTerms::default(),
            fills: Vec::new(),
            done: false,
            info: self.info(ask - bid, false),
        })
    }

    fn effective_lag(&self) -> usize {
        let by_window = self.history.len().saturating_sub(self.cfg.window);
        let by_state = self.dynamic.len().saturating_sub(1);
        self.cfg.latency.min(by_window).min(by_state)
    }

    fn lagged_snapshot(&self) -> &BookSnapshot {
        self.history.lagged(self.effective_lag()).expect("history warmed at reset")
    }

    pub fn agent_state(&self) -> AgentStateVec {
        AgentStateVec {
            inventory: self.account.inventory,
            max_inventory: self.cfg.max_inventory(),
            time_fraction: self.step as f64 / self.cfg.events_per_episode as f64,
        }
    }

    /// Observation the next decision is based on.
    pub fn observation(&self) -> Result<Observation, SimError> {
        let lag = self.effective_lag();
        let window = if self.cfg.lob_window {
            Some(self.history.window_lagged(self.cfg.window, lag)?)
        } else {
            None
        };
        Ok(Observation {
            snapshot: self.lagged_snapshot().clone(),
            dynamic: self.dynamic[self.dynamic.len() - 1 - lag],
            agent: self.agent_state(),
            window,
            event_index: self.cursor - 1 - lag,
        })
    }

    fn info(&self, spread: i64, close_out: bool) -> StepInfo {
        StepInfo {
            step: self.step,
            seq: self.book.last_seq().unwrap_or(0),
            mid2: self.mid2,
            spread,
            inventory: self.account.inventory,
            cash: self.account.cash,
            value: self.account.value(self.mid2),
            quotes: self.account.quotes,
            close_out,
        }
    }

    /// Market orders flattening `inventory` against the true book, best level
    /// first. Returns the fills and whether depth ran out.
    pub fn liquidation_fills(book: &OrderBook, inventory: i64) -> (Vec<Fill>, bool) {
        let side = if inventory > 0 { Side::Bid } else { Side::Ask };
        let sign = if inventory > 0 { -1 } else { 1 };
        let mut remaining = inventory.unsigned_abs();
        let mut fills = Vec::new();
        for (price, volume) in book.levels(side) {
            if remaining == 0 {
                break;
            }
            let take = remaining.min(volume);
            fills.push(Fill {
                price,
                volume: sign * take as i64,
                close_out: true,
            });
            remaining -= take;
        }
        (fills, remaining > 0)
    }

    fn resolve(&self, decision: &Decision) -> Result<Resolved, SimError> {
        let snap = self.lagged_snapshot();
        let inv = self.account.inventory;
        Ok(match *decision {
            Decision::Discrete(a) => resolve_discrete(a, snap, inv),
            Decision::Continuous(a) => {
                let mid2 = snap.mid2().ok_or(SimError::OneSidedBook { seq: snap.seq })?;
                let params = ContinuousParams {
                    tick_size: self.tick_size,
                    ..self.cfg.continuous
                };
                Resolved::Quotes(resolve_continuous(a, mid2, inv, &params))
            }
            Decision::Quotes(q) => {
                if !q.is_valid() {
                    return Err(SimError::InvalidQuotes(q));
                }
                Resolved::Quotes(q)
            }
        })
    }

    pub fn step(&mut self, decision: &Decision) -> Result<StepOutcome, SimError> {
        match self.phase {
            Phase::Idle => return Err(SimError::NotReset),
            Phase::Done => return Err(SimError::EpisodeFinished),
            Phase::Active => {}
        }
        let resolved = self.resolve(decision)?;
        let prev_inventory = self.account.inventory;
        let prev_mid2 = self.mid2;
        let prev_value = self.account.value(prev_mid2);
        let close_out = matches!(resolved, Resolved::CloseOut { .. });
        self.account.quotes = match resolved {
            Resolved::Quotes(q) => {
                let mut q = enforce_position_limit(q, prev_inventory, self.cfg.omega, self.cfg.unit);
                q.volume = self.cfg.unit;
                q
            }
            Resolved::CloseOut { .. } => QuotePair::none(),
        };

        let ev = self.advance(true)?;
        let (ask, bid) = self.true_touch()?;
        self.mid2 = ask + bid;

        let mut fills = if close_out {
            let (f, short) = Self::liquidation_fills(&self.book, prev_inventory);
            self.stats.truncated |= short;
            f
        } else {
            crossing_fills(&self.account.quotes, &ev, ask, bid)
        };
        for f in &fills {
            self.account.apply_fill(f, self.cfg.fee);
        }
        self.step += 1;
        let done = self.step == self.cfg.events_per_episode;
        if done && self.account.inventory != 0 {
            let (f, short) = Self::liquidation_fills(&self.book, self.account.inventory);
            self.stats.truncated |= short;
            for fill in &f {
                self.account.apply_fill(fill, self.cfg.fee);
            }
            fills.extend(f);
        }

        let traded: u64 = fills.iter().map(Fill::abs_volume).sum();
        let fees = Money(self.cfg.fee.0 * traded as i64);
        let terms = PnlTerms {
            delta_pnl: self.account.value(self.mid2) - prev_value,
            trading_pnl: trading_pnl(&fills, self.mid2) - fees,
            holding_pnl: holding_pnl(prev_inventory, prev_mid2, self.mid2),
        };
        debug_assert_eq!(terms.delta_pnl, terms.trading_pnl + terms.holding_pnl);
        let reward = RewardBreakdown::from_terms(&terms, self.account.inventory, &self.cfg.reward, self.tick_size);

        self.stats.steps += 1;
        self.stats.abs_inventory += self.account.inventory.unsigned_abs();
        self.stats.traded_volume += traded;
        self.stats.spread_ticks += ask - bid;
        if done {
            self.phase = Phase::Done;
        }
        Ok(StepOutcome {
            observation: self.observation()?,
            reward,
            terms,
            fills,
            done,
            info: self.info(ask - bid, close_out),
        })
    }

    /// Summary of the current (or just finished) episode.
    pub fn report(&self, episode: u64) -> EpisodeReport {
        let s = &self.stats;
        let n = s.steps.max(1) as f64;
        EpisodeReport {
            episode,
            pnl: self.account.value(self.mid2).to_currency(self.tick_size),
            mean_abs_position: s.abs_inventory as f64 / n,
            traded_volume: s.traded_volume,
            mean_spread: s.spread_ticks as f64 / n * self.tick_size,
            step_count: s.steps,
            truncated: s.truncated,
        }
    }
}
