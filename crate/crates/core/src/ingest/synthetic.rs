//! Reproducible synthetic order-event streams.
//!
//! The book mid follows a mean-reverting walk on the half-tick grid: each
//! event moves it up half a tick with probability `2σ² + θ(μ − m)`, down with
//! `2σ² − θ(μ − m)`, so the per-event drift is `θ(μ − m)` and the variance is
//! `σ²`. Moves are realized by a price-improving limit order when the spread
//! allows it, otherwise by a market order (or cancel) clearing the opposite
//! touch. All other events are background flow: limit orders placed with
//! geometrically decaying depth, cancellations that never clear a touch
//! level, and small market orders that never exhaust one. The stream is
//! replayed through an [`OrderBook`] as it is produced, so it is valid by
//! construction and never crosses.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::book::{EventKind, MarketEvent, OrderBook, OrderId, Price, Side, Volume};

const LOT: Volume = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarketConfig {
    pub seed: u64,
    /// Initial (and long-run mean) mid-price in ticks.
    pub initial_mid: Price,
    /// Per-event pull of the mid toward the mean.
    pub mean_reversion: f64,
    /// Per-event standard deviation of the mid, in ticks (at most 0.5).
    pub volatility: f64,
    pub bid_intensity: f64,
    pub ask_intensity: f64,
    /// Probability that a new limit order is placed one tick deeper than the
    /// previous candidate level.
    pub depth_decay: f64,
    pub cancel_prob: f64,
    pub market_order_prob: f64,
    pub event_count: usize,
    /// Minimum number of price levels kept on each side.
    pub levels: usize,
    pub mean_interarrival_ns: f64,
    /// Timestamp of the first event, nanoseconds since midnight.
    pub start_ns: u64,
    pub tick_size: f64,
}

impl Default for SyntheticMarketConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            initial_mid: 10_000,
            mean_reversion: 0.01,
            volatility: 0.3,
            bid_intensity: 1.0,
            ask_intensity: 1.0,
            depth_decay: 0.5,
            cancel_prob: 0.35,
            market_order_prob: 0.15,
            event_count: 100_000,
            levels: 10,
            mean_interarrival_ns: 100_000_000.0,
            start_ns: 34_200_000_000_000,
            tick_size: 0.01,
        }
    }
}

impl SyntheticMarketConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidConfig(m.to_string()));
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if self.initial_mid <= 2 * self.levels as Price + 2 {
            return bad("initial mid too small for the requested depth");
        }
        if !(self.mean_reversion.is_finite() && (0.0..1.0).contains(&self.mean_reversion)) {
            return bad("mean reversion must lie in [0, 1)");
        }
        if !(self.volatility.is_finite() && (0.0..=0.5).contains(&self.volatility)) {
            return bad("volatility must lie in [0, 0.5] ticks per event");
        }
        if !(self.bid_intensity > 0.0 && self.ask_intensity > 0.0)
            || !(self.bid_intensity.is_finite() && self.ask_intensity.is_finite())
        {
            return bad("arrival intensities must be positive");
        }
        if !unit(self.depth_decay) || self.depth_decay >= 1.0 {
            return bad("depth decay must lie in [0, 1)");
        }
        if !unit(self.cancel_prob) || !unit(self.market_order_prob) || self.cancel_prob + self.market_order_prob > 1.0 {
            return bad("cancel and market-order probabilities must lie in [0, 1] and sum to at most 1");
        }
        if self.levels == 0 {
            return bad("levels must be positive");
        }
        if !(self.mean_interarrival_ns >= 1.0 && self.mean_interarrival_ns.is_finite()) {
            return bad("mean inter-arrival must be at least 1ns");
        }
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return bad("tick size must be positive");
        }
        Ok(())
    }
}

/// Iterator over a synthetic event stream.
pub struct SyntheticMarket {
    cfg: SyntheticMarketConfig,
    rng: ChaCha8Rng,
    book: OrderBook,
    live: Vec<OrderId>,
    next_id: OrderId,
    seq: u64,
    now: u64,
    emitted: usize,
    pending: VecDeque<MarketEvent>,
    interarrival: Exp<f64>,
}

impl SyntheticMarket {
    pub fn new(cfg: SyntheticMarketConfig) -> Result<Self, IngestError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let interarrival = Exp::new(1.0 / cfg.mean_interarrival_ns).expect("validated rate");
        let mut market = Self {
            rng,
            book: OrderBook::new(),
            live: Vec::new(),
            next_id: 1,
            seq: 0,
            now: cfg.start_ns,
            emitted: 0,
            pending: VecDeque::new(),
            interarrival,
            cfg,
        };
        for i in 0..market.cfg.levels as Price {
            let ask = market.cfg.initial_mid + 1 + i;
            let bid = market.cfg.initial_mid - 1 - i;
            let v = market.lot_volume();
            let ev = market.add_event(Side::Ask, ask, v);
            market.pending.push_back(ev);
            let v = market.lot_volume();
            let ev = market.add_event(Side::Bid, bid, v);
            market.pending.push_back(ev);
        }
        Ok(market)
    }

    pub fn config(&self) -> &SyntheticMarketConfig {
        &self.cfg
    }

    fn lot_volume(&mut self) -> Volume {
        LOT * self.rng.gen_range(1..=10)
    }

    fn add_event(&mut self, side: Side, price: Price, volume: Volume) -> MarketEvent {
        let id = self.next_id;
        self.next_id += 1;
        MarketEvent {
            seq: 0,
            timestamp_ns: 0,
            kind: EventKind::AddLimit,
            order_id: id,
            side,
            price,
            volume,
        }
    }

    fn cancel_event(&self, id: OrderId) -> MarketEvent {
        let (side, price) = self.book.order(id).expect("live order");
        MarketEvent {
            seq: 0,
            timestamp_ns: 0,
            kind: EventKind::Cancel,
            order_id: id,
            side,
            price,
            volume: self.book.order_volume(id).expect("live order"),
        }
    }

    fn trade_event(&mut self, aggressor: Side, price: Price, volume: Volume) -> MarketEvent {
        let id = self.next_id;
        self.next_id += 1;
        MarketEvent {
            seq: 0,
            timestamp_ns: 0,
            kind: EventKind::Trade,
            order_id: id,
            side: aggressor,
            price,
            volume,
        }
    }

    fn touch(&self, side: Side) -> Price {
        match side {
            Side::Bid => self.book.best_bid().expect("book keeps both sides"),
            Side::Ask => self.book.best_ask().expect("book keeps both sides"),
        }
    }

    /// Event that moves the mid half a tick or more toward `up`/down.
    fn push(&mut self, up: bool) -> MarketEvent {
        // Price-improving side and the side that has to give way.
        let (improve, clear) = if up { (Side::Bid, Side::Ask) } else { (Side::Ask, Side::Bid) };
        let bid = self.touch(Side::Bid);
        let ask = self.touch(Side::Ask);
        if ask - bid >= 2 {
            let price = if up { bid + 1 } else { ask - 1 };
            let v = self.lot_volume();
            return self.add_event(improve, price, v);
        }
        if self.book.depth(clear) < 2 {
            return self.deepen(clear);
        }
        let level = self.touch(clear);
        if self.cfg.market_order_prob > 0.0 {
            let volume = self.book.level_volume(clear, level);
            let trade = self.trade_event(improve, level, volume);
            // Keep the move to half a tick: fill a gap behind the touch first.
            let behind = if up { level + 1 } else { level - 1 };
            if behind > 0 && self.book.level_volume(clear, behind) == 0 {
                let v = self.lot_volume();
                let fill = self.add_event(clear, behind, v);
                self.pending.push_back(trade);
                return fill;
            }
            trade
        } else {
            let front = self.book.queue_at(clear, level)[0];
            self.cancel_event(front)
        }
    }

    fn deepen(&mut self, side: Side) -> MarketEvent {
        let worst = self.book.worst(side).expect("book keeps both sides");
        let price = match side {
            Side::Bid => (worst - 1).max(1),
            Side::Ask => worst + 1,
        };
        let v = self.lot_volume();
        self.add_event(side, price, v)
    }

    fn prune(&mut self) -> Option<MarketEvent> {
        let side = if self.book.depth(Side::Bid) >= self.book.depth(Side::Ask) {
            Side::Bid
        } else {
            Side::Ask
        };
        let worst = self.book.worst(side)?;
        let queue = self.book.queue_at(side, worst);
        let id = *queue.last()?;
        (worst != self.touch(side)).then(|| self.cancel_event(id))
    }

    fn random_cancel(&mut self) -> Option<MarketEvent> {
        for _ in 0..8 {
            if self.live.is_empty() {
                return None;
            }
            let i = self.rng.gen_range(0..self.live.len());
            let id = self.live[i];
            let Some((side, price)) = self.book.order(id) else {
                self.live.swap_remove(i);
                continue;
            };
            if price == self.touch(side) && self.book.queue_at(side, price).len() == 1 {
                continue;
            }
            return Some(self.cancel_event(id));
        }
        None
    }

    fn small_trade(&mut self) -> Option<MarketEvent> {
        let aggressor = if self.rng.gen_bool(0.5) { Side::Bid } else { Side::Ask };
        let resting = aggressor.opposite();
        let price = self.touch(resting);
        let available = self.book.level_volume(resting, price);
        if available <= LOT {
            return None;
        }
        let max_lots = ((available - LOT) / LOT).clamp(1, 3);
        let volume = LOT * self.rng.gen_range(1..=max_lots);
        Some(self.trade_event(aggressor, price, volume))
    }

    fn random_add(&mut self) -> MarketEvent {
        let p_bid = self.cfg.bid_intensity / (self.cfg.bid_intensity + self.cfg.ask_intensity);
        let side = if self.rng.gen_bool(p_bid) { Side::Bid } else { Side::Ask };
        let mut offset: Price = 0;
        let max_offset = 2 * self.cfg.levels as Price;
        while offset < max_offset && self.rng.gen_bool(self.cfg.depth_decay) {
            offset += 1;
        }
        let price = match side {
            Side::Bid => (self.touch(Side::Bid) - offset).max(1),
            Side::Ask => self.touch(Side::Ask) + offset,
        };
        let v = self.lot_volume();
        self.add_event(side, price, v)
    }

    fn background(&mut self) -> MarketEvent {
        let r: f64 = self.rng.gen();
        let picked = if r < self.cfg.market_order_prob {
            self.small_trade()
        } else if r < self.cfg.market_order_prob + self.cfg.cancel_prob {
            self.random_cancel()
        } else {
            None
        };
        picked.unwrap_or_else(|| self.random_add())
    }

    fn next_event(&mut self) -> MarketEvent {
        if let Some(ev) = self.pending.pop_front() {
            return ev;
        }
        let mid = self.book.mid2().expect("book keeps both sides") as f64 / 2.0;
        let drift = self.cfg.mean_reversion * (self.cfg.initial_mid as f64 - mid);
        let base = 2.0 * self.cfg.volatility * self.cfg.volatility;
        let mut p_up = (base + drift).clamp(0.0, 1.0);
        let mut p_down = (base - drift).clamp(0.0, 1.0);
        if p_up + p_down > 1.0 {
            let total = p_up + p_down;
            p_up /= total;
            p_down /= total;
        }
        let u: f64 = self.rng.gen();
        if u < p_up {
            return self.push(true);
        }
        if u < p_up + p_down {
            return self.push(false);
        }
        let levels = self.cfg.levels;
        for side in [Side::Bid, Side::Ask] {
            if self.book.depth(side) < levels {
                return self.deepen(side);
            }
        }
        if self.book.live_orders() > 8 * levels {
            if let Some(ev) = self.prune() {
                return ev;
            }
        }
        self.background()
    }
}

impl Iterator for SyntheticMarket {
    type Item = MarketEvent;

    fn next(&mut self) -> Option<MarketEvent> {
        if self.emitted >= self.cfg.event_count {
            return None;
        }
        let mut ev = self.next_event();
        self.seq += 1;
        let dt = self.interarrival.sample(&mut self.rng).round().max(1.0) as u64;
        self.now += dt;
        ev.seq = self.seq;
        ev.timestamp_ns = self.now;
        self.book
            .apply(&ev)
            .expect("synthetic events are valid by construction");
        if ev.kind == EventKind::AddLimit {
            self.live.push(ev.order_id);
        }
        self.emitted += 1;
        Some(ev)
    }
}

pub fn generate_synthetic(cfg: &SyntheticMarketConfig) -> Result<Vec<MarketEvent>, IngestError> {
    Ok(SyntheticMarket::new(cfg.clone())?.collect())
}
