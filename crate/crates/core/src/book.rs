//! Order book data model and event-by-event reconstruction.
//!
//! The book keeps full depth internally (every live order, FIFO per price
//! level) and aggregates the top `n` levels only when a [`BookSnapshot`] is
//! taken. Prices are integer ticks; the mid-price is carried as an integer
//! count of half-ticks so it stays exact.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Price in integer ticks.
pub type Price = i64;
/// Quantity in shares.
pub type Volume = u64;
pub type OrderId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    AddLimit,
    Cancel,
    /// Aggressive order hitting resting liquidity. `side` is the side of the
    /// incoming (aggressor) order, so a `Bid` trade consumes asks.
    Trade,
}

/// One order book event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarketEvent {
    pub seq: u64,
    pub timestamp_ns: u64,
    pub kind: EventKind,
    pub order_id: OrderId,
    pub side: Side,
    pub price: Price,
    pub volume: Volume,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("cancel of unknown order id {0}")]
    UnknownOrderId(OrderId),
    #[error("order id {0} is already live")]
    DuplicateOrderId(OrderId),
    #[error("event would cross the book (bid {bid} >= ask {ask})")]
    CrossedBook { bid: Price, ask: Price },
    #[error("sequence number {got} does not follow {last}")]
    NonMonotoneSeq { last: u64, got: u64 },
    #[error("event {seq}: price and volume must be positive")]
    InvalidEvent { seq: u64 },
    #[error("cancel of order {0} does not match its side/price")]
    CancelMismatch(OrderId),
    #[error("trade of {volume} at {price} exceeds resting volume {available}")]
    TradeExceedsLiquidity {
        price: Price,
        volume: Volume,
        available: Volume,
    },
    #[error("need {needed} snapshots, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
}

#[derive(Debug, Clone, Default)]
struct Level {
    total: Volume,
    queue: VecDeque<(OrderId, Volume)>,
}

#[derive(Debug, Clone, Copy)]
struct LiveOrder {
    side: Side,
    price: Price,
}

/// Full-depth limit order book for one instrument.
#[derive(Debug, Clone, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, Level>,
    asks: BTreeMap<Price, Level>,
    orders: HashMap<OrderId, LiveOrder>,
    last_seq: Option<u64>,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    /// Mid-price in half-ticks, when both sides are populated.
    pub fn mid2(&self) -> Option<i64> {
        Some(self.best_bid()? + self.best_ask()?)
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    pub fn live_orders(&self) -> usize {
        self.orders.len()
    }

    /// Side and price of a live order.
    pub fn order(&self, id: OrderId) -> Option<(Side, Price)> {
        self.orders.get(&id).map(|o| (o.side, o.price))
    }

    /// Remaining volume of a live order.
    pub fn order_volume(&self, id: OrderId) -> Option<Volume> {
        let o = self.orders.get(&id)?;
        self.side(o.side)
            .get(&o.price)?
            .queue
            .iter()
            .find(|(oid, _)| *oid == id)
            .map(|(_, v)| *v)
    }

    /// Number of distinct price levels on `side`.
    pub fn depth(&self, side: Side) -> usize {
        self.side(side).len()
    }

    /// Worst (deepest) price on `side`.
    pub fn worst(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.bids.keys().next().copied(),
            Side::Ask => self.asks.keys().next_back().copied(),
        }
    }

    /// Aggregated volume resting at `price` on `side`.
    pub fn level_volume(&self, side: Side, price: Price) -> Volume {
        self.side(side).get(&price).map_or(0, |l| l.total)
    }

    /// Aggregated levels on one side, best first.
    pub fn levels(&self, side: Side) -> Box<dyn Iterator<Item = (Price, Volume)> + '_> {
        match side {
            Side::Bid => Box::new(self.bids.iter().rev().map(|(p, l)| (*p, l.total))),
            Side::Ask => Box::new(self.asks.iter().map(|(p, l)| (*p, l.total))),
        }
    }

    /// Ids of live orders at a level in queue order.
    pub fn queue_at(&self, side: Side, price: Price) -> Vec<OrderId> {
        self.side(side)
            .get(&price)
            .map(|l| l.queue.iter().map(|(id, _)| *id).collect())
            .unwrap_or_default()
    }

    fn side(&self, side: Side) -> &BTreeMap<Price, Level> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, Level> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    /// Validates `ev` against the current state without mutating the book.
    pub fn check(&self, ev: &MarketEvent) -> Result<(), BookError> {
        if let Some(last) = self.last_seq {
            if ev.seq <= last {
                return Err(BookError::NonMonotoneSeq { last, got: ev.seq });
            }
        }
        match ev.kind {
            EventKind::AddLimit => {
                if ev.price <= 0 || ev.volume == 0 {
                    return Err(BookError::InvalidEvent { seq: ev.seq });
                }
                if self.orders.contains_key(&ev.order_id) {
                    return Err(BookError::DuplicateOrderId(ev.order_id));
                }
                match ev.side {
                    Side::Bid => {
                        if let Some(ask) = self.best_ask() {
                            if ev.price >= ask {
                                return Err(BookError::CrossedBook { bid: ev.price, ask });
                            }
                        }
                    }
                    Side::Ask => {
                        if let Some(bid) = self.best_bid() {
                            if ev.price <= bid {
                                return Err(BookError::CrossedBook { bid, ask: ev.price });
                            }
                        }
                    }
                }
            }
            EventKind::Cancel => {
                let o = self
                    .orders
                    .get(&ev.order_id)
                    .ok_or(BookError::UnknownOrderId(ev.order_id))?;
                if o.side != ev.side || o.price != ev.price {
                    return Err(BookError::CancelMismatch(ev.order_id));
                }
            }
            EventKind::Trade => {
                if ev.price <= 0 || ev.volume == 0 {
                    return Err(BookError::InvalidEvent { seq: ev.seq });
                }
                let available = self.level_volume(ev.side.opposite(), ev.price);
                if ev.volume > available {
                    return Err(BookError::TradeExceedsLiquidity {
                        price: ev.price,
                        volume: ev.volume,
                        available,
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies one event. On error the book is left untouched.
    pub fn apply(&mut self, ev: &MarketEvent) -> Result<(), BookError> {
        self.check(ev)?;
        match ev.kind {
            EventKind::AddLimit => {
                let level = self.side_mut(ev.side).entry(ev.price).or_default();
                level.total += ev.volume;
                level.queue.push_back((ev.order_id, ev.volume));
                self.orders.insert(
                    ev.order_id,
                    LiveOrder {
                        side: ev.side,
                        price: ev.price,
                    },
                );
            }
            EventKind::Cancel => {
                let o = self.orders.remove(&ev.order_id).expect("checked");
                let book_side = self.side_mut(o.side);
                let level = book_side.get_mut(&o.price).expect("live order has a level");
                let pos = level
                    .queue
                    .iter()
                    .position(|(id, _)| *id == ev.order_id)
                    .expect("live order is queued");
                let (_, vol) = level.queue.remove(pos).expect("position in range");
                level.total -= vol;
                if level.queue.is_empty() {
                    book_side.remove(&o.price);
                }
            }
            EventKind::Trade => {
                let resting = ev.side.opposite();
                let mut remaining = ev.volume;
                let mut filled = Vec::new();
                let book_side = self.side_mut(resting);
                let level = book_side.get_mut(&ev.price).expect("checked");
                while remaining > 0 {
                    let front = level.queue.front_mut().expect("volume checked");
                    let take = remaining.min(front.1);
                    front.1 -= take;
                    level.total -= take;
                    remaining -= take;
                    if front.1 == 0 {
                        filled.push(front.0);
                        level.queue.pop_front();
                    }
                }
                if level.queue.is_empty() {
                    book_side.remove(&ev.price);
                }
                for id in filled {
                    self.orders.remove(&id);
                }
            }
        }
        self.last_seq = Some(ev.seq);
        Ok(())
    }

    /// Applies `ev` and returns the resulting top-`levels` snapshot.
    pub fn apply_event(&mut self, ev: &MarketEvent, levels: usize) -> Result<BookSnapshot, BookError> {
        self.apply(ev)?;
        Ok(self.snapshot(levels))
    }

    pub fn snapshot(&self, levels: usize) -> BookSnapshot {
        let collect = |side| {
            self.levels(side)
                .take(levels)
                .map(|(price, volume)| LevelQty { price, volume })
                .collect()
        };
        BookSnapshot {
            levels,
            seq: self.last_seq.unwrap_or(0),
            asks: collect(Side::Ask),
            bids: collect(Side::Bid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelQty {
    pub price: Price,
    pub volume: Volume,
}

/// Aggregated `levels`-deep ladder. Only occupied levels are stored; level
/// `i` is present iff `i < asks.len()` (resp. `bids`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub levels: usize,
    /// Sequence number of the last event applied.
    pub seq: u64,
    pub asks: Vec<LevelQty>,
    pub bids: Vec<LevelQty>,
}

impl BookSnapshot {
    pub fn best_ask(&self) -> Option<Price> {
        self.asks.first().map(|l| l.price)
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.first().map(|l| l.price)
    }

    pub fn mid2(&self) -> Option<i64> {
        Some(self.best_ask()? + self.best_bid()?)
    }

    pub fn spread(&self) -> Option<i64> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    /// Presence mask in flattened level order: `(ask present, bid present)`.
    pub fn mask(&self) -> Vec<(bool, bool)> {
        (0..self.levels)
            .map(|i| (i < self.asks.len(), i < self.bids.len()))
            .collect()
    }

    /// Level `i` (0-based) on `side`, if occupied.
    pub fn level(&self, side: Side, i: usize) -> Option<LevelQty> {
        match side {
            Side::Ask => self.asks.get(i).copied(),
            Side::Bid => self.bids.get(i).copied(),
        }
    }

    /// `[ask_p, ask_v, bid_p, bid_v]` per level, 4·levels values. Empty
    /// levels encode as zeros.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for i in 0..self.levels {
            let a = self.asks.get(i);
            let b = self.bids.get(i);
            out.push(a.map_or(0.0, |l| l.price as f64));
            out.push(a.map_or(0.0, |l| l.volume as f64));
            out.push(b.map_or(0.0, |l| l.price as f64));
            out.push(b.map_or(0.0, |l| l.volume as f64));
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.levels);
        self.flatten_into(&mut v);
        v
    }

    /// Checks ladder ordering, positive spread and positive volumes.
    pub fn is_well_formed(&self) -> bool {
        let vols = self.asks.iter().chain(&self.bids).all(|l| l.volume > 0);
        let asks = self.asks.windows(2).all(|w| w[0].price < w[1].price);
        let bids = self.bids.windows(2).all(|w| w[0].price > w[1].price);
        let spread = self.spread().map_or(true, |s| s > 0);
        vols && asks && bids && spread && self.asks.len() <= self.levels && self.bids.len() <= self.levels
    }
}

/// `T` most recent snapshots, oldest first, flattened row-major into
/// `(T, 4·levels)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobWindow {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl LobWindow {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Bounded ring of recent snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotHistory {
    capacity: usize,
    ring: VecDeque<BookSnapshot>,
}

impl SnapshotHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            capacity,
            ring: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, snap: BookSnapshot) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(snap);
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn clear(&mut self) {
        self.ring.clear();
    }

    /// Snapshot `lag` entries before the newest (`lag = 0` is the newest).
    pub fn lagged(&self, lag: usize) -> Option<&BookSnapshot> {
        let n = self.ring.len();
        if lag >= n {
            return None;
        }
        self.ring.get(n - 1 - lag)
    }

    pub fn latest(&self) -> Option<&BookSnapshot> {
        self.ring.back()
    }

    /// Window of the last `t` snapshots ending `lag` entries before the newest.
    pub fn window_lagged(&self, t: usize, lag: usize) -> Result<LobWindow, BookError> {
        let needed = t + lag;
        if t == 0 || self.ring.len() < needed {
            return Err(BookError::InsufficientHistory {
                needed,
                available: self.ring.len(),
            });
        }
        let end = self.ring.len() - lag;
        let cols = 4 * self.ring[end - 1].levels;
        let mut data = Vec::with_capacity(t * cols);
        for snap in self.ring.range(end - t..end) {
            snap.flatten_into(&mut data);
        }
        Ok(LobWindow { rows: t, cols, data })
    }

    /// Last `t` snapshots, oldest first.
    pub fn snapshot_window(&self, t: usize) -> Result<LobWindow, BookError> {
        self.window_lagged(t, 0)
    }
}
