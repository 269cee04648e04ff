//! Dynamic market state (order strength, realized volatility, RSI) and the
//! agent state vector.
//!
//! The free functions are direct evaluations over a pre-selected window. The
//! [`FeatureTracker`] maintains the same quantities incrementally over
//! timestamp-based horizons as events stream through the simulator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::book::{EventKind, MarketEvent, Side};

pub const OSI_HORIZONS_SECS: [u64; 3] = [10, 60, 300];
pub const PRICE_HORIZONS_MINS: [u64; 3] = [5, 10, 30];
pub const OSI_FEATURES: usize = 18;
pub const DYNAMIC_FEATURES: usize = OSI_FEATURES + 6;
pub const AGENT_FEATURES: usize = 2;
/// Length of the combined dynamic + agent feature vector.
pub const FEATURE_VECTOR_LEN: usize = DYNAMIC_FEATURES + AGENT_FEATURES;

const NS_PER_SEC: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OsiCategory {
    MarketOrder,
    LimitOrder,
    Cancellation,
}

impl OsiCategory {
    pub const ALL: [OsiCategory; 3] = [
        OsiCategory::MarketOrder,
        OsiCategory::LimitOrder,
        OsiCategory::Cancellation,
    ];

    pub fn of(kind: EventKind) -> OsiCategory {
        match kind {
            EventKind::Trade => OsiCategory::MarketOrder,
            EventKind::AddLimit => OsiCategory::LimitOrder,
            EventKind::Cancel => OsiCategory::Cancellation,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OsiMode {
    Volume,
    Count,
}

/// `(buy − sell) / (buy + sell)`, zero when nothing happened.
pub fn strength_ratio(buy: f64, sell: f64) -> f64 {
    let total = buy + sell;
    if total == 0.0 {
        0.0
    } else {
        (buy - sell) / total
    }
}

/// Order strength index over an already-windowed slice of events.
pub fn osi(events: &[MarketEvent], category: OsiCategory, mode: OsiMode) -> f64 {
    let (mut buy, mut sell) = (0.0, 0.0);
    for ev in events.iter().filter(|e| OsiCategory::of(e.kind) == category) {
        let amount = match mode {
            OsiMode::Volume => ev.volume as f64,
            OsiMode::Count => 1.0,
        };
        match ev.side {
            Side::Bid => buy += amount,
            Side::Ask => sell += amount,
        }
    }
    strength_ratio(buy, sell)
}

/// Suffix of a time-ordered slice with timestamps in `(now − horizon, now]`.
pub fn window_by_time(events: &[MarketEvent], now_ns: u64, horizon_ns: u64) -> &[MarketEvent] {
    let cutoff = now_ns.saturating_sub(horizon_ns);
    let end = events.partition_point(|e| e.timestamp_ns <= now_ns);
    let start = if now_ns < horizon_ns {
        0
    } else {
        events[..end].partition_point(|e| e.timestamp_ns <= cutoff)
    };
    &events[start..end]
}

/// Root of summed squared log-returns. `None` with fewer than two prices.
pub fn realized_volatility(mids: &[f64]) -> Option<f64> {
    if mids.len() < 2 {
        return None;
    }
    let sum: f64 = mids
        .windows(2)
        .map(|w| {
            let r = w[1].ln() - w[0].ln();
            r * r
        })
        .sum();
    Some(sum.sqrt())
}

/// Gain share of total absolute movement; 0.5 when the series is flat.
pub fn rsi(mids: &[f64]) -> f64 {
    let (mut gain, mut loss) = (0.0, 0.0);
    for w in mids.windows(2) {
        gain += (w[1] - w[0]).max(0.0);
        loss += (w[0] - w[1]).max(0.0);
    }
    if gain + loss == 0.0 {
        0.5
    } else {
        gain / (gain + loss)
    }
}

/// OSI (18), RV (3) and RSI (3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    /// Ordered category-major, then mode (volume, count), then horizon.
    pub osi: [f64; OSI_FEATURES],
    pub rv: [f64; 3],
    pub rsi: [f64; 3],
}

impl Default for DynamicState {
    fn default() -> Self {
        Self {
            osi: [0.0; OSI_FEATURES],
            rv: [0.0; 3],
            rsi: [0.5; 3],
        }
    }
}

impl DynamicState {
    pub fn osi_index(category: OsiCategory, mode: OsiMode, horizon: usize) -> usize {
        category.index() * 6 + (mode as usize) * 3 + horizon
    }

    pub fn osi_value(&self, category: OsiCategory, mode: OsiMode, horizon: usize) -> f64 {
        self.osi[Self::osi_index(category, mode, horizon)]
    }

    pub fn write_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.osi);
        out.extend_from_slice(&self.rv);
        out.extend_from_slice(&self.rsi);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentStateVec {
    pub inventory: i64,
    pub max_inventory: i64,
    /// Elapsed fraction of the episode, `t / T`.
    pub time_fraction: f64,
}

impl AgentStateVec {
    pub fn inventory_ratio(&self) -> f64 {
        if self.max_inventory == 0 {
            0.0
        } else {
            self.inventory as f64 / self.max_inventory as f64
        }
    }

    pub fn remaining_fraction(&self) -> f64 {
        (1.0 - self.time_fraction).clamp(0.0, 1.0)
    }

    pub fn write_into(&self, out: &mut Vec<f64>) {
        out.push(self.inventory_ratio());
        out.push(self.time_fraction);
    }
}

/// Fixed-order feature vector: 18 OSI, 3 RV, 3 RSI, inventory ratio, time.
pub fn feature_vector(dynamic: &DynamicState, agent: &AgentStateVec) -> Vec<f64> {
    let mut v = Vec::with_capacity(FEATURE_VECTOR_LEN);
    dynamic.write_into(&mut v);
    agent.write_into(&mut v);
    v
}

#[derive(Debug, Clone, Copy, Default)]
struct FlowTotals {
    // [category][side]
    volume: [[u64; 2]; 3],
    count: [[u64; 2]; 3],
}

impl FlowTotals {
    fn add(&mut self, cat: usize, side: usize, vol: u64) {
        self.volume[cat][side] += vol;
        self.count[cat][side] += 1;
    }

    fn remove(&mut self, cat: usize, side: usize, vol: u64) {
        self.volume[cat][side] -= vol;
        self.count[cat][side] -= 1;
    }
}

#[derive(Debug, Clone, Copy)]
struct FlowItem {
    ts: u64,
    cat: usize,
    side: usize,
    volume: u64,
}

#[derive(Debug, Clone)]
struct FlowWindow {
    horizon_ns: u64,
    items: VecDeque<FlowItem>,
    totals: FlowTotals,
}

impl FlowWindow {
    fn push(&mut self, item: FlowItem) {
        self.totals.add(item.cat, item.side, item.volume);
        self.items.push_back(item);
    }

    fn evict(&mut self, now: u64) {
        if now < self.horizon_ns {
            return;
        }
        let cutoff = now - self.horizon_ns;
        while let Some(front) = self.items.front() {
            if front.ts > cutoff {
                break;
            }
            self.totals.remove(front.cat, front.side, front.volume);
            self.items.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct MidSample {
    ts: u64,
    gain: i64,
    loss: i64,
    sq_log_ret: f64,
}

#[derive(Debug, Clone)]
struct MidWindow {
    horizon_ns: u64,
    samples: VecDeque<MidSample>,
    gain: i64,
    loss: i64,
    sq_log_ret: f64,
}

impl MidWindow {
    fn push(&mut self, s: MidSample) {
        self.gain += s.gain;
        self.loss += s.loss;
        self.sq_log_ret += s.sq_log_ret;
        self.samples.push_back(s);
    }

    fn evict(&mut self, now: u64) {
        if now < self.horizon_ns {
            return;
        }
        let cutoff = now - self.horizon_ns;
        while let Some(front) = self.samples.front() {
            if front.ts > cutoff {
                break;
            }
            self.gain -= front.gain;
            self.loss -= front.loss;
            self.sq_log_ret -= front.sq_log_ret;
            self.samples.pop_front();
        }
    }

    /// Sums over returns between in-window samples; the oldest in-window
    /// sample's return reaches outside the window and is excluded.
    fn values(&self) -> (f64, f64) {
        let Some(first) = self.samples.front() else {
            return (0.0, 0.5);
        };
        if self.samples.len() < 2 {
            return (0.0, 0.5);
        }
        let gain = self.gain - first.gain;
        let loss = self.loss - first.loss;
        let rv = (self.sq_log_ret - first.sq_log_ret).max(0.0).sqrt();
        let rsi = if gain + loss == 0 {
            0.5
        } else {
            gain as f64 / (gain + loss) as f64
        };
        (rv, rsi)
    }
}

/// Incremental [`DynamicState`] over a time-ordered event stream.
#[derive(Debug, Clone)]
pub struct FeatureTracker {
    flows: Vec<FlowWindow>,
    mids: Vec<MidWindow>,
    last_mid2: Option<i64>,
    now: u64,
}

impl Default for FeatureTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureTracker {
    pub fn new() -> Self {
        Self::with_horizons(
            OSI_HORIZONS_SECS.map(|s| s * NS_PER_SEC),
            PRICE_HORIZONS_MINS.map(|m| m * 60 * NS_PER_SEC),
        )
    }

    pub fn with_horizons(osi_ns: [u64; 3], price_ns: [u64; 3]) -> Self {
        Self {
            flows: osi_ns
                .iter()
                .map(|&h| FlowWindow {
                    horizon_ns: h,
                    items: VecDeque::new(),
                    totals: FlowTotals::default(),
                })
                .collect(),
            mids: price_ns
                .iter()
                .map(|&h| MidWindow {
                    horizon_ns: h,
                    samples: VecDeque::new(),
                    gain: 0,
                    loss: 0,
                    sq_log_ret: 0.0,
                })
                .collect(),
            last_mid2: None,
            now: 0,
        }
    }

    pub fn clear(&mut self) {
        *self = Self::with_horizons(
            [self.flows[0].horizon_ns, self.flows[1].horizon_ns, self.flows[2].horizon_ns],
            [self.mids[0].horizon_ns, self.mids[1].horizon_ns, self.mids[2].horizon_ns],
        );
    }

    /// Records an applied event and the book mid (half-ticks) after it.
    pub fn observe(&mut self, ev: &MarketEvent, mid2: Option<i64>) {
        self.now = self.now.max(ev.timestamp_ns);
        let item = FlowItem {
            ts: ev.timestamp_ns,
            cat: OsiCategory::of(ev.kind).index(),
            side: match ev.side {
                Side::Bid => 0,
                Side::Ask => 1,
            },
            volume: ev.volume,
        };
        for w in &mut self.flows {
            w.push(item);
            w.evict(self.now);
        }
        if let Some(m) = mid2 {
            let sample = match self.last_mid2 {
                Some(prev) => {
                    let r = (m as f64).ln() - (prev as f64).ln();
                    MidSample {
                        ts: ev.timestamp_ns,
                        gain: (m - prev).max(0),
                        loss: (prev - m).max(0),
                        sq_log_ret: r * r,
                    }
                }
                None => MidSample {
                    ts: ev.timestamp_ns,
                    gain: 0,
                    loss: 0,
                    sq_log_ret: 0.0,
                },
            };
            self.last_mid2 = Some(m);
            for w in &mut self.mids {
                w.push(sample);
            }
        }
        for w in &mut self.mids {
            w.evict(self.now);
        }
    }

    pub fn state(&self) -> DynamicState {
        let mut out = DynamicState::default();
        for cat in OsiCategory::ALL {
            for (h, w) in self.flows.iter().enumerate() {
                let t = &w.totals;
                let c = cat.index();
                out.osi[DynamicState::osi_index(cat, OsiMode::Volume, h)] =
                    strength_ratio(t.volume[c][0] as f64, t.volume[c][1] as f64);
                out.osi[DynamicState::osi_index(cat, OsiMode::Count, h)] =
                    strength_ratio(t.count[c][0] as f64, t.count[c][1] as f64);
            }
        }
        for (h, w) in self.mids.iter().enumerate() {
            let (rv, rsi) = w.values();
            out.rv[h] = rv;
            out.rsi[h] = rsi;
        }
        out
    }
}
