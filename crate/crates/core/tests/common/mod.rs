//! Independent reference implementations shared by the integration tests and
//! the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmlab_core::actions::{ContinuousAction, Decision, DiscreteAction, QuotePair};
use mmlab_core::book::{BookSnapshot, EventKind, LevelQty, MarketEvent, OrderId, Price, Side, Volume};
use mmlab_core::ingest::{generate_synthetic, SyntheticMarketConfig};
use mmlab_core::money::Money;
use mmlab_core::sim::{episode_seed, EpisodeConfig, EpisodePlan, Observation, Simulator, StepOutcome};
use mmlab_core::strategies::{random_quotes, Strategy};

// ---------------------------------------------------------------------------
// Flat-list order book

/// Every live order in arrival order; everything else is recomputed on demand.
#[derive(Debug, Clone, Default)]
pub struct FlatBook {
    orders: Vec<(OrderId, Side, Price, Volume)>,
    last_seq: Option<u64>,
}

impl FlatBook {
    fn best(&self, side: Side) -> Option<Price> {
        let prices = self.orders.iter().filter(|o| o.1 == side).map(|o| o.2);
        match side {
            Side::Bid => prices.max(),
            Side::Ask => prices.min(),
        }
    }

    fn resting_at(&self, side: Side, price: Price) -> Volume {
        self.orders.iter().filter(|o| o.1 == side && o.2 == price).map(|o| o.3).sum()
    }

    /// Applies `ev`, or rejects it leaving the book unchanged.
    pub fn apply(&mut self, ev: &MarketEvent) -> bool {
        if self.last_seq.is_some_and(|s| ev.seq <= s) {
            return false;
        }
        match ev.kind {
            EventKind::AddLimit => {
                if ev.price <= 0 || ev.volume == 0 || self.orders.iter().any(|o| o.0 == ev.order_id) {
                    return false;
                }
                let crosses = match ev.side {
                    Side::Bid => self.best(Side::Ask).is_some_and(|a| ev.price >= a),
                    Side::Ask => self.best(Side::Bid).is_some_and(|b| ev.price <= b),
                };
                if crosses {
                    return false;
                }
                self.orders.push((ev.order_id, ev.side, ev.price, ev.volume));
            }
            EventKind::Cancel => {
                let Some(i) = self.orders.iter().position(|o| o.0 == ev.order_id) else {
                    return false;
                };
                if self.orders[i].1 != ev.side || self.orders[i].2 != ev.price {
                    return false;
                }
                self.orders.remove(i);
            }
            EventKind::Trade => {
                let resting = match ev.side {
                    Side::Bid => Side::Ask,
                    Side::Ask => Side::Bid,
                };
                if ev.price <= 0 || ev.volume == 0 || self.resting_at(resting, ev.price) < ev.volume {
                    return false;
                }
                let mut left = ev.volume;
                for o in self.orders.iter_mut().filter(|o| o.1 == resting && o.2 == ev.price) {
                    let take = left.min(o.3);
                    o.3 -= take;
                    left -= take;
                    if left == 0 {
                        break;
                    }
                }
                self.orders.retain(|o| o.3 > 0);
            }
        }
        self.last_seq = Some(ev.seq);
        true
    }

    fn ladder(&self, side: Side, levels: usize) -> Vec<LevelQty> {
        let mut all: Vec<(Price, Volume)> = self.orders.iter().filter(|o| o.1 == side).map(|o| (o.2, o.3)).collect();
        all.sort_unstable_by_key(|&(p, _)| if side == Side::Bid { -p } else { p });
        let mut out: Vec<LevelQty> = Vec::new();
        for (price, volume) in all {
            match out.last_mut() {
                Some(l) if l.price == price => l.volume += volume,
                _ => {
                    if out.len() == levels {
                        break;
                    }
                    out.push(LevelQty { price, volume });
                }
            }
        }
        out
    }

    pub fn snapshot(&self, levels: usize) -> BookSnapshot {
        BookSnapshot {
            levels,
            seq: self.last_seq.unwrap_or(0),
            asks: self.ladder(Side::Ask, levels),
            bids: self.ladder(Side::Bid, levels),
        }
    }

    pub fn live_orders(&self) -> usize {
        self.orders.len()
    }
}

// ---------------------------------------------------------------------------
// Event construction

/// Builds a hand-written stream with increasing seq numbers and timestamps.
#[derive(Debug, Default)]
pub struct Stream {
    pub events: Vec<MarketEvent>,
    next_id: OrderId,
}

impl Stream {
    fn push(&mut self, kind: EventKind, id: OrderId, side: Side, price: Price, volume: Volume) -> OrderId {
        let seq = self.events.len() as u64 + 1;
        self.events.push(MarketEvent {
            seq,
            timestamp_ns: seq * 1_000_000,
            kind,
            order_id: id,
            side,
            price,
            volume,
        });
        id
    }

    pub fn add(&mut self, side: Side, price: Price, volume: Volume) -> OrderId {
        self.next_id += 1;
        self.push(EventKind::AddLimit, self.next_id, side, price, volume)
    }

    pub fn cancel(&mut self, id: OrderId, side: Side, price: Price) {
        self.push(EventKind::Cancel, id, side, price, 0);
    }

    /// Aggressor on `side` trades `volume` at `price` against the other side.
    pub fn trade(&mut self, side: Side, price: Price, volume: Volume) {
        self.next_id += 1;
        self.push(EventKind::Trade, self.next_id, side, price, volume);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }
}

pub fn synthetic_stream(seed: u64, events: usize) -> Vec<MarketEvent> {
    generate_synthetic(&SyntheticMarketConfig {
        seed,
        event_count: events,
        ..SyntheticMarketConfig::default()
    })
    .expect("default synthetic config is valid")
}

pub fn synthetic_plan(seed: u64, cfg: &EpisodeConfig) -> EpisodePlan {
    let prefix = 1000;
    EpisodePlan {
        events: Arc::from(synthetic_stream(seed, prefix + cfg.span())),
        start: prefix,
        tick_size: 0.01,
    }
}

// ---------------------------------------------------------------------------
// Strategies used only by tests

/// Mixes every decision form: discrete actions including close-out,
/// continuous pairs, random book levels and marketable quotes.
pub struct ChaosStrategy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl ChaosStrategy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for ChaosStrategy {
    fn name(&self) -> String {
        "chaos".into()
    }

    fn begin_episode(&mut self, episode: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed(self.seed, episode));
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        let snap = &obs.snapshot;
        match self.rng.gen_range(0..10) {
            0..=3 => Decision::Discrete(DiscreteAction::new(self.rng.gen_range(0..8)).unwrap()),
            4..=5 => Decision::Continuous(ContinuousAction::new(self.rng.gen(), self.rng.gen())),
            6..=7 => Decision::Quotes(random_quotes(&mut self.rng, snap).0),
            8 => {
                // Marketable bid: buys whenever anything is offered at the touch.
                let ask = snap.best_ask().unwrap();
                Decision::Quotes(QuotePair::new(Some(ask + 1), Some(ask)))
            }
            _ => {
                let bid = snap.best_bid().unwrap();
                Decision::Quotes(QuotePair::new(Some(bid), Some(bid - 1)))
            }
        }
    }
}

/// Always bids at the best ask (or asks at the best bid), so inventory runs
/// into the position limit.
pub struct OneSided {
    pub side: Side,
}

impl Strategy for OneSided {
    fn name(&self) -> String {
        "one-sided".into()
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        let snap = &obs.snapshot;
        Decision::Quotes(match self.side {
            Side::Bid => {
                let ask = snap.best_ask().unwrap();
                QuotePair::new(Some(ask + 1), Some(ask))
            }
            Side::Ask => {
                let bid = snap.best_bid().unwrap();
                QuotePair::new(Some(bid), Some(bid - 1))
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Accounting oracle

/// Recomputes cash, inventory, value and the PnL split from fills and mids.
#[derive(Debug, Clone, Copy)]
pub struct Ledger {
    pub cash: i64,
    pub inventory: i64,
    pub mid2: i64,
    pub value: i64,
    pub delta_sum: i64,
}

impl Ledger {
    pub fn start(reset: &StepOutcome) -> Self {
        Self {
            cash: 0,
            inventory: 0,
            mid2: reset.info.mid2,
            value: 0,
            delta_sum: 0,
        }
    }

    /// Checks one step against the oracle; `fee` is per share in half-ticks.
    pub fn check(&mut self, out: &StepOutcome, fee: i64) -> Result<(), String> {
        let mid2 = out.info.mid2;
        let mut cash = self.cash;
        let mut inventory = self.inventory;
        let mut trading = 0i64;
        for f in &out.fills {
            cash -= 2 * f.price * f.volume + fee * f.volume.abs();
            inventory += f.volume;
            trading += f.volume * (mid2 - 2 * f.price) - fee * f.volume.abs();
        }
        let holding = self.inventory * (mid2 - self.mid2);
        let value = cash + inventory * mid2;
        let delta = value - self.value;
        let step = out.info.step;
        let expect = |what: &str, got: i64, want: i64| {
            if got == want {
                Ok(())
            } else {
                Err(format!("step {step}: {what} {got} != oracle {want}"))
            }
        };
        expect("cash", out.info.cash.0, cash)?;
        expect("inventory", out.info.inventory, inventory)?;
        expect("value", out.info.value.0, value)?;
        expect("value identity", out.info.value.0, out.info.cash.0 + out.info.inventory * mid2)?;
        expect("delta", out.terms.delta_pnl.0, delta)?;
        expect("trading", out.terms.trading_pnl.0, trading)?;
        expect("holding", out.terms.holding_pnl.0, holding)?;
        expect("delta = TP + HP", out.terms.delta_pnl.0, (out.terms.trading_pnl + out.terms.holding_pnl).0)?;
        *self = Self {
            cash,
            inventory,
            mid2,
            value,
            delta_sum: self.delta_sum + delta,
        };
        Ok(())
    }
}

/// Runs one episode, checking every step with `check`. Returns the outcomes.
pub fn run_checked(
    sim: &mut Simulator,
    plan: &EpisodePlan,
    episode: u64,
    strategy: &mut dyn Strategy,
    mut check: impl FnMut(&StepOutcome, &Decision, &StepOutcome) -> Result<(), String>,
) -> Result<Vec<StepOutcome>, String> {
    strategy.begin_episode(episode);
    let mut prev = sim.reset(plan).map_err(|e| e.to_string())?;
    let mut outs = vec![prev.clone()];
    loop {
        let d = strategy.decide(&prev.observation);
        let out = sim.step(&d).map_err(|e| e.to_string())?;
        strategy.learn(&prev.observation, &d, &out);
        check(&prev, &d, &out)?;
        outs.push(out.clone());
        if out.done {
            return Ok(outs);
        }
        prev = out;
    }
}

pub fn money(x: i64) -> Money {
    Money(x)
}

// ---------------------------------------------------------------------------
// Statistics

/// Percentile bootstrap CI of the mean.
pub fn bootstrap_mean_ci(xs: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = means[((resamples as f64) * tail).floor() as usize];
    let hi = means[(((resamples as f64) * (1.0 - tail)).ceil() as usize).min(resamples - 1)];
    (lo, hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// Fill scenarios

pub fn buy(price: Price, volume: i64) -> mmlab_core::rewards::Fill {
    mmlab_core::rewards::Fill { price, volume, close_out: false }
}

pub fn sell(price: Price, volume: i64) -> mmlab_core::rewards::Fill {
    buy(price, -volume)
}

/// Liquidation fill; positive volume buys back a short.
pub fn liq(price: Price, volume: i64) -> mmlab_core::rewards::Fill {
    mmlab_core::rewards::Fill { price, volume, close_out: true }
}

pub fn quote(ask: Price, bid: Price) -> Decision {
    Decision::Quotes(QuotePair::new(Some(ask), Some(bid)))
}

pub fn idle() -> Decision {
    Decision::Quotes(QuotePair::none())
}

pub fn action(i: u8) -> Decision {
    Decision::Discrete(DiscreteAction::new(i).unwrap())
}

/// Ids of the resting orders in [`base_book`].
pub struct Base {
    pub ask_1002: OrderId,
    pub ask_1003: OrderId,
    pub ask_1005: OrderId,
    pub bid_998: OrderId,
    pub bid_997: OrderId,
    pub bid_995: OrderId,
}

/// Asks 1002×200, 1003×300, 1005×500; bids 998×200, 997×300, 995×500.
pub fn base_book(s: &mut Stream) -> Base {
    Base {
        ask_1002: s.add(Side::Ask, 1002, 200),
        ask_1003: s.add(Side::Ask, 1003, 300),
        ask_1005: s.add(Side::Ask, 1005, 500),
        bid_998: s.add(Side::Bid, 998, 200),
        bid_997: s.add(Side::Bid, 997, 300),
        bid_995: s.add(Side::Bid, 995, 500),
    }
}

/// Deep bid that leaves the touch alone.
pub fn neutral(s: &mut Stream) {
    s.add(Side::Bid, 990, 100);
}

pub type Script = fn(&mut Stream, &Base) -> Vec<(Decision, Vec<mmlab_core::rewards::Fill>)>;

pub struct FillCase {
    pub name: &'static str,
    pub unit: u64,
    pub omega: u32,
    pub truncated: bool,
    /// Appends exactly one event per returned step.
    pub script: Script,
}

const fn case(name: &'static str, unit: u64, script: Script) -> FillCase {
    FillCase {
        name,
        unit,
        omega: 10,
        truncated: false,
        script,
    }
}

pub fn fill_cases() -> Vec<FillCase> {
    vec![
        case("new ask beyond the touch leaves the bid", 100, |s, _| {
            s.add(Side::Ask, 1004, 100);
            let a = (quote(1001, 999), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("new ask inside the spread crosses the bid", 100, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (quote(1001, 999), vec![buy(999, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("new ask above the bid does not fill", 100, |s, _| {
            s.add(Side::Ask, 1000, 100);
            let a = (quote(1001, 999), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("seller-initiated trade below the bid fills it", 100, |s, _| {
            s.trade(Side::Ask, 998, 100);
            let a = (quote(1001, 999), vec![buy(999, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("seller-initiated trade above the bid does not fill", 100, |s, _| {
            s.trade(Side::Ask, 998, 100);
            let a = (quote(1001, 997), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("trade at the bid price fills it", 100, |s, _| {
            s.trade(Side::Ask, 998, 100);
            let a = (quote(1001, 998), vec![buy(998, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("buyer-initiated trade above the ask fills it", 100, |s, _| {
            s.trade(Side::Bid, 1002, 100);
            let a = (quote(1001, 999), vec![sell(1001, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(1002, 100)])]
        }),
        case("buyer-initiated trade below the ask does not fill", 100, |s, _| {
            s.trade(Side::Bid, 1002, 100);
            let a = (quote(1003, 999), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("trade at the ask price fills it", 100, |s, _| {
            s.trade(Side::Bid, 1002, 100);
            let a = (quote(1002, 999), vec![sell(1002, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(1002, 100)])]
        }),
        case("new bid inside the spread lifts the ask", 100, |s, _| {
            s.add(Side::Bid, 1001, 100);
            let a = (quote(1001, 999), vec![sell(1001, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(1002, 100)])]
        }),
        case("new bid below the ask does not fill", 100, |s, _| {
            s.add(Side::Bid, 1000, 100);
            let a = (quote(1001, 999), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("cancellations never fill passive quotes", 100, |s, b| {
            s.cancel(b.ask_1002, Side::Ask, 1002);
            let a = (quote(1003, 999), vec![]);
            s.cancel(b.bid_998, Side::Bid, 998);
            vec![a, (quote(1004, 998), vec![])]
        }),
        case("marketable bid fills at its own price", 100, |s, b| {
            s.cancel(b.bid_997, Side::Bid, 997);
            let a = (quote(1004, 1003), vec![buy(1003, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("marketable ask fills at its own price", 100, |s, b| {
            s.cancel(b.ask_1005, Side::Ask, 1005);
            let a = (quote(997, 996), vec![sell(997, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(1002, 100)])]
        }),
        case("fill price is the agent's, not the arriving order's", 100, |s, _| {
            s.add(Side::Ask, 1000, 100);
            let a = (quote(1002, 1001), vec![buy(1001, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("bid-only quote", 100, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (Decision::Quotes(QuotePair::new(None, Some(999))), vec![buy(999, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -100)])]
        }),
        case("no quotes, no fills", 100, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (idle(), vec![]);
            neutral(s);
            vec![a, (idle(), vec![])]
        }),
        case("fill size is one trade unit", 300, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (quote(1001, 999), vec![buy(999, 300)]);
            neutral(s);
            vec![a, (idle(), vec![liq(998, -200), liq(997, -100)])]
        }),
        case("close-out of a long walks the bids", 300, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (quote(1001, 999), vec![buy(999, 300)]);
            neutral(s);
            let b = (action(7), vec![liq(998, -200), liq(997, -100)]);
            s.add(Side::Bid, 989, 100);
            vec![a, b, (idle(), vec![])]
        }),
        case("close-out of a short walks the asks", 300, |s, _| {
            s.add(Side::Bid, 1001, 100);
            let a = (quote(1001, 999), vec![sell(1001, 300)]);
            neutral(s);
            let b = (action(7), vec![liq(1002, 200), liq(1003, 100)]);
            s.add(Side::Bid, 989, 100);
            vec![a, b, (idle(), vec![])]
        }),
        case("close-out while flat does nothing", 100, |s, _| {
            neutral(s);
            let a = (action(7), vec![]);
            s.add(Side::Bid, 989, 100);
            vec![a, (idle(), vec![])]
        }),
        case("close-out uses the book after the event", 300, |s, _| {
            s.add(Side::Ask, 999, 100);
            let a = (quote(1001, 999), vec![buy(999, 300)]);
            s.trade(Side::Ask, 998, 200);
            let b = (action(7), vec![liq(997, -300)]);
            neutral(s);
            vec![a, b, (idle(), vec![])]
        }),
        FillCase {
            truncated: true,
            ..case("close-out beyond visible depth is truncated", 1200, |s, _| {
                s.add(Side::Ask, 999, 100);
                let a = (quote(1001, 999), vec![buy(999, 1200)]);
                neutral(s);
                let b = (
                    action(7),
                    vec![liq(998, -200), liq(997, -300), liq(995, -500), liq(990, -100)],
                );
                // Liquidation never consumes the replayed book, so the
                // remainder goes at the best bid on the final step.
                s.add(Side::Ask, 1010, 100);
                vec![a, b, (idle(), vec![liq(998, -100)])]
            })
        },
        FillCase {
            omega: 1,
            ..case("long position limit disables the bid", 1000, |s, _| {
                s.add(Side::Ask, 999, 100);
                let a = (quote(1001, 999), vec![buy(999, 1000)]);
                s.add(Side::Ask, 999, 100);
                let b = (quote(1001, 999), vec![]);
                neutral(s);
                let c = (idle(), vec![liq(998, -200), liq(997, -300), liq(995, -500)]);
                vec![a, b, c]
            })
        },
        FillCase {
            omega: 1,
            ..case("short position limit disables the ask", 1000, |s, _| {
                s.add(Side::Bid, 1001, 100);
                let a = (quote(1001, 999), vec![sell(1001, 1000)]);
                s.add(Side::Bid, 1001, 100);
                let b = (quote(1001, 999), vec![]);
                neutral(s);
                let c = (idle(), vec![liq(1002, 200), liq(1003, 300), liq(1005, 500)]);
                vec![a, b, c]
            })
        },
        case("discrete action 0 quotes the touch", 100, |s, _| {
            s.trade(Side::Bid, 1002, 100);
            let a = (action(0), vec![sell(1002, 100)]);
            neutral(s);
            vec![a, (idle(), vec![liq(1002, 100)])]
        }),
    ]
}

/// Runs a scenario through the simulator and compares every step's fills.
pub fn run_fill_case(c: &FillCase) -> Result<(), String> {
    let mut s = Stream::default();
    let base = base_book(&mut s);
    let start = s.len() - 1;
    let steps = (c.script)(&mut s, &base);
    if s.len() != start + 1 + steps.len() {
        return Err(format!("{}: script must append one event per step", c.name));
    }
    let cfg = EpisodeConfig {
        events_per_episode: steps.len(),
        window: 1,
        levels: 5,
        unit: c.unit,
        omega: c.omega,
        lob_window: false,
        ..EpisodeConfig::default()
    };
    let plan = EpisodePlan {
        events: Arc::from(s.events),
        start,
        tick_size: 0.01,
    };
    let mut sim = Simulator::new(cfg).map_err(|e| e.to_string())?;
    let reset = sim.reset(&plan).map_err(|e| e.to_string())?;
    let mut ledger = Ledger::start(&reset);
    for (i, (decision, want)) in steps.iter().enumerate() {
        let out = sim.step(decision).map_err(|e| format!("{}: step {i}: {e}", c.name))?;
        if &out.fills != want {
            return Err(format!("{}: step {i}: fills {:?}, expected {:?}", c.name, out.fills, want));
        }
        ledger.check(&out, 0).map_err(|e| format!("{}: {e}", c.name))?;
    }
    if sim.report(0).truncated != c.truncated {
        return Err(format!("{}: truncated flag {}", c.name, !c.truncated));
    }
    Ok(())
}

/// Volume-weighted price of a set of fills.
pub fn vwap(fills: &[mmlab_core::rewards::Fill]) -> f64 {
    let v: i64 = fills.iter().map(|f| f.volume.abs()).sum();
    fills.iter().map(|f| f.price as f64 * f.volume.abs() as f64).sum::<f64>() / v as f64
}

// ---------------------------------------------------------------------------
// Latency oracle

/// Replays the whole stream independently and checks that each decision saw
/// the market exactly `latency` events in the past and the agent state of the
/// present. Returns the number of decisions checked.
pub fn check_latency(latency: usize, seed: u64, steps: usize, window: usize) -> Result<usize, String> {
    use mmlab_core::features::FeatureTracker;

    let cfg = EpisodeConfig {
        events_per_episode: steps,
        window,
        latency,
        lob_window: true,
        ..EpisodeConfig::default()
    };
    let plan = synthetic_plan(seed, &cfg);
    let mut flat = FlatBook::default();
    let mut tracker = FeatureTracker::new();
    let mut snaps = Vec::with_capacity(plan.events.len());
    let mut states = Vec::with_capacity(plan.events.len());
    for ev in plan.events.iter() {
        if !flat.apply(ev) {
            return Err(format!("oracle rejected event {}", ev.seq));
        }
        let snap = flat.snapshot(cfg.levels);
        tracker.observe(ev, snap.mid2());
        snaps.push(snap);
        states.push(tracker.state());
    }

    let mut sim = Simulator::new(cfg).map_err(|e| e.to_string())?;
    let mut strategy = ChaosStrategy::new(seed);
    let mut checked = 0;
    let mut decision_no = 0usize;
    let check_obs = |obs: &Observation, inventory: i64, step: usize| -> Result<(), String> {
        let newest = plan.start + window - 1 + step;
        let idx = newest - latency;
        if obs.event_index != idx {
            return Err(format!("step {step}: observed index {} != {idx}", obs.event_index));
        }
        if obs.snapshot != snaps[idx] {
            return Err(format!("step {step}: snapshot differs from replay at {idx}"));
        }
        if obs.dynamic != states[idx] {
            return Err(format!("step {step}: dynamic state differs from replay at {idx}"));
        }
        let mut rows = Vec::new();
        for s in &snaps[idx + 1 - window..=idx] {
            s.flatten_into(&mut rows);
        }
        let got = obs.window.as_ref().ok_or("missing window")?;
        if got.data != rows || got.rows != window {
            return Err(format!("step {step}: LOB window differs from replay"));
        }
        if obs.agent.inventory != inventory {
            return Err(format!("step {step}: agent inventory is stale"));
        }
        Ok(())
    };
    let reset = sim.reset(&plan).map_err(|e| e.to_string())?;
    check_obs(&reset.observation, 0, 0)?;
    run_checked(&mut sim, &plan, 0, &mut strategy, |_, _, out| {
        decision_no += 1;
        checked += 1;
        if out.done {
            return Ok(());
        }
        check_obs(&out.observation, out.info.inventory, decision_no)
    })?;
    Ok(checked)
}
