use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::{Decision, DiscreteAction, QuotePair, DISCRETE_ACTIONS};
use crate::book::{BookSnapshot, Side};
use crate::sim::{episode_seed, Observation};

use super::Strategy;

/// Deepest level the random baseline quotes at.
pub const RANDOM_MAX_LEVEL: usize = 5;

/// Independently per side, a uniformly chosen level among the first five
/// occupied ones. Returns the quotes and the chosen (ask, bid) levels.
pub fn random_quotes<R: Rng>(rng: &mut R, snap: &BookSnapshot) -> (QuotePair, (usize, usize)) {
    let mut pick = |side: Side| {
        let depth = match side {
            Side::Ask => snap.asks.len(),
            Side::Bid => snap.bids.len(),
        }
        .min(RANDOM_MAX_LEVEL);
        if depth == 0 {
            return (None, 0);
        }
        let level = rng.gen_range(1..=depth);
        (snap.level(side, level - 1).map(|l| l.price), level)
    };
    let (ask, la) = pick(Side::Ask);
    let (bid, lb) = pick(Side::Bid);
    (QuotePair::new(ask, bid), (la, lb))
}

/// Quotes at the given level on both sides, falling back to the deepest
/// occupied level of a thinner side. The flag reports a fallback.
pub fn fixed_quotes(level: usize, snap: &BookSnapshot) -> (QuotePair, bool) {
    let level = level.max(1);
    let mut fell_back = false;
    let mut at = |side: Side| {
        let depth = match side {
            Side::Ask => snap.asks.len(),
            Side::Bid => snap.bids.len(),
        };
        if depth < level {
            fell_back = true;
        }
        (depth > 0).then(|| snap.level(side, level.min(depth) - 1).expect("occupied").price)
    };
    let ask = at(Side::Ask);
    let bid = at(Side::Bid);
    (QuotePair::new(ask, bid), fell_back)
}

#[derive(Debug, Clone)]
pub struct RandomStrategy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStrategy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for RandomStrategy {
    fn name(&self) -> String {
        "random".into()
    }

    fn begin_episode(&mut self, episode: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed(self.seed, episode));
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        Decision::Quotes(random_quotes(&mut self.rng, &obs.snapshot).0)
    }
}

/// Uniform over the eight discrete actions.
#[derive(Debug, Clone)]
pub struct RandomDiscreteStrategy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomDiscreteStrategy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for RandomDiscreteStrategy {
    fn name(&self) -> String {
        "random-discrete".into()
    }

    fn begin_episode(&mut self, episode: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed(self.seed, episode));
    }

    fn decide(&mut self, _obs: &Observation) -> Decision {
        let a = self.rng.gen_range(0..DISCRETE_ACTIONS as u8);
        Decision::Discrete(DiscreteAction::new(a).expect("in range"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedStrategy {
    pub level: usize,
}

impl Strategy for FixedStrategy {
    fn name(&self) -> String {
        format!("fixed:{}", self.level)
    }

    fn decide(&mut self, obs: &Observation) -> Decision {
        let (q, fell_back) = fixed_quotes(self.level, &obs.snapshot);
        if fell_back {
            log::debug!("fixed:{} fell back on a thin book at seq {}", self.level, obs.snapshot.seq);
        }
        Decision::Quotes(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::LevelQty;

    fn ladder(asks: usize, bids: usize) -> BookSnapshot {
        BookSnapshot {
            levels: 10,
            seq: 1,
            asks: (0..asks).map(|i| LevelQty { price: 1001 + i as i64, volume: 100 }).collect(),
            bids: (0..bids).map(|i| LevelQty { price: 1000 - i as i64, volume: 100 }).collect(),
        }
    }

    #[test]
    fn fixed_levels() {
        let snap = ladder(5, 5);
        assert_eq!(fixed_quotes(1, &snap), (QuotePair::new(Some(1001), Some(1000)), false));
        assert_eq!(fixed_quotes(3, &snap), (QuotePair::new(Some(1003), Some(998)), false));
        assert_eq!(fixed_quotes(3, &ladder(2, 2)), (QuotePair::new(Some(1002), Some(999)), true));
    }

    #[test]
    fn random_is_seeded_and_in_range() {
        let snap = ladder(10, 10);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| random_quotes(&mut rng, &snap).1).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert!(draw(4).iter().all(|&(a, b)| (1..=5).contains(&a) && (1..=5).contains(&b)));
    }

    #[test]
    fn random_respects_thin_books() {
        let snap = ladder(2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let (q, (la, _)) = random_quotes(&mut rng, &snap);
            assert!(la <= 2);
            assert_eq!(q.bid, None);
        }
    }
}
