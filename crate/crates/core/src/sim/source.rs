use std::sync::Arc;

use crate::book::MarketEvent;
use crate::ingest::{generate_synthetic, SyntheticMarketConfig};

use super::{EpisodeConfig, SimError};

/// Synthetic events generated ahead of each episode so the book and the
/// feature windows are populated before warm-up.
pub const DEFAULT_SYNTHETIC_PREFIX: usize = 1000;

/// Where episodes come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// A recorded stream; episode `k` occupies the `k`-th consecutive span.
    Events { events: Arc<[MarketEvent]>, tick_size: f64 },
    /// A fresh synthetic stream per episode, seeded from the base seed and
    /// the episode index.
    Synthetic { config: SyntheticMarketConfig, prefix: usize },
}

/// One episode's stream and starting cursor.
#[derive(Debug, Clone)]
pub struct EpisodePlan {
    pub events: Arc<[MarketEvent]>,
    pub start: usize,
    pub tick_size: f64,
}

/// Decorrelated per-episode seed (SplitMix64 finalizer over the pair).
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    let mut z = base ^ episode.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DataSource {
    pub fn synthetic(config: SyntheticMarketConfig) -> Self {
        DataSource::Synthetic {
            config,
            prefix: DEFAULT_SYNTHETIC_PREFIX,
        }
    }

    pub fn events(events: Vec<MarketEvent>, tick_size: f64) -> Self {
        DataSource::Events {
            events: events.into(),
            tick_size,
        }
    }

    /// Number of episodes a recorded stream holds; `None` for synthetic data.
    pub fn capacity(&self, cfg: &EpisodeConfig) -> Option<u64> {
        match self {
            DataSource::Events { events, .. } => Some((events.len() / cfg.span()) as u64),
            DataSource::Synthetic { .. } => None,
        }
    }

    pub fn episode(&self, episode: u64, cfg: &EpisodeConfig) -> Result<EpisodePlan, SimError> {
        match self {
            DataSource::Events { events, tick_size } => {
                let start = episode as usize * cfg.span();
                if start + cfg.span() > events.len() {
                    return Err(SimError::StreamExhausted {
                        needed: start + cfg.span(),
                        available: events.len(),
                    });
                }
                Ok(EpisodePlan {
                    events: events.clone(),
                    start,
                    tick_size: *tick_size,
                })
            }
            DataSource::Synthetic { config, prefix } => {
                let cfg_k = SyntheticMarketConfig {
                    seed: episode_seed(config.seed, episode),
                    event_count: prefix + cfg.span(),
                    ..config.clone()
                };
                let events = generate_synthetic(&cfg_k).map_err(|e| SimError::Source(e.to_string()))?;
                Ok(EpisodePlan {
                    events: events.into(),
                    start: *prefix,
                    tick_size: config.tick_size,
                })
            }
        }
    }
}
