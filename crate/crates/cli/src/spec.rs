//! Fully resolved run descriptions. Each command turns its flags into one of
//! these; the manifest stores it and `rerun` replays it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mmlab_core::ingest::{read_event_file, ExportConfig, SyntheticMarketConfig};
use mmlab_core::sim::{DataSource, EpisodeConfig, DEFAULT_SYNTHETIC_PREFIX};
use mmlab_core::strategies::{
    AsStrategy, FixedStrategy, LinearQ, LinearQParams, RandomDiscreteStrategy, RandomStrategy, Strategy,
};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Synthetic { config: SyntheticMarketConfig },
    File { path: PathBuf, sha256: String },
}

impl DataSpec {
    /// `synthetic` or a path to an event file.
    pub fn resolve(data: &str, synthetic: SyntheticMarketConfig) -> Result<Self, CliError> {
        if data == "synthetic" {
            synthetic.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            return Ok(DataSpec::Synthetic { config: synthetic });
        }
        let path = PathBuf::from(data);
        let sha256 = sha256_file(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(CliError::Data)?;
        Ok(DataSpec::File { path, sha256 })
    }

    pub fn checksum(&self) -> String {
        match self {
            DataSpec::Synthetic { config } => {
                sha256_hex(format!("synthetic:{}", serde_json::to_string(config).expect("serializable")).as_bytes())
            }
            DataSpec::File { sha256, .. } => sha256.clone(),
        }
    }

    pub fn load(&self) -> Result<DataSource, CliError> {
        match self {
            DataSpec::Synthetic { config } => Ok(DataSource::Synthetic {
                config: config.clone(),
                prefix: DEFAULT_SYNTHETIC_PREFIX,
            }),
            DataSpec::File { path, sha256 } => {
                let actual = sha256_file(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::Data)?;
                if &actual != sha256 {
                    return Err(CliError::Data(anyhow::anyhow!(
                        "{} changed: checksum {actual} differs from recorded {sha256}",
                        path.display()
                    )));
                }
                let (header, events) = read_event_file(path)
                    .with_context(|| format!("parsing {}", path.display()))
                    .map_err(CliError::Data)?;
                Ok(DataSource::events(events, header.tick_size))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    As {
        gamma: f64,
        kappa: f64,
        sigma: Option<f64>,
        sigma_window: usize,
    },
    Random {
        seed: u64,
    },
    RandomDiscrete {
        seed: u64,
    },
    Fixed {
        level: usize,
    },
    LinearQ {
        weights: PathBuf,
        sha256: String,
    },
}

pub struct AsFlags {
    pub gamma: f64,
    pub kappa: f64,
    pub sigma: Option<f64>,
    pub sigma_window: usize,
}

impl StrategySpec {
    /// `as`, `random`, `random-discrete`, `fixed:<1-3>` or `linearq:<weights.json>`.
    pub fn parse(s: &str, seed: u64, as_flags: &AsFlags) -> Result<Self, CliError> {
        let usage = |m: String| CliError::Usage(m);
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        Ok(match (name, arg) {
            ("as", None) => {
                if !(as_flags.gamma > 0.0 && as_flags.kappa > 0.0) {
                    return Err(usage("--gamma and --kappa must be positive".into()));
                }
                StrategySpec::As {
                    gamma: as_flags.gamma,
                    kappa: as_flags.kappa,
                    sigma: as_flags.sigma,
                    sigma_window: as_flags.sigma_window,
                }
            }
            ("random", None) => StrategySpec::Random { seed },
            ("random-discrete", None) => StrategySpec::RandomDiscrete { seed },
            ("fixed", Some(l)) => {
                let level: usize = l.parse().map_err(|_| usage(format!("bad fixed level {l:?}")))?;
                if !(1..=3).contains(&level) {
                    return Err(usage(format!("fixed level must be 1, 2 or 3, got {level}")));
                }
                StrategySpec::Fixed { level }
            }
            ("linearq", Some(path)) => {
                let weights = PathBuf::from(path);
                let sha256 = sha256_file(&weights)
                    .with_context(|| format!("reading {}", weights.display()))
                    .map_err(CliError::Data)?;
                StrategySpec::LinearQ { weights, sha256 }
            }
            _ => return Err(usage(format!("unknown strategy {s:?}"))),
        })
    }

    pub fn label(&self) -> String {
        match self {
            StrategySpec::As { .. } => "as".into(),
            StrategySpec::Random { .. } => "random".into(),
            StrategySpec::RandomDiscrete { .. } => "random-discrete".into(),
            StrategySpec::Fixed { level } => format!("fixed:{level}"),
            StrategySpec::LinearQ { .. } => "linearq".into(),
        }
    }

    pub fn build(&self, cfg: &EpisodeConfig) -> Result<Box<dyn Strategy>, CliError> {
        Ok(match self {
            StrategySpec::As {
                gamma,
                kappa,
                sigma,
                sigma_window,
            } => Box::new(AsStrategy::new(*gamma, *kappa, *sigma, *sigma_window, cfg.events_per_episode)),
            StrategySpec::Random { seed } => Box::new(RandomStrategy::new(*seed)),
            StrategySpec::RandomDiscrete { seed } => Box::new(RandomDiscreteStrategy::new(*seed)),
            StrategySpec::Fixed { level } => Box::new(FixedStrategy { level: *level }),
            StrategySpec::LinearQ { weights, sha256 } => {
                let actual = sha256_file(weights).map_err(|e| CliError::Data(e.into()))?;
                if &actual != sha256 {
                    return Err(CliError::Data(anyhow::anyhow!("{} changed since it was recorded", weights.display())));
                }
                let mut params = LinearQParams::load(weights)
                    .with_context(|| format!("loading {}", weights.display()))
                    .map_err(CliError::Data)?;
                params.epsilon = 0.0;
                Box::new(LinearQ::new(params, 0, false))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSpec {
    pub strategy: StrategySpec,
    pub data: DataSpec,
    pub episode: EpisodeConfig,
    pub start_episode: u64,
    pub episodes: u64,
    pub step_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySpec {
    pub strategy: StrategySpec,
    pub data: DataSpec,
    pub episode: EpisodeConfig,
    pub start_episode: u64,
    pub episodes: u64,
    pub latencies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub data: DataSpec,
    pub episode: EpisodeConfig,
    pub episodes: u64,
    pub initial: LinearQParams,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub synthetic: SyntheticMarketConfig,
    pub instrument: String,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSpec {
    pub data: DataSpec,
    pub export: ExportConfig,
}

pub fn check_episodes(data: &DataSource, cfg: &EpisodeConfig, start: u64, episodes: u64) -> Result<(), CliError> {
    if let Some(cap) = data.capacity(cfg) {
        if start + episodes > cap {
            bail_data(format!(
                "event stream holds {cap} episodes of {} events; asked for {} starting at {start}",
                cfg.span(),
                episodes
            ))?;
        }
    }
    Ok(())
}

fn bail_data(msg: String) -> Result<(), CliError> {
    Err(CliError::Data(anyhow::anyhow!(msg)))
}
