use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmlab_core::actions::{ActionSpace, ContinuousParams};
use mmlab_core::ingest::{ExportConfig, SessionFilter, SyntheticMarketConfig};
use mmlab_core::money::Money;
use mmlab_core::rewards::RewardParams;
use mmlab_core::sim::EpisodeConfig;

use crate::spec::AsFlags;

#[derive(Debug, Parser)]
#[command(name = "mmlab", version, about = "Limit order book market-making lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a strategy over consecutive episodes and write logs and metrics.
    Backtest(BacktestArgs),
    /// Repeat a backtest once per observation latency.
    Latency(LatencyArgs),
    /// Train the linear action-value baseline.
    TrainLinearq(TrainArgs),
    /// Event files and pre-training datasets.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Serve the environment protocol over TCP or stdio.
    Serve(ServeArgs),
    /// Summarize one or more run directories.
    Report(ReportArgs),
    /// Re-execute a run from its manifest and compare output checksums.
    Rerun(RerunArgs),
}

#[derive(Debug, Subcommand)]
pub enum IngestCommand {
    /// Write a synthetic event file.
    Generate(GenerateArgs),
    /// Label, normalize and export LOB windows for pre-training.
    ExportDataset(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    Discrete,
    Continuous,
}

impl From<SpaceArg> for ActionSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Discrete => ActionSpace::Discrete,
            SpaceArg::Continuous => ActionSpace::Continuous,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Starting and long-run mean mid-price, ticks.
    #[arg(long, default_value_t = 10_000)]
    pub initial_mid: i64,
    /// Per-event pull of the mid toward its mean.
    #[arg(long, default_value_t = 0.01)]
    pub mean_reversion: f64,
    /// Per-event mid standard deviation, ticks (at most 0.5).
    #[arg(long, default_value_t = 0.3)]
    pub volatility: f64,
    #[arg(long, default_value_t = 0.35)]
    pub cancel_prob: f64,
    #[arg(long, default_value_t = 0.15)]
    pub market_order_prob: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tick_size: f64,
}

impl SyntheticArgs {
    pub fn config(&self, seed: u64, event_count: usize, levels: usize) -> SyntheticMarketConfig {
        SyntheticMarketConfig {
            seed,
            initial_mid: self.initial_mid,
            mean_reversion: self.mean_reversion,
            volatility: self.volatility,
            cancel_prob: self.cancel_prob,
            market_order_prob: self.market_order_prob,
            tick_size: self.tick_size,
            event_count,
            levels,
            ..SyntheticMarketConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EpisodeArgs {
    #[arg(long, default_value_t = 2000)]
    pub events_per_episode: usize,
    /// Position limit in trade units.
    #[arg(long, default_value_t = 10)]
    pub omega: u32,
    /// LOB window length T.
    #[arg(long = "window", visible_alias = "T", default_value_t = 50)]
    pub window: usize,
    /// Observation latency in events.
    #[arg(long, default_value_t = 0)]
    pub latency: usize,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// Shares per trade unit.
    #[arg(long, default_value_t = 100)]
    pub unit: u64,
    /// Dampening factor on trading PnL.
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// Inventory punishment factor.
    #[arg(long, default_value_t = 0.01)]
    pub zeta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub max_bias: f64,
    #[arg(long, default_value_t = 0.1)]
    pub max_spread: f64,
    /// Fee per share, in half ticks.
    #[arg(long, default_value_t = 0)]
    pub fee: i64,
    #[arg(long, value_enum, default_value_t = SpaceArg::Discrete)]
    pub action_space: SpaceArg,
}

impl EpisodeArgs {
    pub fn config(&self, tick_size: f64, lob_window: bool) -> EpisodeConfig {
        EpisodeConfig {
            events_per_episode: self.events_per_episode,
            omega: self.omega,
            window: self.window,
            latency: self.latency,
            levels: self.levels,
            unit: self.unit,
            reward: RewardParams {
                eta: self.eta,
                zeta: self.zeta,
            },
            continuous: ContinuousParams {
                max_bias: self.max_bias,
                max_spread: self.max_spread,
                tick_size,
            },
            action_space: self.action_space.into(),
            fee: Money(self.fee),
            lob_window,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AsArgs {
    /// Risk aversion.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Order-arrival decay.
    #[arg(long, default_value_t = 1.5)]
    pub kappa: f64,
    /// Fixed volatility per episode horizon; estimated from trailing mids when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub sigma_window: usize,
}

impl AsArgs {
    pub fn flags(&self) -> AsFlags {
        AsFlags {
            gamma: self.gamma,
            kappa: self.kappa,
            sigma: self.sigma,
            sigma_window: self.sigma_window,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// as, random, random-discrete, fixed:<1-3> or linearq:<weights.json>.
    #[arg(long)]
    pub strategy: String,
    /// `synthetic` or an event file.
    #[arg(long, default_value = "synthetic")]
    pub data: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub start_episode: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; episodes are split into contiguous shards.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[command(flatten)]
    pub avellaneda: AsArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Skip steps.jsonl.
    #[arg(long)]
    pub no_step_log: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LatencyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20,50")]
    pub latencies: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "synthetic")]
    pub data: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub episodes: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub discount: f64,
    #[arg(long, default_value_t = 0.3)]
    pub epsilon_start: f64,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon_end: f64,
    /// Multiplier applied to rewards before the TD update.
    #[arg(long, default_value_t = 0.01)]
    pub reward_scale: f64,
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub events: usize,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    #[arg(long, default_value = "SYNTH")]
    pub instrument: String,
    #[arg(long, default_value = "2019-11-01")]
    pub date: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FilterArg {
    Off,
    Stable,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Event file or `synthetic`.
    #[arg(long)]
    pub events: String,
    /// Label horizon.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Label threshold.
    #[arg(long, default_value_t = 1e-5)]
    pub alpha: f64,
    /// Window length.
    #[arg(long = "T", visible_alias = "window", default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, value_enum, default_value_t = FilterArg::Off)]
    pub session_filter: FilterArg,
    /// Seed and length of the synthetic stream when `--events synthetic`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub synthetic_events: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

impl ExportArgs {
    pub fn config(&self) -> ExportConfig {
        ExportConfig {
            k: self.k,
            alpha: self.alpha,
            window: self.window,
            levels: self.levels,
            train_fraction: self.train_fraction,
            session_filter: match self.session_filter {
                FilterArg::Off => SessionFilter::Off,
                FilterArg::Stable => SessionFilter::StableSessions,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Address to listen on, e.g. 127.0.0.1:7878.
    #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
    pub bind: Option<SocketAddr>,
    /// Serve a single session on stdin/stdout.
    #[arg(long)]
    pub stdio: bool,
    #[arg(long, default_value = "synthetic")]
    pub data: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Observation groups to drop: lob, dynamic, agent (comma separated).
    #[arg(long, default_value = "")]
    pub ablate: String,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directories written by backtest.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Recompute episode reports from steps.jsonl instead of episodes.jsonl.
    #[arg(long)]
    pub from_steps: bool,
    /// Also write report.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
