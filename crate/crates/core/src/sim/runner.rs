use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::actions::{Decision, QuotePair};
use crate::metrics::{EpisodeReport, MetricSummary};
use crate::money::Money;
use crate::rewards::{Fill, PnlTerms, RewardBreakdown};
use crate::strategies::Strategy;

use super::{DataSource, EpisodeConfig, EpisodePlan, SimError, Simulator, StepOutcome};

/// One line of the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: usize,
    pub seq: u64,
    pub mid2: i64,
    /// Ticks.
    pub spread: i64,
    pub decision: Decision,
    pub quotes: QuotePair,
    pub fills: Vec<Fill>,
    pub reward: RewardBreakdown,
    pub terms: PnlTerms,
    pub inventory: i64,
    pub cash: Money,
    pub value: Money,
    pub done: bool,
}

impl StepRecord {
    pub fn new(episode: u64, decision: Decision, out: &StepOutcome) -> Self {
        Self {
            episode,
            step: out.info.step,
            seq: out.info.seq,
            mid2: out.info.mid2,
            spread: out.info.spread,
            decision,
            quotes: out.info.quotes,
            fills: out.fills.clone(),
            reward: out.reward,
            terms: out.terms,
            inventory: out.info.inventory,
            cash: out.info.cash,
            value: out.info.value,
            done: out.done,
        }
    }
}

/// Runs one episode to completion, handing every step to `sink`.
pub fn run_episode(
    sim: &mut Simulator,
    plan: &EpisodePlan,
    episode: u64,
    strategy: &mut dyn Strategy,
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<EpisodeReport, SimError> {
    strategy.begin_episode(episode);
    let mut out = sim.reset(plan)?;
    loop {
        let decision = strategy.decide(&out.observation);
        let next = sim.step(&decision)?;
        strategy.learn(&out.observation, &decision, &next);
        sink(&StepRecord::new(episode, decision, &next));
        out = next;
        if out.done {
            break;
        }
    }
    Ok(sim.report(episode))
}

/// Runs `episodes` in order on one simulator.
pub fn run_backtest(
    source: &DataSource,
    cfg: &EpisodeConfig,
    episodes: Range<u64>,
    strategy: &mut dyn Strategy,
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<Vec<EpisodeReport>, SimError> {
    let mut sim = Simulator::new(*cfg)?;
    episodes
        .map(|k| {
            let plan = source.episode(k, cfg)?;
            run_episode(&mut sim, &plan, k, strategy, sink)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub latency: usize,
    pub summary: MetricSummary,
    pub reports: Vec<EpisodeReport>,
    /// Wall-clock milliseconds per decision.
    pub ms_per_decision: f64,
}

/// Same episodes, same fresh strategy, one run per latency value.
pub fn run_latency_sweep(
    source: &DataSource,
    cfg: &EpisodeConfig,
    latencies: &[usize],
    episodes: Range<u64>,
    make_strategy: &dyn Fn() -> Box<dyn Strategy>,
) -> Result<Vec<LatencyRow>, SimError> {
    latencies
        .iter()
        .map(|&latency| {
            let cfg_l = EpisodeConfig { latency, ..*cfg };
            let mut strategy = make_strategy();
            let started = Instant::now();
            let reports = run_backtest(source, &cfg_l, episodes.clone(), strategy.as_mut(), &mut |_| {})?;
            let steps: usize = reports.iter().map(|r| r.step_count).sum();
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            Ok(LatencyRow {
                latency,
                summary: MetricSummary::from_reports(&reports),
                reports,
                ms_per_decision: elapsed / steps.max(1) as f64,
            })
        })
        .collect()
}
