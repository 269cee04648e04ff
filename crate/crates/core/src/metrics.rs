//! Evaluation metrics over episode reports.
//!
//! Undefined values (zero denominators) are `None` and print as `N/A`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::money::Money;
use crate::sim::StepRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: u64,
    /// Final value after liquidation, currency.
    pub pnl: f64,
    /// Mean |inventory| in shares, sampled after every step.
    pub mean_abs_position: f64,
    /// Shares traded, liquidation included.
    pub traded_volume: u64,
    /// Mean market spread over steps, currency.
    pub mean_spread: f64,
    pub step_count: usize,
    /// Liquidation ran out of depth.
    pub truncated: bool,
}

fn total_steps(reports: &[EpisodeReport]) -> f64 {
    reports.iter().map(|r| r.step_count as f64).sum()
}

fn step_weighted(reports: &[EpisodeReport], f: impl Fn(&EpisodeReport) -> f64) -> Option<f64> {
    let n = total_steps(reports);
    (n > 0.0).then(|| reports.iter().map(|r| f(r) * r.step_count as f64).sum::<f64>() / n)
}

pub fn total_pnl(reports: &[EpisodeReport]) -> f64 {
    reports.iter().map(|r| r.pnl).sum()
}

/// Average spread over the whole period, weighting episodes by steps.
pub fn mean_spread(reports: &[EpisodeReport]) -> Option<f64> {
    step_weighted(reports, |r| r.mean_spread)
}

/// Mean absolute position over the whole period.
pub fn mean_abs_position(reports: &[EpisodeReport]) -> Option<f64> {
    step_weighted(reports, |r| r.mean_abs_position)
}

/// PnL in units of the average spread.
pub fn nd_pnl(reports: &[EpisodeReport]) -> Option<f64> {
    mean_spread(reports).filter(|s| *s > 0.0).map(|s| total_pnl(reports) / s)
}

/// PnL per share of mean absolute position.
pub fn pnl_map(reports: &[EpisodeReport]) -> Option<f64> {
    mean_abs_position(reports)
        .filter(|m| *m > 0.0)
        .map(|m| total_pnl(reports) / m)
}

/// PnL per share traded.
pub fn profit_ratio(reports: &[EpisodeReport]) -> Option<f64> {
    let volume: u64 = reports.iter().map(|r| r.traded_volume).sum();
    (volume > 0).then(|| total_pnl(reports) / volume as f64)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Mean over sample std of per-episode PnL; no risk-free rate, no annualizing.
pub fn sharpe(reports: &[EpisodeReport]) -> Option<f64> {
    let pnls: Vec<f64> = reports.iter().map(|r| r.pnl).collect();
    mean_std(&pnls).filter(|(_, s)| *s > 0.0).map(|(m, s)| m / s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub episodes: usize,
    pub total_pnl: f64,
    pub mean_pnl: f64,
    pub std_pnl: Option<f64>,
    pub mean_abs_position: Option<f64>,
    pub mean_spread: Option<f64>,
    pub traded_volume: u64,
    pub truncated_episodes: usize,
    pub nd_pnl: Option<f64>,
    pub pnl_map: Option<f64>,
    pub profit_ratio: Option<f64>,
    pub sharpe: Option<f64>,
}

impl MetricSummary {
    pub fn from_reports(reports: &[EpisodeReport]) -> Self {
        let pnls: Vec<f64> = reports.iter().map(|r| r.pnl).collect();
        let n = reports.len();
        Self {
            episodes: n,
            total_pnl: total_pnl(reports),
            mean_pnl: if n == 0 { 0.0 } else { total_pnl(reports) / n as f64 },
            std_pnl: mean_std(&pnls).map(|(_, s)| s),
            mean_abs_position: mean_abs_position(reports),
            mean_spread: mean_spread(reports),
            traded_volume: reports.iter().map(|r| r.traded_volume).sum(),
            truncated_episodes: reports.iter().filter(|r| r.truncated).count(),
            nd_pnl: nd_pnl(reports),
            pnl_map: pnl_map(reports),
            profit_ratio: profit_ratio(reports),
            sharpe: sharpe(reports),
        }
    }
}

fn cell(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{:.4}", x / scale))
}

/// Fixed-width table with conventional column scaling: ND-PnL in units of
/// 1e5, PR in units of 1e-4.
pub fn render_table(rows: &[(String, MetricSummary)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>14} {:>14} {:>14} {:>14} {:>10} {:>10}",
        "strategy", "episodes", "ND-PnL(1e5)", "PnLMAP", "PR(1e-4)", "Sharpe", "MAP", "mean_pnl"
    );
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>14} {:>14} {:>14} {:>14} {:>10} {:>10.4}",
            name,
            s.episodes,
            cell(s.nd_pnl, 1e5),
            cell(s.pnl_map, 1.0),
            cell(s.profit_ratio, 1e-4),
            cell(s.sharpe, 1.0),
            cell(s.mean_abs_position, 1.0),
            s.mean_pnl,
        );
    }
    out
}

/// Mean ± sample std of each metric across repeated runs (seeds or days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadOfRuns {
    pub runs: usize,
    pub nd_pnl: Option<(f64, f64)>,
    pub pnl_map: Option<(f64, f64)>,
    pub profit_ratio: Option<(f64, f64)>,
    pub sharpe: Option<(f64, f64)>,
}

impl SpreadOfRuns {
    pub fn from_summaries(runs: &[MetricSummary]) -> Self {
        let col = |f: fn(&MetricSummary) -> Option<f64>| {
            let xs: Option<Vec<f64>> = runs.iter().map(f).collect();
            xs.and_then(|xs| mean_std(&xs))
        };
        Self {
            runs: runs.len(),
            nd_pnl: col(|s| s.nd_pnl),
            pnl_map: col(|s| s.pnl_map),
            profit_ratio: col(|s| s.profit_ratio),
            sharpe: col(|s| s.sharpe),
        }
    }
}

/// Rebuilds episode reports from a step log, independently of the
/// simulator's own counters.
pub fn reports_from_steps(records: &[StepRecord], tick_size: f64) -> Vec<EpisodeReport> {
    #[derive(Default)]
    struct Acc {
        episode: u64,
        pnl: Money,
        steps: usize,
        abs_inventory: u64,
        volume: u64,
        spread: i64,
        truncated: bool,
    }
    let mut out = Vec::new();
    let mut acc: Option<Acc> = None;
    let finish = |a: Acc| EpisodeReport {
        episode: a.episode,
        pnl: a.pnl.to_currency(tick_size),
        mean_abs_position: a.abs_inventory as f64 / a.steps.max(1) as f64,
        traded_volume: a.volume,
        mean_spread: a.spread as f64 / a.steps.max(1) as f64 * tick_size,
        step_count: a.steps,
        truncated: a.truncated,
    };
    for r in records {
        if acc.as_ref().is_some_and(|a| a.episode != r.episode) {
            out.push(finish(acc.take().unwrap()));
        }
        let a = acc.get_or_insert_with(|| Acc {
            episode: r.episode,
            ..Acc::default()
        });
        a.pnl += r.terms.delta_pnl;
        a.steps += 1;
        a.abs_inventory += r.inventory.unsigned_abs();
        a.volume += r.fills.iter().map(|f| f.abs_volume()).sum::<u64>();
        a.spread += r.spread;
        a.truncated |= r.done && r.inventory != 0;
    }
    if let Some(a) = acc {
        out.push(finish(a));
    }
    out
}
