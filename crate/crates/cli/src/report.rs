use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;

use mmlab_core::metrics::{render_table, reports_from_steps, EpisodeReport, MetricSummary, SpreadOfRuns};
use mmlab_core::sim::StepRecord;

use crate::args::ReportArgs;
use crate::manifest::{RunManifest, RunSpec, MANIFEST_FILE};
use crate::spec::DataSpec;
use crate::CliError;

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| Ok(serde_json::from_str(&l?).with_context(|| format!("{}:{}", path.display(), i + 1))?))
        .collect()
}

fn tick_size(data: &DataSpec) -> anyhow::Result<f64> {
    Ok(match data {
        DataSpec::Synthetic { config } => config.tick_size,
        DataSpec::File { path, .. } => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            mmlab_core::ingest::EventReader::new(BufReader::new(f))?.header().tick_size
        }
    })
}

#[derive(Serialize)]
struct ReportFile {
    runs: Vec<(String, MetricSummary)>,
    across_runs: SpreadOfRuns,
}

/// Loads the episode reports of one backtest directory.
pub fn load_run(dir: &Path, from_steps: bool) -> Result<(String, Vec<EpisodeReport>), CliError> {
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))
        .map_err(|e| CliError::Data(e.context(format!("{} has no readable manifest", dir.display()))))?;
    let RunSpec::Backtest(spec) = &manifest.spec else {
        return Err(CliError::Data(anyhow::anyhow!("{} is not a backtest run", dir.display())));
    };
    let label = format!(
        "{}/{}",
        dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
        spec.strategy.label()
    );
    let reports = if from_steps {
        let tick = tick_size(&spec.data).map_err(CliError::Data)?;
        let steps: Vec<StepRecord> = read_jsonl(&dir.join("steps.jsonl")).map_err(CliError::Data)?;
        reports_from_steps(&steps, tick)
    } else {
        read_jsonl(&dir.join("episodes.jsonl")).map_err(CliError::Data)?
    };
    Ok((label, reports))
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for dir in &args.runs {
        let (label, reports) = load_run(dir, args.from_steps)?;
        rows.push((label, MetricSummary::from_reports(&reports)));
    }
    let summaries: Vec<MetricSummary> = rows.iter().map(|(_, s)| s.clone()).collect();
    let spread = SpreadOfRuns::from_summaries(&summaries);
    print!("{}", render_table(&rows));
    if spread.runs > 1 {
        println!("\nacross {} runs (mean ± std):", spread.runs);
        let fmt = |name: &str, v: Option<(f64, f64)>| match v {
            Some((m, s)) => println!("  {name:<8} {m:.6} ± {s:.6}"),
            None => println!("  {name:<8} N/A"),
        };
        fmt("ND-PnL", spread.nd_pnl);
        fmt("PnLMAP", spread.pnl_map);
        fmt("PR", spread.profit_ratio);
        fmt("Sharpe", spread.sharpe);
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| CliError::Runtime(e.into()))?;
        let body = serde_json::to_string_pretty(&ReportFile { runs: rows, across_runs: spread })
            .map_err(|e| CliError::Runtime(e.into()))?;
        fs::write(out.join("report.json"), body + "\n").map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}
