//! Executes resolved specs into an output directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use anyhow::Context;
use log::info;
use serde::Serialize;

use mmlab_core::ingest::{export_dataset, DATASET_MANIFEST, generate_synthetic, write_event_file, EventFileHeader, SyntheticMarketConfig};
use mmlab_core::metrics::{render_table, EpisodeReport, MetricSummary};
use mmlab_core::sim::{
    run_backtest, run_episode, run_latency_sweep, DataSource, SimError, Simulator, StepRecord,
};
use mmlab_core::strategies::{LinearQ, LinearQParams};

use crate::manifest::{RunManifest, RunSpec};
use crate::spec::{check_episodes, BacktestSpec, DataSpec, ExportSpec, GenerateSpec, LatencySpec, TrainSpec};
use crate::CliError;

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::StreamExhausted { .. } | SimError::OneSidedBook { .. } | SimError::Source(_) => {
            CliError::Data(e.into())
        }
        other => CliError::Runtime(other.into()),
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::Runtime)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Splits `range` into at most `n` contiguous, non-empty shards.
pub fn shards(range: Range<u64>, n: usize) -> Vec<Range<u64>> {
    let len = range.end.saturating_sub(range.start);
    let n = (n.max(1) as u64).min(len.max(1));
    let base = len / n;
    let extra = len % n;
    let mut start = range.start;
    (0..n)
        .map(|i| {
            let size = base + u64::from(i < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    strategy: String,
    summary: &'a MetricSummary,
}

pub fn backtest(spec: &BacktestSpec, seed: u64, out: &Path, parallel: usize) -> Result<RunManifest, CliError> {
    let source = spec.data.load()?;
    spec.episode.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    check_episodes(&source, &spec.episode, spec.start_episode, spec.episodes)?;
    prepare_out(out)?;

    let range = spec.start_episode..spec.start_episode + spec.episodes;
    let parts = shards(range, parallel);
    let part_path = |i: usize| out.join(format!("steps.part{i}.jsonl"));
    let results: Vec<Result<Vec<EpisodeReport>, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = parts
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (source, part) = (&source, part_path(i));
                let r = r.clone();
                scope.spawn(move || -> Result<Vec<EpisodeReport>, CliError> {
                    let mut strategy = spec.strategy.build(&spec.episode)?;
                    let mut log = if spec.step_log {
                        Some(BufWriter::new(File::create(&part).map_err(runtime)?))
                    } else {
                        None
                    };
                    let mut write_err: Option<io::Error> = None;
                    let reports = run_backtest(source, &spec.episode, r, strategy.as_mut(), &mut |rec: &StepRecord| {
                        if let (Some(w), None) = (log.as_mut(), write_err.as_ref()) {
                            if let Err(e) = serde_json::to_writer(&mut *w, rec).map_err(io::Error::from).and_then(|_| w.write_all(b"\n")) {
                                write_err = Some(e);
                            }
                        }
                    })
                    .map_err(sim_error)?;
                    if let Some(e) = write_err {
                        return Err(runtime(e));
                    }
                    if let Some(mut w) = log {
                        w.flush().map_err(runtime)?;
                    }
                    Ok(reports)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }

    let mut files = vec!["episodes.jsonl", "metrics.json", "summary.txt"];
    if spec.step_log {
        let mut w = BufWriter::new(File::create(out.join("steps.jsonl")).map_err(runtime)?);
        for i in 0..parts.len() {
            io::copy(&mut File::open(part_path(i)).map_err(runtime)?, &mut w).map_err(runtime)?;
            fs::remove_file(part_path(i)).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
        files.push("steps.jsonl");
    }
    let summary = MetricSummary::from_reports(&reports);
    let label = spec.strategy.label();
    write_jsonl(&out.join("episodes.jsonl"), &reports).map_err(CliError::Runtime)?;
    write_json(&out.join("metrics.json"), &MetricsFile { strategy: label.clone(), summary: &summary })
        .map_err(CliError::Runtime)?;
    let table = render_table(&[(label, summary)]);
    fs::write(out.join("summary.txt"), &table).map_err(runtime)?;
    print!("{table}");
    RunManifest::new(seed, RunSpec::Backtest(spec.clone()))
        .finish(out, &files, &[])
        .map_err(CliError::Runtime)
}

#[derive(Serialize)]
struct LatencyResult<'a> {
    latency: usize,
    summary: &'a MetricSummary,
    reports: &'a [EpisodeReport],
}

pub fn latency(spec: &LatencySpec, seed: u64, out: &Path) -> Result<RunManifest, CliError> {
    let source = spec.data.load()?;
    spec.episode.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    check_episodes(&source, &spec.episode, spec.start_episode, spec.episodes)?;
    // Fail on unloadable strategies before the sweep starts.
    spec.strategy.build(&spec.episode)?;
    prepare_out(out)?;

    let make = || spec.strategy.build(&spec.episode).expect("strategy was built once already");
    let rows = run_latency_sweep(
        &source,
        &spec.episode,
        &spec.latencies,
        spec.start_episode..spec.start_episode + spec.episodes,
        &make,
    )
    .map_err(sim_error)?;

    let results: Vec<_> = rows
        .iter()
        .map(|r| LatencyResult {
            latency: r.latency,
            summary: &r.summary,
            reports: &r.reports,
        })
        .collect();
    write_json(&out.join("latency.json"), &results).map_err(CliError::Runtime)?;

    let named: Vec<_> = rows.iter().map(|r| (format!("L={}", r.latency), r.summary.clone())).collect();
    let mut text = render_table(&named);
    let _ = writeln!(text, "\n{:<16} {:>14}", "latency", "runtime(ms/ts)");
    for r in &rows {
        let _ = writeln!(text, "{:<16} {:>14.4}", format!("L={}", r.latency), r.ms_per_decision);
    }
    fs::write(out.join("summary.txt"), &text).map_err(runtime)?;
    print!("{text}");
    RunManifest::new(seed, RunSpec::Latency(spec.clone()))
        .finish(out, &["latency.json"], &["summary.txt"])
        .map_err(CliError::Runtime)
}

#[derive(Serialize)]
struct CurveRow {
    episode: u64,
    epsilon: f64,
    pnl: f64,
    reward: f64,
    traded_volume: u64,
    weight_norm: f64,
    learning_rate: f64,
}

/// Linear decay from `start` to `end` over `episodes`.
pub fn epsilon_at(start: f64, end: f64, episode: u64, episodes: u64) -> f64 {
    if episodes <= 1 {
        return start;
    }
    start + (end - start) * episode as f64 / (episodes - 1) as f64
}

pub fn train_linearq(spec: &TrainSpec, out: &Path) -> Result<RunManifest, CliError> {
    let source = spec.data.load()?;
    spec.episode.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(0.0..=1.0).contains(&spec.epsilon_start) || !(0.0..=1.0).contains(&spec.epsilon_end) {
        return Err(CliError::Usage("exploration rates must lie in [0, 1]".into()));
    }
    check_episodes(&source, &spec.episode, 0, spec.episodes)?;
    prepare_out(out)?;

    let mut sim = Simulator::new(spec.episode).map_err(sim_error)?;
    let mut agent = LinearQ::new(spec.initial.clone(), spec.seed, true);
    let mut curve = Vec::with_capacity(spec.episodes as usize);
    for k in 0..spec.episodes {
        agent.params.epsilon = epsilon_at(spec.epsilon_start, spec.epsilon_end, k, spec.episodes);
        let plan = source.episode(k, &spec.episode).map_err(sim_error)?;
        let mut reward = 0.0;
        let report = run_episode(&mut sim, &plan, k, &mut agent, &mut |r| reward += r.reward.total).map_err(sim_error)?;
        curve.push(CurveRow {
            episode: k,
            epsilon: agent.params.epsilon,
            pnl: report.pnl,
            reward,
            traded_volume: report.traded_volume,
            weight_norm: agent.params.weight_norm(),
            learning_rate: agent.params.learning_rate,
        });
        if (k + 1) % 50 == 0 {
            info!("episode {} pnl {:.2} eps {:.3}", k + 1, report.pnl, agent.params.epsilon);
        }
    }
    let mut trained = agent.params.clone();
    trained.epsilon = 0.0;
    write_jsonl(&out.join("learning_curve.jsonl"), &curve).map_err(CliError::Runtime)?;
    trained.save(&out.join("weights.json")).map_err(runtime)?;
    println!("trained {} episodes; weights in {}", spec.episodes, out.join("weights.json").display());
    RunManifest::new(spec.seed, RunSpec::TrainLinearq(spec.clone()))
        .finish(out, &["learning_curve.jsonl", "weights.json"], &[])
        .map_err(CliError::Runtime)
}

pub fn generate(spec: &GenerateSpec, out: &Path) -> Result<RunManifest, CliError> {
    spec.synthetic.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    prepare_out(out)?;
    let events = generate_synthetic(&spec.synthetic).map_err(runtime)?;
    let header = EventFileHeader {
        instrument: spec.instrument.clone(),
        tick_size: spec.synthetic.tick_size,
        date: spec.date.clone(),
        levels: spec.synthetic.levels,
        count: events.len() as u64,
    };
    write_event_file(&out.join("events.csv"), &header, &events).map_err(runtime)?;
    println!("wrote {} events to {}", events.len(), out.join("events.csv").display());
    RunManifest::new(spec.synthetic.seed, RunSpec::Generate(spec.clone()))
        .finish(out, &["events.csv"], &[])
        .map_err(CliError::Runtime)
}

pub fn export(spec: &ExportSpec, seed: u64, out: &Path) -> Result<RunManifest, CliError> {
    let events = match &spec.data {
        DataSpec::Synthetic { config } => generate_synthetic(config).map_err(runtime)?,
        DataSpec::File { .. } => match spec.data.load()? {
            DataSource::Events { events, .. } => events.to_vec(),
            DataSource::Synthetic { .. } => unreachable!("file spec loads recorded events"),
        },
    };
    prepare_out(out)?;
    let m = export_dataset(&events, &spec.export, out).map_err(|e| match e {
        mmlab_core::ingest::IngestError::InsufficientHistory { .. } | mmlab_core::ingest::IngestError::Book(_) => {
            CliError::Data(e.into())
        }
        other => runtime(other),
    })?;
    println!(
        "exported {} train / {} test windows of {}x{}",
        m.train_samples, m.test_samples, m.rows, m.cols
    );
    let mut files: Vec<&str> = m.files.iter().map(String::as_str).collect();
    files.push(DATASET_MANIFEST);
    RunManifest::new(seed, RunSpec::ExportDataset(spec.clone()))
        .finish(out, &files, &[])
        .map_err(CliError::Runtime)
}

/// Synthetic config for a stream long enough to hold `events`.
pub fn synthetic_for(cfg: SyntheticMarketConfig, events: usize) -> SyntheticMarketConfig {
    SyntheticMarketConfig { event_count: events, ..cfg }
}

pub fn initial_params(lr: f64, discount: f64, reward_scale: f64) -> LinearQParams {
    LinearQParams {
        learning_rate: lr,
        discount,
        reward_scale,
        ..LinearQParams::default()
    }
}
