mod args;
mod manifest;
mod report;
mod run;
mod spec;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use mmlab_core::bridge::{serve_stdio, spawn_server, ObservationToggles, ServerOptions, SessionConfig};
use mmlab_core::sim::EpisodeConfig;

use args::{Cli, Command, IngestCommand, RunArgs};
use manifest::{RunManifest, RunSpec};
use spec::{BacktestSpec, DataSpec, ExportSpec, GenerateSpec, LatencySpec, StrategySpec, TrainSpec};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "data error: {e:#}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

fn episode_config(run: &RunArgs, data: &DataSpec) -> EpisodeConfig {
    run.episode.config(tick_of(data), false)
}

fn tick_of(data: &DataSpec) -> f64 {
    match data {
        DataSpec::Synthetic { config } => config.tick_size,
        DataSpec::File { path, .. } => std::fs::File::open(path)
            .ok()
            .and_then(|f| mmlab_core::ingest::EventReader::new(std::io::BufReader::new(f)).ok())
            .map_or(0.01, |r| r.header().tick_size),
    }
}

fn resolve_run(run: &RunArgs) -> Result<(StrategySpec, DataSpec, EpisodeConfig), CliError> {
    let synthetic = run.synthetic.config(run.seed, 0, run.episode.levels);
    let data = DataSpec::resolve(&run.data, synthetic)?;
    let cfg = episode_config(run, &data);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let strategy = StrategySpec::parse(&run.strategy, run.seed, &run.avellaneda.flags())?;
    if matches!(strategy, StrategySpec::LinearQ { .. }) && cfg.action_space != mmlab_core::actions::ActionSpace::Discrete {
        return Err(CliError::Usage("linearq acts in the discrete action space".into()));
    }
    if run.parallel == 0 {
        return Err(CliError::Usage("--parallel must be at least 1".into()));
    }
    Ok((strategy, data, cfg))
}

fn execute(spec: &RunSpec, seed: u64, out: &Path, parallel: usize) -> Result<RunManifest, CliError> {
    match spec {
        RunSpec::Backtest(s) => run::backtest(s, seed, out, parallel),
        RunSpec::Latency(s) => run::latency(s, seed, out),
        RunSpec::TrainLinearq(s) => run::train_linearq(s, out),
        RunSpec::Generate(s) => run::generate(s, out),
        RunSpec::ExportDataset(s) => run::export(s, seed, out),
    }
}

fn rerun(manifest_path: &Path, out: &Path) -> Result<(), CliError> {
    let recorded = RunManifest::load(manifest_path)
        .map_err(|e| CliError::Data(e.context(format!("reading {}", manifest_path.display()))))?;
    let fresh = execute(&recorded.spec, recorded.seed, out, 1)?;
    let mut mismatched = Vec::new();
    for (file, sum) in &recorded.outputs {
        if fresh.outputs.get(file) != Some(sum) {
            mismatched.push(file.clone());
        }
    }
    if mismatched.is_empty() {
        println!("reproduced {} outputs bit-exactly", recorded.outputs.len());
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!("outputs differ from the manifest: {}", mismatched.join(", "))))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Backtest(a) => {
            let (strategy, data, episode) = resolve_run(&a.run)?;
            let spec = BacktestSpec {
                strategy,
                data,
                episode,
                start_episode: a.run.start_episode,
                episodes: a.run.episodes,
                step_log: !a.no_step_log,
            };
            execute(&RunSpec::Backtest(spec), a.run.seed, &a.run.out, a.run.parallel).map(drop)
        }
        Command::Latency(a) => {
            if a.run.parallel != 1 {
                return Err(CliError::Usage("latency sweeps run sequentially so the runtime column is per decision".into()));
            }
            if a.latencies.is_empty() {
                return Err(CliError::Usage("--latencies needs at least one value".into()));
            }
            let (strategy, data, episode) = resolve_run(&a.run)?;
            let spec = LatencySpec {
                strategy,
                data,
                episode,
                start_episode: a.run.start_episode,
                episodes: a.run.episodes,
                latencies: a.latencies,
            };
            execute(&RunSpec::Latency(spec), a.run.seed, &a.run.out, 1).map(drop)
        }
        Command::TrainLinearq(a) => {
            let synthetic = a.synthetic.config(a.seed, 0, a.episode.levels);
            let data = DataSpec::resolve(&a.data, synthetic)?;
            let mut episode = a.episode.config(tick_of(&data), false);
            episode.action_space = mmlab_core::actions::ActionSpace::Discrete;
            episode.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let spec = TrainSpec {
                data,
                episode,
                episodes: a.episodes,
                initial: run::initial_params(a.learning_rate, a.discount, a.reward_scale),
                epsilon_start: a.epsilon_start,
                epsilon_end: a.epsilon_end,
                seed: a.seed,
            };
            execute(&RunSpec::TrainLinearq(spec), a.seed, &a.out, 1).map(drop)
        }
        Command::Ingest(IngestCommand::Generate(a)) => {
            let spec = GenerateSpec {
                synthetic: a.synthetic.config(a.seed, a.events, a.levels),
                instrument: a.instrument,
                date: a.date,
            };
            execute(&RunSpec::Generate(spec), a.seed, &a.out, 1).map(drop)
        }
        Command::Ingest(IngestCommand::ExportDataset(a)) => {
            let synthetic = run::synthetic_for(a.synthetic.config(a.seed, 0, a.levels), a.synthetic_events);
            let data = DataSpec::resolve(&a.events, synthetic)?;
            let export = a.config();
            if export.k == 0 || export.window == 0 || export.levels == 0 {
                return Err(CliError::Usage("--k, --T and --levels must be positive".into()));
            }
            if !(export.alpha.is_finite() && export.alpha >= 0.0) {
                return Err(CliError::Usage("--alpha must be non-negative".into()));
            }
            let spec = ExportSpec { data, export };
            execute(&RunSpec::ExportDataset(spec), a.seed, &a.out, 1).map(drop)
        }
        Command::Serve(a) => {
            let synthetic = a.synthetic.config(a.seed, 0, a.episode.levels);
            let data = DataSpec::resolve(&a.data, synthetic)?;
            let episode = a.episode.config(tick_of(&data), true);
            episode.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let observation = ObservationToggles::default().ablate(&a.ablate).map_err(CliError::Usage)?;
            if !observation.any() {
                return Err(CliError::Usage("cannot ablate every observation group".into()));
            }
            let defaults = SessionConfig {
                observation,
                action_space: episode.action_space,
                episode,
                ..SessionConfig::default()
            };
            let source = data.load()?;
            if a.stdio {
                serve_stdio(source, defaults, 0).map_err(|e| CliError::Runtime(e.into()))
            } else {
                let bind = a.bind.expect("clap requires --bind without --stdio");
                let handle = spawn_server(
                    bind,
                    source,
                    ServerOptions {
                        workers: a.workers.max(1),
                        defaults,
                    },
                )
                .map_err(|e| CliError::Runtime(anyhow::Error::from(e).context(format!("binding {bind}"))))?;
                eprintln!("listening on {}", handle.local_addr());
                handle.wait();
                Ok(())
            }
        }
        Command::Report(a) => report::run(&a),
        Command::Rerun(a) => rerun(&a.manifest, &a.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
