//! `colearn` command-line front end.
//!
//! Exit status: 0 on success, 2 for usage or config errors, 1 for I/O and
//! simulation failures.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use colearn::engine::{self, SimConfig, SimState};
use colearn::experiment::{self, ExperimentError, SweepSpec, KNOWN_KEYS};

#[derive(Parser, Debug)]
#[command(name = "colearn", version, about = "Collective learning over physical and interaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single simulation and write its record and a sampled trace.
    Run(Common),
    /// Run every cell of a parameter sweep and write the CSV tables.
    Sweep(Common),
    /// Check a config without simulating or writing anything.
    Validate(Common),
    /// Run a single simulation and log every agent at every tick.
    Trace(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config document; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set C_f=0.025` or `--set C_r=[20,60]`.
    #[arg(long = "set", value_name = "K=V")]
    overrides: Vec<String>,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io { path: PathBuf, source: io::Error },
    Sim(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Sim(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Sim(msg) => write!(f, "simulation failed: {msg}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config { .. } => CliError::Usage(e.to_string()),
            other => CliError::Sim(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Reads the config (or `{}`) and applies `--set` and `--seed`.
fn load_document(args: &Common) -> Result<Value, CliError> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let map = doc
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
    for item in &args.overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{item}` is not of the form K=V")))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
        map.insert(key.to_string(), value);
    }
    if let Some(seed) = args.seed {
        map.insert("seed".into(), seed.into());
    }
    Ok(doc)
}

fn load_spec(args: &Common) -> Result<SweepSpec, CliError> {
    Ok(SweepSpec::from_value(&load_document(args)?)?)
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn describe(config: &SimConfig) -> String {
    format!(
        "topology={} C_r={} C_f={} epsilon={} seed={}",
        config.topology, config.comm_radius, config.comm_freq, config.epsilon, config.seed
    )
}

/// Runs one simulation, logging agents every `every` ticks to `trace_path`.
fn traced_run(config: &SimConfig, trace_path: &Path, every: u64) -> Result<engine::RunRecord, CliError> {
    let mut trace = create_file(trace_path)?;
    let mut write_failure = None;
    let record = engine::run_observed(config, |state: &SimState| {
        if write_failure.is_some() || !state.tick_count().is_multiple_of(every) {
            return;
        }
        for agent in state.agents() {
            if let Err(e) = writeln!(trace, "{}", agent.log_line(state.tick_count())) {
                write_failure = Some(e);
                return;
            }
        }
    })
    .map_err(|e| CliError::Sim(e.to_string()))?;
    if let Some(e) = write_failure {
        return Err(io_err(trace_path)(e));
    }
    trace.flush().map_err(io_err(trace_path))?;
    Ok(record)
}

fn cmd_run(args: &Common, every_tick: bool) -> Result<(), CliError> {
    let config = load_spec(args)?.single_config()?;
    create_out_dir(&args.out)?;
    let trace_path = args.out.join("trace.log");
    let every = if every_tick { 1 } else { config.sample_every };
    let record = traced_run(&config, &trace_path, every)?;
    if !every_tick {
        let path = args.out.join("run_record.json");
        fs::write(&path, record.to_json() + "\n").map_err(io_err(&path))?;
    }
    println!(
        "{} terminal_tick={} converged={} error={:.6}",
        describe(&config),
        record.terminal_tick(),
        record.converged(),
        record.steady_state_error()
    );
    Ok(())
}

fn cmd_sweep(args: &Common) -> Result<(), CliError> {
    let spec = load_spec(args)?;
    create_out_dir(&args.out)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcome = experiment::run_sweep(&spec, workers)?;
    let agents = spec.base.agents;

    let path = args.out.join("sweep_results.csv");
    experiment::write_sweep_results(create_file(&path)?, &outcome).map_err(|e| csv_err(&path, e))?;
    let path = args.out.join("cell_summary.csv");
    experiment::write_cell_summary(create_file(&path)?, &outcome.summaries, agents)
        .map_err(|e| csv_err(&path, e))?;
    let path = args.out.join("trajectories.csv");
    experiment::write_trajectories(create_file(&path)?, &outcome.summaries, agents)
        .map_err(|e| csv_err(&path, e))?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for s in &outcome.summaries {
        let _ = writeln!(
            out,
            "cell {:>3} topology={} C_r={} C_f={} epsilon={} error={:.4}±{:.4} ticks={:.0} consensus={:.2}",
            s.cell_index,
            s.cell.topology,
            s.cell.comm_radius,
            s.cell.comm_freq,
            s.cell.epsilon,
            s.mean_error,
            s.ci95,
            s.mean_terminal_tick,
            s.consensus_fraction
        );
    }
    Ok(())
}

fn csv_err(path: &Path, e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        ExperimentError::Csv(err) => CliError::Io { path: path.to_path_buf(), source: err.into() },
        other => other.into(),
    }
}

fn cmd_validate(args: &Common) -> Result<(), CliError> {
    let spec = load_spec(args)?;
    let cells = spec.cells().len();
    println!(
        "config ok: {cells} cell(s) x {} repeat(s) = {} run(s)",
        spec.repeats,
        cells * spec.repeats
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Trace(args) => cmd_run(args, true),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
