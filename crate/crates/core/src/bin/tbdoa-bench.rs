//! Monte Carlo benchmark driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};
use tbdoa::bench::config::{parse_method_list, parse_snr_list, preset_description};
use tbdoa::bench::{emit_report, run_monte_carlo, ExperimentConfig, PRESETS};
use tbdoa::error::Error;

#[derive(Parser)]
#[command(
    version,
    about = "DOA estimation benchmarks for transmit-beamspace MIMO radar"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and metadata.json.
    Run(RunArgs),
    /// Print the built-in presets.
    ListPresets,
    /// Parse and check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON config; its fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated dB values; `inf` is noise-free.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Comma-separated subset of proposed, proposed-sub, als, als-sub, esprit.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write one JSON line per trial and method.
    #[arg(long)]
    trial_log: bool,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut overlay = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?
        }
        None => Value::Object(Map::new()),
    };
    let obj = overlay
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    if let Some(p) = &args.preset {
        obj.insert("preset".into(), Value::String(p.clone()));
    }
    let mut cfg = ExperimentConfig::from_json(&overlay.to_string())?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = &args.snr {
        cfg.snr_db = parse_snr_list(s)?;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_method_list(m)?;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<ExitCode, Error> {
    if args.workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let cfg = load(&args)?;
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "results".into()));
    let result = run_monte_carlo(&cfg, args.workers)?;
    let log = args.trial_log.then_some(result.trials.as_slice());
    for path in emit_report(&result.table, &cfg, args.workers, log, &out)? {
        println!("wrote {}", path.display());
    }
    let fraction = result.table.failure_fraction();
    if fraction > cfg.failure_threshold {
        eprintln!(
            "{} of {} trials failed ({:.1}%, threshold {:.1}%)",
            result.table.total_failures(),
            result.table.total_trials(),
            100.0 * fraction,
            100.0 * cfg.failure_threshold
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::ListPresets => {
            for name in PRESETS {
                println!("{name:8} {}", preset_description(name).unwrap_or(""));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => ExperimentConfig::from_file(&config).map(|cfg| {
            println!(
                "{}: ok (preset {}, {} trials)",
                config.display(),
                cfg.preset,
                cfg.trials
            );
            ExitCode::SUCCESS
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
