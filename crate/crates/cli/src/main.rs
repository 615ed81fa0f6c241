use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use zeromode_cli::commands;
use zeromode_cli::error::CliError;
use zeromode_cli::settings::Settings;

#[derive(Debug, Parser)]
#[command(
    name = "zeromode",
    version,
    about = "Zero-mode lasing image classifier on a nanolaser array"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Draw the subset, train the transform, write model, log and split.
    Train,
    /// Metrics and per-image predictions for both parts of a split.
    Evaluate,
    /// Lasing-mode histograms and CDFs of |Re eps|.
    ModeStats,
    /// Accuracy against additive pixel noise.
    NoiseSweep,
    /// Full spectrum at threshold for one image.
    Spectrum,
    /// Classify one image.
    Classify,
    /// Run a command again from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::ModeStats => "mode-stats",
            Command::NoiseSweep => "noise-sweep",
            Command::Spectrum => "spectrum",
            Command::Classify => "classify",
            Command::Rerun { .. } => "rerun",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Seeds {
    training: Option<u64>,
    split: Option<u64>,
    noise: Option<u64>,
}

/// Written next to every command's outputs; `rerun` replays it.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: Command,
    version: String,
    argv: Vec<String>,
    settings: Settings,
    seeds: Seeds,
    dataset_fingerprint: Option<String>,
    started_unix: u64,
    finished_unix: u64,
    artifacts: Vec<PathBuf>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn dispatch(command: &Command, s: &Settings) -> Result<commands::Outcome, CliError> {
    match command {
        Command::Train => commands::train(s),
        Command::Evaluate => commands::evaluate(s),
        Command::ModeStats => commands::mode_stats_cmd(s),
        Command::NoiseSweep => commands::noise_sweep_cmd(s),
        Command::Spectrum => commands::spectrum_cmd(s),
        Command::Classify => commands::classify_cmd(s),
        Command::Rerun { .. } => unreachable!("rerun is resolved before dispatch"),
    }
}

fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("bad manifest {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let flags = cli.settings.resolve()?;
    let (command, settings) = match cli.command {
        Command::Rerun { manifest } => {
            let m = load_manifest(&manifest)?;
            if matches!(m.command, Command::Rerun { .. }) {
                return Err(CliError::Data("manifest records a rerun".into()));
            }
            // Only the output directory may be redirected.
            let mut s = m.settings;
            if flags.out_dir.is_some() {
                s.out_dir = flags.out_dir;
            }
            (m.command, s)
        }
        other => (other, flags),
    };
    let started = now();
    let outcome = dispatch(&command, &settings)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        argv: std::env::args().collect(),
        seeds: Seeds {
            training: settings.seed,
            split: settings.split_seed,
            noise: settings.noise_seed,
        },
        dataset_fingerprint: outcome.dataset_fingerprint,
        started_unix: started,
        finished_unix: now(),
        artifacts: outcome.artifacts,
        command: command.clone(),
        settings: settings.clone(),
    };
    let path = settings.out_dir().join(format!("{}_manifest.json", command.name()));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::create_dir_all(settings.out_dir()).map_err(|e| CliError::io(&settings.out_dir(), e))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
