//! Command-line front end.
//!
//! Exit codes: 0 success, 1 file I/O, 2 config or usage, 3 ingestion,
//! 4 rendering or simulation, 5 preparation timeout, 6 trial-file schema.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::commands::{write_atomic, CommandSet, CommandSetError, COMMANDS_FILE};
use crate::evalstats::{evaluate, parse_trials, synthetic_trials, trials_csv, StatsError};
use crate::pipeline::{load_textures, render_set, summary_csv, ConfigError, RenderError, RunConfig};
use crate::plantsim::{run_session, SimError};
use crate::texdata::{generate_fixture, save_recording, Archetype, IngestError};

#[derive(Debug, Parser)]
#[command(name = "haptex", version, about = "Render recorded textures into ring actuator commands and simulate them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render pressure, thermal and roughness commands for textures.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        select: Selector,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run rendered command sets through the plant simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `render`.
        #[arg(long)]
        commands: PathBuf,
        #[command(flatten)]
        select: Selector,
        #[arg(long)]
        out: PathBuf,
    },
    /// Matching-study statistics from a trial CSV.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic recordings for the six texture archetypes, a config
    /// referencing them and a synthetic trial file.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        participants: usize,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Selector {
    /// Texture name; repeat for several.
    #[arg(long)]
    pub texture: Vec<String>,
    #[arg(long)]
    pub all: bool,
}

impl Selector {
    fn names(&self) -> Option<&[String]> {
        (!self.all).then_some(self.texture.as_slice())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Commands(#[from] CommandSetError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{name}: {source}")]
    Sim { name: String, source: SimError },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Ingest(_) | CliError::Commands(_) | CliError::Render(RenderError::Ingest(_)) => 3,
            CliError::Render(_) => 4,
            CliError::Sim { source: SimError::PreparationTimeout { .. }, .. } => 5,
            CliError::Sim { .. } => 4,
            CliError::Stats(_) => 6,
        }
    }

    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            1 => "io",
            2 => "config",
            3 => "ingestion",
            5 => "timeout",
            6 => "schema",
            _ if matches!(self, CliError::Sim { .. }) => "simulation",
            _ => "rendering",
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Render { config, select, out } => cmd_render(&RunConfig::load(config)?, select.names(), out),
        Command::Simulate { config, commands, select, out } => cmd_simulate(&RunConfig::load(config)?, commands, select.names(), out),
        Command::Eval { config, trials, out } => cmd_eval(&RunConfig::load(config)?, trials, out),
        Command::GenFixtures { out, seed, participants } => cmd_gen_fixtures(out, *seed, *participants),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn cmd_render(cfg: &RunConfig, selected: Option<&[String]>, out: &Path) -> Result<(), CliError> {
    let recs = load_textures(cfg)?;
    for rec in &recs {
        for w in rec.ingestion_warnings() {
            eprintln!("warning: {w}");
        }
    }
    let rendered = render_set(&recs, cfg, selected)?;
    create_dir(out)?;
    let mut written = Vec::new();
    for r in &rendered {
        for w in &r.thermal.warnings {
            eprintln!("warning: {w}");
        }
        let c = &r.commands;
        let files = c.write_dir(&out.join(&c.name), Some(&r.thermal.display_csv()))?;
        written.extend(files);
        println!(
            "{}: rise {:.2} mm/s, fall {:.2} mm/s, start {:.2} °C, fit rmse {:.4} °C, {} valve transitions",
            c.name,
            c.profile.rise().speed_mm_s,
            c.profile.fall().speed_mm_s,
            c.initial_temp(),
            c.thermal.fit_rmse_c,
            c.wave.transitions().len()
        );
    }
    let summary = out.join("summary.csv");
    write(&summary, &summary_csv(&rendered))?;
    written.push(summary);

    let mut listing: Vec<String> = written
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    listing.sort();
    write(&out.join("outputs.txt"), &(listing.join("\n") + "\n"))?;
    Ok(())
}

fn command_dirs(root: &Path, selected: Option<&[String]>) -> Result<Vec<PathBuf>, CliError> {
    if let Some(names) = selected {
        return Ok(names.iter().map(|n| root.join(n)).collect());
    }
    let entries = fs::read_dir(root).map_err(|source| CliError::Io { path: root.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(COMMANDS_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn cmd_simulate(cfg: &RunConfig, commands_root: &Path, selected: Option<&[String]>, out: &Path) -> Result<(), CliError> {
    let sets = command_dirs(commands_root, selected)?
        .iter()
        .map(|d| CommandSet::read_dir(d))
        .collect::<Result<Vec<_>, _>>()?;
    for set in &sets {
        let log = run_session(set, &cfg.plant).map_err(|source| CliError::Sim { name: set.name.clone(), source })?;
        let dir = out.join(&set.name);
        create_dir(&dir)?;
        write(&dir.join("session.csv"), &log.to_csv())?;
        write(&dir.join("events.json"), &log.events_json())?;
        let m = &log.metrics;
        println!(
            "{}: press tracking max {:.3} °C mean {:.3} °C ({}), slide pressure {:.1}-{:.1} kPa mean {:.1} kPa, preparation {:.2} s",
            set.name,
            m.tracking_max_error_c,
            m.tracking_mean_error_c,
            if m.tracking_within_tolerance { "within tolerance" } else { "OUT OF TOLERANCE" },
            m.slide_min_kpa,
            m.slide_max_kpa,
            m.slide_mean_kpa,
            m.prepare_duration_s
        );
    }
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, trials_path: &Path, out: &Path) -> Result<(), CliError> {
    let file = fs::File::open(trials_path).map_err(|source| CliError::Io { path: trials_path.to_path_buf(), source })?;
    let trials = parse_trials(file, &cfg.eval.labels)?;
    let report = evaluate(&trials, &cfg.eval.labels, cfg.eval.excluded())?;
    create_dir(out)?;
    write(&out.join("confusion.csv"), &report.confusion.to_csv())?;
    write(&out.join("stats.csv"), &report.to_csv())?;
    let text = report.to_text();
    write(&out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn cmd_gen_fixtures(out: &Path, seed: u64, participants: usize) -> Result<(), CliError> {
    let mut textures = Vec::new();
    for kind in Archetype::ALL {
        let dir = out.join("fixtures").join(kind.name());
        create_dir(&dir)?;
        save_recording(&generate_fixture(kind, seed), &dir)?;
        textures.push(format!("  \"fixtures/{}/manifest.toml\",", kind.name()));
    }
    let fine: Vec<String> = Archetype::ALL
        .iter()
        .filter(|a| a.is_fine_texture())
        .map(|a| format!("{} = 300.0", a.name()))
        .collect();
    let config = format!(
        "# Synthetic fixture set. Every section not listed uses its defaults.\ntextures = [\n{}\n]\n\n[roughness.manual_frequency_hz]\n{}\n",
        textures.join("\n"),
        fine.join("\n")
    );
    write(&out.join("config.toml"), &config)?;
    write(&out.join("trials.csv"), &trials_csv(&synthetic_trials(participants, seed)))?;
    println!("wrote {} fixtures, config.toml and trials.csv to {}", Archetype::ALL.len(), out.display());
    Ok(())
}
