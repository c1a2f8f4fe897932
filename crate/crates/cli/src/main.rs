//! Command-line front end: runs experiment configs or built-in presets and
//! writes a CSV table plus a reproducibility manifest.
//!
//! Exit codes: 0 clean run, 1 configuration problem, 2 run finished but some
//! rows were degenerate, 3 internal failure.

mod config;
mod output;
mod presets;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use omlab_core::Error;

#[derive(Parser)]
#[command(name = "omlab", version, about = "Small-ball ratio experiments for torus field measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Replace the sampler seed from the config or preset.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config_file: PathBuf },
    /// Run a built-in experiment, optionally overriding config fields.
    Preset {
        id: String,
        /// Dotted-path config override, e.g. ball.radii=[0.4,0.2] or
        /// sampler.count=50000. May be given multiple times.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the built-in experiment ids.
    ListPresets,
}

const CONFIG_ERROR: u8 = 1;
const DEGENERATE: u8 = 2;
const INTERNAL_ERROR: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| (INTERNAL_ERROR, format!("thread pool: {e}")))?;
    }
    let threads = rayon::current_num_threads();

    let mut cfg = match &cli.command {
        Command::ListPresets => {
            for id in presets::PRESET_IDS {
                println!("{id}");
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Run { config_file } => {
            let text = std::fs::read_to_string(config_file).map_err(|e| {
                (
                    CONFIG_ERROR,
                    format!("reading {}: {e}", config_file.display()),
                )
            })?;
            config::from_toml_str(&text).map_err(config_failure)?
        }
        Command::Preset { id, overrides } => {
            let base = presets::preset(id).ok_or_else(|| {
                (
                    CONFIG_ERROR,
                    format!(
                        "unknown preset '{id}'; valid ids: {}",
                        presets::PRESET_IDS.join(", ")
                    ),
                )
            })?;
            apply_overrides(&base, overrides).map_err(config_failure)?
        }
    };

    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate().map_err(config_failure)?;

    let started = Instant::now();
    let rows = runner::run(&cfg).map_err(run_failure)?;
    let wall = started.elapsed().as_secs_f64();

    let dir = PathBuf::from(&cfg.output.dir);
    let files = output::write_outputs(&dir, &cfg, &rows, wall, threads)
        .map_err(|e| (INTERNAL_ERROR, e.to_string()))?;

    print!("{}", output::csv_text(&cfg.experiment, &rows));
    let degenerate = rows.iter().filter(|r| r.degenerate).count();
    eprintln!(
        "wrote {} and {} ({} rows, {degenerate} degenerate, {wall:.1}s)",
        files.csv.display(),
        files.manifest.display(),
        rows.len(),
    );
    if degenerate > 0 {
        eprintln!("warning: degenerate rows have too little effective sample mass to report");
        return Ok(ExitCode::from(DEGENERATE));
    }
    Ok(ExitCode::SUCCESS)
}

fn config_failure(e: Error) -> Failure {
    (CONFIG_ERROR, e.to_string())
}

/// Runtime errors that name a bad parameter are still configuration
/// mistakes surfaced late; anything else is an internal failure.
fn run_failure(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(_) | Error::Mismatch(_) | Error::Unsupported(_) => {
            (CONFIG_ERROR, e.to_string())
        }
        other => (INTERNAL_ERROR, other.to_string()),
    }
}

/// Apply `key.path=value` overrides through the TOML tree so overridden
/// configs pass the same deserialization and validation as written ones.
fn apply_overrides(
    base: &ExperimentConfig,
    overrides: &[String],
) -> omlab_core::Result<ExperimentConfig> {
    if overrides.is_empty() {
        return Ok(base.clone());
    }
    let text = config::to_toml_string(base)?;
    let mut tree: toml::Value = toml::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("override base: {e}")))?;
    for entry in overrides {
        let (path, raw) = entry.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("override '{entry}' is not KEY=VALUE"))
        })?;
        let value: toml::Value = toml::from_str::<toml::Value>(&format!("v = {raw}"))
            .map(|mut t| t.as_table_mut().unwrap().remove("v").unwrap())
            .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
        set_path(&mut tree, path, value)?;
    }
    let text = toml::to_string(&tree)
        .map_err(|e| Error::InvalidParameter(format!("override result: {e}")))?;
    config::from_toml_str(&text)
}

fn set_path(tree: &mut toml::Value, path: &str, value: toml::Value) -> omlab_core::Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = path.split('.').collect();
    let bad = |what: &str| Error::InvalidParameter(format!("override path '{path}': {what}"));
    for part in &parts[..parts.len() - 1] {
        node = if let Ok(i) = part.parse::<usize>() {
            node.as_array_mut()
                .ok_or_else(|| bad("not an array"))?
                .get_mut(i)
                .ok_or_else(|| bad("index out of range"))?
        } else {
            node.as_table_mut()
                .ok_or_else(|| bad("not a table"))?
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()))
        };
    }
    let last = parts.last().unwrap();
    if let Ok(i) = last.parse::<usize>() {
        let arr = node.as_array_mut().ok_or_else(|| bad("not an array"))?;
        if i >= arr.len() {
            return Err(bad("index out of range"));
        }
        arr[i] = value;
    } else {
        node.as_table_mut()
            .ok_or_else(|| bad("not a table"))?
            .insert(last.to_string(), value);
    }
    Ok(())
}
