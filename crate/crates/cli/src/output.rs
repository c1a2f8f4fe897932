//! Result serialization: one CSV table plus a JSON manifest that captures
//! everything needed to reproduce the run.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use omlab_core::{Error, Result};

use crate::config::ExperimentConfig;

/// One output table row. `r` and `n` are per-task optional; every float
/// lands in the CSV verbatim, with NaN rendered as an empty cell.
#[derive(Clone, Debug)]
pub struct OutRow {
    pub r: Option<f64>,
    pub n: Option<u32>,
    pub estimate: f64,
    pub stderr: f64,
    pub ess: f64,
    pub predicted: f64,
    pub log_estimate: f64,
    pub log_predicted: f64,
    pub degenerate: bool,
}

pub const CSV_HEADER: &str =
    "experiment,r,n,estimate,stderr,ess,predicted,log_estimate,log_predicted,degenerate";

fn cell(v: f64) -> String {
    if v.is_nan() { String::new() } else { format!("{v}") }
}

pub fn csv_text(experiment: &str, rows: &[OutRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for row in rows {
        let r = row.r.map(|v| format!("{v}")).unwrap_or_default();
        let n = row.n.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{experiment},{r},{n},{},{},{},{},{},{},{}\n",
            cell(row.estimate),
            cell(row.stderr),
            cell(row.ess),
            cell(row.predicted),
            cell(row.log_estimate),
            cell(row.log_predicted),
            row.degenerate,
        ));
    }
    s
}

pub struct WrittenFiles {
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Write `<experiment>.csv` and `<experiment>.manifest.json` under `dir`.
/// The manifest carries the full config text, so `omlab run` on it (after
/// extracting `config_toml`) reproduces the run bit for bit.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    rows: &[OutRow],
    wall_time_seconds: f64,
    threads: usize,
) -> Result<WrittenFiles> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidParameter(format!("output dir {}: {e}", dir.display())))?;
    let csv_path = dir.join(format!("{}.csv", cfg.experiment));
    let manifest_path = dir.join(format!("{}.manifest.json", cfg.experiment));

    let io_err = |p: &Path, e: std::io::Error| {
        Error::InvalidParameter(format!("writing {}: {e}", p.display()))
    };

    let mut f = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    f.write_all(csv_text(&cfg.experiment, rows).as_bytes())
        .map_err(|e| io_err(&csv_path, e))?;

    let config_toml = crate::config::to_toml_string(cfg)?;
    let config_json = serde_json::to_value(cfg)
        .map_err(|e| Error::InvalidParameter(format!("manifest: {e}")))?;
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "experiment": cfg.experiment,
        "csv": csv_path.file_name().and_then(|s| s.to_str()),
        "rows": rows.len(),
        "degenerate_rows": rows.iter().filter(|r| r.degenerate).count(),
        "seed": cfg.sampler.seed,
        "threads": threads,
        "wall_time_seconds": wall_time_seconds,
        "created_unix": unix_time,
        "versions": {
            "omlab-core": omlab_core::VERSION,
            "omlab-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": config_json,
        "config_toml": config_toml,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidParameter(format!("manifest: {e}")))?;
    fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;

    Ok(WrittenFiles {
        csv: csv_path,
        manifest: manifest_path,
    })
}
