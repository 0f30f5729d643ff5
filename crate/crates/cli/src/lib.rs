//! Batch front-end for `geostring-core`: TOML run configurations in,
//! JSON reports and CSV series out.
//!
//! Exit codes: 0 whenever a report is produced (including degenerate or
//! escaping results), 2 for configuration errors, 3 for domain errors such
//! as a profile that is not positive, 1 for I/O failures.

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use geostring_core::census;
use geostring_core::family::run_family;
use geostring_core::geometry::GeometryError;
use geostring_core::WarpedMetric;

use crate::config::{Format, RunConfig};
use crate::report::{CensusJson, CurvaturePoint, CurvatureReport, FamilyJson, MembershipJson, Real, Tolerances};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InvalidFiber(_) | GeometryError::InvalidWindow(_) => CliError::Config(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curvature,
    Census,
    Family,
}

/// A rendered report plus, for family sweeps, the CSV series.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub body: String,
    pub series: Option<String>,
}

fn metric(cfg: &RunConfig) -> Result<WarpedMetric, CliError> {
    Ok(WarpedMetric::new(cfg.profile()?, cfg.fiber_model()?, cfg.window()?)?)
}

pub fn curvature(cfg: &RunConfig, format: Format) -> Result<Rendered, CliError> {
    let g = metric(cfg)?;
    let verdict = g.membership(cfg.window.grid_n)?;
    let transverse = g.fiber().transverse_dim() > 0;
    let mut series = Vec::with_capacity(cfg.window.grid_n);
    for x in g.window().grid(cfg.window.grid_n) {
        series.push(CurvaturePoint {
            x: Real(x),
            f: Real(g.profile().eval(x).map_err(|e| CliError::Domain(e.to_string()))?),
            k_base: Real(g.base_curvature(x)?),
            k_fiber: if transverse {
                Some(Real(g.fiber_plane_curvature(x)?))
            } else {
                None
            },
        });
    }
    let body = match format {
        Format::Csv => report::curvature_csv(&series)?,
        Format::Json => report::to_json(&CurvatureReport {
            schema_version: report::SCHEMA_VERSION,
            command: "curvature",
            config: cfg,
            tolerances: Tolerances::for_config(cfg),
            membership: MembershipJson::from(&verdict),
            series,
        })?,
    };
    Ok(Rendered { body, series: None })
}

pub fn census(cfg: &RunConfig, format: Format) -> Result<Rendered, CliError> {
    let g = metric(cfg)?;
    let result =
        census::enumerate(&g, cfg.class(), &cfg.census_options()).map_err(|e| CliError::Domain(e.to_string()))?;
    let body = match format {
        Format::Csv => report::census_csv(&result)?,
        Format::Json => report::to_json(&CensusJson::new(cfg, &result))?,
    };
    Ok(Rendered { body, series: None })
}

pub fn family(cfg: &RunConfig, format: Format) -> Result<Rendered, CliError> {
    let path = cfg.metric_path()?;
    let result = run_family(&path, cfg.class(), &cfg.family_options());
    let series = report::family_csv(&result)?;
    Ok(match format {
        Format::Csv => Rendered {
            body: series,
            series: None,
        },
        Format::Json => Rendered {
            body: report::to_json(&FamilyJson::new(cfg, &path.samples, &result))?,
            series: Some(series),
        },
    })
}

pub fn render(command: Command, cfg: &RunConfig, format: Format) -> Result<Rendered, CliError> {
    match command {
        Command::Curvature => curvature(cfg, format),
        Command::Census => census(cfg, format),
        Command::Family => family(cfg, format),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Loads the config, renders the report and writes it to `out` (or the
/// configured path, or standard output). `series` receives the family CSV
/// alongside a JSON report.
pub fn run(
    command: Command,
    config: &Path,
    out: Option<PathBuf>,
    format: Option<Format>,
    series: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let format = format.unwrap_or(cfg.output.format);
    let rendered = render(command, &cfg, format)?;
    match out.or_else(|| cfg.output.path.clone()) {
        Some(path) => write(&path, &rendered.body)?,
        None => print!("{}", rendered.body),
    }
    if let (Some(path), Some(csv)) = (series, rendered.series) {
        write(&path, &csv)?;
    }
    Ok(())
}
