use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geostring::config::Format;
use geostring::Command;

/// Closed geodesic strings and their signed count on warped products.
#[derive(Parser)]
#[command(name = "geostring", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `output.path`, then standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Membership verdict and sampled curvature series.
    Curvature(Common),
    /// Geodesic strings in one class and the invariant F.
    Census(Common),
    /// Sweep a profile family and report events along the path.
    Family {
        #[command(flatten)]
        common: Common,
        /// Also write the CSV series here when the report is JSON.
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, series) = match cli.command {
        Cmd::Curvature(c) => (Command::Curvature, c, None),
        Cmd::Census(c) => (Command::Census, c, None),
        Cmd::Family { common, series } => (Command::Family, common, series),
    };
    match geostring::run(command, &common.config, common.out, common.format, series) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geostring: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
