//! Command-line front end. Every command reads a validated [`RunConfig`],
//! writes `<command>.csv` and/or `<command>.json` plus `manifest.json`
//! into the output directory, and maps failures onto exit codes.

pub mod commands;
pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, ErrorCategory, Result};
pub use config::{Format, RunConfig};
use output::{pretty_json, write_bytes, Artifact, Sheet};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COLLAPSE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "collapse-kinetics",
    version,
    about = "Kinetics of collapse models with non-white, mass-density-coupled noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set model.mass="1 keV"`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Correlator D and its time integrals F, I over an (r, t) grid.
    Kernel,
    /// Reduction rates, off-diagonal decay and bounds.
    Rate,
    /// Monte Carlo reduction ensemble against the closed form.
    ReduceMc,
    /// Fokker-Planck diffusion matrix and moment drifts.
    FokkerPlanck,
    /// Energy production rates and totals.
    Energy,
    /// Gamma emission spectrum of hydrogen.
    GammaSpectrum,
    /// Dark-matter scenario scan.
    DmScan,
    /// The four dark-matter tables.
    Tables,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Rate => "rate",
            Command::ReduceMc => "reduce-mc",
            Command::FokkerPlanck => "fokker-planck",
            Command::Energy => "energy",
            Command::GammaSpectrum => "gamma-spectrum",
            Command::DmScan => "dm-scan",
            Command::Tables => "tables",
        }
    }
}

/// Everything a command produces before it is written out.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub sheets: Vec<Sheet>,
    /// Extra files such as text renderings.
    pub extra_files: Vec<(String, Vec<u8>)>,
    /// Scalar results and diagnostics recorded in the manifest.
    pub notes: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    threads: Option<usize>,
    format: Format,
    config: &'a toml::Table,
    artifacts: Vec<Artifact>,
    notes: &'a BTreeMap<String, serde_json::Value>,
    warnings: &'a [String],
    wall_time_s: f64,
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Validation => 2,
        ErrorCategory::NonConvergence => 3,
        ErrorCategory::Psd => 4,
        ErrorCategory::Io => 1,
    }
}

pub fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Validation => "validation",
        ErrorCategory::NonConvergence => "non_convergence",
        ErrorCategory::Psd => "not_psd",
        ErrorCategory::Io => "io",
    }
}

/// Runs a parsed invocation and returns the list of written files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(format) = cli.format {
        let name = match format {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        };
        overrides.push(format!("output.format=\"{name}\""));
    }
    let (table, config) = config::resolve(&text, &overrides)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    let out = pool.install(|| commands::execute(cli.command, &config))?;

    let format = config.output.format.unwrap_or_default();
    let written = write_outputs(
        &cli.out,
        cli.command.name(),
        &out,
        format,
        config.output.precision,
    )?;
    let mut artifacts = written.1;
    let manifest = Manifest {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.run.seed,
        threads: cli.threads,
        format,
        config: &table,
        artifacts: std::mem::take(&mut artifacts),
        notes: &out.notes,
        warnings: &out.warnings,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let mut paths = written.0;
    paths.push(write_bytes(
        &cli.out,
        "manifest.json",
        &pretty_json(&manifest)?,
    )?);
    Ok(paths)
}

fn write_outputs(
    dir: &Path,
    command: &str,
    out: &CommandOutput,
    format: Format,
    precision: Option<usize>,
) -> Result<(Vec<PathBuf>, Vec<Artifact>)> {
    let mut paths = Vec::new();
    let mut artifacts = Vec::new();
    let mut record = |file: String, rows: usize, bytes: Vec<u8>| -> Result<()> {
        paths.push(write_bytes(dir, &file, &bytes)?);
        artifacts.push(Artifact {
            file,
            rows,
            bytes: bytes.len(),
        });
        Ok(())
    };
    for sheet in &out.sheets {
        if format.csv() {
            record(
                format!("{}.csv", sheet.name),
                sheet.rows.len(),
                sheet.to_csv(precision)?,
            )?;
        }
    }
    if format.json() {
        let mut doc = serde_json::Map::new();
        for sheet in &out.sheets {
            doc.insert(sheet.name.clone(), sheet.to_json());
        }
        if !out.notes.is_empty() {
            doc.insert(
                "notes".into(),
                serde_json::to_value(&out.notes).map_err(|e| Error::Io(e.to_string()))?,
            );
        }
        let rows = out.sheets.iter().map(|s| s.rows.len()).sum();
        record(format!("{command}.json"), rows, pretty_json(&doc)?)?;
    }
    for (file, bytes) in &out.extra_files {
        record(file.clone(), 0, bytes.clone())?;
    }
    Ok((paths, artifacts))
}

/// Parses arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let category = e.category();
            let report = serde_json::json!({
                "error": category_name(category),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            exit_code(category)
        }
    }
}
