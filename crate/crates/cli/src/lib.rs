//! Command-line front end for `seqmt` simulations.

pub mod config;
pub mod error;
pub mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use seqmt::calibration::{calibrate_bh_n, calibrate_gap_c, calibrate_topm_n};
use seqmt::tables::Table;
use seqmt::{Engine, ErrorBudget, RuleSpec};

use crate::config::{ConfigFile, Format};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "seqmt",
    version,
    about = "Sequential multiple testing simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for the simulation (default: one per core).
    #[arg(long, global = true, env = "SEQMT_WORKERS")]
    pub workers: Option<usize>,

    /// Output format; overrides `[output] format`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Output file; overrides `[output] path`. Standard output otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate error metrics and the expected sample size of a rule.
    Run(ConfigArgs),
    /// Find the gap threshold, or a BH or top-m sample size, meeting targets.
    Calibrate(ConfigArgs),
    /// Re-simulate rows of a published table.
    Reproduce(ReproduceArgs),
    /// Compare the expected sample size with its first-order approximation.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,

    /// Monte Carlo replications; overrides `[run] replications`.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Master seed; overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// `table1` (J = 10) or `table2` (J = 100).
    pub which: Table,

    /// Comma-separated values of m; all rows when omitted.
    #[arg(long)]
    pub rows: Option<String>,

    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,

    /// Comma-separated levels; each point uses alpha = beta = level.
    /// Defaults to the configured budget.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

/// Where and how a command writes its result.
struct Sink {
    format: Format,
    path: Option<PathBuf>,
}

impl Sink {
    fn new(cli: &Cli, file: Option<&ConfigFile>) -> Self {
        let output = file.map(|f| f.output.clone()).unwrap_or_default();
        Sink {
            format: cli.format.or(output.format).unwrap_or(Format::Csv),
            path: cli.out.clone().or(output.path),
        }
    }

    fn write(&self, render: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
        match &self.path {
            Some(path) => {
                let err = |source| CliError::Output {
                    path: path.clone(),
                    source,
                };
                let mut w = BufWriter::new(File::create(path).map_err(err)?);
                render(&mut w).and_then(|_| w.flush()).map_err(err)
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                render(&mut w).map_err(|source| CliError::Output {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
            }
        }
    }

    /// Writes `text` next to the output file (CSV and text carry no config).
    fn sidecar(&self, text: &str) -> Result<(), CliError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if self.format == Format::Json {
            return Ok(());
        }
        let side = sidecar_path(path);
        std::fs::write(&side, text).map_err(|source| CliError::Output { path: side, source })
    }
}

/// `report.csv` -> `report.csv.config.toml`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".config.toml");
    PathBuf::from(name)
}

fn load(args: &ConfigArgs) -> Result<ConfigFile, CliError> {
    let mut file = ConfigFile::load(&args.config)?;
    if let Some(reps) = args.reps {
        file.run.replications = reps;
    }
    if let Some(seed) = args.seed {
        file.run.seed = seed;
    }
    Ok(file)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let engine = || Engine::new(cli.workers).map_err(CliError::from);
    match &cli.command {
        Command::Run(args) => {
            let file = load(args)?;
            let config = file.experiment()?;
            let sink = Sink::new(cli, Some(&file));
            let report = engine()?.run_experiment(&config)?;
            sink.write(|w| match sink.format {
                Format::Csv => report::write_run_csv(&report, w),
                Format::Json => report::write_json(&report, w),
                Format::Text => report::write_run_text(&report, w),
            })?;
            sink.sidecar(&ConfigFile::describe(&config, report.rule.into())?.to_toml())
        }
        Command::Calibrate(args) => {
            let file = load(args)?;
            let config = file.experiment()?;
            let sink = Sink::new(cli, Some(&file));
            let cal = file.calibration.unwrap_or_default();
            let settings = cal.settings(config.horizon);
            let engine = engine()?;
            let (profile, truth) = (&config.profile, &config.truth);
            let (reps, seed) = (config.replications, config.master_seed);
            let result = match config.rule {
                RuleSpec::Gap { m, .. } => calibrate_gap_c(
                    &engine,
                    profile,
                    truth,
                    m,
                    config.budget,
                    reps,
                    &settings,
                    seed,
                )?,
                RuleSpec::Bh { alpha, .. } => {
                    let target = cal.target_fnr.ok_or_else(|| {
                        CliError::config("[calibration] target_fnr is required for the bh rule")
                    })?;
                    calibrate_bh_n(
                        &engine, profile, truth, alpha, target, reps, &settings, seed,
                    )?
                }
                RuleSpec::TopM { m, .. } => calibrate_topm_n(
                    &engine,
                    profile,
                    truth,
                    m,
                    config.budget,
                    reps,
                    &settings,
                    seed,
                )?,
                other => {
                    return Err(CliError::config(format!(
                        "[rule]: calibration supports gap, bh and top-m rules, not {}",
                        other.name()
                    )))
                }
            };
            sink.write(|w| match sink.format {
                Format::Csv => report::write_calibration_csv(&result, w),
                Format::Json => report::write_json(&result, w),
                Format::Text => report::write_calibration_text(&result, w),
            })?;
            let mut described = ConfigFile::describe(&config, config.rule)?;
            described.calibration = Some(cal);
            sink.sidecar(&described.to_toml())
        }
        Command::Reproduce(args) => {
            let rows = parse_rows(args.rows.as_deref(), args.which)?;
            let sink = Sink::new(cli, None);
            let table = engine()?.reproduce_table(args.which, &rows, args.reps, args.seed)?;
            sink.write(|w| match sink.format {
                Format::Csv => report::write_table_csv(&table, w),
                Format::Json => report::write_json(&table, w),
                Format::Text => report::write_table_text(&table, w),
            })
        }
        Command::Sweep(args) => {
            let file = load(&args.config)?;
            let config = file.experiment()?;
            let sink = Sink::new(cli, Some(&file));
            let budgets = if args.alphas.is_empty() {
                vec![config.budget]
            } else {
                args.alphas
                    .iter()
                    .map(|&a| {
                        ErrorBudget::symmetric(a)
                            .map_err(|e| CliError::config(format!("--alphas: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            let sweep = engine()?.asymptotic_sweep(&config, &budgets, config.replications)?;
            sink.write(|w| match sink.format {
                Format::Csv => report::write_sweep_csv(&sweep, w),
                Format::Json => report::write_json(&sweep, w),
                Format::Text => report::write_sweep_text(&sweep, w),
            })?;
            sink.sidecar(
                &ConfigFile::describe(&config, config.rule.with_auto_thresholds())?.to_toml(),
            )
        }
    }
}

fn parse_rows(rows: Option<&str>, table: Table) -> Result<Vec<usize>, CliError> {
    let Some(rows) = rows else {
        return Ok(table.rows().iter().map(|r| r.m).collect());
    };
    rows.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::config(format!("--rows: `{s}` is not a row number")))
        })
        .collect()
}
