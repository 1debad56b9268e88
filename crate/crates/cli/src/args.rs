//! Command-line grammar and its translation into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ocmt::campaign::Pipeline;
use ocmt::dgp::{DgpSpec, DEFAULT_FORECAST_N};

use crate::config::{
    parse_c_grid, Mode, RunConfig, ScreeningOptions, SelectOptions, SieveSize, SimulateOptions,
};
use crate::error::CliError;
use crate::ingest::IngestOptions;

pub const DEFAULT_SEED: u64 = 20240101;

#[derive(Debug, Parser)]
#[command(name = "ocmt", version, about = "OCMT variable selection for additive models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo campaign on a simulated design.
    Simulate(SimulateArgs),
    /// Selection on a CSV dataset.
    Select(SelectArgs),
    /// Export one simulated sample as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Design number, 1 to 10.
    #[arg(long)]
    pub dgp: u8,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScreeningArgs {
    /// Comma-separated subset of one-stage, ocmt, post-ocmt, aglasso.
    #[arg(long, value_delimiter = ',', default_value = "one-stage,ocmt,post-ocmt")]
    pub pipeline: Vec<String>,
    /// Threshold constants as start:step:end (default 0.5:0.1:2.5).
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Sieve size per continuous covariate, or "auto".
    #[arg(long, default_value = "auto")]
    pub m_n: String,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Result document path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Held-out rows per replication for FRMSE.
    #[arg(long, default_value_t = DEFAULT_FORECAST_N)]
    pub forecast_n: usize,
    #[command(flatten)]
    pub screening: ScreeningArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// CSV file with a header row.
    pub input: PathBuf,
    /// Response column (default: the first column).
    #[arg(long)]
    pub response: Option<String>,
    /// Columns holding 0/1 indicators, entered linearly.
    #[arg(long, value_delimiter = ',')]
    pub binary: Vec<String>,
    /// Columns transformed by ln(1 + v) before scaling.
    #[arg(long, value_delimiter = ',')]
    pub log: Vec<String>,
    /// Rows held out per random split to measure forecast error.
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    /// Seed for the holdout splits.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub screening: ScreeningArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    /// Destination CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ScreeningArgs {
    fn pipelines(&self) -> Result<Vec<Pipeline>, CliError> {
        self.pipeline
            .iter()
            .map(|p| p.trim().parse::<Pipeline>().map_err(CliError::from))
            .collect()
    }

    fn options(&self) -> Result<ScreeningOptions, CliError> {
        Ok(ScreeningOptions {
            c_grid: self.c_grid.as_deref().map(parse_c_grid).transpose()?,
            m_n: self.m_n.parse::<SieveSize>()?,
        })
    }
}

impl DesignArgs {
    pub fn spec(&self) -> Result<DgpSpec, CliError> {
        Ok(DgpSpec::new(self.dgp, self.n, self.p, self.seed)?)
    }
}

impl SimulateArgs {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let dgp = self.design.spec()?.with_forecast_n(self.forecast_n)?;
        Ok(RunConfig {
            mode: Mode::Simulate(SimulateOptions {
                dgp,
                replications: self.reps,
            }),
            pipelines: self.screening.pipelines()?,
            screening: self.screening.options()?,
            workers: self.screening.workers,
            output: self.screening.out.clone(),
            seed: self.design.seed,
        })
    }
}

impl SelectArgs {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            pipelines: self.screening.pipelines()?,
            screening: self.screening.options()?,
            workers: self.screening.workers,
            output: self.screening.out.clone(),
            seed: self.seed,
            mode: Mode::Select(SelectOptions {
                input: self.input,
                ingest: IngestOptions {
                    response: self.response,
                    binary: self.binary,
                    log: self.log,
                },
                holdout: self.holdout,
                splits: self.splits,
            }),
        })
    }
}
