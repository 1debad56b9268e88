use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ocmt::basis::BasisConfig;
use ocmt::campaign::Pipeline;
use ocmt::dgp::DgpSpec;
use ocmt::ocmt::{default_c_grid, OcmtConfig};
use serde::{Serialize, Serializer};

use crate::error::CliError;
use crate::ingest::IngestOptions;

/// Number of sieve functions per continuous covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SieveSize {
    /// `floor(n^(1/4)) + 1`
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for SieveSize {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "auto" {
            return Ok(SieveSize::Auto);
        }
        s.parse()
            .map(SieveSize::Fixed)
            .map_err(|_| CliError::Config(format!("--m-n expects an integer or 'auto', got '{s}'")))
    }
}

impl fmt::Display for SieveSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SieveSize::Auto => f.write_str("auto"),
            SieveSize::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for SieveSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses `start:step:end` into an inclusive, increasing grid.
pub fn parse_c_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--c-grid expects start:step:end, got '{spec}'"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else {
        return Err(bad());
    };
    if !(start > 0.0 && step > 0.0 && end >= start && end.is_finite()) {
        return Err(CliError::Config(format!(
            "--c-grid needs 0 < start <= end and step > 0, got '{spec}'"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(CliError::Config(format!("--c-grid '{spec}' has {count} points")));
    }
    // rounding keeps decimal grids exact, e.g. 0.5:0.1:2.5 equals k / 10
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScreeningOptions {
    /// `None` uses `0.5, 0.6, ..., 2.5`.
    pub c_grid: Option<Vec<f64>>,
    pub m_n: SieveSize,
}

impl ScreeningOptions {
    pub fn resolve(&self, n: usize) -> Result<OcmtConfig, CliError> {
        let basis = match self.m_n {
            SieveSize::Auto => BasisConfig::for_sample_size(n)?,
            SieveSize::Fixed(m) => BasisConfig::cubic(m)?,
        };
        let mut config = OcmtConfig::new(basis);
        config.c_grid = self.c_grid.clone().unwrap_or_else(default_c_grid);
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    /// Its seed is replaced by [`RunConfig::seed`].
    pub dgp: DgpSpec,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub input: PathBuf,
    pub ingest: IngestOptions,
    /// Rows held out per random split; `None` fits the full sample only.
    pub holdout: Option<usize>,
    pub splits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Simulate(SimulateOptions),
    Select(SelectOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub pipelines: Vec<Pipeline>,
    pub screening: ScreeningOptions,
    /// `0` uses every available core. Never affects the results.
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.pipelines.is_empty() {
            return Err(CliError::Config("no pipeline requested".into()));
        }
        let mut seen = self.pipelines.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.pipelines.len() {
            return Err(CliError::Config("a pipeline is listed twice".into()));
        }
        match &self.mode {
            Mode::Simulate(sim) => {
                sim.dgp.validate()?;
                if sim.replications == 0 {
                    return Err(CliError::Config("--reps must be positive".into()));
                }
            }
            Mode::Select(sel) => {
                if sel.holdout == Some(0) {
                    return Err(CliError::Config("--holdout must be positive".into()));
                }
                if sel.holdout.is_some() && sel.splits == 0 {
                    return Err(CliError::Config("--splits must be positive".into()));
                }
            }
        }
        if let Some(grid) = &self.screening.c_grid {
            if grid.is_empty() {
                return Err(CliError::Config("C grid is empty".into()));
            }
        }
        Ok(())
    }
}
