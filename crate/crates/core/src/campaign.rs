//! Monte Carlo campaigns: generate, select, score, average.
//!
//! Replications run on a dedicated rayon pool and are collected in
//! replication order, so results do not depend on the worker count.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{BasisConfig, DesignBlock};
use crate::dataset::Dataset;
use crate::dgp::{generate, DgpSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{aggregate, frmse, selection_metrics, Forecaster, ReplicationReport, ReplicationRow};
use crate::glasso::{aglasso_select, post_ocmt_cleanup, Cleanup};
use crate::ocmt::{ocmt_with_bic, one_stage_with_bic, OcmtConfig, OcmtResult};
use crate::regress::post_selection_ols;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Stage-1 OCMT with BIC-tuned `C`.
    OneStage,
    /// Multi-stage OCMT with BIC-tuned `C`.
    Ocmt,
    /// Multi-stage OCMT followed by the adaptive group Lasso.
    PostOcmt,
    /// Adaptive group Lasso over all covariates.
    Aglasso,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [
        Pipeline::OneStage,
        Pipeline::Ocmt,
        Pipeline::PostOcmt,
        Pipeline::Aglasso,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::OneStage => "one-stage",
            Pipeline::Ocmt => "ocmt",
            Pipeline::PostOcmt => "post-ocmt",
            Pipeline::Aglasso => "aglasso",
        }
    }

    /// Table label.
    pub fn label(&self) -> &'static str {
        match self {
            Pipeline::OneStage => "ONE-STAGE",
            Pipeline::Ocmt => "OCMT",
            Pipeline::PostOcmt => "POST-OCMT",
            Pipeline::Aglasso => "AGLASSO",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.as_str() == s || (s == "aglasso-only" && *p == Pipeline::Aglasso))
            .ok_or_else(|| Error::Config(format!("unknown pipeline '{s}'")))
    }
}

/// Selection produced by one pipeline on one dataset, with its refit.
#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub pipeline: Pipeline,
    /// Selected variables, ascending.
    pub selected: Vec<usize>,
    pub ocmt: Option<OcmtResult>,
    pub cleanup: Option<Cleanup>,
    pub forecaster: Forecaster,
}

impl PipelineFit {
    pub fn stage_count(&self) -> Option<usize> {
        self.ocmt.as_ref().map(|r| r.stage_count)
    }

    pub fn chosen_c(&self) -> Option<f64> {
        self.ocmt.as_ref().map(|r| r.chosen_c)
    }

    /// Lambda of the adaptive step, when it ran.
    pub fn chosen_lambda(&self) -> Option<f64> {
        self.cleanup
            .as_ref()
            .and_then(|c| c.lasso.as_ref())
            .and_then(|l| l.adaptive.as_ref())
            .map(|f| f.chosen_lambda)
    }

    /// Screening warnings plus any chosen Lasso fit that missed the KKT
    /// tolerance.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = self
            .ocmt
            .as_ref()
            .map(|r| r.warnings.clone())
            .unwrap_or_default();
        if let Some(lasso) = self.cleanup.as_ref().and_then(|c| c.lasso.as_ref()) {
            let steps = [("initial", Some(&lasso.initial)), ("adaptive", lasso.adaptive.as_ref())];
            for (step, fit) in steps {
                if let Some(fit) = fit.filter(|f| !f.converged) {
                    out.push(format!(
                        "{step} group Lasso at lambda {} stopped after {} sweeps with KKT violation {:.2e}",
                        fit.chosen_lambda, fit.iterations, fit.kkt_violation
                    ));
                }
            }
        }
        out
    }
}

fn refit(dataset: &Dataset, selected: &[usize], basis: &BasisConfig) -> Result<Forecaster> {
    let blocks = selected
        .iter()
        .map(|&j| dataset.design_block(j, basis))
        .collect::<Result<Vec<DesignBlock>>>()?;
    let refs: Vec<&DesignBlock> = blocks.iter().collect();
    let fit = post_selection_ols(&refs, &DVector::from_column_slice(dataset.y()))?;
    Forecaster::new(blocks, &fit)
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Runs several pipelines on one dataset, sharing the multi-stage OCMT run
/// between `ocmt` and `post-ocmt`.
pub fn fit_pipelines(
    dataset: &Dataset,
    pipelines: &[Pipeline],
    config: &OcmtConfig,
) -> Vec<(Pipeline, Result<PipelineFit>)> {
    let mut shared: Option<Result<OcmtResult>> = None;
    let mut multi_stage = || -> Result<OcmtResult> {
        shared
            .get_or_insert_with(|| ocmt_with_bic(dataset, config))
            .clone()
    };
    pipelines
        .iter()
        .map(|&pipeline| {
            let fit = (|| -> Result<PipelineFit> {
                match pipeline {
                    Pipeline::OneStage | Pipeline::Ocmt => {
                        let result = if pipeline == Pipeline::OneStage {
                            one_stage_with_bic(dataset, config)?
                        } else {
                            multi_stage()?
                        };
                        let selected = sorted(result.selected.clone());
                        let forecaster = refit(dataset, &selected, &config.basis)?;
                        Ok(PipelineFit {
                            pipeline,
                            selected,
                            ocmt: Some(result),
                            cleanup: None,
                            forecaster,
                        })
                    }
                    Pipeline::PostOcmt => {
                        let result = multi_stage()?;
                        let cleanup = post_ocmt_cleanup(dataset, &result, &config.basis)?;
                        let forecaster = Forecaster::new(cleanup.blocks.clone(), &cleanup.fit)?;
                        Ok(PipelineFit {
                            pipeline,
                            selected: cleanup.selected.clone(),
                            ocmt: Some(result),
                            cleanup: Some(cleanup),
                            forecaster,
                        })
                    }
                    Pipeline::Aglasso => {
                        let cleanup = aglasso_select(dataset, &config.basis)?;
                        let forecaster = Forecaster::new(cleanup.blocks.clone(), &cleanup.fit)?;
                        Ok(PipelineFit {
                            pipeline,
                            selected: cleanup.selected.clone(),
                            ocmt: None,
                            cleanup: Some(cleanup),
                            forecaster,
                        })
                    }
                }
            })();
            (pipeline, fit)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignConfig {
    pub dgp: DgpSpec,
    pub replications: usize,
    pub pipelines: Vec<Pipeline>,
    pub ocmt: OcmtConfig,
    /// Worker threads; `0` uses rayon's default.
    pub workers: usize,
}

impl CampaignConfig {
    /// Defaults for the sample size of `dgp`.
    pub fn new(dgp: DgpSpec, replications: usize, pipelines: Vec<Pipeline>) -> Result<Self> {
        Ok(CampaignConfig {
            dgp,
            replications,
            pipelines,
            ocmt: OcmtConfig::for_sample_size(dgp.n)?,
            workers: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.ocmt.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.pipelines.is_empty() {
            return Err(Error::Config("no pipeline requested".into()));
        }
        Ok(())
    }
}

/// One pipeline's result in one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub pipeline: Pipeline,
    pub selected: Vec<usize>,
    pub chosen_c: Option<f64>,
    pub chosen_lambda: Option<f64>,
    pub row: ReplicationRow,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub replication: u64,
    pub pipeline: Option<Pipeline>,
    pub category: crate::error::Category,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub outcomes: Vec<PipelineOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub pipeline: Pipeline,
    /// `None` when every replication of this pipeline failed.
    pub report: Option<ReplicationReport>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub reports: Vec<PipelineReport>,
    pub replications: Vec<ReplicationOutcome>,
    pub failures: Vec<Failure>,
}

fn failure(replication: u64, pipeline: Option<Pipeline>, err: &Error) -> Failure {
    Failure {
        replication,
        pipeline,
        category: err.category(),
        message: err.to_string(),
    }
}

/// Scores one fitted pipeline against the design's labels.
pub fn score(labeled: &LabeledDataset, fit: &PipelineFit) -> Result<ReplicationRow> {
    let p = labeled.spec.p_n;
    let indicator: Vec<bool> = (0..p).map(|j| fit.selected.contains(&j)).collect();
    // pseudo-signals count as false discoveries
    let metrics = selection_metrics(&indicator, &labeled.true_signals, &labeled.non_signals(), p)?;
    let forecast_error = match &labeled.forecast {
        Some(data) => Some(frmse(&fit.forecaster, data)?),
        None => None,
    };
    Ok(ReplicationRow {
        metrics,
        step: fit.stage_count(),
        frmse: forecast_error,
    })
}

fn run_replication(
    config: &CampaignConfig,
    replication: u64,
) -> (ReplicationOutcome, Vec<Failure>) {
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    match generate(&config.dgp, replication) {
        Err(e) => failures.push(failure(replication, None, &e)),
        Ok(labeled) => {
            for (pipeline, fit) in fit_pipelines(&labeled.dataset, &config.pipelines, &config.ocmt) {
                let scored = fit.and_then(|fit| score(&labeled, &fit).map(|row| (fit, row)));
                match scored {
                    Ok((fit, row)) => outcomes.push(PipelineOutcome {
                        pipeline,
                        selected: fit.selected.clone(),
                        chosen_c: fit.chosen_c(),
                        chosen_lambda: fit.chosen_lambda(),
                        row,
                        warnings: fit.warnings(),
                    }),
                    Err(e) => failures.push(failure(replication, Some(pipeline), &e)),
                }
            }
        }
    }
    (
        ReplicationOutcome {
            replication,
            outcomes,
        },
        failures,
    )
}

/// Runs every replication and aggregates per pipeline.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_replication: Vec<(ReplicationOutcome, Vec<Failure>)> = pool.install(|| {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|r| run_replication(config, r))
            .collect()
    });
    let mut replications = Vec::with_capacity(per_replication.len());
    let mut failures = Vec::new();
    for (outcome, mut f) in per_replication {
        replications.push(outcome);
        failures.append(&mut f);
    }
    let reports = config
        .pipelines
        .iter()
        .map(|&pipeline| {
            let rows: Vec<ReplicationRow> = replications
                .iter()
                .flat_map(|r| r.outcomes.iter())
                .filter(|o| o.pipeline == pipeline)
                .map(|o| o.row.clone())
                .collect();
            PipelineReport {
                pipeline,
                report: aggregate(&rows).ok(),
                failures: failures
                    .iter()
                    .filter(|f| f.pipeline == Some(pipeline) || f.pipeline.is_none())
                    .count(),
            }
        })
        .collect();
    Ok(CampaignResult {
        reports,
        replications,
        failures,
    })
}
