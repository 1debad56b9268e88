//! Result documents and the summary table.
//!
//! The document is pretty-printed JSON whose fields appear in declaration
//! order and whose numbers print in shortest round-trip form, so equal
//! runs produce byte-identical files.

use std::fmt::Write;

use ocmt::campaign::{CampaignResult, Pipeline, PipelineFit};
use ocmt::eval::ReplicationReport;
use ocmt::Category;
use serde::Serialize;

use crate::config::SieveSize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningEcho {
    pub c_grid: Vec<f64>,
    pub m_n: SieveSize,
    pub m_n_used: usize,
    pub spline_order: usize,
    pub max_stages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationEcho {
    pub dgp: u8,
    pub n: usize,
    pub p: usize,
    pub forecast_n: usize,
    pub replications: usize,
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    pub screening: ScreeningEcho,
}

/// One pipeline's replication averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub pipeline: Pipeline,
    pub scored: usize,
    pub failed: usize,
    pub nv: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fdr: Option<f64>,
    pub cs: Option<f64>,
    pub step: Option<f64>,
    pub frmse: Option<f64>,
}

impl SummaryRow {
    pub fn new(pipeline: Pipeline, report: Option<&ReplicationReport>, failed: usize) -> Self {
        SummaryRow {
            pipeline,
            scored: report.map_or(0, |r| r.replications),
            failed,
            nv: report.map(|r| r.nv),
            tpr: report.map(|r| r.tpr),
            fpr: report.map(|r| r.fpr),
            fdr: report.map(|r| r.fdr),
            cs: report.map(|r| r.cs),
            step: report.and_then(|r| r.step),
            frmse: report.and_then(|r| r.frmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationEntry {
    pub replication: u64,
    pub pipeline: Pipeline,
    pub selected: Vec<String>,
    pub stages: Option<usize>,
    pub chosen_c: Option<f64>,
    pub chosen_lambda: Option<f64>,
    pub nv: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub fdr: f64,
    pub cs: bool,
    pub frmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureEntry {
    pub replication: Option<u64>,
    pub pipeline: Option<Pipeline>,
    pub category: Category,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationDocument {
    pub schema_version: u32,
    pub mode: &'static str,
    pub config: SimulationEcho,
    pub summary: Vec<SummaryRow>,
    pub replications: Vec<ReplicationEntry>,
    pub warnings: Vec<String>,
    pub failures: Vec<FailureEntry>,
}

pub fn variable_name(j: usize) -> String {
    format!("X{}", j + 1)
}

impl SimulationDocument {
    pub fn new(config: SimulationEcho, result: &CampaignResult) -> Self {
        let summary = result
            .reports
            .iter()
            .map(|r| SummaryRow::new(r.pipeline, r.report.as_ref(), r.failures))
            .collect();
        let mut replications = Vec::new();
        let mut warnings = Vec::new();
        for rep in &result.replications {
            for o in &rep.outcomes {
                let m = &o.row.metrics;
                replications.push(ReplicationEntry {
                    replication: rep.replication,
                    pipeline: o.pipeline,
                    selected: o.selected.iter().map(|&j| variable_name(j)).collect(),
                    stages: o.row.step,
                    chosen_c: o.chosen_c,
                    chosen_lambda: o.chosen_lambda,
                    nv: m.nv,
                    tpr: m.tpr,
                    fpr: m.fpr,
                    fdr: m.fdr,
                    cs: m.cs,
                    frmse: o.row.frmse,
                });
                warnings.extend(o.warnings.iter().map(|w| {
                    format!("replication {}, {}: {w}", rep.replication, o.pipeline)
                }));
            }
        }
        let failures = result
            .failures
            .iter()
            .map(|f| FailureEntry {
                replication: Some(f.replication),
                pipeline: f.pipeline,
                category: f.category,
                message: f.message.clone(),
            })
            .collect();
        SimulationDocument {
            schema_version: SCHEMA_VERSION,
            mode: "simulate",
            config,
            summary,
            replications,
            warnings,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionEcho {
    pub input: String,
    pub response: String,
    pub n: usize,
    pub p: usize,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub binary: Vec<String>,
    pub log: Vec<String>,
    pub seed: u64,
    pub pipelines: Vec<Pipeline>,
    pub screening: ScreeningEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticEntry {
    pub stage: usize,
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub variable: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicEntry {
    pub tuning: f64,
    pub bic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionEntry {
    pub pipeline: Pipeline,
    pub selected: Vec<String>,
    pub chosen_c: Option<f64>,
    pub chosen_lambda: Option<f64>,
    /// Variables added at each stage, in stage order.
    pub stages: Vec<Vec<String>>,
    pub statistics: Vec<StatisticEntry>,
    pub c_bic: Vec<BicEntry>,
    pub lambda_bic: Vec<BicEntry>,
    pub intercept: f64,
    /// Sieve coefficients on the centered design, per selected variable.
    pub coefficients: Vec<CoefficientEntry>,
}

impl SelectionEntry {
    pub fn new(fit: &PipelineFit, names: &[String]) -> Self {
        let name = |j: usize| names[j].clone();
        let (stages, statistics, c_bic) = match &fit.ocmt {
            Some(r) => (
                r.per_stage_selected
                    .iter()
                    .map(|s| s.iter().map(|&j| name(j)).collect())
                    .collect(),
                r.statistics_trace
                    .iter()
                    .map(|(&(stage, j), &value)| StatisticEntry {
                        stage,
                        variable: name(j),
                        value,
                    })
                    .collect(),
                r.bic_trace
                    .iter()
                    .map(|&(tuning, bic)| BicEntry { tuning, bic })
                    .collect(),
            ),
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        let lambda_bic = fit
            .cleanup
            .as_ref()
            .and_then(|c| c.lasso.as_ref())
            .map(|l| {
                l.adaptive_bic_trace
                    .iter()
                    .map(|&(tuning, bic)| BicEntry {
                        tuning,
                        bic: Some(bic),
                    })
                    .collect()
            })
            .unwrap_or_default();
        SelectionEntry {
            pipeline: fit.pipeline,
            selected: fit.selected.iter().map(|&j| name(j)).collect(),
            chosen_c: fit.chosen_c(),
            chosen_lambda: fit.chosen_lambda(),
            stages,
            statistics,
            c_bic,
            lambda_bic,
            intercept: fit.forecaster.intercept(),
            coefficients: fit
                .forecaster
                .block_coefficients()
                .into_iter()
                .map(|(j, values)| CoefficientEntry {
                    variable: name(j),
                    values,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutRow {
    pub pipeline: Pipeline,
    pub scored: usize,
    pub failed: usize,
    pub mean_frmse: Option<f64>,
    /// Mean FRMSE over that of the first listed pipeline.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutSummary {
    pub holdout: usize,
    pub splits: usize,
    pub rows: Vec<HoldoutRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionDocument {
    pub schema_version: u32,
    pub mode: &'static str,
    pub config: SelectionEcho,
    pub selections: Vec<SelectionEntry>,
    pub holdout: Option<HoldoutSummary>,
    pub warnings: Vec<String>,
    pub failures: Vec<FailureEntry>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Fixed-width table with columns NV, TPR, FPR, FDR, CS, STEP, FRMSE.
pub fn summary_table(title: &str, rows: &[SummaryRow]) -> String {
    let mut out = format!("{title}\n");
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
        "PIPELINE", "NV", "TPR", "FPR", "FDR", "CS", "STEP", "FRMSE", "FAILED"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6}",
            r.pipeline.label(),
            cell(r.nv),
            cell(r.tpr),
            cell(r.fpr),
            cell(r.fdr),
            cell(r.cs),
            cell(r.step),
            cell(r.frmse),
            r.failed
        );
    }
    out
}

pub fn selection_table(doc: &SelectionDocument) -> String {
    let c = &doc.config;
    let mut out = format!(
        "{}: response {}, n = {}, p = {}\n",
        c.input, c.response, c.n, c.p
    );
    for s in &doc.selections {
        let _ = writeln!(
            out,
            "{:<10} C = {:<6} lambda = {:<10} stages = {:<3} selected: {}",
            s.pipeline.label(),
            s.chosen_c.map_or("-".into(), |v| format!("{v}")),
            s.chosen_lambda.map_or("-".into(), |v| format!("{v:.4}")),
            s.stages.len(),
            if s.selected.is_empty() {
                "(none)".to_string()
            } else {
                s.selected.join(", ")
            }
        );
    }
    if let Some(h) = &doc.holdout {
        let _ = writeln!(out, "holdout {} rows x {} splits", h.holdout, h.splits);
        for r in &h.rows {
            let _ = writeln!(
                out,
                "{:<10} FRMSE {:>8}  ratio {:>8}  failed {}",
                r.pipeline.label(),
                cell(r.mean_frmse),
                cell(r.ratio),
                r.failed
            );
        }
    }
    for f in &doc.failures {
        let _ = writeln!(
            out,
            "failed [{}] {}: {}",
            f.category,
            f.pipeline.map_or("-", |p| p.as_str()),
            f.message
        );
    }
    out
}
