use std::io::Write;
use std::path::Path;

use ocmt::campaign::{fit_pipelines, run_campaign, CampaignConfig, Pipeline};
use ocmt::dataset::Dataset;
use ocmt::dgp::{generate, DgpSpec};
use ocmt::eval::frmse;
use ocmt::ocmt::OcmtConfig;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Mode, RunConfig, ScreeningOptions, SelectOptions, SimulateOptions};
use crate::error::CliError;
use crate::ingest::ingest_csv;
use crate::report::{
    selection_table, summary_table, FailureEntry, HoldoutRow, HoldoutSummary, ScreeningEcho,
    SelectionDocument, SelectionEcho, SelectionEntry, SimulationDocument, SimulationEcho,
};

/// Rendered artifacts of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Result document, also written to the configured output path.
    pub document: String,
    pub table: String,
}

pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let output = match &config.mode {
        Mode::Simulate(sim) => simulate(config, sim)?,
        Mode::Select(sel) => select(config, sel)?,
    };
    if let Some(path) = &config.output {
        write_file(path, output.document.as_bytes())?;
    }
    Ok(output)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn echo(screening: &ScreeningOptions, config: &OcmtConfig, p: usize) -> ScreeningEcho {
    ScreeningEcho {
        c_grid: config.c_grid.clone(),
        m_n: screening.m_n,
        m_n_used: config.basis.m_n(),
        spline_order: config.basis.spline_order(),
        max_stages: config.stage_cap(p),
    }
}

fn render<T: serde::Serialize>(doc: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    Ok(text)
}

fn simulate(config: &RunConfig, sim: &SimulateOptions) -> Result<RunOutput, CliError> {
    let dgp = DgpSpec {
        seed: config.seed,
        ..sim.dgp
    };
    let ocmt = config.screening.resolve(dgp.n)?;
    let campaign = CampaignConfig {
        dgp,
        replications: sim.replications,
        pipelines: config.pipelines.clone(),
        ocmt: ocmt.clone(),
        workers: config.workers,
    };
    let result = run_campaign(&campaign)?;
    if result.reports.iter().all(|r| r.report.is_none()) {
        let first = &result.failures[0];
        return Err(CliError::Config(format!(
            "every replication failed; first failure [{}]: {}",
            first.category, first.message
        )));
    }
    let echo = SimulationEcho {
        dgp: dgp.id,
        n: dgp.n,
        p: dgp.p_n,
        forecast_n: dgp.forecast_n,
        replications: sim.replications,
        seed: config.seed,
        pipelines: config.pipelines.clone(),
        screening: echo(&config.screening, &ocmt, dgp.p_n),
    };
    let doc = SimulationDocument::new(echo, &result);
    let title = format!(
        "DGP {}  n = {}  p = {}  replications = {}  seed = {}",
        dgp.id, dgp.n, dgp.p_n, sim.replications, config.seed
    );
    Ok(RunOutput {
        document: render(&doc)?,
        table: summary_table(&title, &doc.summary),
    })
}

fn failure_entry(pipeline: Pipeline, split: Option<u64>, err: &ocmt::Error) -> FailureEntry {
    FailureEntry {
        replication: split,
        pipeline: Some(pipeline),
        category: err.category(),
        message: err.to_string(),
    }
}

fn select(config: &RunConfig, sel: &SelectOptions) -> Result<RunOutput, CliError> {
    let ingested = ingest_csv(&sel.input, &sel.ingest)?;
    let data = &ingested.dataset;
    let ocmt = config.screening.resolve(data.n())?;
    let mut warnings = ingested.warnings.clone();
    let mut failures = Vec::new();
    let mut selections = Vec::new();
    let mut first_error = None;
    for (pipeline, fit) in fit_pipelines(data, &config.pipelines, &ocmt) {
        match fit {
            Ok(fit) => {
                warnings.extend(fit.warnings().into_iter().map(|w| format!("{pipeline}: {w}")));
                selections.push(SelectionEntry::new(&fit, data.names()));
            }
            Err(e) => {
                failures.push(failure_entry(pipeline, None, &e));
                first_error.get_or_insert(e);
            }
        }
    }
    if selections.is_empty() {
        return Err(first_error.expect("at least one pipeline ran").into());
    }
    let holdout = match sel.holdout {
        Some(h) => Some(holdout(config, data, &ocmt, h, sel.splits, &mut failures)?),
        None => None,
    };
    let doc = SelectionDocument {
        schema_version: crate::report::SCHEMA_VERSION,
        mode: "select",
        config: SelectionEcho {
            input: sel.input.display().to_string(),
            response: ingested.response.clone(),
            n: data.n(),
            p: data.p(),
            rows_read: ingested.rows_read,
            rows_dropped: ingested.rows_dropped,
            binary: sel.ingest.binary.clone(),
            log: sel.ingest.log.clone(),
            seed: config.seed,
            pipelines: config.pipelines.clone(),
            screening: echo(&config.screening, &ocmt, data.p()),
        },
        selections,
        holdout,
        warnings,
        failures,
    };
    Ok(RunOutput {
        document: render(&doc)?,
        table: selection_table(&doc),
    })
}

/// Repeated uniform train/test splits without replacement; split `s` draws
/// from its own stream of the run seed.
fn holdout(
    config: &RunConfig,
    data: &Dataset,
    ocmt: &OcmtConfig,
    size: usize,
    splits: usize,
    failures: &mut Vec<FailureEntry>,
) -> Result<HoldoutSummary, CliError> {
    if size >= data.n() {
        return Err(CliError::Config(format!(
            "--holdout {size} leaves no training rows out of {}",
            data.n()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let per_split: Vec<Vec<(Pipeline, Result<f64, ocmt::Error>)>> = pool.install(|| {
        (0..splits as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(s);
                let mut test = sample(&mut rng, data.n(), size).into_vec();
                test.sort_unstable();
                let train: Vec<usize> = (0..data.n()).filter(|i| test.binary_search(i).is_err()).collect();
                let split = || -> Result<(Dataset, Dataset), ocmt::Error> {
                    Ok((data.select_rows(&train)?, data.select_rows(&test)?))
                };
                match split() {
                    Err(e) => config.pipelines.iter().map(|&p| (p, Err(e.clone()))).collect(),
                    Ok((train, test)) => fit_pipelines(&train, &config.pipelines, ocmt)
                        .into_iter()
                        .map(|(p, fit)| (p, fit.and_then(|f| frmse(&f.forecaster, &test))))
                        .collect(),
                }
            })
            .collect()
    });
    let mut rows = Vec::new();
    for &pipeline in &config.pipelines {
        let mut values = Vec::new();
        let mut failed = 0;
        for (s, results) in per_split.iter().enumerate() {
            for (p, r) in results.iter().filter(|(p, _)| *p == pipeline) {
                match r {
                    Ok(v) => values.push(*v),
                    Err(e) => {
                        failed += 1;
                        failures.push(failure_entry(*p, Some(s as u64), e));
                    }
                }
            }
        }
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        rows.push(HoldoutRow {
            pipeline,
            scored: values.len(),
            failed,
            mean_frmse: mean,
            ratio: None,
        });
    }
    if let Some(base) = rows.first().and_then(|r| r.mean_frmse) {
        for r in &mut rows {
            r.ratio = r.mean_frmse.map(|m| m / base);
        }
    }
    Ok(HoldoutSummary {
        holdout: size,
        splits,
        rows,
    })
}

/// Writes one replication's training sample as CSV with header
/// `y,X1,...,Xp`, ready for `select`.
pub fn write_generated_csv<W: Write>(
    spec: &DgpSpec,
    replication: u64,
    writer: W,
) -> Result<(), CliError> {
    let labeled = generate(spec, replication)?;
    let data = &labeled.dataset;
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend(data.names().iter().cloned());
    out.write_record(&header)?;
    for i in 0..data.n() {
        let mut record = vec![data.y()[i].to_string()];
        record.extend(data.row(i).iter().map(|v| v.to_string()));
        out.write_record(&record)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
