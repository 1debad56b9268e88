//! One-covariate-at-a-time multiple testing.
//!
//! Stage 1 compares every covariate's marginal statistic with a threshold
//! `varsigma(C)`. Each later stage screens the covariates not yet selected
//! with the statistic conditioned on everything selected so far, against a
//! larger threshold, and the procedure stops at the first stage that adds
//! nothing. [`ocmt_with_bic`] repeats this over a grid of constants `C` and
//! keeps the selection whose post-selection OLS fit has the smallest BIC.
//!
//! Statistics do not depend on `C`, only on the conditioning set, so a
//! [`Screener`] evaluates each conditioning set once and reuses it for every
//! grid value.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{BasisConfig, DesignBlock, VariableKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regress::{post_selection_ols, Conditioning, TestStat};

/// Hard cap on stages when none is configured.
pub const DEFAULT_STAGE_CAP: usize = 20;

/// RSS inside the BIC logarithm is floored at this fraction of the total
/// sum of squares.
pub const RSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcmtConfig {
    pub c_grid: Vec<f64>,
    pub subsequent_stage_multiplier_continuous: f64,
    pub subsequent_stage_multiplier_binary: f64,
    /// `None` means `min(p_n, 20)`.
    pub max_stages: Option<usize>,
    pub basis: BasisConfig,
    /// Evaluate the per-variable statistics of a stage on the rayon pool.
    pub parallel_screening: bool,
}

impl OcmtConfig {
    pub fn new(basis: BasisConfig) -> Self {
        OcmtConfig {
            c_grid: default_c_grid(),
            subsequent_stage_multiplier_continuous: 3.0,
            subsequent_stage_multiplier_binary: 4.0,
            max_stages: None,
            basis,
            parallel_screening: false,
        }
    }

    /// Defaults with `m_n = floor(n^(1/4)) + 1` cubic splines.
    pub fn for_sample_size(n: usize) -> Result<Self> {
        Ok(Self::new(BasisConfig::for_sample_size(n)?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() {
            return Err(Error::Config("C grid is empty".into()));
        }
        if self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("C grid entries must be positive".into()));
        }
        if self.c_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("C grid must be strictly increasing".into()));
        }
        for m in [
            self.subsequent_stage_multiplier_continuous,
            self.subsequent_stage_multiplier_binary,
        ] {
            if !(m >= 1.0 && m.is_finite()) {
                return Err(Error::Config(format!("stage multiplier {m} is below 1")));
            }
        }
        if self.max_stages == Some(0) {
            return Err(Error::Config("max_stages must be positive".into()));
        }
        Ok(())
    }

    pub fn stage_cap(&self, p_n: usize) -> usize {
        self.max_stages
            .unwrap_or_else(|| p_n.min(DEFAULT_STAGE_CAP))
            .max(1)
    }

    fn multiplier(&self, kind: VariableKind) -> f64 {
        match kind {
            VariableKind::Continuous => self.subsequent_stage_multiplier_continuous,
            VariableKind::BinaryLinear => self.subsequent_stage_multiplier_binary,
        }
    }
}

/// `0.5, 0.6, ..., 2.5`
pub fn default_c_grid() -> Vec<f64> {
    (5..=25).map(|k| k as f64 / 10.0).collect()
}

/// First-stage threshold for one variable kind.
///
/// Continuous: `c * m_n * ((ln p_n)^1.1 + (ln m_n)^1.1)`.
/// Binary-linear: `c * (ln p_n)^1.1`.
pub fn threshold(c: f64, p_n: usize, m_n: usize, kind: VariableKind) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("threshold constant {c} is not positive")));
    }
    if p_n < 2 || m_n < 1 {
        return Err(Error::Config(format!(
            "threshold needs p_n >= 2 and m_n >= 1, got p_n = {p_n}, m_n = {m_n}"
        )));
    }
    Ok(threshold_unchecked(c, p_n as f64, m_n as f64, kind))
}

fn threshold_unchecked(c: f64, p_n: f64, m_n: f64, kind: VariableKind) -> f64 {
    match kind {
        VariableKind::Continuous => c * m_n * (p_n.ln().powf(1.1) + m_n.ln().powf(1.1)),
        VariableKind::BinaryLinear => c * p_n.ln().powf(1.1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcmtResult {
    /// Selected variables in stage order, ascending within a stage.
    pub selected: Vec<usize>,
    pub per_stage_selected: Vec<Vec<usize>>,
    /// Number of stages that selected something (at least 1).
    pub stage_count: usize,
    /// Statistic of every screened variable, keyed by (stage, variable).
    pub statistics_trace: BTreeMap<(usize, usize), f64>,
    pub chosen_c: f64,
    pub indicator: Vec<bool>,
    /// The procedure halted because the conditioning design left too few
    /// residual degrees of freedom.
    pub overparameterized: bool,
    /// BIC of the post-selection fit, when it was computed.
    pub bic: Option<f64>,
    /// `(C, BIC)` for every grid value tried; `None` where BIC was unavailable.
    pub bic_trace: Vec<(f64, Option<f64>)>,
    pub warnings: Vec<String>,
}

/// Stage-1 selection only, at a fixed `c`.
pub fn one_stage_select(dataset: &Dataset, c: f64, config: &OcmtConfig) -> Result<OcmtResult> {
    let mut screener = Screener::new(dataset, config)?;
    screener.run(c, 1)
}

/// Multi-stage selection at a fixed `c`.
pub fn multi_stage_select(dataset: &Dataset, c: f64, config: &OcmtConfig) -> Result<OcmtResult> {
    let mut screener = Screener::new(dataset, config)?;
    let cap = config.stage_cap(dataset.p());
    screener.run(c, cap)
}

/// `n ln(RSS / n) + k ln n` for the post-selection OLS fit, where `k` is
/// the number of fitted coefficients (the total width of the selected
/// blocks).
pub fn bic_of_selection(dataset: &Dataset, selected: &[usize], basis: &BasisConfig) -> Result<f64> {
    let y = DVector::from_column_slice(dataset.y());
    let blocks = selected
        .iter()
        .map(|&j| dataset.design_block(j, basis))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&DesignBlock> = blocks.iter().collect();
    let fit = post_selection_ols(&refs, &y)?;
    let tss = y.add_scalar(-y.mean()).norm_squared();
    let size = blocks.iter().map(|b| b.width()).sum();
    Ok(bic_from_rss(fit.rss, tss, dataset.n(), size))
}

pub(crate) fn bic_from_rss(rss: f64, tss: f64, n: usize, size: usize) -> f64 {
    let floored = rss.max(RSS_FLOOR * tss).max(f64::MIN_POSITIVE);
    let n = n as f64;
    n * (floored / n).ln() + size as f64 * n.ln()
}

/// Multi-stage OCMT with `C` tuned by BIC over `config.c_grid`.
///
/// Exact BIC ties go to the larger `C`.
pub fn ocmt_with_bic(dataset: &Dataset, config: &OcmtConfig) -> Result<OcmtResult> {
    let mut screener = Screener::new(dataset, config)?;
    let cap = config.stage_cap(dataset.p());
    screener.tune(cap)
}

/// Stage-1-only selection with `C` tuned by BIC.
pub fn one_stage_with_bic(dataset: &Dataset, config: &OcmtConfig) -> Result<OcmtResult> {
    let mut screener = Screener::new(dataset, config)?;
    screener.tune(1)
}

#[derive(Debug, Clone)]
enum Screen {
    /// Per-variable statistic; `None` for selected or skipped variables.
    Stats(Vec<Option<f64>>),
    Overparameterized,
    Failed,
}

#[derive(Debug, Clone)]
struct ScreenEntry {
    screen: Screen,
    warnings: Vec<String>,
}

/// Cached statistics and post-selection fits for one dataset.
pub struct Screener<'a> {
    dataset: &'a Dataset,
    config: &'a OcmtConfig,
    y: DVector<f64>,
    tss: f64,
    blocks: Vec<Option<DesignBlock>>,
    block_warnings: Vec<String>,
    screens: HashMap<Vec<usize>, ScreenEntry>,
    rss: HashMap<Vec<usize>, Result<f64>>,
}

impl<'a> Screener<'a> {
    pub fn new(dataset: &'a Dataset, config: &'a OcmtConfig) -> Result<Self> {
        config.validate()?;
        let m_n = config.basis.m_n();
        if dataset.p() < 2 {
            return Err(Error::Config(format!(
                "need at least two candidate covariates, got {}",
                dataset.p()
            )));
        }
        if dataset.n() <= m_n + 2 {
            return Err(Error::Dimension(format!(
                "n = {} is too small for m_n = {m_n}",
                dataset.n()
            )));
        }
        let mut blocks = Vec::with_capacity(dataset.p());
        let mut block_warnings = Vec::new();
        for j in 0..dataset.p() {
            match dataset.design_block(j, &config.basis) {
                Ok(b) => blocks.push(Some(b)),
                Err(e) => {
                    block_warnings.push(format!(
                        "variable {} skipped: {e}",
                        dataset.names()[j]
                    ));
                    blocks.push(None);
                }
            }
        }
        let y = dataset.centered_y();
        let tss = y.norm_squared();
        Ok(Screener {
            dataset,
            config,
            y,
            tss,
            blocks,
            block_warnings,
            screens: HashMap::new(),
            rss: HashMap::new(),
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = &DesignBlock> {
        self.blocks.iter().flatten()
    }

    pub fn block(&self, j: usize) -> Option<&DesignBlock> {
        self.blocks.get(j).and_then(|b| b.as_ref())
    }

    /// Statistic of variable `l` given the (sorted) conditioning set, if it
    /// was screened.
    pub fn statistic(&mut self, l: usize, conditioning: &[usize]) -> Option<TestStat> {
        let mut key = conditioning.to_vec();
        key.sort_unstable();
        match &self.screen(&key).screen {
            Screen::Stats(stats) => stats[l].map(|value| TestStat {
                value,
                variable_index: l,
                conditioning_set: key.clone(),
            }),
            _ => None,
        }
    }

    fn screen(&mut self, key: &[usize]) -> &ScreenEntry {
        if !self.screens.contains_key(key) {
            let entry = self.compute_screen(key);
            self.screens.insert(key.to_vec(), entry);
        }
        &self.screens[key]
    }

    fn compute_screen(&self, key: &[usize]) -> ScreenEntry {
        let n = self.dataset.n();
        let m_n = self.config.basis.m_n();
        let members: Vec<&DesignBlock> = key.iter().filter_map(|&j| self.block(j)).collect();
        let width: usize = members.iter().map(|b| b.width()).sum();
        let remaining = (0..self.dataset.p()).any(|j| !key.contains(&j) && self.blocks[j].is_some());
        if !key.is_empty() && remaining && width + m_n + 1 >= n {
            return ScreenEntry {
                screen: Screen::Overparameterized,
                warnings: vec![format!(
                    "stopped: conditioning on {} columns leaves too few degrees of freedom",
                    width
                )],
            };
        }
        let conditioning = match Conditioning::new(&members, &self.y) {
            Ok(c) => c,
            Err(e) => {
                return ScreenEntry {
                    screen: Screen::Failed,
                    warnings: vec![format!("stopped: preselected design unusable: {e}")],
                }
            }
        };
        let nothing_left = conditioning.residual_ss() <= RSS_FLOOR * self.tss;
        let candidates: Vec<usize> = (0..self.dataset.p())
            .filter(|j| !key.contains(j) && self.blocks[*j].is_some())
            .collect();
        if candidates.is_empty() {
            return ScreenEntry {
                screen: Screen::Stats(vec![None; self.dataset.p()]),
                warnings: Vec::new(),
            };
        }

        let evaluate = |j: &usize| -> (usize, Result<f64>) {
            let block = self.blocks[*j].as_ref().expect("filtered above");
            let value = match conditioning.stat(block) {
                Ok(s) => Ok(s.value),
                // an exact fit with something left to explain dominates any threshold
                Err(Error::ZeroVariance { .. }) if !nothing_left => Ok(f64::INFINITY),
                Err(e) => Err(e),
            };
            (*j, value)
        };
        let outcomes: Vec<(usize, Result<f64>)> = if self.config.parallel_screening {
            candidates.par_iter().map(evaluate).collect()
        } else {
            candidates.iter().map(evaluate).collect()
        };

        let mut stats = vec![None; self.dataset.p()];
        let mut warnings = Vec::new();
        for (j, outcome) in outcomes {
            match outcome {
                Ok(v) => stats[j] = Some(v),
                Err(e) => {
                    if !nothing_left {
                        warnings.push(format!(
                            "variable {} skipped given {} preselected: {e}",
                            self.dataset.names()[j],
                            key.len()
                        ));
                    }
                }
            }
        }
        ScreenEntry {
            screen: Screen::Stats(stats),
            warnings,
        }
    }

    fn stage_threshold(&self, c: f64, j: usize, stage: usize) -> f64 {
        let kind = self.dataset.kind(j);
        let base = threshold_unchecked(
            c,
            self.dataset.p() as f64,
            self.config.basis.m_n() as f64,
            kind,
        );
        if stage == 1 {
            base
        } else {
            base * self.config.multiplier(kind)
        }
    }

    /// Runs the staged procedure at a fixed `c` with at most `cap` stages.
    pub fn run(&mut self, c: f64, cap: usize) -> Result<OcmtResult> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("threshold constant {c} is not positive")));
        }
        let p = self.dataset.p();
        let mut selected: Vec<usize> = Vec::new();
        let mut per_stage: Vec<Vec<usize>> = Vec::new();
        let mut trace = BTreeMap::new();
        let mut warnings = self.block_warnings.clone();
        let mut overparameterized = false;

        for stage in 1..=cap {
            let mut key = selected.clone();
            key.sort_unstable();
            let entry = self.screen(&key).clone();
            warnings.extend(entry.warnings);
            let stats = match entry.screen {
                Screen::Stats(stats) => stats,
                Screen::Overparameterized => {
                    overparameterized = true;
                    break;
                }
                Screen::Failed => break,
            };
            let mut added = Vec::new();
            for (j, value) in stats.iter().enumerate().take(p) {
                if let Some(v) = value {
                    trace.insert((stage, j), *v);
                    if *v > self.stage_threshold(c, j, stage) {
                        added.push(j);
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            selected.extend(&added);
            per_stage.push(added);
        }

        let mut indicator = vec![false; p];
        for &j in &selected {
            indicator[j] = true;
        }
        Ok(OcmtResult {
            stage_count: per_stage.len().max(1),
            selected,
            per_stage_selected: per_stage,
            statistics_trace: trace,
            chosen_c: c,
            indicator,
            overparameterized,
            bic: None,
            bic_trace: Vec::new(),
            warnings,
        })
    }

    /// Post-selection RSS of the centered response on the selected blocks.
    pub fn post_selection_rss(&mut self, selected: &[usize]) -> Result<f64> {
        let mut key = selected.to_vec();
        key.sort_unstable();
        if let Some(r) = self.rss.get(&key) {
            return r.clone();
        }
        let blocks: Vec<&DesignBlock> = key.iter().filter_map(|&j| self.block(j)).collect();
        let rss = post_selection_ols(&blocks, &self.y).map(|f| f.rss);
        self.rss.insert(key, rss.clone());
        rss
    }

    pub fn bic(&mut self, selected: &[usize]) -> Result<f64> {
        let rss = self.post_selection_rss(selected)?;
        let size = selected
            .iter()
            .filter_map(|&j| self.block(j))
            .map(|b| b.width())
            .sum();
        Ok(bic_from_rss(rss, self.tss, self.dataset.n(), size))
    }

    /// Runs every grid value with at most `cap` stages and keeps the
    /// BIC-minimizing selection.
    pub fn tune(&mut self, cap: usize) -> Result<OcmtResult> {
        let grid = self.config.c_grid.clone();
        let mut best: Option<(f64, OcmtResult)> = None;
        let mut fallback: Option<OcmtResult> = None;
        let mut bic_trace = Vec::with_capacity(grid.len());
        for &c in &grid {
            let result = self.run(c, cap)?;
            let bic = if result.overparameterized {
                None
            } else {
                match self.bic(&result.selected) {
                    Ok(b) => Some(b),
                    Err(Error::Overparameterized { .. }) => None,
                    Err(e) => return Err(e),
                }
            };
            bic_trace.push((c, bic));
            match bic {
                Some(b) if best.as_ref().is_none_or(|(current, _)| b <= *current) => {
                    best = Some((b, result));
                }
                Some(_) => {}
                None => fallback = Some(result),
            }
        }
        let mut chosen = match best {
            Some((b, mut r)) => {
                r.bic = Some(b);
                r
            }
            None => {
                let mut r = fallback.expect("grid is nonempty");
                r.overparameterized = true;
                r.warnings
                    .push("every C value stopped on overparameterization".into());
                r
            }
        };
        chosen.bic_trace = bic_trace;
        Ok(chosen)
    }
}
