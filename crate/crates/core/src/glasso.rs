//! Group Lasso and adaptive group Lasso by block coordinate descent.
//!
//! Each group is orthonormalized first (`X_j = Q_j R_j`), and the solver
//! works with `theta_j = R_j beta_j`. The objective is
//!
//! ```text
//! ||y - sum_j Q_j theta_j||^2 + lambda * sum_j w_j ||theta_j||
//! ```
//!
//! so every block update is the closed-form group soft threshold
//! `theta_j = (1 - lambda w_j / (2 ||g_j||))_+ g_j` with `g_j = Q_j' r_j`.
//! Coefficients are mapped back to the original block parameterization on
//! exit. KKT certificates are checked in the orthonormal coordinates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::DesignBlock;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::ThinQr;
use crate::ocmt::{bic_from_rss, OcmtResult};
use crate::regress::{post_selection_ols, OlsFit};

pub const MAX_SWEEPS: usize = 1000;
pub const RELATIVE_TOLERANCE: f64 = 1e-8;
pub const KKT_TOLERANCE: f64 = 1e-5;
/// Sweeps continue until the violation falls below this, leaving headroom
/// under [`KKT_TOLERANCE`] for independent re-verification.
const KKT_TARGET: f64 = 1e-6;
pub const GRID_POINTS: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GroupWeight {
    Finite(f64),
    /// Infinite penalty: the group is held at zero.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPenaltySpec {
    pub lambda: f64,
    pub group_weights: Vec<GroupWeight>,
}

impl GroupPenaltySpec {
    /// Plain group Lasso: every weight is 1.
    pub fn uniform(lambda: f64, groups: usize) -> Self {
        GroupPenaltySpec {
            lambda,
            group_weights: vec![GroupWeight::Finite(1.0); groups],
        }
    }

    /// Adaptive weights `1 / ||initial_j||`, excluding groups whose initial
    /// estimate is zero.
    pub fn adaptive(lambda: f64, initial_norms: &[f64]) -> Self {
        GroupPenaltySpec {
            lambda,
            group_weights: initial_norms
                .iter()
                .map(|&norm| {
                    if norm > 0.0 {
                        GroupWeight::Finite(1.0 / norm)
                    } else {
                        GroupWeight::Excluded
                    }
                })
                .collect(),
        }
    }

    fn validate(&self, groups: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} is not >= 0", self.lambda)));
        }
        if self.group_weights.len() != groups {
            return Err(Error::Dimension(format!(
                "{} weights for {groups} groups",
                self.group_weights.len()
            )));
        }
        for w in &self.group_weights {
            if let GroupWeight::Finite(v) = w {
                if !(*v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("group weight {v} is not >= 0")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaGrid {
    /// Strictly decreasing from `0.5 ||y||`.
    pub values: Vec<f64>,
    /// `lambda_min >= lambda_max`; only `lambda_max` is kept.
    pub degenerate: bool,
}

/// `lambda_j = exp(ln lmax + (ln lmin - ln lmax) j / 30)`, `j = 0..=30`,
/// with `lmax = 0.5 ||y||` and `lmin = max(0.05, 1e-5 ||y||)`.
pub fn lambda_grid(y_norm: f64) -> Result<LambdaGrid> {
    if !(y_norm > 0.0 && y_norm.is_finite()) {
        return Err(Error::Config(format!("response norm {y_norm} is not positive")));
    }
    let max = 0.5 * y_norm;
    let min = f64::max(0.05, 1e-5 * y_norm);
    if min >= max {
        return Ok(LambdaGrid {
            values: vec![max],
            degenerate: true,
        });
    }
    let steps = (GRID_POINTS - 1) as f64;
    let values = (0..GRID_POINTS)
        .map(|j| {
            if j == 0 {
                max
            } else {
                (max.ln() + (min.ln() - max.ln()) * j as f64 / steps).exp()
            }
        })
        .collect();
    Ok(LambdaGrid {
        values,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupLassoFit {
    /// Per-group coefficients in the caller's block parameterization.
    #[serde(skip)]
    pub coefficients: Vec<DVector<f64>>,
    pub active_groups: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub chosen_lambda: f64,
    /// Largest KKT violation relative to `lambda * w_j`.
    pub kkt_violation: f64,
    pub rss: f64,
}

/// Groups factorized once for repeated solves.
#[derive(Debug, Clone)]
pub struct GroupDesign {
    groups: Vec<ThinQr>,
    n: usize,
}

impl GroupDesign {
    pub fn new(blocks: &[&DMatrix<f64>]) -> Result<Self> {
        let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
        let groups = blocks
            .iter()
            .map(|b| {
                if b.nrows() != n {
                    return Err(Error::Dimension("groups differ in row count".into()));
                }
                if b.ncols() == 0 {
                    return Err(Error::Dimension("empty group".into()));
                }
                ThinQr::new(b, None)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupDesign { groups, n })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `||Q_j' v||` for each group.
    pub fn score_norms(&self, v: &DVector<f64>) -> Vec<f64> {
        self.groups.iter().map(|g| g.project_coords(v).norm()).collect()
    }

    fn to_theta(&self, j: usize, beta: &DVector<f64>) -> DVector<f64> {
        &self.groups[j].r * beta
    }

    fn to_beta(&self, j: usize, theta: &DVector<f64>) -> DVector<f64> {
        if theta.iter().all(|v| *v == 0.0) {
            return DVector::zeros(theta.len());
        }
        self.groups[j].solve_r(theta)
    }

    fn residual(&self, y: &DVector<f64>, theta: &[DVector<f64>]) -> DVector<f64> {
        let mut r = y.clone();
        for (g, t) in self.groups.iter().zip(theta) {
            if t.iter().any(|v| *v != 0.0) {
                r -= &g.q * t;
            }
        }
        r
    }

    /// Solves the weighted group Lasso, starting from `theta0` given in
    /// orthonormal coordinates.
    fn solve_theta(
        &self,
        y: &DVector<f64>,
        penalty: &GroupPenaltySpec,
        theta0: Vec<DVector<f64>>,
    ) -> (Vec<DVector<f64>>, Solve) {
        let lambda = penalty.lambda;
        let mut theta = theta0;
        for (t, w) in theta.iter_mut().zip(&penalty.group_weights) {
            if matches!(w, GroupWeight::Excluded) {
                t.fill(0.0);
            }
        }
        let objective = |r: &DVector<f64>, theta: &[DVector<f64>]| -> f64 {
            let pen: f64 = theta
                .iter()
                .zip(&penalty.group_weights)
                .map(|(t, w)| match w {
                    GroupWeight::Finite(w) => w * t.norm(),
                    GroupWeight::Excluded => 0.0,
                })
                .sum();
            r.norm_squared() + lambda * pen
        };

        let mut r = self.residual(y, &theta);
        let mut trace = vec![objective(&r, &theta)];
        let mut converged = false;
        let mut iterations = 0;
        let mut violation = f64::INFINITY;
        while iterations < MAX_SWEEPS {
            iterations += 1;
            for (j, g) in self.groups.iter().enumerate() {
                let w = match penalty.group_weights[j] {
                    GroupWeight::Finite(w) => w,
                    GroupWeight::Excluded => continue,
                };
                let score = g.project_coords(&r) + &theta[j];
                let norm = score.norm();
                let updated = if lambda * w >= 2.0 * norm {
                    DVector::zeros(score.len())
                } else {
                    score * (1.0 - lambda * w / (2.0 * norm))
                };
                let delta = &updated - &theta[j];
                if delta.iter().any(|v| *v != 0.0) {
                    r -= &g.q * delta;
                }
                theta[j] = updated;
            }
            r = self.residual(y, &theta);
            let obj = objective(&r, &theta);
            let prev = *trace.last().expect("trace starts nonempty");
            trace.push(obj);
            if (prev - obj).abs() <= RELATIVE_TOLERANCE * prev.abs().max(f64::MIN_POSITIVE) {
                violation = self.kkt_violation(&r, &theta, penalty, y.norm());
                if violation <= KKT_TARGET {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            violation = self.kkt_violation(&r, &theta, penalty, y.norm());
            converged = violation <= KKT_TOLERANCE;
        }
        let rss = r.norm_squared();
        (
            theta,
            Solve {
                trace,
                iterations,
                converged,
                violation,
                rss,
            },
        )
    }

    /// Largest violation of the subgradient conditions, relative to
    /// `lambda * w_j` (plus a round-off floor scaled by `||y||`).
    fn kkt_violation(
        &self,
        r: &DVector<f64>,
        theta: &[DVector<f64>],
        penalty: &GroupPenaltySpec,
        y_norm: f64,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, g) in self.groups.iter().enumerate() {
            let w = match penalty.group_weights[j] {
                GroupWeight::Finite(w) => w,
                GroupWeight::Excluded => continue,
            };
            let scale = (penalty.lambda * w).max(1e-9 * y_norm.max(1.0));
            let grad = g.project_coords(r) * 2.0;
            let norm = theta[j].norm();
            let v = if norm > 0.0 {
                let sub = &theta[j] * (penalty.lambda * w / norm);
                (grad - sub).norm() / scale
            } else {
                (grad.norm() - penalty.lambda * w).max(0.0) / scale
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Fits at one penalty, warm-started from `warm_start` (original
    /// parameterization) when given.
    pub fn fit(
        &self,
        y: &DVector<f64>,
        penalty: &GroupPenaltySpec,
        warm_start: Option<&[DVector<f64>]>,
    ) -> Result<GroupLassoFit> {
        penalty.validate(self.len())?;
        if y.len() != self.n && !self.is_empty() {
            return Err(Error::Dimension(format!(
                "response has {} rows, groups have {}",
                y.len(),
                self.n
            )));
        }
        let theta0 = match warm_start {
            Some(beta) => {
                if beta.len() != self.len() {
                    return Err(Error::Dimension("warm start has wrong group count".into()));
                }
                beta.iter()
                    .enumerate()
                    .map(|(j, b)| {
                        if b.len() != self.groups[j].width() {
                            return Err(Error::Dimension("warm start has wrong width".into()));
                        }
                        Ok(self.to_theta(j, b))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => self
                .groups
                .iter()
                .map(|g| DVector::zeros(g.width()))
                .collect(),
        };
        let (theta, solve) = self.solve_theta(y, penalty, theta0);
        Ok(self.finish(theta, solve, penalty.lambda))
    }

    fn finish(&self, theta: Vec<DVector<f64>>, solve: Solve, lambda: f64) -> GroupLassoFit {
        let active_groups = theta
            .iter()
            .enumerate()
            .filter(|(_, t)| t.norm() > 0.0)
            .map(|(j, _)| j)
            .collect();
        let coefficients = theta
            .iter()
            .enumerate()
            .map(|(j, t)| self.to_beta(j, t))
            .collect();
        GroupLassoFit {
            coefficients,
            active_groups,
            objective_trace: solve.trace,
            iterations: solve.iterations,
            converged: solve.converged,
            chosen_lambda: lambda,
            kkt_violation: solve.violation,
            rss: solve.rss,
        }
    }

    /// Norms of each group's coefficients in orthonormal coordinates.
    pub fn theta_norms(&self, fit: &GroupLassoFit) -> Vec<f64> {
        fit.coefficients
            .iter()
            .enumerate()
            .map(|(j, b)| self.to_theta(j, b).norm())
            .collect()
    }

    /// Walks `grid` from largest to smallest with warm starts and returns
    /// the BIC-minimizing fit (ties favor the larger lambda) with every
    /// grid point's BIC.
    pub fn tune(
        &self,
        y: &DVector<f64>,
        grid: &[f64],
        weights: &[GroupWeight],
    ) -> Result<(GroupLassoFit, Vec<(f64, f64)>)> {
        let tss = y.norm_squared();
        let n = y.len();
        let mut warm: Option<Vec<DVector<f64>>> = None;
        let mut best: Option<(f64, GroupLassoFit)> = None;
        let mut trace = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let penalty = GroupPenaltySpec {
                lambda,
                group_weights: weights.to_vec(),
            };
            let fit = self.fit(y, &penalty, warm.as_deref())?;
            let size = fit.active_groups.iter().map(|&g| self.groups[g].width()).sum();
            let bic = bic_from_rss(fit.rss, tss, n, size);
            trace.push((lambda, bic));
            warm = Some(fit.coefficients.clone());
            if best.as_ref().is_none_or(|(b, _)| bic < *b) {
                best = Some((bic, fit));
            }
        }
        let (_, fit) = best.ok_or(Error::Empty("lambda grid"))?;
        Ok((fit, trace))
    }
}

#[derive(Debug)]
struct Solve {
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    violation: f64,
    rss: f64,
}

/// Single weighted group Lasso fit.
pub fn group_lasso_bcd(
    blocks: &[&DMatrix<f64>],
    y: &DVector<f64>,
    penalty: &GroupPenaltySpec,
    warm_start: Option<&[DVector<f64>]>,
) -> Result<GroupLassoFit> {
    GroupDesign::new(blocks)?.fit(y, penalty, warm_start)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveFit {
    /// Plain group Lasso at the BIC-chosen lambda.
    pub initial: GroupLassoFit,
    /// Adaptive refit; `None` when the first step zeroed every group.
    pub adaptive: Option<GroupLassoFit>,
    pub initial_bic_trace: Vec<(f64, f64)>,
    pub adaptive_bic_trace: Vec<(f64, f64)>,
    pub lambda_grid_degenerate: bool,
}

impl AdaptiveFit {
    /// Groups surviving both steps.
    pub fn active_groups(&self) -> &[usize] {
        match &self.adaptive {
            Some(fit) => &fit.active_groups,
            None => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.adaptive.is_none()
    }
}

/// Two-step adaptive group Lasso with both lambdas chosen by BIC on the
/// grid from [`lambda_grid`]. Pass a demeaned response.
pub fn adaptive_group_lasso(blocks: &[&DMatrix<f64>], y: &DVector<f64>) -> Result<AdaptiveFit> {
    adaptive_group_lasso_on_grid(blocks, y, &lambda_grid(y.norm())?)
}

/// [`adaptive_group_lasso`] over a caller-supplied grid.
pub fn adaptive_group_lasso_on_grid(
    blocks: &[&DMatrix<f64>],
    y: &DVector<f64>,
    grid: &LambdaGrid,
) -> Result<AdaptiveFit> {
    let design = GroupDesign::new(blocks)?;
    let uniform = vec![GroupWeight::Finite(1.0); design.len()];
    let (initial, initial_bic_trace) = design.tune(y, &grid.values, &uniform)?;
    if initial.active_groups.is_empty() {
        return Ok(AdaptiveFit {
            initial,
            adaptive: None,
            initial_bic_trace,
            adaptive_bic_trace: Vec::new(),
            lambda_grid_degenerate: grid.degenerate,
        });
    }
    let norms = design.theta_norms(&initial);
    let weights = GroupPenaltySpec::adaptive(0.0, &norms).group_weights;
    let (adaptive, adaptive_bic_trace) = design.tune(y, &grid.values, &weights)?;
    Ok(AdaptiveFit {
        initial,
        adaptive: Some(adaptive),
        initial_bic_trace,
        adaptive_bic_trace,
        lambda_grid_degenerate: grid.degenerate,
    })
}

/// Selection after the adaptive group Lasso plus its post-selection OLS.
#[derive(Debug, Clone)]
pub struct Cleanup {
    /// Surviving variable indices, ascending.
    pub selected: Vec<usize>,
    pub fit: OlsFit,
    pub blocks: Vec<DesignBlock>,
    pub lasso: Option<AdaptiveFit>,
}

/// Runs the adaptive group Lasso over the variables chosen by OCMT and
/// refits OLS on the survivors. Never adds variables.
pub fn post_ocmt_cleanup(
    dataset: &Dataset,
    ocmt_result: &OcmtResult,
    basis: &crate::basis::BasisConfig,
) -> Result<Cleanup> {
    let mut candidates = ocmt_result.selected.clone();
    candidates.sort_unstable();
    let blocks = candidates
        .iter()
        .map(|&j| dataset.design_block(j, basis))
        .collect::<Result<Vec<_>>>()?;
    select_among(dataset, blocks)
}

/// Adaptive group Lasso over every usable covariate, then post-selection
/// OLS on the survivors.
pub fn aglasso_select(dataset: &Dataset, basis: &crate::basis::BasisConfig) -> Result<Cleanup> {
    let blocks = (0..dataset.p())
        .filter_map(|j| dataset.design_block(j, basis).ok())
        .collect();
    select_among(dataset, blocks)
}

fn select_among(dataset: &Dataset, blocks: Vec<DesignBlock>) -> Result<Cleanup> {
    let y = dataset.centered_y();
    let raw_y = DVector::from_column_slice(dataset.y());
    if blocks.is_empty() || y.norm() == 0.0 {
        return Ok(Cleanup {
            selected: Vec::new(),
            fit: post_selection_ols(&[], &raw_y)?,
            blocks: Vec::new(),
            lasso: None,
        });
    }
    let mats: Vec<&DMatrix<f64>> = blocks.iter().map(|b| b.values()).collect();
    // grid endpoints scale with the observed response, mean included
    let lasso = adaptive_group_lasso_on_grid(&mats, &y, &lambda_grid(raw_y.norm())?)?;
    let survivors: Vec<DesignBlock> = lasso
        .active_groups()
        .iter()
        .map(|&g| blocks[g].clone())
        .collect();
    let refs: Vec<&DesignBlock> = survivors.iter().collect();
    let fit = post_selection_ols(&refs, &raw_y)?;
    Ok(Cleanup {
        selected: survivors.iter().map(|b| b.variable_index()).collect(),
        fit,
        blocks: survivors,
        lasso: Some(lasso),
    })
}
