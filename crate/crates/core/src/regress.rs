//! Sieve least squares and the OCMT test statistics.
//!
//! Every solve goes through a thin QR factorization. The marginal statistic
//! for covariate `l` is
//!
//! ```text
//! X_l = y' P_l y / sigma2_l,    sigma2_l = RSS_l / n,
//! ```
//!
//! where `P_l` projects onto the columns of its design block. The
//! partitioned statistic replaces `y` and the block by their residuals
//! after regression on the preselected blocks `Z`, with `sigma2` taken
//! from the joint regression of `y` on `(Z, X_l)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::DesignBlock;
use crate::error::{Error, Result};
use crate::linalg::{hstack, ThinQr};

/// Residual variances below this are treated as an exact fit.
pub const MIN_SIGMA2: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    /// Constant term. [`ols`] fits none, so it is zero there;
    /// [`post_selection_ols`] stores the response mean.
    pub intercept: f64,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `rss / n`, without a degrees-of-freedom correction.
    pub sigma2_hat: f64,
}

/// Least squares of `y` on the columns of `design`.
pub fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, w) = design.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows, response has {}",
            y.len()
        )));
    }
    if w >= n {
        return Err(Error::Overparameterized { width: w, n });
    }
    let qr = ThinQr::new(design, None)?;
    let coefficients = qr.solve_r(&qr.project_coords(y));
    let residuals = y - design * &coefficients;
    let rss = residuals.norm_squared();
    Ok(OlsFit {
        coefficients,
        intercept: 0.0,
        residuals,
        rss,
        sigma2_hat: rss / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestStat {
    pub value: f64,
    pub variable_index: usize,
    /// Variables partialled out first; empty for the marginal statistic.
    pub conditioning_set: Vec<usize>,
}

/// `beta' (X'X / sigma2) beta` from the regression of `y` on one block.
pub fn marginal_stat(block: &DesignBlock, y: &DVector<f64>) -> Result<TestStat> {
    let fit = ols(block.values(), y)?;
    if fit.sigma2_hat < MIN_SIGMA2 {
        return Err(Error::ZeroVariance {
            sigma2: fit.sigma2_hat,
        });
    }
    let explained = (block.values() * &fit.coefficients).norm_squared();
    Ok(TestStat {
        value: explained / fit.sigma2_hat,
        variable_index: block.variable_index(),
        conditioning_set: Vec::new(),
    })
}

/// Statistic for `block_l` after partialling out `preselected`.
///
/// With no preselected blocks this is exactly [`marginal_stat`].
pub fn partitioned_stat(
    block_l: &DesignBlock,
    preselected: &[&DesignBlock],
    y: &DVector<f64>,
) -> Result<TestStat> {
    if preselected.is_empty() {
        return marginal_stat(block_l, y);
    }
    Conditioning::new(preselected, y)?.stat(block_l)
}

/// Residualizer for a fixed set of preselected blocks.
///
/// Factorizes the stacked preselected design once so that many candidate
/// blocks can be screened against it.
#[derive(Debug, Clone)]
pub struct Conditioning {
    qr: ThinQr,
    members: Vec<usize>,
    y_resid: DVector<f64>,
    n: usize,
}

impl Conditioning {
    pub fn new(preselected: &[&DesignBlock], y: &DVector<f64>) -> Result<Self> {
        let n = y.len();
        if let Some(b) = preselected.iter().find(|b| b.nrows() != n) {
            return Err(Error::Dimension(format!(
                "block {} has {} rows, response has {n}",
                b.variable_index(),
                b.nrows()
            )));
        }
        let mats: Vec<&DMatrix<f64>> = preselected.iter().map(|b| b.values()).collect();
        let stacked = hstack(n, &mats);
        if stacked.ncols() >= n {
            return Err(Error::Overparameterized {
                width: stacked.ncols(),
                n,
            });
        }
        let qr = ThinQr::new(&stacked, None)?;
        let y_resid = qr.residualize(y);
        Ok(Conditioning {
            qr,
            members: preselected.iter().map(|b| b.variable_index()).collect(),
            y_resid,
            n,
        })
    }

    /// Number of columns partialled out.
    pub fn width(&self) -> usize {
        self.qr.width()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// `||M_Z y||^2`
    pub fn residual_ss(&self) -> f64 {
        self.y_resid.norm_squared()
    }

    pub fn stat(&self, block: &DesignBlock) -> Result<TestStat> {
        if block.nrows() != self.n {
            return Err(Error::Dimension(format!(
                "block {} has {} rows, expected {}",
                block.variable_index(),
                block.nrows(),
                self.n
            )));
        }
        let total = self.width() + block.width();
        if total >= self.n {
            return Err(Error::Overparameterized {
                width: total,
                n: self.n,
            });
        }
        let x_resid = self.qr.residualize_matrix(block.values());
        // scale of the stacked design [Z, X_l]
        let scale = (self.qr.sigma_max.powi(2) + block.values().norm_squared()).sqrt();
        let inner = ThinQr::new(&x_resid, Some(scale))?;
        let coords = inner.project_coords(&self.y_resid);
        let rss = inner.residualize(&self.y_resid).norm_squared();
        let sigma2 = rss / self.n as f64;
        if sigma2 < MIN_SIGMA2 {
            return Err(Error::ZeroVariance { sigma2 });
        }
        Ok(TestStat {
            value: coords.norm_squared() / sigma2,
            variable_index: block.variable_index(),
            conditioning_set: self.members.clone(),
        })
    }
}

/// Joint least squares of `y` on the selected blocks plus an intercept.
///
/// Blocks are centered, so the intercept is the response mean and the
/// block coefficients are those of the regression of the demeaned
/// response. With no blocks, `rss = sum (y_i - mean)^2`.
pub fn post_selection_ols(blocks: &[&DesignBlock], y: &DVector<f64>) -> Result<OlsFit> {
    let n = y.len();
    let width: usize = blocks.iter().map(|b| b.width()).sum();
    if width >= n {
        return Err(Error::Overparameterized { width, n });
    }
    let mean = y.mean();
    let centered = y.add_scalar(-mean);
    let mut fit = if blocks.is_empty() {
        let rss = centered.norm_squared();
        OlsFit {
            coefficients: DVector::zeros(0),
            intercept: 0.0,
            residuals: centered,
            rss,
            sigma2_hat: rss / n as f64,
        }
    } else {
        if let Some(b) = blocks.iter().find(|b| b.nrows() != n) {
            return Err(Error::Dimension(format!(
                "block {} has {} rows, response has {n}",
                b.variable_index(),
                b.nrows()
            )));
        }
        let mats: Vec<&DMatrix<f64>> = blocks.iter().map(|b| b.values()).collect();
        ols(&hstack(n, &mats), &centered)?
    };
    fit.intercept = mean;
    Ok(fit)
}
