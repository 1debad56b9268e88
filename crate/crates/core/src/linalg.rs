//! Thin orthogonal factorizations and the rank test shared by every solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Thin QR factorization `A = Q R` of a tall matrix with full column rank.
#[derive(Debug, Clone)]
pub(crate) struct ThinQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Largest singular value of `A` (equal to that of `R`).
    pub sigma_max: f64,
}

impl ThinQr {
    /// Factorizes `a`, failing when its columns are numerically dependent
    /// relative to `scale` (pass `None` to use the matrix's own largest
    /// singular value).
    pub fn new(a: &DMatrix<f64>, scale: Option<f64>) -> Result<Self> {
        let (n, w) = a.shape();
        if w == 0 {
            return Ok(ThinQr {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
                sigma_max: 0.0,
            });
        }
        if n < w {
            return Err(Error::Dimension(format!(
                "{n} rows cannot support {w} columns"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("design contains non-finite entries".into()));
        }
        let qr = a.clone().qr();
        let r = qr.r();
        let sv = r.singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let reference = scale.unwrap_or(sigma_max);
        let ratio = if reference > 0.0 { sigma_min / reference } else { 0.0 };
        if !(ratio >= RANK_TOLERANCE) {
            return Err(Error::Singular { ratio });
        }
        Ok(ThinQr {
            q: qr.q(),
            r,
            sigma_max,
        })
    }

    pub fn width(&self) -> usize {
        self.r.ncols()
    }

    /// `Q' v`
    pub fn project_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.q.tr_mul(v)
    }

    /// `v - Q Q' v`
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.width() == 0 {
            return v.clone();
        }
        v - &self.q * self.q.tr_mul(v)
    }

    /// `M - Q Q' M`
    pub fn residualize_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.width() == 0 {
            return m.clone();
        }
        m - &self.q * self.q.tr_mul(m)
    }

    /// Solves `R x = c` by back substitution.
    pub fn solve_r(&self, c: &DVector<f64>) -> DVector<f64> {
        if self.width() == 0 {
            return DVector::zeros(0);
        }
        self.r
            .solve_upper_triangular(c)
            .expect("R has a nonzero diagonal once the rank test passed")
    }
}

/// Horizontally concatenates column blocks.
pub(crate) fn hstack(n: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let width: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut offset = 0;
    for b in blocks {
        out.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    out
}
