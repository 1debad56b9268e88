//! Dense reference computations built on normal equations and explicit
//! projection matrices, independent of the QR code paths under test.

#![allow(dead_code)]

pub mod checks;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let width = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, width);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

fn gram(x: &DMatrix<f64>) -> Cholesky<f64, Dyn> {
    Cholesky::new(x.tr_mul(x)).expect("reference design has full column rank")
}

/// `(X'X)^{-1} X' y`
pub fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    gram(x).solve(&x.tr_mul(y))
}

/// `I - X (X'X)^{-1} X'`
pub fn annihilator(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let inv = gram(x).inverse();
    DMatrix::identity(n, n) - x * inv * x.transpose()
}

/// `y' P_X y / (y' M_X y / n)`
pub fn marginal_stat(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let rss = (annihilator(x) * y).norm_squared();
    (y.norm_squared() - rss) / (rss / n)
}

/// Statistic of `x` after partialling out `z`, with the variance taken
/// from the joint regression on `(z, x)`.
pub fn partitioned_stat(x: &DMatrix<f64>, z: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let m_z = annihilator(z);
    let y_r = &m_z * y;
    let x_r = &m_z * x;
    let explained = y_r.norm_squared() - (annihilator(&x_r) * &y_r).norm_squared();
    let joint_rss = (annihilator(&hstack(&[z, x])) * y).norm_squared();
    explained / (joint_rss / n)
}

/// Lower Cholesky factor `L` of `X'X`; `X = Q L'` with `Q` orthonormal.
fn factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    gram(x).l()
}

/// `||Q_j' v||` with `Q_j` any orthonormal basis of `span(X_j)`.
pub fn score_norm(x: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    factor(x)
        .solve_lower_triangular(&x.tr_mul(v))
        .expect("nonsingular factor")
        .norm()
}

/// Smallest penalty at which every group of the Lasso
/// `||y - sum X_j b_j||^2 + lambda sum ||X_j b_j||` is zero.
pub fn zero_bound(blocks: &[&DMatrix<f64>], y: &DVector<f64>) -> f64 {
    blocks
        .iter()
        .map(|x| 2.0 * score_norm(x, y))
        .fold(0.0, f64::max)
}

/// Largest subgradient violation of the weighted group Lasso at
/// `beta`, relative to `lambda * w_j`. `None` weights are excluded groups.
pub fn kkt_violation(
    blocks: &[&DMatrix<f64>],
    y: &DVector<f64>,
    beta: &[DVector<f64>],
    lambda: f64,
    weights: &[Option<f64>],
) -> f64 {
    let mut r = y.clone();
    for (x, b) in blocks.iter().zip(beta) {
        r -= *x * b;
    }
    let mut worst: f64 = 0.0;
    for ((x, b), w) in blocks.iter().zip(beta).zip(weights) {
        let Some(w) = w else {
            assert!(b.iter().all(|v| *v == 0.0), "excluded group moved");
            continue;
        };
        let l = factor(x);
        let grad = l
            .solve_lower_triangular(&(x.tr_mul(&r) * 2.0))
            .expect("nonsingular factor");
        let theta = l.transpose() * b;
        let scale = lambda * w;
        let v = if theta.norm() > 0.0 {
            (grad - &theta * (scale / theta.norm())).norm()
        } else {
            (grad.norm() - scale).max(0.0)
        };
        worst = worst.max(v / scale);
    }
    worst
}
