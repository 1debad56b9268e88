//! Centered B-spline sieve blocks on the unit interval.
//!
//! A continuous covariate is expanded into `m_n + 1` clamped B-splines on
//! equally spaced knots. The first function is dropped and the remaining
//! `m_n` columns are centered at their sample means, so the block spans the
//! same centered function space as the full partition of unity without its
//! exact linear dependence. Binary covariates enter linearly as a single
//! centered column.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ThinQr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotRule {
    EquallySpaced,
}

/// How a covariate enters the additive model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    /// Unknown smooth function, approximated by `m_n` spline columns.
    Continuous,
    /// Linear effect of a single (typically 0/1) column.
    BinaryLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisConfig {
    m_n: usize,
    spline_order: usize,
    knot_rule: KnotRule,
}

impl BasisConfig {
    pub fn new(m_n: usize, spline_order: usize) -> Result<Self> {
        if spline_order < 2 {
            return Err(Error::Config(format!(
                "spline order must be at least 2, got {spline_order}"
            )));
        }
        if m_n < spline_order {
            return Err(Error::Config(format!(
                "m_n = {m_n} is smaller than the spline order {spline_order}"
            )));
        }
        Ok(BasisConfig {
            m_n,
            spline_order,
            knot_rule: KnotRule::EquallySpaced,
        })
    }

    /// Cubic splines with `m_n` columns per continuous covariate.
    pub fn cubic(m_n: usize) -> Result<Self> {
        Self::new(m_n, 4)
    }

    /// Cubic splines with `m_n = floor(n^(1/4)) + 1`, raised to 4 when
    /// `n < 81` so that a cubic basis exists.
    pub fn for_sample_size(n: usize) -> Result<Self> {
        Self::cubic(default_m_n(n).max(4))
    }

    pub fn m_n(&self) -> usize {
        self.m_n
    }

    pub fn spline_order(&self) -> usize {
        self.spline_order
    }

    pub fn knot_rule(&self) -> KnotRule {
        self.knot_rule
    }

    /// Number of raw B-splines evaluated before the first is dropped.
    pub fn raw_len(&self) -> usize {
        self.m_n + 1
    }

    /// Clamped knot vector: `order` copies of each endpoint around
    /// `raw_len - order` equally spaced interior knots.
    pub fn knots(&self) -> Vec<f64> {
        let interior = self.raw_len() - self.spline_order;
        let mut knots = Vec::with_capacity(self.raw_len() + self.spline_order);
        knots.extend(std::iter::repeat(0.0).take(self.spline_order));
        knots.extend((1..=interior).map(|i| i as f64 / (interior + 1) as f64));
        knots.extend(std::iter::repeat(1.0).take(self.spline_order));
        knots
    }
}

/// `floor(n^(1/4)) + 1`, computed in integers.
pub fn default_m_n(n: usize) -> usize {
    let mut root = (n as f64).powf(0.25) as usize;
    while (root + 1).pow(4) <= n {
        root += 1;
    }
    while root > 0 && root.pow(4) > n {
        root -= 1;
    }
    root + 1
}

/// Values of all `m_n + 1` raw B-splines at `x`.
///
/// Uses the triangular de Boor recurrence over the knot span containing
/// `x`; the right endpoint belongs to the last span.
pub fn raw_bspline_basis(x: f64, config: &BasisConfig) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { value: x });
    }
    let knots = config.knots();
    let mut out = vec![0.0; config.raw_len()];
    fill_raw_basis(x, config, &knots, &mut out);
    Ok(out)
}

fn fill_raw_basis(x: f64, config: &BasisConfig, knots: &[f64], out: &mut [f64]) {
    let degree = config.spline_order - 1;
    let count = config.raw_len();
    // span index mu with knots[mu] <= x < knots[mu + 1], degree <= mu < count
    let mut span = degree;
    while span + 1 < count && x >= knots[span + 1] {
        span += 1;
    }

    let mut values = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }

    out.iter_mut().for_each(|v| *v = 0.0);
    out[span - degree..=span].copy_from_slice(&values);
}

/// Sieve design matrix for one covariate, centered at training means.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    values: DMatrix<f64>,
    column_means: Vec<f64>,
    variable_index: usize,
    kind: VariableKind,
    basis: Option<BasisConfig>,
}

impl DesignBlock {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn variable_index(&self) -> usize {
        self.variable_index
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    /// Training-sample means subtracted from each raw column.
    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_means_removed(&self) -> bool {
        true
    }

    /// Block from caller-supplied sieve columns, centered here. Such a
    /// block cannot be evaluated at new points.
    pub fn from_columns(mut values: DMatrix<f64>, variable_index: usize) -> Result<DesignBlock> {
        if values.ncols() == 0 || values.nrows() < 2 {
            return Err(Error::Dimension("custom block needs rows and columns".into()));
        }
        let column_means = center_columns(&mut values);
        ThinQr::new(&values, None)?;
        Ok(DesignBlock {
            values,
            column_means,
            variable_index,
            kind: VariableKind::Continuous,
            basis: None,
        })
    }

    /// Evaluates the block at new covariate values with the training
    /// centering constants. Continuous inputs are clamped to `[0, 1]`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(x.len(), self.width());
        match (self.kind, &self.basis) {
            (VariableKind::Continuous, None) => {
                return Err(Error::Config(format!(
                    "block {} has custom columns and cannot be evaluated",
                    self.variable_index
                )));
            }
            (VariableKind::Continuous, Some(config)) => {
                let knots = config.knots();
                let mut raw = vec![0.0; config.raw_len()];
                for (i, &xi) in x.iter().enumerate() {
                    fill_raw_basis(xi.clamp(0.0, 1.0), config, &knots, &mut raw);
                    for (c, mean) in self.column_means.iter().enumerate() {
                        out[(i, c)] = raw[c + 1] - mean;
                    }
                }
            }
            (VariableKind::BinaryLinear, _) => {
                for (i, &xi) in x.iter().enumerate() {
                    out[(i, 0)] = xi - self.column_means[0];
                }
            }
        }
        Ok(out)
    }
}

/// Builds the centered design block for one covariate column.
pub fn build_design_block(
    x: &[f64],
    kind: VariableKind,
    config: &BasisConfig,
    variable_index: usize,
) -> Result<DesignBlock> {
    let n = x.len();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension(format!(
            "covariate {variable_index} contains non-finite values"
        )));
    }
    let (mut values, basis) = match kind {
        VariableKind::Continuous => {
            if n < config.m_n() + 2 {
                return Err(Error::Dimension(format!(
                    "n = {n} is too small for m_n = {}",
                    config.m_n()
                )));
            }
            if let Some(&bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain { value: bad });
            }
            let knots = config.knots();
            let mut raw = vec![0.0; config.raw_len()];
            let mut values = DMatrix::zeros(n, config.m_n());
            for (i, &xi) in x.iter().enumerate() {
                fill_raw_basis(xi, config, &knots, &mut raw);
                for c in 0..config.m_n() {
                    values[(i, c)] = raw[c + 1];
                }
            }
            (values, Some(*config))
        }
        VariableKind::BinaryLinear => {
            if n < 2 {
                return Err(Error::Dimension("need at least two rows".into()));
            }
            (DMatrix::from_column_slice(n, 1, x), None)
        }
    };

    let column_means = center_columns(&mut values);
    ThinQr::new(&values, None)?;

    Ok(DesignBlock {
        values,
        column_means,
        variable_index,
        kind,
        basis,
    })
}

fn center_columns(values: &mut DMatrix<f64>) -> Vec<f64> {
    values
        .column_iter_mut()
        .map(|mut col| {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            mean
        })
        .collect()
}

/// Empirical min-max map onto `[0, 1]`; out-of-sample values are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitMap {
    pub min: f64,
    pub max: f64,
}

impl UnitMap {
    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

pub fn rescale_to_unit(x: &[f64]) -> Result<(Vec<f64>, UnitMap)> {
    let (min, max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(min.is_finite() && max.is_finite()) || max <= min {
        return Err(Error::Degenerate);
    }
    let map = UnitMap { min, max };
    Ok((x.iter().map(|&v| map.apply(v)).collect(), map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook recursive Cox-de Boor definition, with the right endpoint
    /// assigned to the last nondegenerate interval.
    fn cox_de_boor(i: usize, order: usize, x: f64, knots: &[f64]) -> f64 {
        if order == 1 {
            let last = knots.len() - 1;
            let in_span = knots[i] <= x && x < knots[i + 1];
            let right_end = x == knots[last]
                && knots[i + 1] == knots[last]
                && knots[i] < knots[i + 1];
            return if in_span || right_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + order - 1] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(i, order - 1, x, knots);
        }
        let d2 = knots[i + order] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + order] - x) / d2 * cox_de_boor(i + 1, order - 1, x, knots);
        }
        v
    }

    #[test]
    fn default_m_n_rule() {
        assert_eq!(default_m_n(200), 4);
        assert_eq!(default_m_n(400), 5);
        assert_eq!(default_m_n(81), 4);
        assert_eq!(default_m_n(80), 3);
        assert_eq!(default_m_n(1000), 6);
    }

    #[test]
    fn config_validation() {
        assert!(BasisConfig::new(3, 4).is_err());
        assert!(BasisConfig::new(5, 1).is_err());
        let c = BasisConfig::cubic(4).unwrap();
        assert_eq!(c.knots(), vec![0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn left_endpoint_is_first_function() {
        let c = BasisConfig::cubic(4).unwrap();
        let v = raw_bspline_basis(0.0, &c).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let v = raw_bspline_basis(1.0, &c).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn midpoint_golden_values() {
        // Cox-de Boor by hand on knots (0,0,0,0,.5,1,1,1,1) at the interior knot.
        let c = BasisConfig::cubic(4).unwrap();
        let v = raw_bspline_basis(0.5, &c).unwrap();
        let golden = [0.0, 0.25, 0.5, 0.25, 0.0];
        for (a, b) in v.iter().zip(golden) {
            assert!((a - b).abs() < 1e-15, "{v:?}");
        }
        let knots = c.knots();
        for (i, a) in v.iter().enumerate() {
            assert!((a - cox_de_boor(i, 4, 0.5, &knots)).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let c = BasisConfig::cubic(4).unwrap();
        assert!(matches!(raw_bspline_basis(1.2, &c), Err(Error::Domain { .. })));
        assert!(matches!(raw_bspline_basis(-1e-9, &c), Err(Error::Domain { .. })));
    }

    #[test]
    fn constant_column_is_rank_error() {
        let c = BasisConfig::cubic(4).unwrap();
        let x = vec![0.3; 20];
        assert!(matches!(
            build_design_block(&x, VariableKind::Continuous, &c, 0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn binary_block_is_centered_column() {
        let c = BasisConfig::cubic(4).unwrap();
        let b = build_design_block(&[0.0, 1.0, 0.0, 1.0], VariableKind::BinaryLinear, &c, 2)
            .unwrap();
        assert_eq!(b.width(), 1);
        assert_eq!(b.values().as_slice(), &[-0.5, 0.5, -0.5, 0.5]);
        assert_eq!(b.variable_index(), 2);
    }

    #[test]
    fn uniform_block_is_centered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let c = BasisConfig::cubic(5).unwrap();
        let b = build_design_block(&x, VariableKind::Continuous, &c, 0).unwrap();
        assert_eq!(b.values().shape(), (400, 5));
        for col in b.values().column_iter() {
            assert!(col.mean().abs() < 1e-10);
        }
        // training rows reproduce the block exactly
        let again = b.evaluate(&x).unwrap();
        assert_eq!(&again, b.values());
    }

    #[test]
    fn small_n_rejected() {
        let c = BasisConfig::cubic(5).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert!(matches!(
            build_design_block(&x, VariableKind::Continuous, &c, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rescale_examples() {
        let (v, map) = rescale_to_unit(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        assert_eq!(map.apply(8.0), 1.0);
        assert_eq!(map.apply(0.0), 0.0);
        let (v, _) = rescale_to_unit(&[0.0, 1.0]).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
        assert_eq!(rescale_to_unit(&[3.0, 3.0]), Err(Error::Degenerate));
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_local_support(x in 0.0f64..=1.0, m_n in 4usize..12) {
            let c = BasisConfig::cubic(m_n).unwrap();
            let v = raw_bspline_basis(x, &c).unwrap();
            let sum: f64 = v.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|b| *b >= 0.0));
            prop_assert!(v.iter().filter(|b| **b != 0.0).count() <= 4);
        }

        #[test]
        fn agrees_with_recursive_definition(x in 0.0f64..=1.0, m_n in 2usize..9, order in 2usize..5) {
            prop_assume!(m_n >= order);
            let c = BasisConfig::new(m_n, order).unwrap();
            let v = raw_bspline_basis(x, &c).unwrap();
            let knots = c.knots();
            for (i, a) in v.iter().enumerate() {
                prop_assert!((a - cox_de_boor(i, order, x, &knots)).abs() < 1e-12);
            }
        }
    }
}
