use serde::Serialize;

use crate::basis::{build_design_block, BasisConfig, DesignBlock, UnitMap, VariableKind};
use crate::error::{Error, Result};

/// How a raw input column was mapped onto the model scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ColumnTransform {
    /// `ln(1 + v)` applied before the unit map.
    pub log1p: bool,
    pub unit_map: Option<UnitMap>,
}

impl ColumnTransform {
    pub fn apply(&self, v: f64) -> f64 {
        let v = if self.log1p { v.ln_1p() } else { v };
        match &self.unit_map {
            Some(map) => map.apply(v),
            None => v,
        }
    }
}

/// Response plus `p_n` candidate covariates on the model scale.
///
/// Continuous columns lie in `[0, 1]`; binary columns hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    kinds: Vec<VariableKind>,
    transforms: Vec<ColumnTransform>,
    names: Vec<String>,
}

impl Dataset {
    /// Columns named `X1..Xp` with identity transforms.
    pub fn new(y: Vec<f64>, columns: Vec<Vec<f64>>, kinds: Vec<VariableKind>) -> Result<Self> {
        let p = columns.len();
        let names = (1..=p).map(|j| format!("X{j}")).collect();
        let transforms = vec![ColumnTransform::default(); p];
        Self::with_metadata(y, columns, kinds, transforms, names)
    }

    pub fn with_metadata(
        y: Vec<f64>,
        columns: Vec<Vec<f64>>,
        kinds: Vec<VariableKind>,
        transforms: Vec<ColumnTransform>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        let p = columns.len();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        if kinds.len() != p || transforms.len() != p || names.len() != p {
            return Err(Error::Dimension(format!(
                "{p} columns but {} kinds, {} transforms, {} names",
                kinds.len(),
                transforms.len(),
                names.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("response contains non-finite values".into()));
        }
        for (j, (col, kind)) in columns.iter().zip(&kinds).enumerate() {
            if col.len() != n {
                return Err(Error::Dimension(format!(
                    "column {} has {} rows, response has {n}",
                    names[j],
                    col.len()
                )));
            }
            match kind {
                VariableKind::Continuous => {
                    if let Some(&bad) = col.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(Error::Domain { value: bad });
                    }
                }
                VariableKind::BinaryLinear => {
                    if let Some(&bad) = col.iter().find(|v| **v != 0.0 && **v != 1.0) {
                        return Err(Error::Config(format!(
                            "binary column {} contains {bad}",
                            names[j]
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            y,
            columns,
            kinds,
            transforms,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn kinds(&self) -> &[VariableKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> VariableKind {
        self.kinds[j]
    }

    pub fn transforms(&self) -> &[ColumnTransform] {
        &self.transforms
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n() as f64
    }

    /// Response minus its sample mean. All selection procedures work on
    /// this vector, which is equivalent to carrying an intercept alongside
    /// the centered sieve blocks.
    pub fn centered_y(&self) -> nalgebra::DVector<f64> {
        let mean = self.mean_y();
        nalgebra::DVector::from_iterator(self.n(), self.y.iter().map(|v| v - mean))
    }

    pub fn design_block(&self, j: usize, basis: &BasisConfig) -> Result<DesignBlock> {
        build_design_block(&self.columns[j], self.kinds[j], basis, j)
    }

    /// Keeps only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset::with_metadata(
            pick(&self.y),
            self.columns.iter().map(|c| pick(c)).collect(),
            self.kinds.clone(),
            self.transforms.clone(),
            self.names.clone(),
        )
    }

    /// Row `i` as a covariate vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}
