//! Selection metrics, forecast error and replication averages.

use nalgebra::DVector;
use serde::Serialize;

use crate::basis::DesignBlock;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regress::OlsFit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub fdr: f64,
    pub nv: usize,
    /// The selection equals the true signal set exactly.
    pub cs: bool,
}

/// Scores a selection indicator against known labels.
///
/// `FPR` counts every non-signal; `FDR` counts only `noise_set` and divides
/// by `NV + 1`.
pub fn selection_metrics(
    indicator: &[bool],
    true_signals: &[usize],
    noise_set: &[usize],
    p_n: usize,
) -> Result<SelectionMetrics> {
    if indicator.len() != p_n {
        return Err(Error::Dimension(format!(
            "indicator has {} entries, p_n = {p_n}",
            indicator.len()
        )));
    }
    if true_signals.is_empty() {
        return Err(Error::Empty("true signal set"));
    }
    if let Some(&j) = true_signals.iter().chain(noise_set).find(|&&j| j >= p_n) {
        return Err(Error::Dimension(format!("label {j} is outside 0..{p_n}")));
    }
    if noise_set.iter().any(|j| true_signals.contains(j)) {
        return Err(Error::Config("signal and noise sets overlap".into()));
    }
    let mut is_signal = vec![false; p_n];
    for &j in true_signals {
        is_signal[j] = true;
    }
    let nv = indicator.iter().filter(|&&s| s).count();
    let hits = true_signals.iter().filter(|&&j| indicator[j]).count();
    let false_hits = nv - hits;
    let non_signals = p_n - true_signals.len();
    let noise_hits = noise_set.iter().filter(|&&j| indicator[j]).count();
    let cs = hits == true_signals.len() && false_hits == 0;
    Ok(SelectionMetrics {
        tpr: hits as f64 / true_signals.len() as f64,
        fpr: if non_signals == 0 {
            0.0
        } else {
            false_hits as f64 / non_signals as f64
        },
        fdr: noise_hits as f64 / (nv as f64 + 1.0),
        nv,
        cs,
    })
}

/// Post-selection OLS fit ready to predict new rows.
#[derive(Debug, Clone)]
pub struct Forecaster {
    intercept: f64,
    blocks: Vec<DesignBlock>,
    coefficients: DVector<f64>,
}

impl Forecaster {
    /// `fit` must come from `post_selection_ols` on `blocks` in this order.
    pub fn new(blocks: Vec<DesignBlock>, fit: &OlsFit) -> Result<Self> {
        let width: usize = blocks.iter().map(|b| b.width()).sum();
        if width != fit.coefficients.len() {
            return Err(Error::Dimension(format!(
                "blocks have {width} columns, fit has {} coefficients",
                fit.coefficients.len()
            )));
        }
        Ok(Forecaster {
            intercept: fit.intercept,
            blocks,
            coefficients: fit.coefficients.clone(),
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// `(variable, sieve coefficients)` for each fitted block, in fit order.
    pub fn block_coefficients(&self) -> Vec<(usize, Vec<f64>)> {
        let mut offset = 0;
        self.blocks
            .iter()
            .map(|b| {
                let c = self.coefficients.rows(offset, b.width()).iter().copied().collect();
                offset += b.width();
                (b.variable_index(), c)
            })
            .collect()
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut yhat = DVector::from_element(data.n(), self.intercept);
        let mut offset = 0;
        for block in &self.blocks {
            let j = block.variable_index();
            if j >= data.p() {
                return Err(Error::Dimension(format!(
                    "forecast data has {} columns, model uses column {j}",
                    data.p()
                )));
            }
            let basis = block.evaluate(data.column(j))?;
            yhat += basis * self.coefficients.rows(offset, block.width());
            offset += block.width();
        }
        Ok(yhat.as_slice().to_vec())
    }
}

/// Root mean squared forecast error on a held-out sample.
pub fn frmse(model: &Forecaster, forecast: &Dataset) -> Result<f64> {
    let yhat = model.predict(forecast)?;
    let mse = yhat
        .iter()
        .zip(forecast.y())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / forecast.n() as f64;
    Ok(mse.sqrt())
}

/// Outcome of one replication of one procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub metrics: SelectionMetrics,
    /// Number of OCMT stages; absent for procedures without stages.
    pub step: Option<usize>,
    pub frmse: Option<f64>,
}

/// Column means over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub nv: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub fdr: f64,
    pub cs: f64,
    pub step: Option<f64>,
    pub frmse: Option<f64>,
    pub replications: usize,
}

/// Averages replication rows. `step` and `frmse` are averaged over the rows
/// that carry them and reported only when every row does.
pub fn aggregate(rows: &[ReplicationRow]) -> Result<ReplicationReport> {
    if rows.is_empty() {
        return Err(Error::Empty("no replications to aggregate"));
    }
    let count = rows.len() as f64;
    let mean = |f: &dyn Fn(&ReplicationRow) -> f64| rows.iter().map(f).sum::<f64>() / count;
    let optional_mean = |f: &dyn Fn(&ReplicationRow) -> Option<f64>| {
        rows.iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / count)
    };
    Ok(ReplicationReport {
        nv: mean(&|r| r.metrics.nv as f64),
        tpr: mean(&|r| r.metrics.tpr),
        fpr: mean(&|r| r.metrics.fpr),
        fdr: mean(&|r| r.metrics.fdr),
        cs: mean(&|r| if r.metrics.cs { 1.0 } else { 0.0 }),
        step: optional_mean(&|r| r.step.map(|s| s as f64)),
        frmse: optional_mean(&|r| r.frmse),
        replications: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisConfig, VariableKind};
    use crate::regress::post_selection_ols;
    use proptest::prelude::*;

    fn indicator(p: usize, selected: &[usize]) -> Vec<bool> {
        (0..p).map(|j| selected.contains(&j)).collect()
    }

    #[test]
    fn exact_selection() {
        let signals = [0, 1, 2, 3];
        let noise: Vec<usize> = (4..100).collect();
        let m = selection_metrics(&indicator(100, &signals), &signals, &noise, 100).unwrap();
        assert_eq!(
            m,
            SelectionMetrics {
                tpr: 1.0,
                fpr: 0.0,
                fdr: 0.0,
                nv: 4,
                cs: true
            }
        );
    }

    #[test]
    fn single_noise_selection_has_half_fdr() {
        let noise: Vec<usize> = (4..100).collect();
        let m = selection_metrics(&indicator(100, &[50]), &[0, 1, 2, 3], &noise, 100).unwrap();
        assert_eq!(m.fdr, 0.5);
        assert_eq!(m.fpr, 1.0 / 96.0);
        assert!(!m.cs);
    }

    #[test]
    fn empty_selection() {
        let noise: Vec<usize> = (4..100).collect();
        let m = selection_metrics(&[false; 100], &[0, 1, 2, 3], &noise, 100).unwrap();
        assert_eq!((m.tpr, m.fpr, m.fdr, m.nv), (0.0, 0.0, 0.0, 0));
    }

    #[test]
    fn pseudo_signals_count_in_fpr_only_when_excluded_from_noise() {
        // variables 4 and 5 are pseudo-signals, left out of the noise set
        let noise: Vec<usize> = (6..20).collect();
        let m = selection_metrics(&indicator(20, &[0, 1, 2, 3, 4]), &[0, 1, 2, 3], &noise, 20)
            .unwrap();
        assert_eq!(m.fdr, 0.0);
        assert_eq!(m.fpr, 1.0 / 16.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            selection_metrics(&[false; 5], &[], &[], 5),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            selection_metrics(&[false; 5], &[7], &[], 5),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            selection_metrics(&[false; 5], &[1], &[1], 5),
            Err(Error::Config(_))
        ));
    }

    fn row(nv: usize, cs: bool, step: Option<usize>) -> ReplicationRow {
        ReplicationRow {
            metrics: SelectionMetrics {
                tpr: 1.0,
                fpr: 0.0,
                fdr: 0.0,
                nv,
                cs,
            },
            step,
            frmse: Some(1.0),
        }
    }

    #[test]
    fn aggregate_examples() {
        let single = aggregate(&[row(4, true, Some(1))]).unwrap();
        assert_eq!(single.nv, 4.0);
        assert_eq!(single.cs, 1.0);
        assert_eq!(single.step, Some(1.0));
        let two = aggregate(&[row(4, true, Some(1)), row(5, false, Some(2))]).unwrap();
        assert_eq!(two.cs, 0.5);
        assert_eq!(two.step, Some(1.5));
        let mixed = aggregate(&[row(4, true, None), row(5, false, Some(2))]).unwrap();
        assert_eq!(mixed.step, None);
        assert!(matches!(aggregate(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn empty_selection_forecasts_training_mean() {
        let train = Dataset::new(
            vec![1.0, 2.0, 6.0],
            vec![vec![0.1, 0.5, 0.9]],
            vec![VariableKind::Continuous],
        )
        .unwrap();
        let fit = post_selection_ols(&[], &DVector::from_column_slice(train.y())).unwrap();
        let model = Forecaster::new(Vec::new(), &fit).unwrap();
        let test = Dataset::new(vec![0.0, 6.0], vec![vec![0.2, 0.3]], vec![VariableKind::Continuous])
            .unwrap();
        assert_eq!(model.predict(&test).unwrap(), vec![3.0, 3.0]);
        assert_eq!(frmse(&model, &test).unwrap(), 3.0);
    }

    #[test]
    fn forecaster_reproduces_in_sample_fit() {
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).fract()).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v).sin() + 2.0).collect();
        let data = Dataset::new(y, vec![x], vec![VariableKind::Continuous]).unwrap();
        let basis = BasisConfig::cubic(4).unwrap();
        let block = data.design_block(0, &basis).unwrap();
        let fit = post_selection_ols(&[&block], &DVector::from_column_slice(data.y())).unwrap();
        let model = Forecaster::new(vec![block], &fit).unwrap();
        let yhat = model.predict(&data).unwrap();
        for (i, v) in yhat.iter().enumerate() {
            assert!((v - (data.y()[i] - fit.residuals[i])).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn fdr_bounded_by_nv_share(sel in proptest::collection::vec(any::<bool>(), 30)) {
            let signals = [0, 1, 2];
            let noise: Vec<usize> = (3..30).collect();
            let m = selection_metrics(&sel, &signals, &noise, 30).unwrap();
            prop_assert!(m.fdr <= m.nv as f64 / (m.nv as f64 + 1.0) + 1e-15);
            let noise_picked = noise.iter().any(|&j| sel[j]);
            if !noise_picked {
                prop_assert_eq!(m.fdr, 0.0);
            }
            for v in [m.tpr, m.fpr, m.fdr] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn metrics_invariant_to_relabeling(
            sel in proptest::collection::vec(any::<bool>(), 20),
            perm in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let signals = [0, 1, 2, 3];
            let noise: Vec<usize> = (6..20).collect();
            let base = selection_metrics(&sel, &signals, &noise, 20).unwrap();
            let mut moved = vec![false; 20];
            for (j, &s) in sel.iter().enumerate() {
                moved[perm[j]] = s;
            }
            let signals2: Vec<usize> = signals.iter().map(|&j| perm[j]).collect();
            let noise2: Vec<usize> = noise.iter().map(|&j| perm[j]).collect();
            let other = selection_metrics(&moved, &signals2, &noise2, 20).unwrap();
            prop_assert_eq!(base, other);
        }

        #[test]
        fn aggregate_is_order_free(
            nvs in proptest::collection::vec(0usize..10, 1..12),
            perm_seed in any::<u64>(),
        ) {
            let rows: Vec<ReplicationRow> =
                nvs.iter().map(|&nv| row(nv, nv == 4, Some(1 + nv % 3))).collect();
            let mut shuffled = rows.clone();
            let k = (perm_seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = aggregate(&rows).unwrap();
            let b = aggregate(&shuffled).unwrap();
            prop_assert!((a.nv - b.nv).abs() < 1e-12);
            prop_assert!((a.cs - b.cs).abs() < 1e-12);
            prop_assert!((a.step.unwrap() - b.step.unwrap()).abs() < 1e-12);
        }
    }
}
